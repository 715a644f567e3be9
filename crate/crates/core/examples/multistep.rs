//! Exponential multistep methods on a constant step grid, with their
//! observed convergence order.
//!
//!     cargo run --example multistep

use expode::driver::integrate;
use expode::problems::semi1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = semi1(50)?;
    let exact = problem.exact(problem.t_end())?;
    let hs = [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0, 1.0 / 160.0];

    for (integrator, k) in [("expmssemi", 1), ("expmssemi", 2), ("expmssemi", 3), ("expms", 1), ("expms", 2), ("expms", 3)] {
        let mut errors = Vec::new();
        for h in hs {
            let options = problem
                .recommended_options()
                .clone()
                .set("Integrator", integrator)?
                .set("kStep", k)?
                .set("StartupSteps", 2)?
                .set("StepSize", h)?;
            let sol = integrate(&problem, &options)?;
            errors.push((sol.last().1 - &exact).amax());
        }
        let orders: Vec<String> = errors.windows(2).map(|w| format!("{:.2}", (w[0] / w[1]).log2())).collect();
        println!(
            "{integrator:<9} k = {k}: error at h = 1/160 {:.2e}, orders {}",
            errors[errors.len() - 1],
            orders.join(" ")
        );
    }
    Ok(())
}
