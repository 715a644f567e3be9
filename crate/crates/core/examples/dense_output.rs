//! Dense output: Hermite interpolation between steps, the exp4 formula,
//! refinement of the output grid and requested output times.
//!
//!     cargo run --example dense_output

use expode::driver::{dense_eval, integrate, refine_output};
use expode::problems::semi1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = semi1(30)?;
    let base = problem.recommended_options().clone().set("RelTol", 1e-6)?.set("AbsTol", 1e-8)?;
    let queries: Vec<f64> = (0..=8).map(|i| 0.05 + 0.11 * i as f64).collect();

    for (integrator, generator) in [("exprb", "hermite"), ("exp4", "exp4")] {
        let options = base.clone().set("Integrator", integrator)?.set("DOGenerator", generator)?;
        let sol = integrate(&problem, &options)?;
        let (ys, _) = dense_eval(&sol, &queries)?;
        let worst = queries
            .iter()
            .zip(&ys)
            .map(|(&t, y)| (y - problem.exact(t).unwrap()).amax())
            .fold(0.0, f64::max);
        println!(
            "{integrator}/{generator}: {} steps, largest interpolation error {worst:.2e}",
            sol.stats.n_steps
        );

        let fine = refine_output(&sol, 4)?;
        println!("  Refine = 4: {} output points instead of {}", fine.len(), sol.len());
    }

    // Output at prescribed times: one-step methods without a generator step
    // onto them exactly.
    let at = problem.clone().with_output_times(vec![0.0, 0.25, 0.5, 0.75, 1.0])?;
    let sol = integrate(&at, &base)?;
    for (t, y) in sol.t.iter().zip(&sol.y) {
        println!("t = {t:.2}  y[15] = {:.10}", y[15]);
    }
    Ok(())
}
