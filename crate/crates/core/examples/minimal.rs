//! The two-dimensional stiff example with every integrator class.
//!
//!     cargo run --example minimal

use expode::driver::integrate;
use expode::options::OptionsSet;
use expode::problems::minimal_example;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = minimal_example()?;

    let reference = integrate(
        &problem,
        &OptionsSet::new()
            .set("Integrator", "exprk")?
            .set("StepSize", 1e-4)?,
    )?;
    let (_, y_ref) = reference.last();
    println!("reference y(1) = [{:.12}, {:.12}]", y_ref[0], y_ref[1]);

    let runs: [(&str, &[(&str, f64)]); 5] = [
        ("exprk", &[("StepSize", 0.05)]),
        ("exprb", &[]),
        ("expmssemi", &[("StepSize", 0.05), ("kStep", 3.0)]),
        ("expms", &[("StepSize", 0.05), ("kStep", 2.0)]),
        ("exp4", &[]),
    ];
    for (name, extra) in runs {
        let mut options = OptionsSet::new().set("Integrator", name)?.set("RelTol", 1e-6)?;
        for (k, v) in extra {
            options = options.set(k, *v)?;
        }
        let sol = integrate(&problem, &options)?;
        let (_, y) = sol.last();
        println!(
            "{name:<10} steps {:>4}  error {:.2e}",
            sol.stats.n_steps,
            (y - y_ref).amax()
        );
    }
    Ok(())
}
