//! Heat equation with a time-dependent source, integrated with the default
//! adaptive exponential Rosenbrock method.
//!
//!     cargo run --example quick_start

use expode::driver::integrate;
use expode::options::OptionsSet;
use expode::problems::heat1d;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = heat1d(0.1, 0.1, 100)?;

    let options = problem
        .recommended_options()
        .clone()
        .set("RelTol", 1e-6)?
        .set("AbsTol", 1e-8)?
        .set("Stats", true)?;

    let sol = integrate(&problem, &options)?;

    let mid = problem.dim() / 2;
    println!("{:>10}  {:>14}", "t", "y(0.5)");
    let stride = (sol.len() / 10).max(1);
    for (i, (t, y)) in sol.t.iter().zip(&sol.y).enumerate() {
        if i % stride == 0 || i + 1 == sol.len() {
            println!("{t:>10.4}  {:>14.8}", y[mid]);
        }
    }
    println!("{} accepted steps, {} rejected", sol.stats.n_steps, sol.stats.n_rejected);

    // An empty set runs the same integrator with its defaults.
    let plain = integrate(&problem, &OptionsSet::new().set("NonAutonomous", true)?)?;
    println!("default tolerances: {} steps", plain.stats.n_steps);
    Ok(())
}
