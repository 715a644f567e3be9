//! Log channels and output functions.
//!
//! The same routing is available without code through the `EXPOKIT_LOG`
//! environment variable, e.g. `EXPOKIT_LOG=stepLog=stderr,statistics=stdout`.
//!
//!     cargo run --example logging

use std::sync::{Arc, Mutex};

use expode::driver::log::{Channel, LogConfig, Sink};
use expode::driver::{integrate_with_log, output_fcn_handle};
use expode::problems::heat1d;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = heat1d(0.1, 0.1, 40)?;

    let (config, lines) = LogConfig::buffer();
    let config = config.route(Channel::Statistics, Sink::Stdout);

    let seen = Arc::new(Mutex::new(Vec::new()));
    let record = seen.clone();
    let monitor = output_fcn_handle::<f64>("monitor", move |t, y| {
        record.lock().unwrap().push((t, y[0]));
        t >= 0.5
    });

    let options = problem
        .recommended_options()
        .clone()
        .set("Stats", true)?
        .set("StepStats", true)?
        .set("OutputFcn", monitor)?
        .set("OutputSel", vec![20.0])?;
    let sol = integrate_with_log(&problem, &options, &config)?;

    println!("stopped early: {} at t = {:.4}", sol.stopped, sol.last().0);
    println!("output function saw {} steps", seen.lock().unwrap().len());
    let lines = lines.lock().unwrap();
    println!("{} buffered log lines, first ones:", lines.len());
    for line in lines.iter().take(4) {
        println!("  {line}");
    }
    Ok(())
}
