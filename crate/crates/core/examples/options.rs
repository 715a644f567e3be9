//! The options registry: help texts, type checking, validation and options
//! files.
//!
//!     cargo run --example options

use expode::options::{self, parse_options_file, OptionsSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{}", options::info("exprb", Some("AbsTol"))?);

    // Every value is checked against the option's type on insertion.
    for (name, value) in [("MinStep", "-1"), ("Order", "5"), ("MatrixFunctions", "magic")] {
        let v = options::parse_value(value)?;
        match OptionsSet::new().set(name, v) {
            Ok(_) => println!("{name} = {value}: accepted"),
            Err(e) => println!("{name} = {value}: {e}"),
        }
    }

    // Options that belong to another integrator are caught by validation.
    let set = OptionsSet::new().set("Integrator", "exp4")?.set("kStep", 3)?;
    println!("validate: {}", set.validate().unwrap_err());

    let text = "\
# tolerances
RelTol = 1e-5
AbsTol = [1e-8, 1e-6]
Integrator = exprk
Scheme = krogstad
StepSize = 0.01
";
    let mut set = OptionsSet::new();
    for (name, value) in parse_options_file(text)? {
        set.set_mut(&name, value)?;
    }
    let normalized = set.validate()?;
    println!(
        "from file: {} with scheme {}, h = {}",
        normalized.integrator().long_name(),
        normalized.list_name("Scheme").unwrap_or_default(),
        normalized.scalar("InitialStep").unwrap_or(f64::NAN)
    );
    Ok(())
}
