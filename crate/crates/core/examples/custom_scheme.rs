//! User-defined exponential Runge–Kutta schemes.
//!
//! Coefficients are rows over φ₁, φ₂, …: `[1.0, -1.0]` stands for φ₁ − φ₂.
//!
//!     cargo run --example custom_scheme

use std::collections::BTreeMap;

use expode::driver::integrate;
use expode::error::ExpodeError;
use expode::integrators::scheme::{fixed_scheme_handle, rk_scheme_build, scheme_handle, StageEdit};
use expode::integrators::RkScheme;
use expode::options::OptionValue;
use expode::problems::semi1;

/// The two-stage family with node `c₂ = c`, order two for every `c > 0`.
fn two_stage(c: f64) -> Result<RkScheme, ExpodeError> {
    rk_scheme_build(
        2,
        &[
            StageEdit::C(vec![0.0, c]),
            StageEdit::A { i: 2, j: 1, row: vec![c] },
            StageEdit::B { i: 1, row: vec![1.0, -1.0 / c] },
            StageEdit::B { i: 2, row: vec![0.0, 1.0 / c] },
        ],
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = semi1(40)?;
    let exact = problem.exact(problem.t_end())?;
    let error = |scheme: OptionValue, params: Option<OptionValue>, h: f64| -> Result<f64, Box<dyn std::error::Error>> {
        let mut o = problem
            .recommended_options()
            .clone()
            .set("Integrator", "exprk")?
            .set("StepSize", h)?
            .set("Scheme", scheme)?;
        if let Some(p) = params {
            o = o.set("Parameters", p)?;
        }
        let sol = integrate(&problem, &o)?;
        Ok((sol.last().1 - &exact).amax())
    };

    // A fixed scheme.
    let scheme = two_stage(0.5)?.named("midpoint");
    scheme.validate()?;
    println!("{} has {} stages, nodes {:?}", scheme.name(), scheme.stages(), scheme.c());
    let handle = OptionValue::Handle(fixed_scheme_handle(scheme));
    let (e1, e2) = (error(handle.clone(), None, 0.05)?, error(handle, None, 0.025)?);
    println!("  errors {e1:.3e} {e2:.3e}, observed order {:.2}", (e1 / e2).log2());

    // A scheme family read from the Parameters option.
    let family = OptionValue::Handle(scheme_handle("two_stage", |params: &OptionValue| {
        let c = match params {
            OptionValue::Struct(m) => m.get("c").and_then(OptionValue::as_scalar).unwrap_or(1.0),
            _ => 1.0,
        };
        two_stage(c)
    }));
    for c in [0.25, 1.0] {
        let params = OptionValue::Struct(BTreeMap::from([("c".to_string(), OptionValue::from(c))]));
        let e = error(family.clone(), Some(params), 0.025)?;
        println!("two_stage c = {c}: error {e:.3e}");
    }

    // Inconsistent weights are rejected before the run starts.
    let broken = rk_scheme_build(1, &[StageEdit::B { i: 1, row: vec![0.5] }])?;
    println!("broken scheme: {}", broken.validate().unwrap_err());
    Ok(())
}
