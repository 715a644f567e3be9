//! A matrix-free problem: the linear part and the Jacobian are only
//! available as products, and the Arnoldi evaluator never forms a matrix.
//!
//!     cargo run --example matrix_free

use std::f64::consts::PI;

use nalgebra::DVector;

use expode::driver::integrate;
use expode::model::OdeProblem;
use expode::options::OptionsSet;

/// Second difference with Dirichlet boundaries, applied without a matrix.
fn laplace(v: &DVector<f64>, dx: f64) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(n, |i, _| {
        let left = if i > 0 { v[i - 1] } else { 0.0 };
        let right = if i + 1 < n { v[i + 1] } else { 0.0 };
        (left - 2.0 * v[i] + right) / (dx * dx)
    })
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Allen–Cahn type reaction–diffusion: y' = ε·Δy + y − y³.
    let n = 100;
    let eps = 0.01;
    let dx = 1.0 / (n + 1) as f64;
    let y0 = DVector::from_fn(n, |i, _| 0.5 * (PI * (i + 1) as f64 * dx).sin());

    let problem = OdeProblem::builder(0.0, 2.0, y0)
        .name("allen-cahn")
        .rhs(move |_, y| laplace(y, dx) * eps + y - y.map(|u| u * u * u))
        .jacobian_v(move |_, y, v| laplace(v, dx) * eps + v - y.component_mul(&y.component_mul(v)) * 3.0)
        .lin_op_v(move |v| laplace(v, dx) * eps)
        .g_fcn(|_, y| y - y.map(|u| u * u * u))
        .build()?;

    for integrator in ["exprb", "exp4", "exprk"] {
        let mut options = OptionsSet::new()
            .set("Integrator", integrator)?
            .set("MatrixFunctions", "arnoldi")?
            .set("RelTol", 1e-5)?;
        options = if integrator == "exprk" {
            options.set("LinOpV", true)?.set("StepSize", 0.02)?
        } else {
            options.set("JacobianV", true)?
        };
        let sol = integrate(&problem, &options)?;
        let (t, y) = sol.last();
        println!(
            "{integrator:<6} t = {t}: max y = {:.6}, {} steps, {} Krylov matvecs",
            y.max(),
            sol.stats.n_steps,
            sol.stats.matfun.n_matvec
        );
    }
    Ok(())
}
