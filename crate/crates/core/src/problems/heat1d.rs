use std::f64::consts::PI;

use nalgebra::DVector;

use super::{check_grid, laplacian};
use crate::error::ExpodeError;
use crate::model::OdeProblem;
use crate::options::OptionsSet;

/// `u_t = ε·u_xx + γ·s(t, x)` on (0, 1) with zero boundary values, central
/// differences on `n` interior points, `u(0, x) = sin(πx)` and the source
/// `s(t, x) = (1 + sin(2πt))·x(1 − x)`, over `t ∈ [0, 1]`.
///
/// For `γ = 0` the initial value is a discrete eigenmode, so the exact
/// solution `e^{−εμt}·sin(πx)` with `μ = 2(1 − cos(πΔx))/Δx²` is attached.
pub fn heat1d(epsilon: f64, gamma: f64, n: usize) -> Result<OdeProblem, ExpodeError> {
    check_grid(n)?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(ExpodeError::InvalidProblem(format!("epsilon must be positive, got {epsilon}")));
    }
    let (x, a) = laplacian(n);
    let a = a * epsilon;
    let profile = DVector::from_iterator(n, x.iter().map(|x| x * (1.0 - x)));
    let y0 = DVector::from_iterator(n, x.iter().map(|x| (PI * x).sin()));

    let g = {
        let p = profile.clone();
        move |t: f64, _: &DVector<f64>| &p * (gamma * (1.0 + (2.0 * PI * t).sin()))
    };
    let rhs = {
        let (a, g) = (a.clone(), g.clone());
        move |t: f64, y: &DVector<f64>| &a * y + g(t, y)
    };
    let dgdt = {
        let p = profile.clone();
        move |t: f64, _: &DVector<f64>| &p * (gamma * 2.0 * PI * (2.0 * PI * t).cos())
    };
    let jac = {
        let a = a.clone();
        move |_: f64, _: &DVector<f64>| a.clone()
    };
    let mut b = OdeProblem::builder(0.0, 1.0, y0.clone())
        .name("heat1d")
        .rhs(rhs)
        .jacobian(jac)
        .lin_op(a)
        .g_fcn(g)
        .g_jacobian(move |_, _| nalgebra::DMatrix::zeros(n, n))
        .df_dt(dgdt)
        .options(OptionsSet::new().set("NonAutonomous", true)?);
    if gamma == 0.0 {
        let dx = 1.0 / (n + 1) as f64;
        let mu = 2.0 * (1.0 - (PI * dx).cos()) / (dx * dx);
        b = b.exact(move |t| &y0 * (-epsilon * mu * t).exp());
    }
    b.build()
}
