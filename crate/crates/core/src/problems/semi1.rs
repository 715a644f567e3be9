use nalgebra::{DMatrix, DVector};

use super::{check_grid, laplacian};
use crate::error::ExpodeError;
use crate::model::OdeProblem;
use crate::options::OptionsSet;

/// `u_t = u_xx + u² + f(t, x)` on (0, 1) with zero boundary values, central
/// differences on `n` interior points, over `t ∈ [0, 1]`.
///
/// `f` is chosen on the grid so that `y(t) = e^{−t}·w` with `wᵢ = xᵢ(1 − xᵢ)`
/// solves the semi-discrete system exactly:
/// `f(t) = −e^{−t}(w + A·w) − e^{−2t}w²`.
pub fn semi1(n: usize) -> Result<OdeProblem, ExpodeError> {
    check_grid(n)?;
    let (x, a) = laplacian(n);
    let w = DVector::from_iterator(n, x.iter().map(|x| x * (1.0 - x)));
    let aw = &a * &w;
    let w2 = w.component_mul(&w);
    let lin = &w + &aw;

    let forcing = {
        let (lin, w2) = (lin.clone(), w2.clone());
        move |t: f64| -(&lin * (-t).exp()) - &w2 * (-2.0 * t).exp()
    };
    let g = {
        let f = forcing.clone();
        move |t: f64, y: &DVector<f64>| y.component_mul(y) + f(t)
    };
    let rhs = {
        let (a, g) = (a.clone(), g.clone());
        move |t: f64, y: &DVector<f64>| &a * y + g(t, y)
    };
    let jac = {
        let a = a.clone();
        move |_: f64, y: &DVector<f64>| &a + DMatrix::from_diagonal(&(y * 2.0))
    };
    let df_dt = move |t: f64, _: &DVector<f64>| &lin * (-t).exp() + &w2 * (2.0 * (-2.0 * t).exp());
    let exact = {
        let w = w.clone();
        move |t: f64| &w * (-t).exp()
    };
    OdeProblem::builder(0.0, 1.0, w)
        .name("semi1")
        .rhs(rhs)
        .jacobian(jac)
        .lin_op(a)
        .g_fcn(g)
        .g_jacobian(|_, y: &DVector<f64>| DMatrix::from_diagonal(&(y * 2.0)))
        .df_dt(df_dt)
        .exact(exact)
        .options(OptionsSet::new().set("NonAutonomous", true)?)
        .build()
}
