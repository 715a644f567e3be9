use nalgebra::{DMatrix, DVector};

use crate::error::ExpodeError;
use crate::model::OdeProblem;

/// A two-dimensional stiff problem, the smallest complete example.
///
/// ```text
/// y₁' = −100·y₁ + sin(y₂)
/// y₂' =   −1·y₂ + 0.1·y₁²
/// ```
/// on `t ∈ [0, 1]` with `y(0) = (1, 1)`.
pub fn minimal_example() -> Result<OdeProblem, ExpodeError> {
    // The stiff linear part: a diagonal matrix with eigenvalues −100 and −1.
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-100.0, -1.0]));

    // The mild nonlinearity g(t, y).
    let g = |_t: f64, y: &DVector<f64>| DVector::from_vec(vec![y[1].sin(), 0.1 * y[0] * y[0]]);

    // Its Jacobian, needed by the linearized integrators.
    let g_jac = |_t: f64, y: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[0.0, y[1].cos(), 0.2 * y[0], 0.0]);

    // The full right-hand side F = A·y + g and its Jacobian A + ∂g/∂y.
    let rhs = {
        let a = a.clone();
        move |t: f64, y: &DVector<f64>| &a * y + g(t, y)
    };
    let jac = {
        let a = a.clone();
        move |t: f64, y: &DVector<f64>| &a + g_jac(t, y)
    };

    OdeProblem::builder(0.0, 1.0, DVector::from_vec(vec![1.0, 1.0]))
        .name("minimal")
        .rhs(rhs)
        .jacobian(jac)
        .lin_op(a)
        .g_fcn(g)
        .g_jacobian(g_jac)
        .build()
}
