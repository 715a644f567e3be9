//! The integrator classes and the context they step in.
//!
//! Every integrator declares its metadata ([`IntegratorSetup`]), registers its
//! matrix-function jobs in [`Integrator::start`], and advances the solution
//! one step at a time through [`Integrator::step`]. All evaluations of the
//! problem go through the [`StepContext`], which counts them and caches the
//! right-hand side at the current point.

mod context;
mod exp4;
mod expms;
mod exprb;
mod exprk;
pub mod scheme;

use nalgebra::DVector;

pub use context::{HistEntry, History, StepContext};
pub use exp4::Exp4;
pub(crate) use exp4::exp4_dense;
pub use expms::{Expms, Expmssemi};
pub use exprb::{Exprb, ExprbOrder};
pub use exprk::Exprk;
pub use scheme::{RkScheme, SchemeFactory};

use crate::error::ExpodeError;
use crate::model::State;
use crate::options::{IntegratorKind, NormalizedOptions};
use crate::phi::PhiFn;

/// Which dense output an integrator produces by itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenseKind {
    None,
    Exp4,
}

/// Static facts about an integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSetup {
    pub name: String,
    pub order: usize,
    /// Exponent of the step-size controller: `h·err^(−1/error_order)`.
    pub error_order: usize,
    /// Number of history points the step formula uses.
    pub multi_step: usize,
    /// Works with a fixed linear part `A` rather than the Jacobian.
    pub semilin: bool,
    pub constant_step: bool,
    /// Whether the step returns an error estimate.
    pub error_estimate: bool,
    pub dense: DenseKind,
    pub job_functions: Vec<PhiFn>,
}

/// What one step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S: State> {
    pub y_new: DVector<S>,
    /// Local error estimate, if the method has one.
    pub err: Option<DVector<S>>,
    /// The step size actually taken.
    pub h_out: f64,
    /// Method-specific dense output vectors.
    pub dense: Option<Vec<DVector<S>>>,
}

/// An exponential integrator.
pub trait Integrator<S: State> {
    fn setup(&self) -> IntegratorSetup;

    /// Called once after the evaluator is initialized; registers jobs.
    fn start(&mut self, ctx: &mut StepContext<'_, S>) -> Result<(), ExpodeError>;

    /// Advances from `(t, y)` by `h`. `reuse` is true when the previous
    /// attempt from the same point was rejected.
    fn step(
        &mut self,
        ctx: &mut StepContext<'_, S>,
        t: f64,
        y: &DVector<S>,
        h: f64,
        reuse: bool,
    ) -> Result<StepResult<S>, ExpodeError>;
}

/// Builds the integrator selected by `options`.
pub fn build<S: State>(options: &NormalizedOptions) -> Result<Box<dyn Integrator<S>>, ExpodeError> {
    Ok(match options.integrator() {
        IntegratorKind::Exprk => Box::new(Exprk::from_options(options)?),
        IntegratorKind::Exprb => Box::new(Exprb::from_options(options)?),
        IntegratorKind::Expmssemi => Box::new(Expmssemi::from_options(options)?),
        IntegratorKind::Expms => Box::new(Expms::from_options(options)?),
        IntegratorKind::Exp4 => Box::new(Exp4::new()),
    })
}
