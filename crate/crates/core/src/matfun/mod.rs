//! Matrix-function evaluators: products `Σₘ cₘ φₖₘ(sₘ·h·M)·v` for the
//! operator `M` of the current step (the Jacobian or the linear part).
//!
//! An integrator declares its kernels (the job functions) and, per flag, the
//! coefficient rows combining them. The driver then drives the evaluator
//! through `init → register_jobs → (init_step → evaluate*)* → cleanup`.

mod direct;
mod eig;
mod krylov;

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

pub use direct::DirectEvaluator;
pub use krylov::{KrylovConfig, KrylovEvaluator};

use crate::error::{CallbackError, MatFunError};
use crate::model::{MatFunStats, State};
use crate::options::FunctionHandle;
use crate::phi::{PhiFn, MAX_PHI_INDEX};

/// The integrator's kernel list plus one coefficient matrix per flag.
///
/// Row `r` of flag `f` asks for `Σₘ rows[r][m]·functions[m](h·M)·v`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JobTable {
    functions: Vec<PhiFn>,
    jobs: BTreeMap<String, Vec<Vec<f64>>>,
}

impl JobTable {
    pub fn new(functions: Vec<PhiFn>) -> Self {
        Self {
            functions,
            jobs: BTreeMap::new(),
        }
    }

    /// Adds or replaces the coefficient rows of `flag`.
    pub fn job(mut self, flag: impl Into<String>, rows: Vec<Vec<f64>>) -> Self {
        self.jobs.insert(flag.into(), rows);
        self
    }

    pub fn functions(&self) -> &[PhiFn] {
        &self.functions
    }

    pub fn rows(&self, flag: &str) -> Option<&[Vec<f64>]> {
        self.jobs.get(flag).map(Vec::as_slice)
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.jobs.keys().map(String::as_str)
    }

    pub fn validate(&self) -> Result<(), MatFunError> {
        if self.jobs.is_empty() || self.functions.is_empty() {
            return Err(MatFunError::EmptyJobTable);
        }
        if let Some(f) = self.functions.iter().find(|f| f.k > MAX_PHI_INDEX) {
            return Err(MatFunError::Incompatible(format!(
                "job function {f} exceeds the largest supported index {MAX_PHI_INDEX}"
            )));
        }
        for (flag, rows) in &self.jobs {
            if rows.is_empty() {
                return Err(MatFunError::EmptyJob(flag.clone()));
            }
            for row in rows {
                if row.len() != self.functions.len() {
                    return Err(MatFunError::WidthMismatch {
                        flag: flag.clone(),
                        expected: self.functions.len(),
                        found: row.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn lookup(&self, flag: &str) -> Result<&[Vec<f64>], MatFunError> {
        self.rows(flag).ok_or_else(|| MatFunError::UnknownFlag(flag.to_string()))
    }
}

/// What the evaluator needs from the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvaluatorCaps {
    /// The operator must be available as a dense matrix.
    pub need_jac_explicit: bool,
    /// Likewise for the Jacobian of g when it is assembled separately.
    pub need_gjac_explicit: bool,
}

/// Run-level information handed to [`MatFunEvaluator::init`].
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatorEnv {
    pub dim: usize,
    /// Whether the integrator can provide the operator as a dense matrix.
    pub dense_available: bool,
    /// Smallest absolute tolerance component.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Zero-based component monitored for Krylov convergence.
    pub test_index: usize,
}

/// The operator `M` whose functions are evaluated.
pub trait LinearOperator<S: State> {
    fn dim(&self) -> usize;

    fn apply(&self, v: &DVector<S>) -> Result<DVector<S>, MatFunError>;

    /// The dense matrix, when available.
    fn dense(&self) -> Option<&DMatrix<S>>;

    /// Identifies the operator value; equal keys mean equal matrices.
    fn key(&self) -> u64;
}

static NEXT_KEY: AtomicU64 = AtomicU64::new(1);

fn next_key() -> u64 {
    NEXT_KEY.fetch_add(1, Ordering::Relaxed)
}

/// A dense operator.
pub struct DenseOperator<S: State> {
    m: DMatrix<S>,
    key: u64,
}

impl<S: State> DenseOperator<S> {
    pub fn new(m: DMatrix<S>) -> Self {
        Self { m, key: next_key() }
    }
}

impl<S: State> LinearOperator<S> for DenseOperator<S> {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply(&self, v: &DVector<S>) -> Result<DVector<S>, MatFunError> {
        Ok(&self.m * v)
    }

    fn dense(&self) -> Option<&DMatrix<S>> {
        Some(&self.m)
    }

    fn key(&self) -> u64 {
        self.key
    }
}

type ApplyFn<S> = Box<dyn Fn(&DVector<S>) -> Result<DVector<S>, CallbackError>>;

/// A matrix-free operator given by its action.
pub struct FnOperator<S: State> {
    dim: usize,
    f: ApplyFn<S>,
    key: u64,
}

impl<S: State> FnOperator<S> {
    pub fn new(dim: usize, f: impl Fn(&DVector<S>) -> Result<DVector<S>, CallbackError> + 'static) -> Self {
        Self {
            dim,
            f: Box::new(f),
            key: next_key(),
        }
    }
}

impl<S: State> LinearOperator<S> for FnOperator<S> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &DVector<S>) -> Result<DVector<S>, MatFunError> {
        let r = (self.f)(v).map_err(|e| MatFunError::Operator(e.to_string()))?;
        if r.len() != self.dim {
            return Err(MatFunError::Operator(format!(
                "operator returned {} entries, expected {}",
                r.len(),
                self.dim
            )));
        }
        Ok(r)
    }

    fn dense(&self) -> Option<&DMatrix<S>> {
        None
    }

    fn key(&self) -> u64 {
        self.key
    }
}

/// The evaluator protocol.
///
/// `evaluate` returns an `n × (rows·facs)` matrix: column `r·facs + (j−1)`
/// holds row `r` of the flag's job evaluated with step `j·h`, for
/// `j = 1..=facs`.
pub trait MatFunEvaluator<S: State> {
    /// Called once per integration, before anything else.
    fn init(&mut self, env: &EvaluatorEnv) -> Result<EvaluatorCaps, MatFunError>;

    /// Installs the job table, replacing any previous one.
    fn register_jobs(&mut self, jobs: &JobTable) -> Result<(), MatFunError>;

    /// Prepares evaluations with the operator `op` and step `h` at `(t, y)`.
    fn init_step(
        &mut self,
        op: Rc<dyn LinearOperator<S>>,
        t: f64,
        y: &DVector<S>,
        h: f64,
    ) -> Result<(), MatFunError>;

    /// Evaluates the job `flag` on `v`. With `reusable` the evaluator may keep
    /// state for this flag; `reuse` signals that `v` and the operator are
    /// unchanged since the last reusable call (typically a retried step).
    fn evaluate(
        &mut self,
        flag: &str,
        v: &DVector<S>,
        reusable: bool,
        reuse: bool,
        facs: usize,
    ) -> Result<DMatrix<S>, MatFunError>;

    /// Drops all per-run state. Calling it twice is harmless.
    fn cleanup(&mut self);

    /// Completes "Matrix functions evaluated %s.".
    fn description(&self) -> String;

    fn statistics(&self) -> MatFunStats;
}

/// Constructor stored in a `MatrixFunctions` function-handle option.
pub type EvaluatorFactory<S> = Arc<dyn Fn() -> Box<dyn MatFunEvaluator<S>> + Send + Sync>;

/// Wraps a custom evaluator constructor as a `MatrixFunctions` option value.
pub fn evaluator_handle<S: State>(
    name: &str,
    factory: impl Fn() -> Box<dyn MatFunEvaluator<S>> + Send + Sync + 'static,
) -> FunctionHandle {
    let f: EvaluatorFactory<S> = Arc::new(factory);
    FunctionHandle::new(name, f)
}

/// Scalar kernel values `φ(j·h·λᵢ)` for every eigenvalue, kernel and factor,
/// combined into the coefficient per column.
pub(crate) fn column_weights(
    functions: &[PhiFn],
    rows: &[Vec<f64>],
    facs: usize,
    h: f64,
    lambda: &[num_complex::Complex64],
) -> Vec<Vec<num_complex::Complex64>> {
    use num_complex::Complex64;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); lambda.len()]; rows.len() * facs];
    for j in 1..=facs {
        let hj = h * j as f64;
        for (i, &l) in lambda.iter().enumerate() {
            let kern = crate::phi::eval_kernels(functions, l * hj);
            for (r, row) in rows.iter().enumerate() {
                let w: Complex64 = row
                    .iter()
                    .zip(&kern)
                    .filter(|(c, _)| **c != 0.0)
                    .map(|(c, k)| k * *c)
                    .sum();
                out[r * facs + j - 1][i] = w;
            }
        }
    }
    out
}

/// The combination Σₘ rows[r][m]·φₖₘ(0) for h = 0.
pub(crate) fn weights_at_zero(functions: &[PhiFn], rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|row| {
            row.iter()
                .zip(functions)
                .map(|(c, f)| c * crate::phi::inv_factorial(f.k))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_table_validation() {
        let f = vec![PhiFn::unit(1), PhiFn::unit(2)];
        assert_eq!(JobTable::new(f.clone()).validate(), Err(MatFunError::EmptyJobTable));
        let t = JobTable::new(f.clone()).job("F", vec![vec![1.0, 0.0, 0.0]]);
        assert!(matches!(t.validate(), Err(MatFunError::WidthMismatch { .. })));
        let t = JobTable::new(f.clone()).job("F", vec![]);
        assert!(matches!(t.validate(), Err(MatFunError::EmptyJob(_))));
        let t = JobTable::new(f).job("F", vec![vec![1.0, 0.0]]);
        assert!(t.validate().is_ok());
        assert!(matches!(t.lookup("G"), Err(MatFunError::UnknownFlag(_))));
    }
}
