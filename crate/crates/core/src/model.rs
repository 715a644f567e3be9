//! Problem description, evaluation counters and the solution container.

use std::fmt;
use std::sync::Arc;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CallbackError, ExpodeError};
use crate::options::{FunctionHandle, OptionsSet};

/// Scalar type of a state vector: `f64` or `Complex64`.
pub trait State: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    const IS_COMPLEX: bool;

    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;

    fn lift(x: f64) -> Self {
        Self::from_real(x)
    }
}

impl State for f64 {
    const IS_COMPLEX: bool = false;

    fn from_c64(z: Complex64) -> Self {
        z.re
    }

    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl State for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_c64(z: Complex64) -> Self {
        z
    }

    fn to_c64(self) -> Complex64 {
        self
    }
}

pub type CallbackResult<T> = Result<T, CallbackError>;

/// `F(t, y)` or `g(t, y)`.
pub type RhsFn<S> = Arc<dyn Fn(f64, &DVector<S>) -> CallbackResult<DVector<S>> + Send + Sync>;
/// `∂F/∂y (t, y)` as a dense matrix.
pub type JacobianFn<S> = Arc<dyn Fn(f64, &DVector<S>) -> CallbackResult<DMatrix<S>> + Send + Sync>;
/// `(t, y, v) ↦ ∂F/∂y (t, y) · v`.
pub type JacobianVFn<S> =
    Arc<dyn Fn(f64, &DVector<S>, &DVector<S>) -> CallbackResult<DVector<S>> + Send + Sync>;
/// Produces the linear part `A` of a semilinear problem.
pub type LinOpFn<S> = Arc<dyn Fn() -> CallbackResult<DMatrix<S>> + Send + Sync>;
/// `v ↦ A·v`.
pub type LinOpVFn<S> = Arc<dyn Fn(&DVector<S>) -> CallbackResult<DVector<S>> + Send + Sync>;
/// A function of time only, e.g. the exact solution.
pub type TimeFn<S> = Arc<dyn Fn(f64) -> CallbackResult<DVector<S>> + Send + Sync>;

/// How the linear part of a semilinear problem is given.
#[derive(Clone)]
pub enum LinOp<S: State> {
    Matrix(Arc<DMatrix<S>>),
    Fn(LinOpFn<S>),
}

/// Wraps an infallible right-hand side so it can be stored in an option
/// (`GFcn`) or problem.
pub fn rhs_fn<S: State>(f: impl Fn(f64, &DVector<S>) -> DVector<S> + Send + Sync + 'static) -> RhsFn<S> {
    Arc::new(move |t, y| Ok(f(t, y)))
}

pub fn jacobian_fn<S: State>(
    f: impl Fn(f64, &DVector<S>) -> DMatrix<S> + Send + Sync + 'static,
) -> JacobianFn<S> {
    Arc::new(move |t, y| Ok(f(t, y)))
}

pub fn jacobian_v_fn<S: State>(
    f: impl Fn(f64, &DVector<S>, &DVector<S>) -> DVector<S> + Send + Sync + 'static,
) -> JacobianVFn<S> {
    Arc::new(move |t, y, v| Ok(f(t, y, v)))
}

pub fn lin_op_v_fn<S: State>(f: impl Fn(&DVector<S>) -> DVector<S> + Send + Sync + 'static) -> LinOpVFn<S> {
    Arc::new(move |v| Ok(f(v)))
}

/// Function-handle option values for the callback-valued options
/// (`Jacobian`, `JacobianV`, `GJacobian`, `GJacobianV`, `GFcn`, `LinOp`,
/// `LinOpV`).
pub mod handles {
    use super::*;

    pub fn rhs<S: State>(name: &str, f: RhsFn<S>) -> FunctionHandle {
        FunctionHandle::new(name, f)
    }

    pub fn jacobian<S: State>(name: &str, f: JacobianFn<S>) -> FunctionHandle {
        FunctionHandle::new(name, f)
    }

    pub fn jacobian_v<S: State>(name: &str, f: JacobianVFn<S>) -> FunctionHandle {
        FunctionHandle::new(name, f)
    }

    pub fn lin_op<S: State>(name: &str, f: LinOpFn<S>) -> FunctionHandle {
        FunctionHandle::new(name, f)
    }

    pub fn lin_op_v<S: State>(name: &str, f: LinOpVFn<S>) -> FunctionHandle {
        FunctionHandle::new(name, f)
    }
}

/// An initial value problem `y' = F(t, y) = A y + g(t, y)` on `[t0, t_end]`.
///
/// Only `F` is mandatory (or `A` together with `g`); the other callbacks are
/// capabilities that individual integrators and matrix-function evaluators
/// may require. Problems are immutable once built and cheap to clone.
#[derive(Clone)]
pub struct OdeProblem<S: State = f64> {
    pub(crate) name: String,
    pub(crate) dim: usize,
    pub(crate) rhs: Option<RhsFn<S>>,
    pub(crate) jacobian: Option<JacobianFn<S>>,
    pub(crate) jacobian_v: Option<JacobianVFn<S>>,
    pub(crate) lin_op: Option<LinOp<S>>,
    pub(crate) lin_op_v: Option<LinOpVFn<S>>,
    pub(crate) g_fcn: Option<RhsFn<S>>,
    pub(crate) g_jacobian: Option<JacobianFn<S>>,
    pub(crate) g_jacobian_v: Option<JacobianVFn<S>>,
    pub(crate) df_dt: Option<RhsFn<S>>,
    pub(crate) exact: Option<TimeFn<S>>,
    pub(crate) t0: f64,
    pub(crate) t_end: f64,
    pub(crate) y0: DVector<S>,
    pub(crate) output_times: Option<Vec<f64>>,
    pub(crate) fd_jacobian: bool,
    pub(crate) options: OptionsSet,
}

impl<S: State> fmt::Debug for OdeProblem<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("rhs", &self.rhs.is_some())
            .field("jacobian", &self.jacobian.is_some())
            .field("jacobian_v", &self.jacobian_v.is_some())
            .field("lin_op", &self.lin_op.is_some())
            .field("lin_op_v", &self.lin_op_v.is_some())
            .field("g_fcn", &self.g_fcn.is_some())
            .field("df_dt", &self.df_dt.is_some())
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl<S: State> OdeProblem<S> {
    /// Starts a problem with initial value `y0` on `[t0, t_end]`.
    pub fn builder(t0: f64, t_end: f64, y0: DVector<S>) -> OdeProblemBuilder<S> {
        OdeProblemBuilder {
            problem: OdeProblem {
                name: "ode".into(),
                dim: y0.len(),
                rhs: None,
                jacobian: None,
                jacobian_v: None,
                lin_op: None,
                lin_op_v: None,
                g_fcn: None,
                g_jacobian: None,
                g_jacobian_v: None,
                df_dt: None,
                exact: None,
                t0,
                t_end,
                y0,
                output_times: None,
                fd_jacobian: false,
                options: OptionsSet::new(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn y0(&self) -> &DVector<S> {
        &self.y0
    }

    pub fn output_times(&self) -> Option<&[f64]> {
        self.output_times.as_deref()
    }

    /// Options recommended by the problem author; callers typically start
    /// from these and override.
    pub fn recommended_options(&self) -> &OptionsSet {
        &self.options
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_jacobian_v(&self) -> bool {
        self.jacobian_v.is_some()
    }

    pub fn has_lin_op(&self) -> bool {
        self.lin_op.is_some()
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn has_df_dt(&self) -> bool {
        self.df_dt.is_some()
    }

    pub fn fd_jacobian_enabled(&self) -> bool {
        self.fd_jacobian
    }

    /// The reference solution at `t`.
    pub fn exact(&self, t: f64) -> Result<DVector<S>, ExpodeError> {
        let f = self
            .exact
            .as_ref()
            .ok_or_else(|| ExpodeError::NoExactSolution(self.name.clone()))?;
        let y = f(t).map_err(|source| ExpodeError::Callback {
            flag: "exact",
            t,
            source,
        })?;
        check_len("exact solution", self.dim, y.len())?;
        Ok(y)
    }

    /// The same problem on another interval, e.g. `tspan` from the command line.
    pub fn with_tspan(mut self, t0: f64, t_end: f64) -> Result<Self, ExpodeError> {
        self.t0 = t0;
        self.t_end = t_end;
        self.output_times = None;
        self.validate()?;
        Ok(self)
    }

    /// The same problem with a dense-output request grid.
    pub fn with_output_times(mut self, times: Vec<f64>) -> Result<Self, ExpodeError> {
        if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
            self.t0 = first;
            self.t_end = last;
        }
        self.output_times = Some(times);
        self.validate()?;
        Ok(self)
    }

    pub fn with_y0(mut self, y0: DVector<S>) -> Result<Self, ExpodeError> {
        check_len("y0", self.dim, y0.len())?;
        self.y0 = y0;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ExpodeError> {
        if self.dim == 0 {
            return Err(ExpodeError::InvalidProblem("dimension must be at least 1".into()));
        }
        if !(self.t0.is_finite() && self.t_end.is_finite()) || self.t0 == self.t_end {
            return Err(ExpodeError::InvalidProblem(format!(
                "integration interval [{}, {}] must be finite with t0 != t_end",
                self.t0, self.t_end
            )));
        }
        if self.rhs.is_none() && (self.g_fcn.is_none() || self.lin_op.is_none() && self.lin_op_v.is_none()) {
            return Err(ExpodeError::InvalidProblem(
                "a right-hand side F, or a linear part A together with g, is required".into(),
            ));
        }
        if let Some(times) = &self.output_times {
            if times.len() < 2 {
                return Err(ExpodeError::InvalidProblem("output_times needs at least two entries".into()));
            }
            let dir = (self.t_end - self.t0).signum();
            if times.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
                return Err(ExpodeError::InvalidProblem(
                    "output_times must be strictly monotone".into(),
                ));
            }
            if times[0] != self.t0 {
                return Err(ExpodeError::InvalidProblem("output_times must start at t0".into()));
            }
        }
        if let Some(LinOp::Matrix(a)) = &self.lin_op {
            if a.nrows() != self.dim || a.ncols() != self.dim {
                return Err(ExpodeError::InvalidProblem(format!(
                    "linear part is {}x{}, expected {}x{}",
                    a.nrows(),
                    a.ncols(),
                    self.dim,
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// Builder for [`OdeProblem`].
pub struct OdeProblemBuilder<S: State> {
    problem: OdeProblem<S>,
}

impl<S: State> OdeProblemBuilder<S> {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.problem.name = name.into();
        self
    }

    pub fn rhs(mut self, f: impl Fn(f64, &DVector<S>) -> DVector<S> + Send + Sync + 'static) -> Self {
        self.problem.rhs = Some(rhs_fn(f));
        self
    }

    /// A right-hand side that can fail; errors propagate out of the integration.
    pub fn try_rhs(
        mut self,
        f: impl Fn(f64, &DVector<S>) -> CallbackResult<DVector<S>> + Send + Sync + 'static,
    ) -> Self {
        self.problem.rhs = Some(Arc::new(f));
        self
    }

    pub fn jacobian(mut self, f: impl Fn(f64, &DVector<S>) -> DMatrix<S> + Send + Sync + 'static) -> Self {
        self.problem.jacobian = Some(jacobian_fn(f));
        self
    }

    pub fn jacobian_v(
        mut self,
        f: impl Fn(f64, &DVector<S>, &DVector<S>) -> DVector<S> + Send + Sync + 'static,
    ) -> Self {
        self.problem.jacobian_v = Some(jacobian_v_fn(f));
        self
    }

    pub fn lin_op(mut self, a: DMatrix<S>) -> Self {
        self.problem.lin_op = Some(LinOp::Matrix(Arc::new(a)));
        self
    }

    pub fn lin_op_fn(mut self, f: impl Fn() -> DMatrix<S> + Send + Sync + 'static) -> Self {
        self.problem.lin_op = Some(LinOp::Fn(Arc::new(move || Ok(f()))));
        self
    }

    pub fn lin_op_v(mut self, f: impl Fn(&DVector<S>) -> DVector<S> + Send + Sync + 'static) -> Self {
        self.problem.lin_op_v = Some(lin_op_v_fn(f));
        self
    }

    pub fn g_fcn(mut self, f: impl Fn(f64, &DVector<S>) -> DVector<S> + Send + Sync + 'static) -> Self {
        self.problem.g_fcn = Some(rhs_fn(f));
        self
    }

    pub fn g_jacobian(mut self, f: impl Fn(f64, &DVector<S>) -> DMatrix<S> + Send + Sync + 'static) -> Self {
        self.problem.g_jacobian = Some(jacobian_fn(f));
        self
    }

    pub fn g_jacobian_v(
        mut self,
        f: impl Fn(f64, &DVector<S>, &DVector<S>) -> DVector<S> + Send + Sync + 'static,
    ) -> Self {
        self.problem.g_jacobian_v = Some(jacobian_v_fn(f));
        self
    }

    /// `∂F/∂t`, used by the linearized integrators when `NonAutonomous` is on.
    pub fn df_dt(mut self, f: impl Fn(f64, &DVector<S>) -> DVector<S> + Send + Sync + 'static) -> Self {
        self.problem.df_dt = Some(rhs_fn(f));
        self
    }

    pub fn exact(mut self, f: impl Fn(f64) -> DVector<S> + Send + Sync + 'static) -> Self {
        self.problem.exact = Some(Arc::new(move |t| Ok(f(t))));
        self
    }

    /// Request the solution at these times instead of the step grid. The
    /// first entry must equal `t0`; the last becomes `t_end`.
    pub fn output_times(mut self, times: Vec<f64>) -> Self {
        if let Some(&last) = times.last() {
            self.problem.t_end = last;
        }
        self.problem.output_times = Some(times);
        self
    }

    /// Allow finite-difference Jacobians when no Jacobian callback exists.
    pub fn fd_jacobian(mut self, on: bool) -> Self {
        self.problem.fd_jacobian = on;
        self
    }

    /// Options recommended for this problem.
    pub fn options(mut self, options: OptionsSet) -> Self {
        self.problem.options = options;
        self
    }

    pub fn build(self) -> Result<OdeProblem<S>, ExpodeError> {
        self.problem.validate()?;
        Ok(self.problem)
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ExpodeError> {
    if expected == found {
        Ok(())
    } else {
        Err(ExpodeError::DimensionMismatch { what, expected, found })
    }
}

/// Counters for one integration run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatsCounters {
    pub n_steps: usize,
    pub n_rejected: usize,
    pub n_rhs_evals: usize,
    pub n_g_evals: usize,
    pub n_jac_evals: usize,
    pub n_linop_evals: usize,
    pub matfun: MatFunStats,
}

impl fmt::Display for StatsCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} successful steps", self.n_steps)?;
        writeln!(f, "{} failed attempts", self.n_rejected)?;
        writeln!(f, "{} function evaluations", self.n_rhs_evals)?;
        if self.n_g_evals > 0 {
            writeln!(f, "{} evaluations of the nonlinear part", self.n_g_evals)?;
        }
        writeln!(f, "{} Jacobian evaluations", self.n_jac_evals)?;
        if self.n_linop_evals > 0 {
            writeln!(f, "{} linear operator evaluations", self.n_linop_evals)?;
        }
        write!(f, "{}", self.matfun)
    }
}

/// Per-flag matrix-function counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagStats {
    pub calls: usize,
    pub reused: usize,
    pub krylov_dim_total: usize,
    pub krylov_dim_max: usize,
}

/// Matrix-function evaluator counters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatFunStats {
    /// Diagonalizations (direct evaluator).
    pub n_diag: usize,
    /// Matrix-function evaluations, one per `evaluate` call.
    pub n_mfev: usize,
    /// Operator-vector products (Krylov evaluator).
    pub n_matvec: usize,
    pub per_flag: std::collections::BTreeMap<String, FlagStats>,
}

impl MatFunStats {
    pub fn flag_mut(&mut self, flag: &str) -> &mut FlagStats {
        self.per_flag.entry(flag.to_string()).or_default()
    }
}

impl fmt::Display for MatFunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} matrix function evaluations", self.n_mfev)?;
        writeln!(f, "{} diagonalizations", self.n_diag)?;
        if self.n_matvec > 0 {
            writeln!(f, "{} operator-vector products", self.n_matvec)?;
        }
        for (flag, s) in &self.per_flag {
            write!(f, "  {flag}: {} evaluations, {} reused", s.calls, s.reused)?;
            if s.krylov_dim_total > 0 {
                let mean = s.krylov_dim_total as f64 / s.calls.max(1) as f64;
                write!(f, ", Krylov dimension mean {mean:.1} max {}", s.krylov_dim_max)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Evaluates the problem's callbacks with dimension checks and counting.
pub struct ProblemEval<'a, S: State> {
    problem: &'a OdeProblem<S>,
    pub(crate) counters: StatsCounters,
}

impl<'a, S: State> ProblemEval<'a, S> {
    pub fn new(problem: &'a OdeProblem<S>) -> Self {
        Self {
            problem,
            counters: StatsCounters::default(),
        }
    }

    pub fn problem(&self) -> &'a OdeProblem<S> {
        self.problem
    }

    pub fn counters(&self) -> &StatsCounters {
        &self.counters
    }

    pub fn counters_mut(&mut self) -> &mut StatsCounters {
        &mut self.counters
    }

    fn check_y(&self, y: &DVector<S>) -> Result<(), ExpodeError> {
        check_len("state vector", self.problem.dim, y.len())
    }

    /// `F(t, y)`.
    pub fn eval_rhs(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        self.check_y(y)?;
        let f = match &self.problem.rhs {
            Some(rhs) => {
                self.counters.n_rhs_evals += 1;
                rhs(t, y).map_err(|source| ExpodeError::Callback { flag: "rhs", t, source })?
            }
            None => {
                // Only A and g are known.
                let g = self.eval_g(t, y)?;
                let ay = self.apply_lin_op(y)?;
                self.counters.n_rhs_evals += 1;
                ay + g
            }
        };
        check_len("rhs result", self.problem.dim, f.len())?;
        Ok(f)
    }

    /// `g(t, y)` through the g callback.
    pub fn eval_g(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        let g = self.problem.g_fcn.as_ref().ok_or(ExpodeError::GUnavailable("no g callback"))?;
        self.counters.n_g_evals += 1;
        let r = g(t, y).map_err(|source| ExpodeError::Callback { flag: "g", t, source })?;
        check_len("g result", self.problem.dim, r.len())?;
        Ok(r)
    }

    /// `∂F/∂y (t, y)`. Falls back to finite differences when the problem
    /// enables them and no callback exists.
    pub fn eval_jacobian(&mut self, t: f64, y: &DVector<S>) -> Result<DMatrix<S>, ExpodeError> {
        self.check_y(y)?;
        let n = self.problem.dim;
        if let Some(jac) = &self.problem.jacobian {
            self.counters.n_jac_evals += 1;
            let j = jac(t, y).map_err(|source| ExpodeError::Callback {
                flag: "jacobian",
                t,
                source,
            })?;
            check_jac_shape(n, &j)?;
            return Ok(j);
        }
        if let Some(jv) = self.problem.jacobian_v.clone() {
            self.counters.n_jac_evals += 1;
            let mut j = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut e = DVector::zeros(n);
                e[k] = S::one();
                let col = jv(t, y, &e).map_err(|source| ExpodeError::Callback {
                    flag: "jacobian_v",
                    t,
                    source,
                })?;
                check_len("jacobian_v result", n, col.len())?;
                j.set_column(k, &col);
            }
            return Ok(j);
        }
        if self.problem.fd_jacobian {
            self.counters.n_jac_evals += 1;
            return self.fd_jacobian(t, y);
        }
        Err(ExpodeError::JacobianUnavailable)
    }

    /// `∂F/∂y (t, y) · v`.
    pub fn eval_jacobian_v(
        &mut self,
        t: f64,
        y: &DVector<S>,
        v: &DVector<S>,
    ) -> Result<DVector<S>, ExpodeError> {
        self.check_y(y)?;
        check_len("direction vector", self.problem.dim, v.len())?;
        if let Some(jv) = &self.problem.jacobian_v {
            self.counters.n_jac_evals += 1;
            let r = jv(t, y, v).map_err(|source| ExpodeError::Callback {
                flag: "jacobian_v",
                t,
                source,
            })?;
            check_len("jacobian_v result", self.problem.dim, r.len())?;
            return Ok(r);
        }
        if self.problem.jacobian.is_some() {
            return Ok(self.eval_jacobian(t, y)? * v);
        }
        if self.problem.fd_jacobian {
            self.counters.n_jac_evals += 1;
            let f0 = self.eval_rhs(t, y)?;
            return self.fd_directional(t, y, &f0, v);
        }
        Err(ExpodeError::JacobianUnavailable)
    }

    /// `∂g/∂y (t, y)` as a dense matrix.
    pub fn eval_g_jacobian(&mut self, t: f64, y: &DVector<S>) -> Result<DMatrix<S>, ExpodeError> {
        self.check_y(y)?;
        let n = self.problem.dim;
        if let Some(jac) = &self.problem.g_jacobian {
            self.counters.n_jac_evals += 1;
            let j = jac(t, y).map_err(|source| ExpodeError::Callback {
                flag: "g_jacobian",
                t,
                source,
            })?;
            check_jac_shape(n, &j)?;
            return Ok(j);
        }
        if let Some(jv) = self.problem.g_jacobian_v.clone() {
            self.counters.n_jac_evals += 1;
            let mut j = DMatrix::zeros(n, n);
            for k in 0..n {
                let mut e = DVector::zeros(n);
                e[k] = S::one();
                let col = jv(t, y, &e).map_err(|source| ExpodeError::Callback {
                    flag: "g_jacobian_v",
                    t,
                    source,
                })?;
                check_len("g_jacobian_v result", n, col.len())?;
                j.set_column(k, &col);
            }
            return Ok(j);
        }
        if self.problem.jacobian.is_some() || self.problem.fd_jacobian {
            let j = self.eval_jacobian(t, y)?;
            return Ok(j - self.lin_op_matrix()?);
        }
        Err(ExpodeError::JacobianUnavailable)
    }

    /// `∂F/∂t (t, y)`; zero when the problem supplies none.
    pub fn eval_df_dt(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        match &self.problem.df_dt {
            Some(f) => {
                let r = f(t, y).map_err(|source| ExpodeError::Callback { flag: "df_dt", t, source })?;
                check_len("df_dt result", self.problem.dim, r.len())?;
                Ok(r)
            }
            None => Ok(DVector::zeros(self.problem.dim)),
        }
    }

    /// `A·v` through the problem's linear part.
    pub fn apply_lin_op(&mut self, v: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        if let Some(av) = &self.problem.lin_op_v {
            self.counters.n_linop_evals += 1;
            let r = av(v).map_err(|source| ExpodeError::Callback {
                flag: "lin_op_v",
                t: f64::NAN,
                source,
            })?;
            check_len("lin_op_v result", self.problem.dim, r.len())?;
            return Ok(r);
        }
        match &self.problem.lin_op {
            Some(LinOp::Matrix(a)) => Ok(a.as_ref() * v),
            Some(LinOp::Fn(_)) => Ok(self.lin_op_matrix()? * v),
            None => Err(ExpodeError::LinOpUnavailable),
        }
    }

    /// The linear part as a dense matrix.
    pub fn lin_op_matrix(&mut self) -> Result<DMatrix<S>, ExpodeError> {
        let a = match &self.problem.lin_op {
            Some(LinOp::Matrix(a)) => a.as_ref().clone(),
            Some(LinOp::Fn(f)) => {
                self.counters.n_linop_evals += 1;
                f().map_err(|source| ExpodeError::Callback {
                    flag: "lin_op",
                    t: f64::NAN,
                    source,
                })?
            }
            None => return Err(ExpodeError::LinOpUnavailable),
        };
        check_jac_shape(self.problem.dim, &a)?;
        Ok(a)
    }

    fn fd_step(y: S) -> f64 {
        f64::EPSILON.sqrt() * (1.0 + y.modulus())
    }

    fn fd_jacobian(&mut self, t: f64, y: &DVector<S>) -> Result<DMatrix<S>, ExpodeError> {
        let n = self.problem.dim;
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let d = Self::fd_step(y[k]);
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += S::lift(d);
            ym[k] -= S::lift(d);
            let fp = self.eval_rhs(t, &yp)?;
            let fm = self.eval_rhs(t, &ym)?;
            j.set_column(k, &((fp - fm) * S::lift(0.5 / d)));
        }
        Ok(j)
    }

    fn fd_directional(
        &mut self,
        t: f64,
        y: &DVector<S>,
        f0: &DVector<S>,
        v: &DVector<S>,
    ) -> Result<DVector<S>, ExpodeError> {
        let vn = v.norm();
        if vn == 0.0 {
            return Ok(DVector::zeros(v.len()));
        }
        let d = f64::EPSILON.sqrt() * (1.0 + y.norm()) / vn;
        let yp = y + v * S::lift(d);
        let fp = self.eval_rhs(t, &yp)?;
        Ok((fp - f0) * S::lift(1.0 / d))
    }
}

fn check_jac_shape<S: State>(n: usize, j: &DMatrix<S>) -> Result<(), ExpodeError> {
    check_len("matrix rows", n, j.nrows())?;
    check_len("matrix columns", n, j.ncols())
}

/// One step's data for post-hoc dense output.
#[derive(Debug, Clone, PartialEq)]
pub enum DenseRecord<S: State> {
    /// Endpoint values and slopes for cubic Hermite interpolation.
    Hermite {
        f0: DVector<S>,
        f1: DVector<S>,
    },
    /// The eight stage vectors of an EXP4 step: `F(y0)` followed by `k1..k7`.
    Exp4 { vectors: Vec<DVector<S>> },
}

/// Per-step dense output data aligned with the accepted step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOutput<S: State> {
    pub(crate) t: Vec<f64>,
    pub(crate) y: Vec<DVector<S>>,
    pub(crate) records: Vec<DenseRecord<S>>,
}

impl<S: State> DenseOutput<S> {
    /// Accepted step times; step `i` spans `t[i]..t[i+1]`.
    pub fn step_times(&self) -> &[f64] {
        &self.t
    }

    pub fn step_values(&self) -> &[DVector<S>] {
        &self.y
    }

    pub fn records(&self) -> &[DenseRecord<S>] {
        &self.records
    }
}

/// Internals kept when `ClearInternalData` is off.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub integrator: String,
    pub matfun_description: String,
    pub order: usize,
    pub error_order: usize,
    pub multi_step: usize,
    /// Every attempted `(t, h, accepted, err_norm)`.
    pub attempts: Vec<StepAttempt>,
    pub h_min: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAttempt {
    pub t: f64,
    pub h: f64,
    pub accepted: bool,
    pub err_norm: f64,
    pub reuse: bool,
}

/// Result of an integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<S: State = f64> {
    pub t: Vec<f64>,
    pub y: Vec<DVector<S>>,
    pub stats: StatsCounters,
    pub dense: Option<DenseOutput<S>>,
    pub info: Option<RunInfo>,
    /// Set when an output function requested termination.
    pub stopped: bool,
}

impl<S: State> Solution<S> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> (f64, &DVector<S>) {
        (*self.t.last().expect("non-empty solution"), self.y.last().expect("non-empty solution"))
    }

    /// States as an `(N+1) × n` matrix, one row per time.
    pub fn y_matrix(&self) -> DMatrix<S> {
        let n = self.y.first().map_or(0, |y| y.len());
        DMatrix::from_fn(self.y.len(), n, |i, j| self.y[i][j])
    }
}
