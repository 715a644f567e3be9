use std::cell::Cell;
use std::collections::VecDeque;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};

use crate::driver::log::{Channel, Logger};
use crate::error::ExpodeError;
use crate::matfun::{DenseOperator, EvaluatorCaps, FnOperator, JobTable, LinearOperator, MatFunEvaluator};
use crate::model::{ProblemEval, State};

/// One point of the solution history with its cached evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct HistEntry<S: State> {
    pub t: f64,
    pub y: DVector<S>,
    /// `F(t, y)`.
    pub f: Option<DVector<S>>,
    /// The nonlinear part `g(t, y)` (semilinear integrators).
    pub g: Option<DVector<S>>,
}

/// The most recent accepted points, newest first.
#[derive(Debug, Clone, PartialEq)]
pub struct History<S: State> {
    entries: VecDeque<HistEntry<S>>,
    capacity: usize,
}

impl<S: State> History<S> {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity.max(1)),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, t: f64, y: DVector<S>) {
        self.entries.push_front(HistEntry { t, y, f: None, g: None });
        self.entries.truncate(self.capacity);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&HistEntry<S>> {
        self.entries.get(i)
    }

    fn is_current(&self, t: f64, y: &DVector<S>) -> bool {
        self.entries.front().is_some_and(|e| e.t == t && e.y == *y)
    }
}

/// Everything a step needs: counted problem evaluations, the matrix-function
/// evaluator, the history, and the log.
pub struct StepContext<'a, S: State> {
    pub(crate) eval: ProblemEval<'a, S>,
    pub(crate) matfun: Box<dyn MatFunEvaluator<S>>,
    pub(crate) caps: EvaluatorCaps,
    pub(crate) history: History<S>,
    pub(crate) nonautonomous: bool,
    /// Linearized integrators: assemble J = A + ∂g/∂y.
    pub(crate) semilin: bool,
    /// Prefer Jacobian-vector products over explicit Jacobians.
    pub(crate) prefer_matvec: bool,
    pub(crate) log: Logger,
    pub(crate) registrations: usize,
    lin_op: Option<Rc<dyn LinearOperator<S>>>,
    jac_cache: Option<(f64, DVector<S>, Rc<dyn LinearOperator<S>>)>,
    jv_calls: Rc<Cell<usize>>,
}

impl<'a, S: State> StepContext<'a, S> {
    pub(crate) fn new(
        eval: ProblemEval<'a, S>,
        matfun: Box<dyn MatFunEvaluator<S>>,
        caps: EvaluatorCaps,
        history: History<S>,
        log: Logger,
    ) -> Self {
        Self {
            eval,
            matfun,
            caps,
            history,
            nonautonomous: false,
            semilin: false,
            prefer_matvec: false,
            log,
            registrations: 0,
            lin_op: None,
            jac_cache: None,
            jv_calls: Rc::new(Cell::new(0)),
        }
    }

    pub fn eval(&mut self) -> &mut ProblemEval<'a, S> {
        &mut self.eval
    }

    pub fn history(&self) -> &History<S> {
        &self.history
    }

    pub fn dim(&self) -> usize {
        self.eval.problem().dim()
    }

    /// Number of job-table registrations so far.
    pub fn registrations(&self) -> usize {
        self.registrations
    }

    pub fn register_jobs(&mut self, jobs: &JobTable) -> Result<(), ExpodeError> {
        self.matfun.register_jobs(jobs)?;
        self.registrations += 1;
        Ok(())
    }

    pub fn init_step(
        &mut self,
        op: Rc<dyn LinearOperator<S>>,
        t: f64,
        y: &DVector<S>,
        h: f64,
    ) -> Result<(), ExpodeError> {
        self.matfun.init_step(op, t, y, h)?;
        Ok(())
    }

    pub fn evaluate(
        &mut self,
        flag: &str,
        v: &DVector<S>,
        reusable: bool,
        reuse: bool,
        facs: usize,
    ) -> Result<DMatrix<S>, ExpodeError> {
        Ok(self.matfun.evaluate(flag, v, reusable, reuse, facs)?)
    }

    /// Single-row, single-factor evaluation as a vector.
    pub fn evaluate_vec(
        &mut self,
        flag: &str,
        v: &DVector<S>,
        reusable: bool,
        reuse: bool,
    ) -> Result<DVector<S>, ExpodeError> {
        let m = self.evaluate(flag, v, reusable, reuse, 1)?;
        Ok(m.column(0).into_owned())
    }

    /// `F(t, y)`, cached when `(t, y)` is the newest history point.
    pub fn current_f(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        if self.history.is_current(t, y) {
            if let Some(f) = &self.history.entries[0].f {
                return Ok(f.clone());
            }
            let f = self.eval.eval_rhs(t, y)?;
            self.history.entries[0].f = Some(f.clone());
            return Ok(f);
        }
        self.eval.eval_rhs(t, y)
    }

    /// `g(t, y)`, cached like [`StepContext::current_f`].
    pub fn current_g(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        if self.history.is_current(t, y) {
            if let Some(g) = &self.history.entries[0].g {
                return Ok(g.clone());
            }
            let g = self.g_at(t, y)?;
            self.history.entries[0].g = Some(g.clone());
            return Ok(g);
        }
        self.g_at(t, y)
    }

    /// The nonlinear part: the g callback, or `F(t, y) − A·y`.
    pub fn g(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        self.g_at(t, y)
    }

    fn g_at(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        if self.eval.problem().g_fcn.is_some() {
            return self.eval.eval_g(t, y);
        }
        let f = self.current_f(t, y)?;
        let ay = self.lin_op_operator()?.apply(y)?;
        Ok(f - ay)
    }

    /// Cached `F` (and `g` for semilinear runs) `steps_back` accepted steps
    /// ago; 0 is the current point.
    pub fn get_old_f(
        &mut self,
        steps_back: usize,
    ) -> Result<(DVector<S>, Option<DVector<S>>), ExpodeError> {
        if steps_back >= self.history.capacity {
            return Err(ExpodeError::HistoryIndex {
                index: steps_back,
                len: self.history.capacity,
            });
        }
        let len = self.history.len();
        let entry = self.history.entries.get(steps_back).ok_or(ExpodeError::InsufficientHistory {
            needed: steps_back + 1,
            available: len,
        })?;
        let (t, y) = (entry.t, entry.y.clone());
        let f = match &entry.f {
            Some(f) => f.clone(),
            None => {
                let f = self.eval.eval_rhs(t, &y)?;
                self.history.entries[steps_back].f = Some(f.clone());
                f
            }
        };
        let g = self.history.entries[steps_back].g.clone();
        Ok((f, g))
    }

    /// `g` at a history point, cached.
    pub fn old_g(&mut self, steps_back: usize) -> Result<DVector<S>, ExpodeError> {
        let entry = self.history.entries.get(steps_back).ok_or(ExpodeError::InsufficientHistory {
            needed: steps_back + 1,
            available: self.history.len(),
        })?;
        if let Some(g) = &entry.g {
            return Ok(g.clone());
        }
        let (t, y) = (entry.t, entry.y.clone());
        let g = if self.eval.problem().g_fcn.is_some() {
            self.eval.eval_g(t, &y)?
        } else {
            let (f, _) = self.get_old_f(steps_back)?;
            f - self.lin_op_operator()?.apply(&y)?
        };
        self.history.entries[steps_back].g = Some(g.clone());
        Ok(g)
    }

    /// The linear part `A` as an operator, built once per run.
    pub fn lin_op_operator(&mut self) -> Result<Rc<dyn LinearOperator<S>>, ExpodeError> {
        if let Some(op) = &self.lin_op {
            return Ok(op.clone());
        }
        let problem = self.eval.problem();
        let matvec = problem.lin_op_v.clone();
        let use_matrix = problem.lin_op.is_some() && (self.caps.need_jac_explicit || matvec.is_none());
        let op: Rc<dyn LinearOperator<S>> = if use_matrix {
            Rc::new(DenseOperator::new(self.eval.lin_op_matrix()?))
        } else if let Some(av) = matvec {
            Rc::new(FnOperator::new(problem.dim(), move |v| av(v)))
        } else {
            return Err(ExpodeError::LinOpUnavailable);
        };
        self.lin_op = Some(op.clone());
        Ok(op)
    }

    /// The Jacobian at `(t, y)` as an operator; repeated requests at the same
    /// point return the same operator.
    pub fn jacobian_operator(&mut self, t: f64, y: &DVector<S>) -> Result<Rc<dyn LinearOperator<S>>, ExpodeError> {
        if let Some((tc, yc, op)) = &self.jac_cache {
            if *tc == t && yc == y {
                return Ok(op.clone());
            }
        }
        let op = self.build_jacobian_operator(t, y)?;
        self.jac_cache = Some((t, y.clone(), op.clone()));
        Ok(op)
    }

    fn build_jacobian_operator(&mut self, t: f64, y: &DVector<S>) -> Result<Rc<dyn LinearOperator<S>>, ExpodeError> {
        self.log.log(Channel::JacLog, || format!("Jacobian evaluated at t = {t:e}"));
        let problem = self.eval.problem();
        let n = problem.dim();
        if self.semilin {
            let a = self.lin_op_operator()?;
            let explicit = self.caps.need_jac_explicit
                || !self.prefer_matvec && problem.g_jacobian.is_some() && a.dense().is_some();
            if explicit {
                let jg = self.eval.eval_g_jacobian(t, y)?;
                let a = a.dense().ok_or(ExpodeError::LinOpUnavailable)?;
                return Ok(Rc::new(DenseOperator::new(a + jg)));
            }
            let gv = match problem.g_jacobian_v.clone() {
                Some(gv) => {
                    let (t, y) = (t, y.clone());
                    let calls = self.jv_calls.clone();
                    Box::new(move |v: &DVector<S>| {
                        calls.set(calls.get() + 1);
                        gv(t, &y, v)
                    }) as Box<dyn Fn(&DVector<S>) -> _>
                }
                None => {
                    let jg = self.eval.eval_g_jacobian(t, y)?;
                    Box::new(move |v: &DVector<S>| Ok(&jg * v))
                }
            };
            return Ok(Rc::new(FnOperator::new(n, move |v| {
                let av = a.apply(v).map_err(|e| Box::new(e) as crate::error::CallbackError)?;
                Ok(av + gv(v)?)
            })));
        }
        let jv = problem.jacobian_v.clone();
        let use_matvec =
            !self.caps.need_jac_explicit && jv.is_some() && (self.prefer_matvec || problem.jacobian.is_none());
        if use_matvec {
            let jv = jv.expect("checked");
            let y = y.clone();
            let calls = self.jv_calls.clone();
            return Ok(Rc::new(FnOperator::new(n, move |v| {
                calls.set(calls.get() + 1);
                jv(t, &y, v)
            })));
        }
        if self.caps.need_jac_explicit && problem.jacobian.is_none() && !problem.fd_jacobian {
            return Err(ExpodeError::JacobianUnavailable);
        }
        Ok(Rc::new(DenseOperator::new(self.eval.eval_jacobian(t, y)?)))
    }

    /// `∂F/∂t` when the run is non-autonomous, otherwise zero.
    pub fn df_dt(&mut self, t: f64, y: &DVector<S>) -> Result<DVector<S>, ExpodeError> {
        let n = self.dim();
        if !self.nonautonomous {
            return Ok(DVector::zeros(n));
        }
        if self.eval.problem().has_df_dt() {
            return self.eval.eval_df_dt(t, y);
        }
        let f0 = self.current_f(t, y)?;
        let d = f64::EPSILON.sqrt() * (1.0 + t.abs());
        let f1 = self.eval.eval_rhs(t + d, y)?;
        Ok((f1 - f0) * S::lift(1.0 / d))
    }

    /// Folds counters kept outside the problem evaluator into the stats.
    pub(crate) fn sync_counters(&mut self) {
        let calls = self.jv_calls.replace(0);
        self.eval.counters.n_jac_evals += calls;
        self.eval.counters.matfun = self.matfun.statistics();
    }
}
