use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::eig::{diagonalize, Diagonalization};
use super::{
    column_weights, weights_at_zero, EvaluatorCaps, EvaluatorEnv, JobTable, LinearOperator, MatFunEvaluator,
};
use crate::error::MatFunError;
use crate::model::{MatFunStats, State};

// Relative asymmetry below which the operator is treated as Hermitian.
const HERMITIAN_TOL: f64 = 1e-14;

struct Saved<S: State> {
    key: u64,
    v: DVector<S>,
    w: DVector<Complex64>,
}

/// Evaluates matrix functions by diagonalizing the operator once per
/// operator value: `φ(hM)v = S·φ(hΛ)·S⁻¹v`.
///
/// Meant for small and moderately sized systems with a well-conditioned
/// eigenbasis; the operator must be available as a dense matrix.
pub struct DirectEvaluator<S: State> {
    jobs: Option<JobTable>,
    initialized: bool,
    op_key: Option<u64>,
    diag: Option<Diagonalization>,
    h: f64,
    stepped: bool,
    saved: HashMap<String, Saved<S>>,
    stats: MatFunStats,
}

impl<S: State> Default for DirectEvaluator<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: State> DirectEvaluator<S> {
    pub fn new() -> Self {
        Self {
            jobs: None,
            initialized: false,
            op_key: None,
            diag: None,
            h: 0.0,
            stepped: false,
            saved: HashMap::new(),
            stats: MatFunStats::default(),
        }
    }

    /// Condition number of the current eigenbasis.
    pub fn condition(&self) -> Option<f64> {
        self.diag.as_ref().map(|d| d.cond)
    }
}

impl<S: State> MatFunEvaluator<S> for DirectEvaluator<S> {
    fn init(&mut self, env: &EvaluatorEnv) -> Result<EvaluatorCaps, MatFunError> {
        if !env.dense_available {
            return Err(MatFunError::Incompatible(
                "direct evaluation needs the operator as a matrix, but only its action on vectors is available"
                    .into(),
            ));
        }
        *self = Self::new();
        self.initialized = true;
        Ok(EvaluatorCaps {
            need_jac_explicit: true,
            need_gjac_explicit: true,
        })
    }

    fn register_jobs(&mut self, jobs: &JobTable) -> Result<(), MatFunError> {
        if !self.initialized {
            return Err(MatFunError::Protocol("init"));
        }
        jobs.validate()?;
        self.jobs = Some(jobs.clone());
        self.saved.clear();
        Ok(())
    }

    fn init_step(
        &mut self,
        op: Rc<dyn LinearOperator<S>>,
        _t: f64,
        _y: &DVector<S>,
        h: f64,
    ) -> Result<(), MatFunError> {
        if self.jobs.is_none() {
            return Err(MatFunError::Protocol("registerjobs"));
        }
        self.h = h;
        self.stepped = true;
        if self.op_key == Some(op.key()) && self.diag.is_some() {
            return Ok(());
        }
        let m = op.dense().ok_or_else(|| {
            MatFunError::Incompatible("direct evaluation needs the operator as a matrix".into())
        })?;
        let mc = m.map(|x| x.to_c64());
        self.diag = None;
        self.op_key = None;
        self.saved.clear();
        let d = diagonalize(&mc, HERMITIAN_TOL)?;
        self.stats.n_diag += 1;
        self.diag = Some(d);
        self.op_key = Some(op.key());
        Ok(())
    }

    fn evaluate(
        &mut self,
        flag: &str,
        v: &DVector<S>,
        reusable: bool,
        reuse: bool,
        facs: usize,
    ) -> Result<DMatrix<S>, MatFunError> {
        let jobs = self.jobs.as_ref().ok_or(MatFunError::Protocol("registerjobs"))?;
        if !self.stepped {
            return Err(MatFunError::Protocol("initstep"));
        }
        let rows = jobs.lookup(flag)?;
        let diag = self.diag.as_ref().ok_or(MatFunError::Protocol("initstep"))?;
        let n = v.len();
        if n != diag.lambda.len() {
            return Err(MatFunError::Incompatible(format!(
                "vector has {n} entries, operator dimension is {}",
                diag.lambda.len()
            )));
        }
        let facs = facs.max(1);
        self.stats.n_mfev += 1;
        let fstats = self.stats.flag_mut(flag);
        fstats.calls += 1;

        let mut out = DMatrix::<S>::zeros(n, rows.len() * facs);
        if self.h == 0.0 {
            let w0 = weights_at_zero(jobs.functions(), rows);
            for (r, c) in w0.iter().enumerate() {
                for j in 0..facs {
                    out.set_column(r * facs + j, &(v * S::lift(*c)));
                }
            }
            return Ok(out);
        }

        let key = self.op_key.expect("diagonalization present");
        let cached = if reuse {
            self.saved
                .get(flag)
                .filter(|s| s.key == key && s.v == *v)
                .map(|s| s.w.clone())
        } else {
            None
        };
        let w = match cached {
            Some(w) => {
                fstats.reused += 1;
                w
            }
            None => {
                let vc = v.map(|x| x.to_c64());
                let w = &diag.s_inv * vc;
                if reusable {
                    self.saved.insert(
                        flag.to_string(),
                        Saved {
                            key,
                            v: v.clone(),
                            w: w.clone(),
                        },
                    );
                }
                w
            }
        };
        let weights = column_weights(jobs.functions(), rows, facs, self.h, &diag.lambda);
        for (c, d) in weights.iter().enumerate() {
            let col = diag.apply_weights(d, &w);
            out.set_column(c, &col.map(S::from_c64));
        }
        Ok(out)
    }

    fn cleanup(&mut self) {
        self.jobs = None;
        self.diag = None;
        self.op_key = None;
        self.saved.clear();
        self.stepped = false;
    }

    fn description(&self) -> String {
        "directly by diagonalisation".into()
    }

    fn statistics(&self) -> MatFunStats {
        self.stats.clone()
    }
}
