use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::eig::diagonalize;
use super::{column_weights, weights_at_zero, EvaluatorCaps, EvaluatorEnv, JobTable, LinearOperator, MatFunEvaluator};
use crate::error::MatFunError;
use crate::model::{MatFunStats, State};

// Hessenberg matrices this close to Hermitian come from Hermitian operators.
const HERMITIAN_TOL: f64 = 1e-10;
const BREAKDOWN_TOL: f64 = 1e-14;

/// Tuning of the Arnoldi evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovConfig {
    /// Largest subspace dimension before asking for a smaller step.
    pub max_dim: usize,
    /// Always build exactly this many basis vectors (capped by the problem
    /// dimension), skipping the convergence test.
    pub fixed_dim: Option<usize>,
    /// Convergence threshold relative to the smallest absolute tolerance.
    pub tol_factor: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            max_dim: 36,
            fixed_dim: None,
            tol_factor: 1e-2,
        }
    }
}

#[derive(Clone)]
struct Arnoldi<S: State> {
    key: u64,
    v0: DVector<S>,
    beta: f64,
    basis: Vec<DVector<S>>,
    // (max_dim + 1) × max_dim upper Hessenberg.
    h: DMatrix<S>,
    m: usize,
    breakdown: bool,
}

impl<S: State> Arnoldi<S> {
    fn start(key: u64, v: &DVector<S>, max_dim: usize) -> Self {
        let beta = v.norm();
        Self {
            key,
            v0: v.clone(),
            beta,
            basis: vec![v.unscale(beta)],
            h: DMatrix::zeros(max_dim + 1, max_dim),
            m: 0,
            breakdown: false,
        }
    }

    fn extend(&mut self, op: &dyn LinearOperator<S>) -> Result<(), MatFunError> {
        let j = self.m;
        let mut w = op.apply(&self.basis[j])?;
        // Modified Gram–Schmidt with one reorthogonalization pass.
        for _ in 0..2 {
            for (i, vi) in self.basis.iter().enumerate() {
                let c = vi.dotc(&w);
                w.axpy(-c, vi, S::one());
                self.h[(i, j)] += c;
            }
        }
        let hnorm = self.h.view((0, 0), (j + 1, j + 1)).norm();
        let next = w.norm();
        self.h[(j + 1, j)] = S::lift(next);
        self.m += 1;
        if next <= BREAKDOWN_TOL * hnorm || next == 0.0 {
            self.breakdown = true;
        } else {
            self.basis.push(w.unscale(next));
        }
        Ok(())
    }

    fn subdiag(&self) -> f64 {
        if self.breakdown {
            0.0
        } else {
            self.h[(self.m, self.m - 1)].modulus()
        }
    }

    /// Coefficient vectors `f(hHₘ)e₁` for every requested column.
    fn small_functions(
        &self,
        jobs: &JobTable,
        rows: &[Vec<f64>],
        facs: usize,
        h: f64,
    ) -> Result<Vec<DVector<Complex64>>, MatFunError> {
        let m = self.m;
        let hm = self.h.view((0, 0), (m, m)).map(|x| x.to_c64());
        let d = diagonalize(&hm, HERMITIAN_TOL)?;
        let e1 = d.s_inv.column(0).into_owned();
        let weights = column_weights(jobs.functions(), rows, facs, h, &d.lambda);
        Ok(weights.iter().map(|w| d.apply_weights(w, &e1)).collect())
    }

    fn component(&self, f: &DVector<Complex64>, idx: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, fi) in f.iter().enumerate() {
            acc += self.basis[i][idx].to_c64() * fi;
        }
        acc * self.beta
    }

    fn assemble(&self, f: &DVector<Complex64>) -> DVector<S> {
        let n = self.v0.len();
        let mut out = DVector::<S>::zeros(n);
        for (i, fi) in f.iter().enumerate() {
            out.axpy(S::from_c64(fi * self.beta), &self.basis[i], S::one());
        }
        out
    }
}

/// Approximates `φ(hM)v` in the Krylov space span{v, Mv, …, Mᵐ⁻¹v}.
///
/// Only operator-vector products are needed. The subspace grows until the
/// monitored component of every requested product settles and the residual
/// estimate `β·hₘ₊₁,ₘ·|eₘᵀf(hHₘ)e₁|` is below tolerance; if that does not
/// happen within the maximal dimension the step has to be reduced.
pub struct KrylovEvaluator<S: State> {
    config: KrylovConfig,
    jobs: Option<JobTable>,
    env: Option<EvaluatorEnv>,
    op: Option<Rc<dyn LinearOperator<S>>>,
    h: f64,
    saved: HashMap<String, Arnoldi<S>>,
    stats: MatFunStats,
}

impl<S: State> Default for KrylovEvaluator<S> {
    fn default() -> Self {
        Self::new(KrylovConfig::default())
    }
}

impl<S: State> KrylovEvaluator<S> {
    pub fn new(config: KrylovConfig) -> Self {
        Self {
            config,
            jobs: None,
            env: None,
            op: None,
            h: 0.0,
            saved: HashMap::new(),
            stats: MatFunStats::default(),
        }
    }

    pub fn config(&self) -> &KrylovConfig {
        &self.config
    }
}

impl<S: State> MatFunEvaluator<S> for KrylovEvaluator<S> {
    fn init(&mut self, env: &EvaluatorEnv) -> Result<EvaluatorCaps, MatFunError> {
        self.cleanup();
        self.stats = MatFunStats::default();
        self.env = Some(env.clone());
        Ok(EvaluatorCaps {
            need_jac_explicit: false,
            need_gjac_explicit: false,
        })
    }

    fn register_jobs(&mut self, jobs: &JobTable) -> Result<(), MatFunError> {
        if self.env.is_none() {
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
        let key = op.key();
        self.saved.retain(|_, a| a.key == key);
        self.op = Some(op);
        self.h = h;
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
        let env = self.env.as_ref().ok_or(MatFunError::Protocol("init"))?;
        let op = self.op.clone().ok_or(MatFunError::Protocol("initstep"))?;
        let rows = jobs.lookup(flag)?;
        let n = v.len();
        if n != op.dim() {
            return Err(MatFunError::Incompatible(format!(
                "vector has {n} entries, operator dimension is {}",
                op.dim()
            )));
        }
        let facs = facs.max(1);
        let ncols = rows.len() * facs;
        self.stats.n_mfev += 1;
        self.stats.flag_mut(flag).calls += 1;

        let mut out = DMatrix::<S>::zeros(n, ncols);
        let beta = v.norm();
        if self.h == 0.0 || beta == 0.0 {
            let w0 = weights_at_zero(jobs.functions(), rows);
            for (r, c) in w0.iter().enumerate() {
                for j in 0..facs {
                    out.set_column(r * facs + j, &(v * S::lift(*c)));
                }
            }
            return Ok(out);
        }

        let max_dim = self.config.max_dim.min(n).max(1);
        let target = self.config.fixed_dim.map(|d| d.clamp(1, n));
        let cap = target.map_or(max_dim, |d| d.max(max_dim));
        let key = op.key();

        let mut arn = match self.saved.get(flag) {
            Some(a) if reuse && a.key == key && a.v0 == *v && a.h.ncols() >= cap => {
                self.stats.flag_mut(flag).reused += 1;
                a.clone()
            }
            _ => Arnoldi::start(key, v, cap),
        };

        let tol = self.config.tol_factor * env.abs_tol;
        let idx = env.test_index.min(n - 1);
        let mut prev: Option<Vec<Complex64>> = None;
        let mut result: Option<Vec<DVector<Complex64>>> = None;
        loop {
            let limit = target.unwrap_or(max_dim);
            if arn.m < limit && !arn.breakdown {
                arn.extend(op.as_ref())?;
                self.stats.n_matvec += 1;
            }
            let done_building = arn.breakdown || arn.m >= limit;
            if target.is_some() && !done_building {
                continue;
            }
            let f = match arn.small_functions(jobs, rows, facs, self.h) {
                Ok(f) => f,
                Err(e) if !done_building => {
                    let _ = e;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if target.is_some() || arn.breakdown {
                result = Some(f);
                break;
            }
            let sub = arn.subdiag();
            let comps: Vec<Complex64> = f.iter().map(|fc| arn.component(fc, idx)).collect();
            let residual_ok = f.iter().all(|fc| arn.beta * sub * fc[arn.m - 1].norm() <= tol);
            let settled = prev
                .as_ref()
                .is_some_and(|p| p.iter().zip(&comps).all(|(a, b)| (a - b).norm() <= tol));
            if residual_ok && (settled || arn.m == 1 && sub == 0.0) {
                result = Some(f);
                break;
            }
            if arn.m >= n {
                result = Some(f);
                break;
            }
            if done_building {
                break;
            }
            prev = Some(comps);
        }

        let fstats = self.stats.flag_mut(flag);
        fstats.krylov_dim_total += arn.m;
        fstats.krylov_dim_max = fstats.krylov_dim_max.max(arn.m);

        let f = match result {
            Some(f) => f,
            None => {
                return Err(MatFunError::ReduceStep {
                    flag: flag.to_string(),
                    dim: arn.m,
                })
            }
        };
        for (c, fc) in f.iter().enumerate() {
            out.set_column(c, &arn.assemble(fc));
        }
        if reusable {
            self.saved.insert(flag.to_string(), arn);
        }
        Ok(out)
    }

    fn cleanup(&mut self) {
        self.jobs = None;
        self.op = None;
        self.saved.clear();
    }

    fn description(&self) -> String {
        "using a Krylov subspace method".into()
    }

    fn statistics(&self) -> MatFunStats {
        self.stats.clone()
    }
}
