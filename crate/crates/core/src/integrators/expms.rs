//! Exponential multistep integrators on a constant step grid.
//!
//! Both start with `kStep − 1` steps of a fourth order one-step method, each
//! split into `StartupSteps` substeps, and switch to their own job table once
//! the history is full.

use nalgebra::{DMatrix, DVector};

use super::exprb::{Exprb, ExprbOrder};
use super::exprk::Exprk;
use super::scheme::RkScheme;
use super::{DenseKind, Integrator, IntegratorSetup, StepContext, StepResult};
use crate::error::ExpodeError;
use crate::matfun::JobTable;
use crate::model::State;
use crate::options::NormalizedOptions;
use crate::phi::{gamma_coefficients, inv_factorial, PhiFn, MAX_GAMMA_INDEX};

fn k_step(options: &NormalizedOptions) -> usize {
    options.scalar("kStep").map_or(2, |k| k as usize)
}

fn startup_steps(options: &NormalizedOptions) -> usize {
    options.scalar("StartupSteps").map_or(1, |k| k as usize).max(1)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Runs `substeps` steps of `inner` covering `h`.
fn startup_step<S: State>(
    inner: &mut dyn Integrator<S>,
    ctx: &mut StepContext<'_, S>,
    t: f64,
    y: &DVector<S>,
    h: f64,
    substeps: usize,
    reuse: bool,
) -> Result<StepResult<S>, ExpodeError> {
    let dt = h / substeps as f64;
    let mut y = y.clone();
    for i in 0..substeps {
        y = inner.step(ctx, t + i as f64 * dt, &y, dt, reuse && i == 0)?.y_new;
    }
    Ok(StepResult {
        y_new: y,
        err: None,
        h_out: h,
        dense: None,
    })
}

/// Exponential Adams method for `y' = A·y + g(t, y)`:
/// `uₙ₊₁ = e^{hA}uₙ + h·Σⱼ γⱼ(hA)·∇ʲGₙ` with `Gᵢ = g(tᵢ, uᵢ)`, summed over
/// `j < k`.
pub struct Expmssemi {
    k: usize,
    substeps: usize,
    startup: Exprk,
    main_registered: bool,
}

impl Expmssemi {
    pub fn new(k: usize, substeps: usize) -> Result<Self, ExpodeError> {
        if k == 0 || k > MAX_GAMMA_INDEX + 1 {
            return Err(ExpodeError::OutOfRange {
                what: "kStep",
                value: k,
                max: MAX_GAMMA_INDEX + 1,
            });
        }
        Ok(Self {
            k,
            substeps: substeps.max(1),
            startup: Exprk::new(RkScheme::krogstad())?,
            main_registered: false,
        })
    }

    pub fn from_options(options: &NormalizedOptions) -> Result<Self, ExpodeError> {
        Self::new(k_step(options), startup_steps(options))
    }

    fn functions(&self) -> Vec<PhiFn> {
        (0..=self.k).map(PhiFn::unit).collect()
    }

    /// Coefficients of the weight of `Gₙ₋ᵢ` over φ₀..φₖ.
    pub fn weight_row(&self, i: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.k + 1];
        let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        for j in i..self.k {
            let c = gamma_coefficients(j).expect("kStep checked");
            for (m, x) in c.iter().enumerate() {
                row[m + 1] += sign * binomial(j, i) * x;
            }
        }
        row
    }

    pub(crate) fn job_table(&self) -> JobTable {
        let mut y = vec![0.0; self.k + 1];
        y[0] = 1.0;
        (0..self.k).fold(JobTable::new(self.functions()).job("y", vec![y]), |t, i| {
            t.job(format!("G{i}"), vec![self.weight_row(i)])
        })
    }
}

impl<S: State> Integrator<S> for Expmssemi {
    fn setup(&self) -> IntegratorSetup {
        IntegratorSetup {
            name: "expmssemi".into(),
            order: self.k,
            error_order: self.k,
            multi_step: self.k,
            semilin: true,
            constant_step: true,
            error_estimate: false,
            dense: DenseKind::None,
            job_functions: self.functions(),
        }
    }

    fn start(&mut self, ctx: &mut StepContext<'_, S>) -> Result<(), ExpodeError> {
        if self.k == 1 {
            self.main_registered = true;
            return ctx.register_jobs(&self.job_table());
        }
        Integrator::<S>::start(&mut self.startup, ctx)
    }

    fn step(
        &mut self,
        ctx: &mut StepContext<'_, S>,
        t: f64,
        y: &DVector<S>,
        h: f64,
        reuse: bool,
    ) -> Result<StepResult<S>, ExpodeError> {
        if ctx.history().len() < self.k {
            return startup_step(&mut self.startup, ctx, t, y, h, self.substeps, reuse);
        }
        if !self.main_registered {
            ctx.register_jobs(&self.job_table())?;
            self.main_registered = true;
        }
        let op = ctx.lin_op_operator()?;
        ctx.init_step(op, t, y, h)?;
        let mut y_new = ctx.evaluate_vec("y", y, false, false)?;
        let hs = S::lift(h);
        for i in 0..self.k {
            let g = if i == 0 { ctx.current_g(t, y)? } else { ctx.old_g(i)? };
            y_new += ctx.evaluate_vec(&format!("G{i}"), &g, false, false)? * hs;
        }
        Ok(StepResult {
            y_new,
            err: None,
            h_out: h,
            dense: None,
        })
    }
}

/// Linearized exponential multistep method.
///
/// With `J`, `v` at `(tₙ, uₙ)` and `Gᵢ = F(tᵢ, uᵢ) − J·uᵢ − v·tᵢ`, the
/// differences `Dₗ = Gₙ₋ₗ − Gₙ` are interpolated by `q(θ) = Σₘ aₘθᵐ`,
/// `m = 2..k`, with `q(−l) = Dₗ`; `q` has a double zero at 0 since `G` is
/// stationary there to first order. Then
/// `uₙ₊₁ = uₙ + hφ₁F + h²φ₂v + h·Σₘ m!·φₘ₊₁(hJ)·aₘ`, of order `k + 1`.
pub struct Expms {
    k: usize,
    substeps: usize,
    startup: Exprb,
    main_registered: bool,
    /// `d_rows[l − 1]` holds the row of flag `D{l}` over φ₁..φₖ₊₁.
    d_rows: Vec<Vec<f64>>,
}

impl Expms {
    pub fn new(k: usize, substeps: usize) -> Result<Self, ExpodeError> {
        let max = crate::phi::MAX_PHI_INDEX - 1;
        if k == 0 || k > max {
            return Err(ExpodeError::OutOfRange {
                what: "kStep",
                value: k,
                max,
            });
        }
        let d_rows = if k == 1 {
            Vec::new()
        } else {
            let v = DMatrix::from_fn(k - 1, k - 1, |l, m| (-((l + 1) as f64)).powi(m as i32 + 2));
            let inv = v.try_inverse().expect("Vandermonde matrix with distinct nodes");
            (1..k)
                .map(|l| {
                    let mut row = vec![0.0; k + 1];
                    for m in 2..=k {
                        row[m] = inv[(m - 2, l - 1)] / inv_factorial(m);
                    }
                    row
                })
                .collect()
        };
        Ok(Self {
            k,
            substeps: substeps.max(1),
            startup: Exprb::new(ExprbOrder::O43, false),
            main_registered: false,
            d_rows,
        })
    }

    pub fn from_options(options: &NormalizedOptions) -> Result<Self, ExpodeError> {
        Self::new(k_step(options), startup_steps(options))
    }

    fn functions(&self) -> Vec<PhiFn> {
        (1..=self.k + 1).map(PhiFn::unit).collect()
    }

    pub(crate) fn job_table(&self) -> JobTable {
        let w = self.k + 1;
        let mut f = vec![0.0; w];
        f[0] = 1.0;
        let mut v = vec![0.0; w];
        v[1] = 1.0;
        let t = JobTable::new(self.functions()).job("F", vec![f]).job("v", vec![v]);
        self.d_rows
            .iter()
            .enumerate()
            .fold(t, |t, (l, row)| t.job(format!("D{}", l + 1), vec![row.clone()]))
    }
}

impl<S: State> Integrator<S> for Expms {
    fn setup(&self) -> IntegratorSetup {
        IntegratorSetup {
            name: "expms".into(),
            order: self.k + 1,
            error_order: self.k + 1,
            multi_step: self.k,
            semilin: false,
            constant_step: true,
            error_estimate: false,
            dense: DenseKind::None,
            job_functions: self.functions(),
        }
    }

    fn start(&mut self, ctx: &mut StepContext<'_, S>) -> Result<(), ExpodeError> {
        if self.k == 1 {
            self.main_registered = true;
            return ctx.register_jobs(&self.job_table());
        }
        Integrator::<S>::start(&mut self.startup, ctx)
    }

    fn step(
        &mut self,
        ctx: &mut StepContext<'_, S>,
        t: f64,
        y: &DVector<S>,
        h: f64,
        reuse: bool,
    ) -> Result<StepResult<S>, ExpodeError> {
        if ctx.history().len() < self.k {
            return startup_step(&mut self.startup, ctx, t, y, h, self.substeps, reuse);
        }
        if !self.main_registered {
            ctx.register_jobs(&self.job_table())?;
            self.main_registered = true;
        }
        let jac = ctx.jacobian_operator(t, y)?;
        ctx.init_step(jac.clone(), t, y, h)?;
        let f = ctx.current_f(t, y)?;
        let hs = S::lift(h);
        let mut y_new: DVector<S> = y + ctx.evaluate_vec("F", &f, false, false)? * hs;
        let v = if ctx.nonautonomous {
            let v = ctx.df_dt(t, y)?;
            y_new += ctx.evaluate_vec("v", &v, false, false)? * S::lift(h * h);
            Some(v)
        } else {
            None
        };
        for l in 1..self.k {
            let (fl, _) = ctx.get_old_f(l)?;
            let entry = ctx.history().get(l).expect("history checked");
            let (tl, yl) = (entry.t, entry.y.clone());
            let mut d = fl - &f - jac.apply(&(yl - y))?;
            if let Some(v) = &v {
                d -= v * S::lift(tl - t);
            }
            y_new += ctx.evaluate_vec(&format!("D{l}"), &d, false, false)? * hs;
        }
        Ok(StepResult {
            y_new,
            err: None,
            h_out: h,
            dense: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adams_weights_at_zero_are_classical() {
        // at z = 0 the weights reduce to the Adams–Bashforth coefficients
        let at_zero = |row: &[f64]| -> f64 { row.iter().enumerate().map(|(k, c)| c * inv_factorial(k)).sum() };
        let ms = Expmssemi::new(2, 1).unwrap();
        assert!((at_zero(&ms.weight_row(0)) - 1.5).abs() < 1e-15);
        assert!((at_zero(&ms.weight_row(1)) + 0.5).abs() < 1e-15);
        let ms = Expmssemi::new(3, 1).unwrap();
        let w: Vec<f64> = (0..3).map(|i| at_zero(&ms.weight_row(i))).collect();
        for (a, b) in w.iter().zip([23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_rows_reproduce_monomials() {
        // q(θ) = θ² sampled at θ = −1 gives D₁ = 1 and a₂ = 1, so the row of
        // D₁ carries 2!·φ₃.
        let ms = Expms::new(2, 1).unwrap();
        assert_eq!(ms.d_rows, vec![vec![0.0, 0.0, 2.0]]);
    }
}
