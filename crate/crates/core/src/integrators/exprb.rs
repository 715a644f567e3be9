use nalgebra::DVector;

use super::{DenseKind, Integrator, IntegratorSetup, StepContext, StepResult};
use crate::error::ExpodeError;
use crate::matfun::JobTable;
use crate::model::State;
use crate::options::NormalizedOptions;
use crate::phi::PhiFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprbOrder {
    /// Order three with an embedded second order solution.
    O32,
    /// Order four with an embedded third order solution.
    O43,
}

/// Exponential Rosenbrock integrator.
///
/// With `J = ∂F/∂y(tₙ, uₙ)`, `v = ∂F/∂t(tₙ, uₙ)` and the defects
/// `Dᵢ = F(tₙ + cᵢh, Uᵢ) − F(tₙ, uₙ) − J·(Uᵢ − uₙ) − cᵢh·v`:
///
/// * `32`: `U₂ = uₙ + hφ₁F + h²φ₂v`, `uₙ₊₁ = U₂ + 2hφ₃D₂`;
/// * `43`: `U₂ = uₙ + ½hφ₁(½hJ)F + ¼h²φ₂(½hJ)v`,
///   `U₃ = uₙ + hφ₁F + h²φ₂v + hφ₁D₂`,
///   `uₙ₊₁ = uₙ + hφ₁F + h²φ₂v + h(16φ₃ − 48φ₄)D₂ + h(−2φ₃ + 12φ₄)D₃`.
///
/// The error estimate is the difference to the embedded solution.
#[derive(Debug, Clone)]
pub struct Exprb {
    order: ExprbOrder,
    error_estimate: bool,
}

fn functions() -> Vec<PhiFn> {
    vec![
        PhiFn::unit(1),
        PhiFn::unit(2),
        PhiFn::unit(3),
        PhiFn::unit(4),
        PhiFn::new(1, 0.5),
        PhiFn::new(2, 0.5),
    ]
}

impl Exprb {
    pub fn new(order: ExprbOrder, error_estimate: bool) -> Self {
        Self { order, error_estimate }
    }

    pub fn from_options(options: &NormalizedOptions) -> Result<Self, ExpodeError> {
        let order = match options.list_value("Order") {
            Some(v) if v == 32.0 => ExprbOrder::O32,
            _ => ExprbOrder::O43,
        };
        let estimate = options.list_name("ErrorEstimate").as_deref() != Some("none");
        Ok(Self::new(order, estimate))
    }

    pub fn order(&self) -> ExprbOrder {
        self.order
    }

    pub(crate) fn job_table(&self) -> JobTable {
        let t = JobTable::new(functions());
        match self.order {
            ExprbOrder::O32 => t
                .job("F", vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]])
                .job("v", vec![vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]])
                .job("D2", vec![vec![0.0, 0.0, 2.0, 0.0, 0.0, 0.0]]),
            ExprbOrder::O43 => t
                .job(
                    "F",
                    vec![vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.0]],
                )
                .job(
                    "v",
                    vec![vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.25]],
                )
                .job(
                    "D2",
                    vec![
                        vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                        vec![0.0, 0.0, 16.0, -48.0, 0.0, 0.0],
                        vec![0.0, 0.0, 0.0, -48.0, 0.0, 0.0],
                    ],
                )
                .job(
                    "D3",
                    vec![vec![0.0, 0.0, -2.0, 12.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 12.0, 0.0, 0.0]],
                ),
        }
    }
}

/// `F(t + c·h, u) − F − J·(u − y) − c·h·v`.
fn defect<S: State>(
    ctx: &mut StepContext<'_, S>,
    jac: &dyn crate::matfun::LinearOperator<S>,
    t: f64,
    y: &DVector<S>,
    f: &DVector<S>,
    v: Option<&DVector<S>>,
    c: f64,
    h: f64,
    u: &DVector<S>,
) -> Result<DVector<S>, ExpodeError> {
    let fu = ctx.eval.eval_rhs(t + c * h, u)?;
    let mut d = fu - f - jac.apply(&(u - y))?;
    if let Some(v) = v {
        d -= v * S::lift(c * h);
    }
    Ok(d)
}

impl<S: State> Integrator<S> for Exprb {
    fn setup(&self) -> IntegratorSetup {
        let (order, error_order) = match self.order {
            ExprbOrder::O32 => (3, 3),
            ExprbOrder::O43 => (4, 4),
        };
        IntegratorSetup {
            name: "exprb".into(),
            order,
            error_order,
            multi_step: 1,
            semilin: false,
            constant_step: false,
            error_estimate: self.error_estimate,
            dense: DenseKind::None,
            job_functions: functions(),
        }
    }

    fn start(&mut self, ctx: &mut StepContext<'_, S>) -> Result<(), ExpodeError> {
        ctx.register_jobs(&self.job_table())
    }

    fn step(
        &mut self,
        ctx: &mut StepContext<'_, S>,
        t: f64,
        y: &DVector<S>,
        h: f64,
        reuse: bool,
    ) -> Result<StepResult<S>, ExpodeError> {
        let jac = ctx.jacobian_operator(t, y)?;
        ctx.init_step(jac.clone(), t, y, h)?;
        let f = ctx.current_f(t, y)?;
        let v = if ctx.nonautonomous {
            Some(ctx.df_dt(t, y)?)
        } else {
            None
        };
        let hs = S::lift(h);
        let h2 = S::lift(h * h);
        let pf = ctx.evaluate("F", &f, true, reuse, 1)?;
        let pv = match &v {
            Some(v) => Some(ctx.evaluate("v", v, true, reuse, 1)?),
            None => None,
        };
        // uₙ + hφ₁F + h²φ₂v, shared by both orders
        let mut base: DVector<S> = y + pf.column(0) * hs;
        if let Some(pv) = &pv {
            base += pv.column(0) * h2;
        }
        match self.order {
            ExprbOrder::O32 => {
                let d2 = defect(ctx, &*jac, t, y, &f, v.as_ref(), 1.0, h, &base)?;
                let corr = ctx.evaluate_vec("D2", &d2, false, false)? * hs;
                Ok(StepResult {
                    y_new: &base + &corr,
                    err: self.error_estimate.then_some(corr),
                    h_out: h,
                    dense: None,
                })
            }
            ExprbOrder::O43 => {
                let mut u2: DVector<S> = y + pf.column(1) * hs;
                if let Some(pv) = &pv {
                    u2 += pv.column(1) * h2;
                }
                let d2 = defect(ctx, &*jac, t, y, &f, v.as_ref(), 0.5, h, &u2)?;
                let p2 = ctx.evaluate("D2", &d2, false, false, 1)?;
                let u3: DVector<S> = &base + p2.column(0) * hs;
                let d3 = defect(ctx, &*jac, t, y, &f, v.as_ref(), 1.0, h, &u3)?;
                let p3 = ctx.evaluate("D3", &d3, false, false, 1)?;
                let y_new: DVector<S> = &base + (p2.column(1) + p3.column(0)) * hs;
                let err = self
                    .error_estimate
                    .then(|| (p2.column(2) + p3.column(1)) * hs);
                Ok(StepResult {
                    y_new,
                    err,
                    h_out: h,
                    dense: None,
                })
            }
        }
    }
}
