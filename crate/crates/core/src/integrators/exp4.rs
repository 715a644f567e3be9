use nalgebra::DVector;

use super::{DenseKind, Integrator, IntegratorSetup, StepContext, StepResult};
use crate::error::ExpodeError;
use crate::matfun::{JobTable, LinearOperator};
use crate::model::State;
use crate::phi::PhiFn;

/// The exp4 integrator: seven φ₁ products at the three arguments `j·h/3·J`,
/// an embedded third order solution for step control, and its own dense
/// output built from `F(tₙ, uₙ)` and the seven stage vectors.
#[derive(Debug, Clone, Default)]
pub struct Exp4;

impl Exp4 {
    pub fn new() -> Self {
        Self
    }

    pub(crate) fn job_table() -> JobTable {
        JobTable::new(vec![PhiFn::unit(1), PhiFn::unit(2)])
            .job("f", vec![vec![1.0, 0.0]])
            .job("v", vec![vec![0.0, 1.0]])
            .job("d", vec![vec![1.0, 0.0]])
    }
}

const W4: [f64; 3] = [-7.0 / 300.0, 97.0 / 150.0, -37.0 / 300.0];
const W7: [f64; 3] = [59.0 / 300.0, -7.0 / 75.0, 269.0 / 300.0];

#[allow(clippy::too_many_arguments)]
fn defect<S: State>(
    ctx: &mut StepContext<'_, S>,
    jac: &dyn LinearOperator<S>,
    t: f64,
    f: &DVector<S>,
    v: Option<&DVector<S>>,
    c: f64,
    h: f64,
    y: &DVector<S>,
    w: &DVector<S>,
) -> Result<DVector<S>, ExpodeError> {
    let hw = w * S::lift(h);
    let fu = ctx.eval.eval_rhs(t + c * h, &(y + &hw))?;
    let mut d = fu - f - jac.apply(&hw)?;
    if let Some(v) = v {
        d -= v * S::lift(c * h);
    }
    Ok(d)
}

impl<S: State> Integrator<S> for Exp4 {
    fn setup(&self) -> IntegratorSetup {
        IntegratorSetup {
            name: "exp4".into(),
            order: 4,
            error_order: 4,
            multi_step: 1,
            semilin: false,
            constant_step: false,
            error_estimate: true,
            dense: DenseKind::Exp4,
            job_functions: vec![PhiFn::unit(1), PhiFn::unit(2)],
        }
    }

    fn start(&mut self, ctx: &mut StepContext<'_, S>) -> Result<(), ExpodeError> {
        ctx.register_jobs(&Self::job_table())
    }

    fn step(
        &mut self,
        ctx: &mut StepContext<'_, S>,
        t: f64,
        y: &DVector<S>,
        h: f64,
        reuse: bool,
    ) -> Result<StepResult<S>, ExpodeError> {
        let h3 = h / 3.0;
        let jac = ctx.jacobian_operator(t, y)?;
        ctx.init_step(jac.clone(), t, y, h3)?;
        let f = ctx.current_f(t, y)?;
        let v = if ctx.nonautonomous {
            Some(ctx.df_dt(t, y)?)
        } else {
            None
        };
        let pf = ctx.evaluate("f", &f, true, reuse, 3)?;
        let mut k: Vec<DVector<S>> = (0..3).map(|j| pf.column(j).into_owned()).collect();
        if let Some(v) = &v {
            let pv = ctx.evaluate("v", v, true, reuse, 3)?;
            for (j, kj) in k.iter_mut().enumerate() {
                *kj += pv.column(j) * S::lift((j + 1) as f64 * h3);
            }
        }
        let combine = |k: &[DVector<S>], w: &[f64]| -> DVector<S> {
            k.iter()
                .zip(w)
                .fold(DVector::zeros(y.len()), |acc, (kj, wj)| acc + kj * S::lift(*wj))
        };

        let w4 = combine(&k, &W4);
        let d4 = defect(ctx, &*jac, t, &f, v.as_ref(), 0.5, h, y, &w4)?;
        let pd = ctx.evaluate("d", &d4, false, false, 3)?;
        k.extend((0..3).map(|j| pd.column(j).into_owned()));

        let mut w7 = combine(&k[..3], &W7);
        w7 += (&k[3] + &k[4] + &k[5]) * S::lift(2.0 / 3.0);
        let d7 = defect(ctx, &*jac, t, &f, v.as_ref(), 1.0, h, y, &w7)?;
        k.push(ctx.evaluate_vec("d", &d7, false, false)?);

        let hs = S::lift(h);
        let incr = combine(&k, &[0.0, 0.0, 1.0, 1.0, -4.0 / 3.0, 1.0, 1.0 / 6.0]);
        let err = combine(&k, &[0.0, 0.0, 0.0, 1.5, -2.0 / 3.0, 0.5, -1.0 / 3.0]) * hs;
        let mut dense = Vec::with_capacity(8);
        dense.push(f);
        dense.extend(k);
        Ok(StepResult {
            y_new: y + incr * hs,
            err: Some(err),
            h_out: h,
            dense: Some(dense),
        })
    }
}

/// Dense output between `(t, y0)` and `(t + h, y1)` at `θ ∈ [0, 1]`.
///
/// `vectors` is `[F(t, y0), k₁, …, k₇]`. A quartic `ψ` with `ψ(0) = 0`,
/// `ψ'(0) = F` and `ψ(j/3) = j/3·kⱼ` carries the linear part; the
/// remaining increment is blended in by `θ²(3 − 2θ)`. Returns the value and
/// its time derivative.
pub(crate) fn exp4_dense<S: State>(
    y0: &DVector<S>,
    y1: &DVector<S>,
    h: f64,
    vectors: &[DVector<S>],
    theta: f64,
) -> (DVector<S>, DVector<S>) {
    if theta == 0.0 {
        return (y0.clone(), vectors[0].clone());
    }
    let f0 = &vectors[0];
    let nodes = [1.0 / 3.0, 2.0 / 3.0, 1.0];
    // r(θ) = (ψ(θ) − θ·F)/θ², a quadratic through the three stage values
    let r: Vec<DVector<S>> = (0..3)
        .map(|j| (&vectors[j + 1] - f0) * S::lift(1.0 / nodes[j]))
        .collect();
    let mut rv = DVector::zeros(y0.len());
    let mut rd = DVector::zeros(y0.len());
    for j in 0..3 {
        let others: Vec<f64> = (0..3).filter(|&i| i != j).map(|i| nodes[i]).collect();
        let denom = (nodes[j] - others[0]) * (nodes[j] - others[1]);
        let l = (theta - others[0]) * (theta - others[1]) / denom;
        let dl = (2.0 * theta - others[0] - others[1]) / denom;
        rv += &r[j] * S::lift(l);
        rd += &r[j] * S::lift(dl);
    }
    let psi = f0 * S::lift(theta) + &rv * S::lift(theta * theta);
    let dpsi = f0 + rv * S::lift(2.0 * theta) + rd * S::lift(theta * theta);
    let rest = y1 - y0 - &vectors[3] * S::lift(h);
    let q = theta * theta * (3.0 - 2.0 * theta);
    let dq = 6.0 * theta * (1.0 - theta);
    if theta == 1.0 {
        return (y1.clone(), dpsi + rest * S::lift(dq / h));
    }
    let y = y0 + psi * S::lift(h) + &rest * S::lift(q);
    let dy = dpsi + rest * S::lift(dq / h);
    (y, dy)
}
