use nalgebra::DVector;

use super::scheme::{RkScheme, SchemeFactory};
use super::{DenseKind, Integrator, IntegratorSetup, StepContext, StepResult};
use crate::error::ExpodeError;
use crate::matfun::JobTable;
use crate::model::State;
use crate::options::{NormValue, NormalizedOptions, OptionValue};
use crate::phi::PhiFn;

/// Exponential Runge–Kutta integrator for `y' = A·y + g(t, y)`.
///
/// Stage `i` is `Uᵢ = uₙ + h·Σⱼ aᵢⱼ(hA)·(g(tₙ + cⱼh, Uⱼ) + A·uₙ)` and the new
/// value uses the weights `bⱼ` in the same way. Each stage owns one job flag
/// `g{j}` whose rows are the coefficients of every later stage followed by
/// the weight `bⱼ`, so one evaluation per stage suffices.
#[derive(Debug, Clone)]
pub struct Exprk {
    scheme: RkScheme,
    c: Vec<f64>,
    functions: Vec<PhiFn>,
    /// Rows of flag `g{j}` and the stages they feed (`None` for the update).
    rows: Vec<Vec<(Option<usize>, Vec<f64>)>>,
}

impl Exprk {
    pub fn new(scheme: RkScheme) -> Result<Self, ExpodeError> {
        scheme.validate()?;
        let s = scheme.stages();
        let c = scheme.c();
        let p = scheme.max_phi();
        let mut scales: Vec<f64> = c.iter().copied().filter(|&x| x != 0.0 && x != 1.0).collect();
        scales.sort_by(f64::total_cmp);
        scales.dedup();
        scales.push(1.0);
        let functions: Vec<PhiFn> = scales
            .iter()
            .flat_map(|&sc| (1..=p).map(move |k| PhiFn::new(k, sc)))
            .collect();
        let column = |k: usize, scale: f64| {
            functions
                .iter()
                .position(|f| f.k == k && f.scale == scale)
                .expect("kernel registered")
        };
        let expand = |row: &[f64], scale: f64| {
            let mut out = vec![0.0; functions.len()];
            for (k, x) in row.iter().enumerate() {
                out[column(k + 1, scale)] += x;
            }
            out
        };
        let mut rows = Vec::with_capacity(s);
        for j in 1..=s {
            let mut flag_rows = Vec::new();
            for i in j + 1..=s {
                let a = scheme.a(i, j);
                if a.iter().any(|x| *x != 0.0) {
                    flag_rows.push((Some(i), expand(a, c[i - 1])));
                }
            }
            let b = scheme.b(j);
            if b.iter().any(|x| *x != 0.0) {
                flag_rows.push((None, expand(b, 1.0)));
            }
            rows.push(flag_rows);
        }
        Ok(Self {
            scheme,
            c,
            functions,
            rows,
        })
    }

    pub fn from_options(options: &NormalizedOptions) -> Result<Self, ExpodeError> {
        let scheme = if let Some(h) = options.handle("Scheme") {
            let factory = h.downcast_ref::<SchemeFactory>().ok_or_else(|| {
                ExpodeError::Scheme(format!("function handle '{}' is not a scheme factory", h.name()))
            })?;
            let params = match options.get("Parameters") {
                Some(NormValue::Struct(v)) => v.clone(),
                Some(NormValue::Num(a)) => OptionValue::Num(a.clone()),
                Some(NormValue::Text(s)) => OptionValue::Text(s.clone()),
                _ => OptionValue::Empty,
            };
            factory(&params)?
        } else {
            let name = options.list_name("Scheme").unwrap_or_else(|| "krogstad".into());
            RkScheme::bundled(&name)?
        };
        Self::new(scheme)
    }

    pub fn scheme(&self) -> &RkScheme {
        &self.scheme
    }

    fn job_table(&self) -> JobTable {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_empty())
            .fold(JobTable::new(self.functions.clone()), |t, (j, r)| {
                t.job(format!("g{}", j + 1), r.iter().map(|(_, row)| row.clone()).collect())
            })
    }

    fn order(&self) -> usize {
        match self.scheme.name() {
            "euler" => 1,
            "exprk22" => 2,
            "krogstad" => 4,
            _ => self.scheme.max_phi(),
        }
    }
}

impl<S: State> Integrator<S> for Exprk {
    fn setup(&self) -> IntegratorSetup {
        let order = self.order();
        IntegratorSetup {
            name: "exprk".into(),
            order,
            error_order: order,
            multi_step: 1,
            semilin: true,
            constant_step: true,
            error_estimate: false,
            dense: DenseKind::None,
            job_functions: self.functions.clone(),
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
        let s = self.scheme.stages();
        let op = ctx.lin_op_operator()?;
        ctx.init_step(op.clone(), t, y, h)?;
        let ay = op.apply(y)?;
        let n = y.len();
        let hs = S::lift(h);
        let mut acc: Vec<DVector<S>> = vec![DVector::zeros(n); s + 1];
        for j in 1..=s {
            if self.rows[j - 1].is_empty() {
                continue;
            }
            let v = if j == 1 {
                ctx.current_g(t, y)? + &ay
            } else {
                let u = y + &acc[j - 1] * hs;
                ctx.g(t + self.c[j - 1] * h, &u)? + &ay
            };
            let first = j == 1;
            let res = ctx.evaluate(&format!("g{j}"), &v, first, reuse && first, 1)?;
            for (col, (target, _)) in self.rows[j - 1].iter().enumerate() {
                let slot = target.map_or(s, |i| i - 1);
                acc[slot] += res.column(col);
            }
        }
        Ok(StepResult {
            y_new: y + &acc[s] * hs,
            err: None,
            h_out: h,
            dense: None,
        })
    }
}
