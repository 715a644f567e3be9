use nalgebra::DVector;

use crate::error::ExpodeError;
use crate::integrators::exp4_dense;
use crate::model::{DenseOutput, DenseRecord, Solution, State};

/// Cubic Hermite interpolation on one step: value and time derivative.
pub(crate) fn hermite<S: State>(
    y0: &DVector<S>,
    y1: &DVector<S>,
    f0: &DVector<S>,
    f1: &DVector<S>,
    h: f64,
    theta: f64,
) -> (DVector<S>, DVector<S>) {
    if theta == 0.0 {
        return (y0.clone(), f0.clone());
    }
    if theta == 1.0 {
        return (y1.clone(), f1.clone());
    }
    let (t2, t3) = (theta * theta, theta * theta * theta);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let y = y0 * S::lift(h00) + f0 * S::lift(h * h10) + y1 * S::lift(h01) + f1 * S::lift(h * h11);
    let d00 = 6.0 * t2 - 6.0 * theta;
    let d10 = 3.0 * t2 - 4.0 * theta + 1.0;
    let d01 = -d00;
    let d11 = 3.0 * t2 - 2.0 * theta;
    let dy = y0 * S::lift(d00 / h) + f0 * S::lift(d10) + y1 * S::lift(d01 / h) + f1 * S::lift(d11);
    (y, dy)
}

impl<S: State> DenseOutput<S> {
    /// Value and derivative of the interpolant at `t`.
    pub fn eval(&self, t: f64) -> Result<(DVector<S>, DVector<S>), ExpodeError> {
        let first = self.t[0];
        let last = *self.t.last().expect("dense output has nodes");
        let (lo, hi) = (first.min(last), first.max(last));
        if !(lo..=hi).contains(&t) || self.records.is_empty() {
            return Err(ExpodeError::OutsideInterval { t, lo, hi });
        }
        let dir = (last - first).signum();
        // index of the step containing t
        let i = self.t.partition_point(|&s| (s - t) * dir <= 0.0).clamp(1, self.records.len()) - 1;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let theta = if t == t1 { 1.0 } else { (t - t0) / h };
        let (y0, y1) = (&self.y[i], &self.y[i + 1]);
        Ok(match &self.records[i] {
            DenseRecord::Hermite { f0, f1 } => hermite(y0, y1, f0, f1, h, theta),
            DenseRecord::Exp4 { vectors } => exp4_dense(y0, y1, h, vectors, theta),
        })
    }
}

/// Evaluates the dense output of `sol` at the query times: values and
/// derivatives.
pub fn dense_eval<S: State>(
    sol: &Solution<S>,
    t_query: &[f64],
) -> Result<(Vec<DVector<S>>, Vec<DVector<S>>), ExpodeError> {
    let dense = sol
        .dense
        .as_ref()
        .ok_or(ExpodeError::DenseUnavailable("the run kept no dense output; set DOGenerator"))?;
    let mut ys = Vec::with_capacity(t_query.len());
    let mut ds = Vec::with_capacity(t_query.len());
    for &t in t_query {
        let (y, d) = dense.eval(t)?;
        ys.push(y);
        ds.push(d);
    }
    Ok((ys, ds))
}

/// Inserts `refine − 1` dense-output points inside every step of the natural
/// step grid.
pub fn refine_output<S: State>(sol: &Solution<S>, refine: usize) -> Result<Solution<S>, ExpodeError> {
    if refine <= 1 {
        return Ok(sol.clone());
    }
    let dense = sol
        .dense
        .as_ref()
        .ok_or(ExpodeError::DenseUnavailable("Refine > 1 needs a dense output generator"))?;
    let mut out = sol.clone();
    out.t.clear();
    out.y.clear();
    let nodes = dense.step_times();
    for i in 0..nodes.len() - 1 {
        out.t.push(nodes[i]);
        out.y.push(dense.y[i].clone());
        let h = nodes[i + 1] - nodes[i];
        for r in 1..refine {
            let t = nodes[i] + h * r as f64 / refine as f64;
            out.t.push(t);
            out.y.push(dense.eval(t)?.0);
        }
    }
    out.t.push(*nodes.last().expect("nodes"));
    out.y.push(dense.y.last().expect("nodes").clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let dp = |t: f64| -2.0 + 1.5 * t * t;
        let (a, b) = (0.3, 1.1);
        let v = |x: f64| DVector::from_vec(vec![x]);
        for &s in &[0.1, 0.5, 0.77] {
            let t = a + s * (b - a);
            let (y, d) = hermite(&v(p(a)), &v(p(b)), &v(dp(a)), &v(dp(b)), b - a, s);
            assert!((y[0] - p(t)).abs() < 1e-14);
            assert!((d[0] - dp(t)).abs() < 1e-13);
        }
    }
}
