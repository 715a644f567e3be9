//! Explicit exponential Runge–Kutta schemes.
//!
//! A scheme with `s` stages stores nodes `c` and coefficient rows: entry `k`
//! of the row `a(i, j)` multiplies `φₖ₊₁(cᵢ·hA)`, entry `k` of `b(i)`
//! multiplies `φₖ₊₁(hA)`. Stages are numbered from 1.

use std::sync::Arc;

use crate::error::ExpodeError;
use crate::options::{FunctionHandle, OptionValue};

/// Names accepted by the `Scheme` option.
pub const BUNDLED_SCHEMES: &[&str] = &["euler", "exprk22", "krogstad"];

/// Longest coefficient row, i.e. the largest φ index a scheme may use.
pub const MAX_ROW_LEN: usize = 4;

/// One modification of a scheme under construction.
#[derive(Debug, Clone, PartialEq)]
pub enum StageEdit {
    /// Sets `a(i, j)`, stages counted from 1.
    A { i: usize, j: usize, row: Vec<f64> },
    /// Sets `b(i)`.
    B { i: usize, row: Vec<f64> },
    /// Sets all nodes.
    C(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RkScheme {
    name: String,
    s: usize,
    c: Option<Vec<f64>>,
    a: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
}

impl RkScheme {
    /// An empty scheme with `s` stages.
    pub fn new(s: usize) -> Result<Self, ExpodeError> {
        if s == 0 {
            return Err(ExpodeError::Scheme("a scheme needs at least one stage".into()));
        }
        Ok(Self {
            name: "custom".into(),
            s,
            c: None,
            a: vec![vec![Vec::new(); s]; s],
            b: vec![Vec::new(); s],
        })
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(mut self, edit: StageEdit) -> Result<Self, ExpodeError> {
        match edit {
            StageEdit::A { i, j, row } => {
                self.check_stage(i)?;
                self.check_stage(j)?;
                if j >= i {
                    return Err(ExpodeError::Scheme(format!(
                        "a({i}, {j}) would make the scheme implicit; only explicit schemes (j < i) are supported"
                    )));
                }
                check_row(&row)?;
                self.a[i - 1][j - 1] = row;
            }
            StageEdit::B { i, row } => {
                self.check_stage(i)?;
                check_row(&row)?;
                self.b[i - 1] = row;
            }
            StageEdit::C(c) => {
                if c.len() != self.s {
                    return Err(ExpodeError::Scheme(format!(
                        "{} nodes given for a {}-stage scheme",
                        c.len(),
                        self.s
                    )));
                }
                if c[0] != 0.0 {
                    return Err(ExpodeError::Scheme("the first node must be 0".into()));
                }
                self.c = Some(c);
            }
        }
        Ok(self)
    }

    pub fn a_entry(self, i: usize, j: usize, row: &[f64]) -> Result<Self, ExpodeError> {
        self.apply(StageEdit::A { i, j, row: row.to_vec() })
    }

    pub fn b_entry(self, i: usize, row: &[f64]) -> Result<Self, ExpodeError> {
        self.apply(StageEdit::B { i, row: row.to_vec() })
    }

    pub fn nodes(self, c: &[f64]) -> Result<Self, ExpodeError> {
        self.apply(StageEdit::C(c.to_vec()))
    }

    fn check_stage(&self, i: usize) -> Result<(), ExpodeError> {
        if i == 0 || i > self.s {
            return Err(ExpodeError::Scheme(format!("stage {i} outside 1..={}", self.s)));
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.s
    }

    /// Nodes; without explicit nodes `cᵢ` is the sum of the φ₁ coefficients
    /// of row `i`, which is what consistency requires.
    pub fn c(&self) -> Vec<f64> {
        match &self.c {
            Some(c) => c.clone(),
            None => self
                .a
                .iter()
                .map(|row| row.iter().map(|e| e.first().copied().unwrap_or(0.0)).sum())
                .collect(),
        }
    }

    /// Row `a(i, j)`, stages counted from 1. Empty means zero.
    pub fn a(&self, i: usize, j: usize) -> &[f64] {
        &self.a[i - 1][j - 1]
    }

    pub fn b(&self, i: usize) -> &[f64] {
        &self.b[i - 1]
    }

    /// Longest coefficient row.
    pub fn max_phi(&self) -> usize {
        self.a
            .iter()
            .flatten()
            .chain(self.b.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0)
            .max(1)
    }

    /// Checks that the weights are set and sum to φ₁.
    pub fn validate(&self) -> Result<(), ExpodeError> {
        if self.b.iter().all(Vec::is_empty) {
            return Err(ExpodeError::Scheme("the weights b are not set".into()));
        }
        let mut sum = vec![0.0; self.max_phi()];
        for row in &self.b {
            for (k, x) in row.iter().enumerate() {
                sum[k] += x;
            }
        }
        let consistent = (sum[0] - 1.0).abs() < 1e-12 && sum[1..].iter().all(|x| x.abs() < 1e-12);
        if !consistent {
            return Err(ExpodeError::Scheme(format!(
                "the weights sum to {sum:?} over (phi1, phi2, ...), expected phi1"
            )));
        }
        Ok(())
    }

    /// Exponential Euler.
    pub fn euler() -> Self {
        Self::new(1).unwrap().named("euler").b_entry(1, &[1.0]).unwrap()
    }

    /// Second order scheme with nodes 0 and 1.
    pub fn exprk22() -> Self {
        Self::new(2)
            .unwrap()
            .named("exprk22")
            .nodes(&[0.0, 1.0])
            .unwrap()
            .a_entry(2, 1, &[1.0])
            .unwrap()
            .b_entry(1, &[1.0, -1.0])
            .unwrap()
            .b_entry(2, &[0.0, 1.0])
            .unwrap()
    }

    /// Krogstad's fourth order scheme.
    pub fn krogstad() -> Self {
        rk_scheme_build(
            4,
            &[
                StageEdit::C(vec![0.0, 0.5, 0.5, 1.0]),
                StageEdit::A { i: 2, j: 1, row: vec![0.5] },
                StageEdit::A { i: 3, j: 1, row: vec![0.5, -1.0] },
                StageEdit::A { i: 3, j: 2, row: vec![0.0, 1.0] },
                StageEdit::A { i: 4, j: 1, row: vec![1.0, -2.0] },
                StageEdit::A { i: 4, j: 3, row: vec![0.0, 2.0] },
                StageEdit::B { i: 1, row: vec![1.0, -3.0, 4.0] },
                StageEdit::B { i: 2, row: vec![0.0, 2.0, -4.0] },
                StageEdit::B { i: 3, row: vec![0.0, 2.0, -4.0] },
                StageEdit::B { i: 4, row: vec![0.0, -1.0, 4.0] },
            ],
        )
        .unwrap()
        .named("krogstad")
    }

    /// A bundled scheme by name.
    pub fn bundled(name: &str) -> Result<Self, ExpodeError> {
        match name.to_ascii_lowercase().as_str() {
            "euler" => Ok(Self::euler()),
            "exprk22" => Ok(Self::exprk22()),
            "krogstad" => Ok(Self::krogstad()),
            other => Err(ExpodeError::Scheme(format!(
                "unknown scheme '{other}', bundled schemes are {}",
                BUNDLED_SCHEMES.join(", ")
            ))),
        }
    }
}

fn check_row(row: &[f64]) -> Result<(), ExpodeError> {
    if row.len() > MAX_ROW_LEN {
        return Err(ExpodeError::Scheme(format!(
            "coefficient row of length {} exceeds the maximum of {MAX_ROW_LEN} (phi1..phi4)",
            row.len()
        )));
    }
    if row.iter().any(|x| !x.is_finite()) {
        return Err(ExpodeError::Scheme("coefficients must be finite".into()));
    }
    Ok(())
}

/// Builds an `s`-stage scheme from a list of edits.
pub fn rk_scheme_build(s: usize, edits: &[StageEdit]) -> Result<RkScheme, ExpodeError> {
    edits.iter().cloned().try_fold(RkScheme::new(s)?, RkScheme::apply)
}

/// A scheme constructor for the `Scheme` option; it receives the
/// `Parameters` option value.
pub type SchemeFactory = Arc<dyn Fn(&OptionValue) -> Result<RkScheme, ExpodeError> + Send + Sync>;

/// Wraps a scheme factory as a `Scheme` option value.
pub fn scheme_handle(
    name: &str,
    factory: impl Fn(&OptionValue) -> Result<RkScheme, ExpodeError> + Send + Sync + 'static,
) -> FunctionHandle {
    let f: SchemeFactory = Arc::new(factory);
    FunctionHandle::new(name, f)
}

/// Wraps a fixed scheme as a `Scheme` option value.
pub fn fixed_scheme_handle(scheme: RkScheme) -> FunctionHandle {
    let name = scheme.name().to_string();
    scheme_handle(&name, move |_| Ok(scheme.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_entry_rejected() {
        let err = RkScheme::new(4).unwrap().a_entry(2, 3, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("implicit"));
        assert!(RkScheme::new(4).unwrap().a_entry(2, 2, &[1.0]).is_err());
        assert!(RkScheme::new(2).unwrap().b_entry(1, &[1.0; 5]).is_err());
        assert!(RkScheme::new(2).unwrap().b_entry(3, &[1.0]).is_err());
    }

    #[test]
    fn derived_nodes_match_krogstad() {
        let k = RkScheme::krogstad();
        let mut derived = k.clone();
        derived.c = None;
        assert_eq!(derived.c(), vec![0.0, 0.5, 0.5, 1.0]);
        assert!(k.validate().is_ok());
        assert!(RkScheme::euler().validate().is_ok());
        assert!(RkScheme::exprk22().validate().is_ok());
    }

    #[test]
    fn inconsistent_weights_rejected() {
        let s = RkScheme::new(1).unwrap().b_entry(1, &[0.5]).unwrap();
        assert!(s.validate().is_err());
    }
}
