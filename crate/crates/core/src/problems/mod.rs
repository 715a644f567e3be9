//! Bundled test problems.
//!
//! Each problem comes from a factory taking named numeric parameters, so the
//! command line can address it as `--problem heat1d --param N=100,epsilon=0.1`.

mod heat1d;
mod minimal;
mod semi1;

use nalgebra::DMatrix;

pub use heat1d::heat1d;
pub use minimal::minimal_example;
pub use semi1::semi1;

use crate::error::ExpodeError;
use crate::model::OdeProblem;

/// A registered problem and its parameters with defaults.
#[derive(Debug, Clone, Copy)]
pub struct ProblemInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static [(&'static str, f64)],
}

pub const PROBLEMS: &[ProblemInfo] = &[
    ProblemInfo {
        name: "heat1d",
        summary: "heat equation with a time-dependent source on (0, 1)",
        params: &[("epsilon", 0.1), ("gamma", 0.1), ("N", 100.0)],
    },
    ProblemInfo {
        name: "semi1",
        summary: "semilinear reaction-diffusion equation with a known exact solution",
        params: &[("N", 50.0)],
    },
    ProblemInfo {
        name: "minimal",
        summary: "two-dimensional stiff example",
        params: &[],
    },
];

/// Parses `k=v[,k=v]`.
pub fn parse_params(spec: &str) -> Result<Vec<(String, f64)>, ExpodeError> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| ExpodeError::InvalidProblem(format!("expected name=value, found '{item}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| ExpodeError::InvalidProblem(format!("parameter {k}: '{v}' is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// Builds a registered problem; unknown parameter names are rejected.
pub fn build(name: &str, params: &[(String, f64)]) -> Result<OdeProblem, ExpodeError> {
    let info = PROBLEMS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| ExpodeError::UnknownProblem(name.to_string()))?;
    let mut values: Vec<(&str, f64)> = info.params.to_vec();
    for (k, v) in params {
        let slot = values
            .iter_mut()
            .find(|(n, _)| n.eq_ignore_ascii_case(k))
            .ok_or_else(|| ExpodeError::InvalidProblem(format!("problem '{}' has no parameter '{k}'", info.name)))?;
        slot.1 = *v;
    }
    let get = |n: &str| values.iter().find(|(k, _)| *k == n).map(|(_, v)| *v).expect("declared parameter");
    let index = |n: &str| -> Result<usize, ExpodeError> {
        let v = get(n);
        if v.fract() != 0.0 || v < 0.0 {
            return Err(ExpodeError::InvalidProblem(format!("parameter {n} must be a nonnegative integer, got {v}")));
        }
        Ok(v as usize)
    };
    match info.name {
        "heat1d" => heat1d(get("epsilon"), get("gamma"), index("N")?),
        "semi1" => semi1(index("N")?),
        _ => minimal_example(),
    }
}

/// Grid points `i/(N+1)`, `i = 1..=N`, and the matrix of the second
/// difference with homogeneous Dirichlet conditions.
pub(crate) fn laplacian(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let dx = 1.0 / (n + 1) as f64;
    let x = (1..=n).map(|i| i as f64 * dx).collect();
    let s = 1.0 / (dx * dx);
    let a = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * s,
        1 => s,
        _ => 0.0,
    });
    (x, a)
}

pub(crate) fn check_grid(n: usize) -> Result<(), ExpodeError> {
    if n < 3 {
        return Err(ExpodeError::InvalidProblem(format!("N must be at least 3, got {n}")));
    }
    Ok(())
}
