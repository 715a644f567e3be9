//! Scalar φ-functions and the exponential Adams weights built from them.
//!
//! φ₀(z) = eᶻ and φₖ₊₁(z) = (φₖ(z) − 1/k!)/z, with φₖ(0) = 1/k!. Every
//! matrix-function backend reduces to these scalar kernels, either on the
//! eigenvalues of the operator or on the eigenvalues of a small Krylov
//! projection.

use num_complex::Complex64;

use crate::error::ExpodeError;

/// Largest φ index supported by [`phi`].
pub const MAX_PHI_INDEX: usize = 8;

/// Largest exponential Adams weight index supported by [`gamma_weight`].
pub const MAX_GAMMA_INDEX: usize = 6;

// Above this modulus the forward recurrence from eᶻ is well conditioned for
// every k ≤ MAX_PHI_INDEX.
const RECURRENCE_RADIUS: f64 = 20.0;

// Taylor series are only summed for |z| ≤ this after scaling.
const TAYLOR_RADIUS: f64 = 0.5;

const TAYLOR_TERMS: usize = 22;

const FACTORIALS: [f64; 32] = {
    let mut f = [1.0; 32];
    let mut i = 1;
    while i < 32 {
        f[i] = f[i - 1] * i as f64;
        i += 1;
    }
    f
};

/// `1/k!` as a float.
#[inline]
pub fn inv_factorial(k: usize) -> f64 {
    1.0 / FACTORIALS[k]
}

/// A scalar kernel `z ↦ φₖ(scale·z)`, the unit from which job tables are built.
///
/// The scale lets one kernel list mix arguments such as `h·M` and `h/2·M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiFn {
    pub k: usize,
    pub scale: f64,
}

impl PhiFn {
    pub const fn new(k: usize, scale: f64) -> Self {
        Self { k, scale }
    }

    /// φₖ at unit scale.
    pub const fn unit(k: usize) -> Self {
        Self { k, scale: 1.0 }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        phi_all(self.k, z * self.scale)[self.k]
    }
}

impl std::fmt::Display for PhiFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.scale == 1.0 {
            write!(f, "phi{}", self.k)
        } else {
            write!(f, "phi{}(.*{})", self.k, self.scale)
        }
    }
}

/// φₖ(z) for a real argument.
pub fn phi(k: usize, z: f64) -> Result<f64, ExpodeError> {
    check_phi_index(k)?;
    Ok(phi_all(k, Complex64::new(z, 0.0))[k].re)
}

/// φₖ(z) for a complex argument.
pub fn phi_complex(k: usize, z: Complex64) -> Result<Complex64, ExpodeError> {
    check_phi_index(k)?;
    Ok(phi_all(k, z)[k])
}

fn check_phi_index(k: usize) -> Result<(), ExpodeError> {
    if k > MAX_PHI_INDEX {
        return Err(ExpodeError::OutOfRange {
            what: "phi index",
            value: k,
            max: MAX_PHI_INDEX,
        });
    }
    Ok(())
}

/// Returns `[φ₀(z), …, φ_kmax(z)]`.
///
/// Large arguments use the forward recurrence, which is stable once |z|
/// dominates k. Everything else is computed by scaling and squaring: a
/// Taylor series at z/2ˢ followed by s applications of
/// φₖ(2z) = 2⁻ᵏ [φ₀(z)φₖ(z) + Σⱼ₌₁ᵏ φⱼ(z)/(k−j)!].
pub fn phi_all(kmax: usize, z: Complex64) -> Vec<Complex64> {
    debug_assert!(kmax <= MAX_PHI_INDEX);
    let r = z.norm();
    if !r.is_finite() {
        return vec![Complex64::new(f64::NAN, f64::NAN); kmax + 1];
    }
    if r > RECURRENCE_RADIUS {
        let mut out = Vec::with_capacity(kmax + 1);
        out.push(z.exp());
        for k in 0..kmax {
            let next = (out[k] - inv_factorial(k)) / z;
            out.push(next);
        }
        return out;
    }

    let mut s = 0u32;
    let mut scaled = z;
    while scaled.norm() > TAYLOR_RADIUS {
        scaled /= 2.0;
        s += 1;
    }
    let mut vals: Vec<Complex64> = (0..=kmax).map(|k| taylor(k, scaled)).collect();
    for _ in 0..s {
        let mut doubled = Vec::with_capacity(kmax + 1);
        doubled.push(vals[0] * vals[0]);
        for k in 1..=kmax {
            let mut acc = vals[0] * vals[k];
            for j in 1..=k {
                acc += vals[j] * inv_factorial(k - j);
            }
            doubled.push(acc / 2f64.powi(k as i32));
        }
        vals = doubled;
    }
    vals
}

// Σₘ zᵐ/(m+k)!, Horner form.
fn taylor(k: usize, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(inv_factorial(k + TAYLOR_TERMS), 0.0);
    for m in (0..TAYLOR_TERMS).rev() {
        acc = acc * z + inv_factorial(k + m);
    }
    acc
}

// Unsigned Stirling numbers of the first kind c(j, m), i.e. the monomial
// coefficients of the rising factorial θ(θ+1)…(θ+j−1).
const fn stirling_first(j: usize, m: usize) -> u64 {
    let mut table = [[0u64; MAX_GAMMA_INDEX + 1]; MAX_GAMMA_INDEX + 1];
    table[0][0] = 1;
    let mut n = 1;
    while n <= MAX_GAMMA_INDEX {
        let mut k = 1;
        while k <= n {
            table[n][k] = table[n - 1][k - 1] + (n as u64 - 1) * table[n - 1][k];
            k += 1;
        }
        n += 1;
    }
    table[j][m]
}

/// Coefficients of γⱼ over φ₁, …, φⱼ₊₁: `γⱼ = Σₘ c[m]·φₘ₊₁`.
///
/// Expanding (−1)ʲ·C(−θ, j) = θ(θ+1)…(θ+j−1)/j! in monomials and using
/// ∫₀¹ e^{(1−θ)z} θᵐ dθ = m!·φₘ₊₁(z) gives c[m] = c(j,m)·m!/j!, which is
/// an exact ratio of small integers.
pub fn gamma_coefficients(j: usize) -> Result<Vec<f64>, ExpodeError> {
    if j > MAX_GAMMA_INDEX {
        return Err(ExpodeError::OutOfRange {
            what: "gamma weight index",
            value: j,
            max: MAX_GAMMA_INDEX,
        });
    }
    if j == 0 {
        return Ok(vec![1.0]);
    }
    Ok((0..=j)
        .map(|m| stirling_first(j, m) as f64 * FACTORIALS[m] / FACTORIALS[j])
        .collect())
}

/// γⱼ(z) = (−1)ʲ ∫₀¹ e^{(1−θ)z} C(−θ, j) dθ.
pub fn gamma_weight(j: usize, z: f64) -> Result<f64, ExpodeError> {
    let coeffs = gamma_coefficients(j)?;
    let phis = phi_all(j + 1, Complex64::new(z, 0.0));
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| c * phis[m + 1].re)
        .sum())
}

/// Σᵢ coeffs[i]·φ_{kᵢ}(scaleᵢ·z).
pub fn phi_combo(coeffs: &[f64], funs: &[PhiFn], z: Complex64) -> Result<Complex64, ExpodeError> {
    if coeffs.len() != funs.len() {
        return Err(ExpodeError::DimensionMismatch {
            what: "phi combination coefficients",
            expected: funs.len(),
            found: coeffs.len(),
        });
    }
    for f in funs {
        check_phi_index(f.k)?;
    }
    Ok(coeffs
        .iter()
        .zip(funs)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, f)| f.eval(z) * *c)
        .sum())
}

/// Evaluates every kernel of `funs` at `z`, sharing work between kernels with
/// the same scale.
pub fn eval_kernels(funs: &[PhiFn], z: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); funs.len()];
    let mut done = vec![false; funs.len()];
    for i in 0..funs.len() {
        if done[i] {
            continue;
        }
        let scale = funs[i].scale;
        let kmax = funs
            .iter()
            .filter(|f| f.scale == scale)
            .map(|f| f.k)
            .max()
            .unwrap_or(0);
        let vals = phi_all(kmax, z * scale);
        for (j, f) in funs.iter().enumerate() {
            if f.scale == scale {
                out[j] = vals[f.k];
                done[j] = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero_are_inverse_factorials() {
        assert_eq!(phi(0, 0.0).unwrap(), 1.0);
        assert_eq!(phi(1, 0.0).unwrap(), 1.0);
        assert_eq!(phi(2, 0.0).unwrap(), 0.5);
        assert_eq!(phi(3, 0.0).unwrap(), 1.0 / 6.0);
        assert_eq!(phi(4, 0.0).unwrap(), 1.0 / 24.0);
    }

    #[test]
    fn phi1_at_one() {
        let e = std::f64::consts::E;
        assert!((phi(1, 1.0).unwrap() - (e - 1.0)).abs() <= 1e-15 * e);
    }

    #[test]
    fn index_out_of_range() {
        assert!(phi(MAX_PHI_INDEX + 1, 0.3).is_err());
        assert!(gamma_weight(MAX_GAMMA_INDEX + 1, 0.3).is_err());
    }

    #[test]
    fn gamma_low_orders_match_phi() {
        for &z in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            assert_eq!(gamma_weight(0, z).unwrap(), phi(1, z).unwrap());
            assert!((gamma_weight(1, z).unwrap() - phi(2, z).unwrap()).abs() < 1e-15);
            let g2 = phi(3, z).unwrap() + 0.5 * phi(2, z).unwrap();
            assert!((gamma_weight(2, z).unwrap() - g2).abs() < 1e-15);
        }
    }

    #[test]
    fn combo_examples() {
        let funs = [PhiFn::unit(1), PhiFn::unit(2), PhiFn::unit(3)];
        let v = phi_combo(&[1.0, -3.0, 4.0], &funs, Complex64::new(0.0, 0.0)).unwrap();
        assert!((v.re - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(phi_combo(&[], &[], Complex64::new(2.0, 0.0)).unwrap(), Complex64::new(0.0, 0.0));
        let z = Complex64::new(-1.3, 0.4);
        let half = phi_combo(&[1.0], &[PhiFn::new(1, 0.5)], z).unwrap();
        assert!((half - phi_complex(1, z / 2.0).unwrap()).norm() < 1e-16);
        assert!(phi_combo(&[1.0, 2.0], &funs, z).is_err());
    }

    #[test]
    fn kernels_share_scales() {
        let funs = [
            PhiFn::unit(1),
            PhiFn::unit(4),
            PhiFn::new(1, 0.5),
            PhiFn::new(2, 0.5),
        ];
        let z = Complex64::new(-7.5, 2.0);
        let vals = eval_kernels(&funs, z);
        for (f, v) in funs.iter().zip(&vals) {
            assert_eq!(*v, f.eval(z));
        }
    }
}
