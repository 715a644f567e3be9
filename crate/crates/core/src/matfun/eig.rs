use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::MatFunError;

/// `M = S·diag(λ)·S⁻¹`.
#[derive(Debug, Clone)]
pub(crate) struct Diagonalization {
    pub lambda: Vec<Complex64>,
    pub s: DMatrix<Complex64>,
    pub s_inv: DMatrix<Complex64>,
    /// 1-norm condition number of `S`.
    pub cond: f64,
}

impl Diagonalization {
    /// `S·diag(d)·(S⁻¹v)` given `w = S⁻¹v`.
    pub fn apply_weights(&self, d: &[Complex64], w: &nalgebra::DVector<Complex64>) -> nalgebra::DVector<Complex64> {
        let scaled = nalgebra::DVector::from_iterator(w.len(), w.iter().zip(d).map(|(a, b)| a * b));
        &self.s * scaled
    }
}

/// Largest acceptable eigenvector condition number.
pub(crate) fn cond_limit() -> f64 {
    1.0 / (100.0 * f64::EPSILON)
}

/// Diagonalizes `m`. Matrices that are Hermitian to within `herm_tol`
/// (relative, max-norm) are symmetrized and use the unitary eigensolver;
/// everything else goes through the complex Schur form.
pub(crate) fn diagonalize(m: &DMatrix<Complex64>, herm_tol: f64) -> Result<Diagonalization, MatFunError> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(MatFunError::Decomposition(format!(
            "matrix must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MatFunError::Decomposition("matrix has non-finite entries".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(Diagonalization {
            lambda: vec![Complex64::new(0.0, 0.0); n],
            s: DMatrix::identity(n, n),
            s_inv: DMatrix::identity(n, n),
            cond: 1.0,
        });
    }
    let asym = m
        .iter()
        .zip(m.adjoint().iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if asym <= herm_tol * scale {
        return hermitian(m);
    }
    general(m, scale)
}

fn hermitian(m: &DMatrix<Complex64>) -> Result<Diagonalization, MatFunError> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let n = sym.nrows();
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| MatFunError::Decomposition("symmetric eigensolver did not converge".into()))?;
    let s = eig.eigenvectors;
    let s_inv = s.adjoint();
    Ok(Diagonalization {
        lambda: eig.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)).collect(),
        s,
        s_inv,
        cond: if n > 0 { 1.0 } else { 0.0 },
    })
}

fn general(m: &DMatrix<Complex64>, scale: f64) -> Result<Diagonalization, MatFunError> {
    let n = m.nrows();
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| MatFunError::Decomposition("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let lambda: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();

    // Eigenvectors of the triangular factor by back substitution; tiny
    // denominators from (nearly) repeated eigenvalues are perturbed.
    let small = f64::EPSILON * scale;
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        x[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * x[(j, k)];
            }
            let mut d = t[(i, i)] - t[(k, k)];
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            x[(i, k)] = -acc / d;
        }
        let norm = x.column(k).norm();
        x.column_mut(k).unscale_mut(norm);
    }
    let s = q * x;
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| MatFunError::IllConditioned {
            cond: f64::INFINITY,
            limit: cond_limit(),
        })?;
    let cond = norm1(&s) * norm1(&s_inv);
    if !cond.is_finite() || cond > cond_limit() {
        return Err(MatFunError::IllConditioned {
            cond,
            limit: cond_limit(),
        });
    }
    Ok(Diagonalization { lambda, s, s_inv, cond })
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn reconstruct(d: &Diagonalization) -> DMatrix<Complex64> {
        let l = DMatrix::from_diagonal(&DVector::from_vec(d.lambda.clone()));
        &d.s * l * &d.s_inv
    }

    #[test]
    fn general_matrix_reconstructs() {
        let m = DMatrix::from_fn(5, 5, |i, j| Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, 0.0));
        let d = diagonalize(&m, 0.0).unwrap();
        assert!((reconstruct(&d) - &m).norm() < 1e-10 * m.norm());
    }

    #[test]
    fn hermitian_path_is_unitary() {
        let m = DMatrix::from_fn(4, 4, |i, j| Complex64::new(-((i as f64) - (j as f64)).abs(), 0.0));
        let d = diagonalize(&m, 1e-14).unwrap();
        assert_eq!(d.cond, 1.0);
        assert!((reconstruct(&d) - &m).norm() < 1e-12);
    }

    #[test]
    fn jordan_block_rejected() {
        let mut m = DMatrix::<Complex64>::zeros(3, 3);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        m[(1, 2)] = Complex64::new(1.0, 0.0);
        for i in 0..3 {
            m[(i, i)] = Complex64::new(-1.0, 0.0);
        }
        assert!(matches!(diagonalize(&m, 0.0), Err(MatFunError::IllConditioned { .. })));
    }
}
