//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::linalg::SymmetricEigen;

use crate::{CMat, CVec, Error, Result, C64};

/// Bilinear (non-conjugating) product `aᵀ b`.
pub fn dot_t(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in the
/// order nalgebra produces them, paired column-wise with the unitary factor.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    // Symmetrize first: assembled blocks are Hermitian only up to rounding.
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok((vals, eig.eigenvectors))
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: CMat, b: &CVec) -> Result<CVec> {
    let n = a.nrows();
    if n == 0 {
        return Ok(CVec::zeros(0));
    }
    a.lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| Error::Numeric(format!("singular {n}x{n} system")))
}

/// Outer product `conj(b) bᵀ`, the Gram matrix of a single effective response.
pub fn conj_outer(b: &CVec) -> CMat {
    let bc = b.map(|v| v.conj());
    &bc * b.transpose()
}

/// Largest absolute entry of a complex slice.
pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_reconstructs_hermitian() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(3.0, 0.0),
            ],
        );
        let (vals, vecs) = hermitian_eigen(&m).unwrap();
        let d = CMat::from_diagonal(&CVec::from_iterator(2, vals.iter().map(|&v| C64::new(v, 0.0))));
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn solve_rejects_singular() {
        let a = CMat::zeros(2, 2);
        assert!(solve(a, &CVec::from_element(2, C64::new(1.0, 0.0))).is_err());
    }
}
