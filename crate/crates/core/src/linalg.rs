//! Small dense helpers. Matrices here are at most a few dozen rows.

use nalgebra::{Complex, DMatrix};

use crate::error::{Result, ShgError};
use crate::tree::PlayerId;

/// Own-action Hessians whose 2-norm condition estimate exceeds this are
/// treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number from the singular values (`inf` when singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        let v = m[(0, 0)];
        return if v != 0.0 && v.is_finite() { 1.0 } else { f64::INFINITY };
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `h · X = rhs` with a partially pivoted LU factorization, refusing
/// ill-conditioned `h`. `player` labels the error.
pub fn solve_checked(h: &DMatrix<f64>, rhs: &DMatrix<f64>, player: PlayerId) -> Result<DMatrix<f64>> {
    let condition = condition_number(h);
    if !(condition <= MAX_CONDITION) {
        return Err(ShgError::SingularHessian { player, condition });
    }
    if h.nrows() == 1 {
        return Ok(rhs / h[(0, 0)]);
    }
    h.clone().lu().solve(rhs).ok_or(ShgError::SingularHessian { player, condition: f64::INFINITY })
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![Complex::new(m[(0, 0)], 0.0)],
        _ => m.complex_eigenvalues().iter().copied().collect(),
    }
}

/// Eigenvalues of the symmetric part `(m + mᵀ)/2`, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let s = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn spectral_radius(eigs: &[Complex<f64>]) -> f64 {
    eigs.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_reject_singular() {
        let h = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -4.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[2.0, 4.0]);
        let x = solve_checked(&h, &rhs, PlayerId(1)).unwrap();
        assert_eq!(x.as_slice(), &[-1.0, -1.0]);

        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve_checked(&s, &rhs, PlayerId(1)), Err(ShgError::SingularHessian { .. })));
        let z = DMatrix::from_element(1, 1, 0.0);
        assert!(solve_checked(&z, &rhs.rows(0, 1).into_owned(), PlayerId(0)).is_err());
    }

    #[test]
    fn rotation_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut e = eigenvalues(&m);
        e.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((e[0].re).abs() < 1e-12 && (e[0].im + 1.0).abs() < 1e-12);
        assert!((e[1].im - 1.0).abs() < 1e-12);
    }
}
