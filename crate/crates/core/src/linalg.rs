//! Small dense helpers: matrix exponentials, Fréchet derivatives, numerical rank.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().exp()
}

pub fn expm_c(a: &CMatrix) -> CMatrix {
    a.clone().exp()
}

/// Returns `(exp(a), L(a, e))` where `L` is the Fréchet derivative of the
/// matrix exponential at `a` in direction `e`, read off the upper-right
/// block of `exp([[a, e], [0, a]])`.
pub fn expm_frechet(a: &DMatrix<f64>, e: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((n, n), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(e);
    let ex = big.exp();
    (
        ex.view((0, 0), (n, n)).into_owned(),
        ex.view((0, n), (n, n)).into_owned(),
    )
}

/// Numerical rank with a threshold relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max <= f64::MIN_POSITIVE {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = (rel_tol * max).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub fn complex_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn realify(v: &DVector<f64>) -> CVector {
    v.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frechet_matches_finite_differences() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, -0.1, -0.3, 0.0, 0.7, 0.1, -0.7, 0.0]);
        let e = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (ea, l) = expm_frechet(&a, &e);
        assert_relative_eq!(ea, expm(&a), epsilon = 1e-13);
        let h = 1e-6;
        let fd = (expm(&(&a + &e * h)) - expm(&(&a - &e * h))) / (2.0 * h);
        assert_relative_eq!(l, fd, epsilon = 1e-8);
    }

    #[test]
    fn rank_of_degenerate_matrix() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-9), 1);
        assert_eq!(rank(&DMatrix::zeros(3, 3), 1e-9), 0);
    }
}
