//! Dense row-major helpers for the small matrices of the filter.

use nalgebra::{DMatrix, SymmetricEigen};

/// `out = a · b` with `a: n×k`, `b: k×p`.
pub(crate) fn mul(a: &[f64], b: &[f64], n: usize, k: usize, p: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..p {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[l * p + j];
            }
            out[i * p + j] = s;
        }
    }
}

/// `out = a · bᵀ` with `a: n×k`, `b: p×k`.
pub(crate) fn mul_bt(a: &[f64], b: &[f64], n: usize, k: usize, p: usize, out: &mut [f64]) {
    for i in 0..n {
        for j in 0..p {
            let mut s = 0.0;
            for l in 0..k {
                s += a[i * k + l] * b[j * k + l];
            }
            out[i * p + j] = s;
        }
    }
}

pub(crate) fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

pub(crate) fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub(crate) fn sym_eig_range(a: &[f64], n: usize) -> (f64, f64) {
    match n {
        0 => (0.0, 0.0),
        1 => (a[0], a[0]),
        2 => {
            let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
            let mid = 0.5 * (p + r);
            let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            (mid - rad, mid + rad)
        }
        _ => {
            let e = SymmetricEigen::new(DMatrix::from_row_slice(n, n, a)).eigenvalues;
            (e.min(), e.max())
        }
    }
}

/// Lower Cholesky factor (row-major), `None` if `a` is not positive definite.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let c = DMatrix::from_row_slice(n, n, a).cholesky()?;
    let l = c.l();
    Some((0..n * n).map(|k| l[(k / n, k % n)]).collect())
}

/// Inverse of a symmetric positive definite matrix and its log-determinant.
pub(crate) fn spd_inverse_logdet(a: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    let c = DMatrix::from_row_slice(n, n, a).cholesky()?;
    let logdet = 2.0 * (0..n).map(|i| c.l_dirty()[(i, i)].ln()).sum::<f64>();
    let inv = c.inverse();
    Some(((0..n * n).map(|k| inv[(k / n, k % n)]).collect(), logdet))
}

pub(crate) fn identity(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    (0..n).for_each(|i| out[i * n + i] = 1.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_eigen_ranges() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let mut out = [0.0; 4];
        mul(&a, &a, 2, 2, 2, &mut out);
        assert_eq!(out, [7.0, 10.0, 15.0, 22.0]);
        mul_bt(&a, &a, 2, 2, 2, &mut out);
        assert_eq!(out, [5.0, 11.0, 11.0, 25.0]);
        let s = [2.0, 1.0, 1.0, 2.0];
        let (lo, hi) = sym_eig_range(&s, 2);
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        let big = [2.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.5];
        let (lo, hi) = sym_eig_range(&big, 3);
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_and_inverse() {
        let s = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&s, 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-14 && l[1] == 0.0);
        let (inv, logdet) = spd_inverse_logdet(&s, 2).unwrap();
        assert!((logdet - 8f64.ln()).abs() < 1e-12);
        let mut id = [0.0; 4];
        mul(&s, &inv, 2, 2, 2, &mut id);
        assert!((id[0] - 1.0).abs() < 1e-12 && id[1].abs() < 1e-12);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
