//! Small dense helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Relative eigenvalue cutoff below which a symmetric matrix counts as singular.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// `(1/n) Σ wₜ gₜ gₜᵀ` for rows `gₜ` of length `k`.
pub fn weighted_outer_mean<'a, I>(k: usize, n: usize, rows: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    let mut m = DMatrix::zeros(k, k);
    for (w, g) in rows {
        if w == 0.0 {
            continue;
        }
        for i in 0..k {
            let wi = w * g[i];
            for j in i..k {
                m[(i, j)] += wi * g[j];
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = m[(i, j)] / n as f64;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Inverse of a symmetric positive definite matrix, or `None` when it is
/// numerically singular or indefinite.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(*v));
    if !(max > 0.0) || min <= SINGULAR_RCOND * max {
        return None;
    }
    m.clone().cholesky().map(|c| c.inverse())
}

/// Moore–Penrose inverse of a symmetric matrix via its eigendecomposition.
pub fn symmetric_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cut = SINGULAR_RCOND * max;
    let inv = eig.eigenvalues.map(|v| if v.abs() > cut { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// `A B A` for symmetric `A`, symmetrized against rounding.
pub fn sandwich(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let s = a * b * a;
    (&s + s.transpose()) * 0.5
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(*b);
        at += k;
    }
    out
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_pinv_agree_when_regular() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        let pinv = symmetric_pinv(&m);
        assert!((&inv - &pinv).norm() < 1e-12);
        assert!((&m * &inv - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn singular_is_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_inverse(&m).is_none());
        let p = symmetric_pinv(&m);
        assert!((&m * &p * &m - &m).norm() < 1e-12);
    }

    #[test]
    fn outer_mean_matches_direct() {
        let g = [vec![1.0, 2.0], vec![0.5, -1.0]];
        let m = weighted_outer_mean(2, 2, g.iter().map(|r| (2.0, r.as_slice())));
        assert!((m[(0, 1)] - (2.0 * 2.0 - 2.0 * 0.5) / 2.0).abs() < 1e-15);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn block_layout() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::from_element(2, 2, 3.0);
        let d = block_diag(&[&a, &b]);
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(2, 1)], 3.0);
        assert_eq!(d[(0, 2)], 0.0);
    }
}
