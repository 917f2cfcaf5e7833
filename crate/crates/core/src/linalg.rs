//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values below `RANK_RTOL * sigma_max` count as zero.
pub const RANK_RTOL: f64 = 1e-10;

pub fn select_columns(m: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn rank_of_singular_values(sv: &[f64]) -> usize {
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || !max.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&v| v > RANK_RTOL * max).count()
}

pub fn numerical_rank(m: &CMatrix) -> usize {
    rank_of_singular_values(&singular_values(m))
}

/// Inverse of a Hermitian positive-definite matrix, `None` when the Cholesky
/// factorization breaks down.
pub fn hermitian_inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().cholesky().map(|c| c.inverse())
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// `m * v` for a dense complex matrix and slice.
pub fn mat_vec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(m.ncols(), v.len());
    let mut out = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, a) in out.iter_mut().zip(m.column(j).iter()) {
            *o += a * vj;
        }
    }
    out
}

/// `m^H * v`.
pub fn adjoint_mat_vec(m: &CMatrix, v: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| {
            m.column(j)
                .iter()
                .zip(v)
                .map(|(a, b)| a.conj() * b)
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_counts_only_significant_values() {
        assert_eq!(rank_of_singular_values(&[2.0, 1.0, 1e-14]), 2);
        assert_eq!(rank_of_singular_values(&[0.0, 0.0]), 0);
        assert_eq!(rank_of_singular_values(&[]), 0);
    }

    #[test]
    fn adjoint_product_matches_nalgebra() {
        let m = CMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        let v = vec![Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5), Complex64::new(0.3, 0.0)];
        let ours = adjoint_mat_vec(&m, &v);
        let theirs = m.adjoint() * CVector::from_vec(v);
        for (a, b) in ours.iter().zip(theirs.iter()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
