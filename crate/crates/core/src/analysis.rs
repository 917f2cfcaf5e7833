//! Closed-form analysis of 1-sparse Haar signals under DFT measurements.
//!
//! The coherence `|<f_j, H^T_Λ>|` between DFT row `j` and Haar synthesis
//! column `Λ` in block `a` is
//!
//! ```text
//!     (1 - cos(2^a π j / n)) / ( √(n 2^(a-1)) · √(1 - cos(2π j / n)) )
//! ```
//!
//! for `j, Λ ≥ 1`; the scaling column `Λ = 0` is coherent only with `j = 0`
//! and every wavelet column is orthogonal to `j = 0`. Repeating the best row
//! `m` times gives the pseudoinverse MSE `σ²/(m |<f_j, H^T_Λ>|²)`.

use std::f64::consts::PI;

use crate::linalg::{singular_values, CMatrix};
use crate::transforms::{BasisKind, DftEnsemble, HaarBasis, SparsityBasis};
use crate::{Error, Result};

/// `|Σ_{q=k}^{k+2^(a-1)-1} exp(-2πi jq/n)|` in closed form (independent of `k`).
pub fn geometric_sum_magnitude(n: usize, j: usize, a: u32, k: usize) -> Result<f64> {
    let haar = HaarBasis::new(n)?;
    if j == 0 || j >= n {
        return Err(Error::arg(format!("row {j} must lie in 1..{n}")));
    }
    if a == 0 || a > haar.levels() {
        return Err(Error::arg(format!("block {a} outside 1..={}", haar.levels())));
    }
    let half = 1usize << (a - 1);
    if k > n - half {
        return Err(Error::arg(format!("offset {k} exceeds {}", n - half)));
    }
    let nf = n as f64;
    let jf = j as f64;
    let num = 1.0 - (2f64.powi(a as i32) * PI * jf / nf).cos();
    let den = 1.0 - (2.0 * PI * jf / nf).cos();
    Ok((num.max(0.0) / den).sqrt())
}

/// `|<f_j, H^T_Λ>|` from the closed form.
pub fn coherence_closed_form(n: usize, j: usize, idx: usize) -> Result<f64> {
    let haar = HaarBasis::new(n)?;
    if j >= n || idx >= n {
        return Err(Error::arg(format!("(j, Λ) = ({j}, {idx}) out of range for n = {n}")));
    }
    if j == 0 || idx == 0 {
        return Ok(if j == idx { 1.0 } else { 0.0 });
    }
    let a = haar.block_of_index(idx)?;
    let nf = n as f64;
    let jf = j as f64;
    let num = 1.0 - (2f64.powi(a as i32) * PI * jf / nf).cos();
    let den = (1.0 - (2.0 * PI * jf / nf).cos()).sqrt();
    Ok(num / ((nf * 2f64.powi(a as i32 - 1)).sqrt() * den))
}

/// Table of `|<f_j, H^T_Λ>|` over all `(j, Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTable {
    n: usize,
    // row-major, values[j * n + idx]
    values: Vec<f64>,
}

impl CoherenceTable {
    pub fn closed_form(n: usize) -> Result<Self> {
        HaarBasis::new(n)?;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for idx in 0..n {
                values.push(coherence_closed_form(n, j, idx)?);
            }
        }
        Ok(Self { n, values })
    }

    /// Magnitudes of the dense product `F H^T`.
    pub fn brute_force(n: usize) -> Result<Self> {
        let dft = DftEnsemble::new(n)?;
        let g = SparsityBasis::new(BasisKind::Haar, n)?.coefficient_ensemble(&dft)?;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for idx in 0..n {
                values.push(g[(j, idx)].norm());
            }
        }
        Ok(Self { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, idx: usize) -> f64 {
        self.values[j * self.n + idx]
    }

    /// `max_j |<f_j, H^T_Λ>|` and the lowest row attaining it.
    pub fn best_row(&self, idx: usize) -> (usize, f64) {
        (0..self.n).fold((0, f64::NEG_INFINITY), |(bj, bv), j| {
            let v = self.get(j, idx);
            if v > bv {
                (j, v)
            } else {
                (bj, bv)
            }
        })
    }

    pub fn max_abs_diff(&self, other: &CoherenceTable) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `(min_Λ max_j, max_Λ max_j)` of the coherence.
pub fn minmax_bounds(n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::arg("n must be at least 2"));
    }
    let table = CoherenceTable::closed_form(n)?;
    let best: Vec<f64> = (0..n).map(|idx| table.best_row(idx).1).collect();
    let lower = best.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = best.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lower, upper))
}

/// `max_Λ max_j |<f_j, H^T_Λ>|` over the columns outside `excluded` blocks.
///
/// Blocks are removed top-down (`log₂ n` first); the scaling column 0 goes
/// with the first removed block, so it is excluded whenever block `log₂ n` is.
pub fn block_restricted_max(n: usize, excluded: &[u32]) -> Result<f64> {
    let haar = HaarBasis::new(n)?;
    let levels = haar.levels();
    if let Some(&bad) = excluded.iter().find(|&&a| a == 0 || a > levels) {
        return Err(Error::arg(format!("block {bad} outside 1..={levels}")));
    }
    let table = CoherenceTable::closed_form(n)?;
    let scaling_excluded = excluded.contains(&levels);
    let mut best: Option<f64> = None;
    for idx in 0..n {
        let keep = if idx == 0 {
            !scaling_excluded
        } else {
            !excluded.contains(&haar.block_of_index(idx)?)
        };
        if keep {
            let v = table.best_row(idx).1;
            best = Some(best.map_or(v, |b: f64| b.max(v)));
        }
    }
    best.ok_or_else(|| Error::arg("every support is excluded"))
}

/// One point of the block-removal curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalPoint {
    pub n: usize,
    pub excluded: Vec<u32>,
    pub value: f64,
}

/// Block-restricted maxima as blocks `log₂ n, log₂ n − 1, …, 2` are removed in turn.
pub fn removal_curve(n: usize) -> Result<Vec<RemovalPoint>> {
    let levels = HaarBasis::new(n)?.levels();
    let mut excluded = Vec::new();
    let mut out = vec![RemovalPoint {
        n,
        excluded: Vec::new(),
        value: block_restricted_max(n, &[])?,
    }];
    for a in (2..=levels).rev() {
        excluded.push(a);
        out.push(RemovalPoint {
            n,
            excluded: excluded.clone(),
            value: block_restricted_max(n, &excluded)?,
        });
    }
    Ok(out)
}

/// MSE `σ²/(m |<f_j, H^T_Λ>|²)` of the pseudoinverse estimate from `m` repeats of row `j`.
pub fn one_sparse_mse(n: usize, m: usize, j: usize, idx: usize, noise_var: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::arg("at least one measurement is required"));
    }
    let c = coherence_closed_form(n, j, idx)?;
    if c <= 1e-12 {
        return Err(Error::Uninformative);
    }
    Ok(noise_var / (m as f64 * c * c))
}

/// Two-stage variant: only the `m/2` adaptive repeats inform the estimate,
/// assuming the support was identified by the first half.
pub fn one_sparse_adaptive_mse(n: usize, m: usize, j: usize, idx: usize, noise_var: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::arg("the two-stage scheme needs m ≥ 2"));
    }
    let c = coherence_closed_form(n, j, idx)?;
    if c <= 1e-12 {
        return Err(Error::Uninformative);
    }
    Ok(2.0 * noise_var / (m as f64 * c * c))
}

/// `σ² Σ_i (σ_i / (σ_i² + σ²/ρ²))²`, the noise-propagated error of the ridge
/// (Gaussian-prior posterior mean) estimator `(B^H B + σ²/ρ² I)^{-1} B^H y`.
pub fn bayes_risk_closed_form(b: &CMatrix, noise_var: f64, prior_var: f64) -> Result<f64> {
    if !(prior_var > 0.0) {
        return Err(Error::arg("prior variance must be positive"));
    }
    let ratio = noise_var / prior_var;
    Ok(noise_var
        * singular_values(b)
            .iter()
            .map(|s| (s / (s * s + ratio)).powi(2))
            .sum::<f64>())
}

/// `σ² Σ_i 1/(σ_i² + σ²/ρ²)`, the full posterior risk (noise plus shrinkage
/// bias) of the same estimator under the Gaussian prior.
pub fn bayes_posterior_risk(b: &CMatrix, noise_var: f64, prior_var: f64) -> Result<f64> {
    if !(prior_var > 0.0) {
        return Err(Error::arg("prior variance must be positive"));
    }
    let ratio = noise_var / prior_var;
    Ok(noise_var
        * singular_values(b)
            .iter()
            .map(|s| 1.0 / (s * s + ratio))
            .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn geometric_sum_examples() {
        // block a sums 2^(a-1) consecutive terms
        assert!(geometric_sum_magnitude(8, 4, 2, 0).unwrap().abs() < 1e-12);
        assert!((geometric_sum_magnitude(8, 4, 1, 0).unwrap() - 1.0).abs() < 1e-12);
        for k in 0..=6 {
            let direct = (0..2)
                .map(|q| {
                    let t = -2.0 * PI * (k + q) as f64 / 8.0;
                    Complex64::new(t.cos(), t.sin())
                })
                .sum::<Complex64>()
                .norm();
            assert!((geometric_sum_magnitude(8, 1, 2, k).unwrap() - direct).abs() < 1e-12);
        }
        assert!(geometric_sum_magnitude(8, 0, 1, 0).is_err());
        assert!(geometric_sum_magnitude(8, 1, 4, 0).is_err());
    }

    #[test]
    fn geometric_sum_matches_direct_summation() {
        for n in [8usize, 32, 128] {
            let levels = n.trailing_zeros();
            for j in 1..n {
                for a in 1..=levels {
                    let half = 1usize << (a - 1);
                    for k in [0, 1, n - half] {
                        let direct = (k..k + half)
                            .map(|q| {
                                let t = -2.0 * PI * (j * q) as f64 / n as f64;
                                Complex64::new(t.cos(), t.sin())
                            })
                            .sum::<Complex64>()
                            .norm();
                        let closed = geometric_sum_magnitude(n, j, a, k).unwrap();
                        assert!((closed - direct).abs() < 1e-10, "n={n} j={j} a={a} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn coherence_special_cases() {
        assert_eq!(coherence_closed_form(16, 0, 0).unwrap(), 1.0);
        assert_eq!(coherence_closed_form(16, 3, 0).unwrap(), 0.0);
        assert_eq!(coherence_closed_form(16, 0, 5).unwrap(), 0.0);
        assert!(coherence_closed_form(16, 16, 0).is_err());
    }

    #[test]
    fn closed_form_matches_brute_force_n32() {
        let cf = CoherenceTable::closed_form(32).unwrap();
        let bf = CoherenceTable::brute_force(32).unwrap();
        assert!(cf.max_abs_diff(&bf) < 1e-10);
    }

    #[test]
    fn bounds_examples() {
        let (lo, hi) = minmax_bounds(64).unwrap();
        assert!((lo - (2.0f64 / 64.0).sqrt()).abs() < 1e-10);
        assert!((hi - 1.0).abs() < 1e-10);
        let (lo, hi) = minmax_bounds(2).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        assert!(minmax_bounds(1).is_err());
    }

    #[test]
    fn restricted_max_examples() {
        let n = 64;
        assert!((block_restricted_max(n, &[]).unwrap() - 1.0).abs() < 1e-12);
        let only_finest: Vec<u32> = (2..=6).collect();
        let v = block_restricted_max(n, &only_finest).unwrap();
        assert!((v - (2.0 / n as f64).sqrt()).abs() < 1e-10);
        let all: Vec<u32> = (1..=6).collect();
        assert!(block_restricted_max(n, &all).is_err());
        assert!(block_restricted_max(n, &[7]).is_err());
    }

    #[test]
    fn removal_curve_is_monotone_and_ends_at_lower_bound() {
        for n in [4usize, 16, 256] {
            let curve = removal_curve(n).unwrap();
            assert_eq!(curve.len(), n.trailing_zeros() as usize);
            assert!(curve.windows(2).all(|w| w[1].value <= w[0].value + 1e-15));
            let last = curve.last().unwrap().value;
            assert!((last - (2.0 / n as f64).sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn mse_examples() {
        let (n, m, s2) = (64usize, 32usize, 1e-4);
        assert!((one_sparse_mse(n, m, 0, 0, s2).unwrap() - s2 / m as f64).abs() < 1e-18);
        let v = one_sparse_mse(n, m, n / 2, 40, s2).unwrap();
        assert!((v / ((n as f64 / 2.0) * s2 / m as f64) - 1.0).abs() < 1e-10);
        let v = one_sparse_adaptive_mse(n, m, 0, 0, s2).unwrap();
        assert!((v - 2.0 * s2 / m as f64).abs() < 1e-18);
        assert!(matches!(one_sparse_mse(n, m, 2, 0, s2), Err(Error::Uninformative)));
    }

    #[test]
    fn mse_sandwich_for_every_support() {
        let (n, m, s2) = (128usize, 10usize, 1.0);
        let table = CoherenceTable::closed_form(n).unwrap();
        for idx in 0..n {
            let (j, _) = table.best_row(idx);
            let v = one_sparse_mse(n, m, j, idx, s2).unwrap();
            assert!(v >= s2 / m as f64 * (1.0 - 1e-12));
            assert!(v <= n as f64 * s2 / (2.0 * m as f64) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bayes_examples() {
        let c = 1.7;
        let b = CMatrix::from_fn(5, 1, |i, _| Complex64::new(if i == 2 { c } else { 0.0 }, 0.0));
        let (s2, r2) = (0.3, 2.0);
        let got = bayes_risk_closed_form(&b, s2, r2).unwrap();
        let expect = s2 * (c / (c * c + s2 / r2)).powi(2);
        assert!((got - expect).abs() < 1e-15);

        let b = CMatrix::from_fn(8, 3, |i, k| Complex64::new((i * 3 + k) as f64 % 5.0 - 2.0, 0.1 * k as f64));
        let limit = s2 * singular_values(&b).iter().map(|s| 1.0 / (s * s)).sum::<f64>();
        let near = bayes_risk_closed_form(&b, s2, 1e12).unwrap();
        assert!((near / limit - 1.0).abs() < 1e-9);
        let post = bayes_posterior_risk(&b, s2, 1e12).unwrap();
        assert!((post / limit - 1.0).abs() < 1e-9);
        assert!(bayes_risk_closed_form(&b, s2, 0.0).is_err());
    }
}
