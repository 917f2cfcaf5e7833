//! Exact unitary DFT and orthonormal Haar operators.
//!
//! All indices are 0-based. The DFT entry is `f_jk = exp(-2πi jk/n)/√n` and
//! the Haar row `j = 2^p + q - 1` (`p = ⌊log₂ j⌋`) is `±2^(p/2)/√n` on the
//! two halves of the dyadic interval `[(q-1)n/2^p, qn/2^p)`; row 0 is the
//! constant `1/√n`.
//!
//! Wavelet blocks group Haar indices by scale: block `a` holds the indices
//! `n/2^a .. n/2^(a-1)`, so `a = 1` is the finest half and `a = log₂ n` is the
//! single index 1. The scaling index 0 belongs to no block.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::CMatrix;
use crate::{Error, Result};

/// Largest dimension for which dense matrices are materialized.
pub const MAX_DENSE_DIM: usize = 4096;

fn check_dim(n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::arg(format!("dimension {n} is not a power of two")));
    }
    if n > MAX_DENSE_DIM {
        return Err(Error::arg(format!(
            "dimension {n} exceeds the dense limit {MAX_DENSE_DIM}"
        )));
    }
    Ok(n.trailing_zeros())
}

fn check_len(n: usize, len: usize) -> Result<()> {
    if len != n {
        return Err(Error::arg(format!("expected a vector of length {n}, got {len}")));
    }
    Ok(())
}

/// The `n` rows of the unitary DFT matrix.
#[derive(Debug, Clone)]
pub struct DftEnsemble {
    n: usize,
    // twiddle[t] = exp(-2πi t/n)/√n, so f_jk = twiddle[jk mod n]
    twiddle: Vec<Complex64>,
}

impl DftEnsemble {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        let scale = 1.0 / (n as f64).sqrt();
        let twiddle = (0..n)
            .map(|t| Complex64::from_polar(scale, -2.0 * PI * t as f64 / n as f64))
            .collect();
        Ok(Self { n, twiddle })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        self.twiddle[(j * k) % self.n]
    }

    /// Row `j` of the DFT matrix.
    pub fn row(&self, j: usize) -> Result<Vec<Complex64>> {
        if j >= self.n {
            return Err(Error::arg(format!("row {j} out of range for n = {}", self.n)));
        }
        Ok((0..self.n).map(|k| self.entry(j, k)).collect())
    }

    /// Measurement `<f_j, x> = Σ_k f_jk x_k` of a real signal.
    pub fn measure(&self, j: usize, x: &[f64]) -> Complex64 {
        x.iter()
            .enumerate()
            .map(|(k, &xk)| self.entry(j, k) * xk)
            .sum()
    }

    /// `F x`.
    pub fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .map(|j| x.iter().enumerate().map(|(k, &v)| self.entry(j, k) * v).sum())
            .collect())
    }

    /// `F^H y`.
    pub fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len(self.n, y.len())?;
        Ok((0..self.n)
            .map(|k| {
                y.iter()
                    .enumerate()
                    .map(|(j, &v)| self.entry(j, k).conj() * v)
                    .sum()
            })
            .collect())
    }

    /// The realized `rows.len() × n` sensing matrix whose i-th row is `f_{rows[i]}`.
    pub fn rows_matrix(&self, rows: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), self.n, |i, k| self.entry(rows[i], k))
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |j, k| self.entry(j, k))
    }
}

/// The orthonormal Haar wavelet transform `H` (analysis) and its adjoint `H^T`
/// (synthesis).
#[derive(Debug, Clone)]
pub struct HaarBasis {
    n: usize,
    levels: u32,
}

/// Nonzero pattern of one Haar row (equivalently one synthesis column).
#[derive(Debug, Clone, PartialEq)]
pub struct HaarAtom {
    pub start: usize,
    pub width: usize,
    pub magnitude: f64,
    /// `false` only for the constant scaling atom.
    pub signed: bool,
}

impl HaarAtom {
    pub fn value(&self, k: usize) -> f64 {
        if k < self.start || k >= self.start + self.width {
            0.0
        } else if !self.signed || k < self.start + self.width / 2 {
            self.magnitude
        } else {
            -self.magnitude
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.width
    }
}

impl HaarBasis {
    pub fn new(n: usize) -> Result<Self> {
        let levels = check_dim(n)?;
        Ok(Self { n, levels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `log₂ n`, the number of wavelet blocks.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Support and magnitude of row `j`.
    pub fn atom(&self, j: usize) -> HaarAtom {
        debug_assert!(j < self.n);
        let n = self.n;
        if j == 0 {
            return HaarAtom {
                start: 0,
                width: n,
                magnitude: 1.0 / (n as f64).sqrt(),
                signed: false,
            };
        }
        let p = j.ilog2();
        let q = j - (1 << p) + 1;
        let width = n >> p;
        HaarAtom {
            start: (q - 1) * width,
            width,
            magnitude: (2f64.powi(p as i32) / n as f64).sqrt(),
            signed: true,
        }
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        self.atom(j).value(k)
    }

    /// Dense `H`, rows are the analysis atoms.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |j, k| self.entry(j, k))
    }

    /// `α = H x` via the O(n) averaging/differencing pyramid.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        let mut approx = x.to_vec();
        let mut len = self.n;
        while len > 1 {
            let half = len / 2;
            for i in 0..half {
                let (a, b) = (approx[2 * i], approx[2 * i + 1]);
                out[half + i] = (a - b) * FRAC_1_SQRT_2;
                approx[i] = (a + b) * FRAC_1_SQRT_2;
            }
            len = half;
        }
        out[0] = approx[0];
        Ok(out)
    }

    /// `x = H^T α`, the inverse of [`forward`](Self::forward).
    pub fn inverse(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, alpha.len())?;
        let mut approx = vec![0.0; self.n];
        approx[0] = alpha[0];
        let mut scratch = vec![0.0; self.n];
        let mut half = 1;
        while half < self.n {
            for i in 0..half {
                let (a, d) = (approx[i], alpha[half + i]);
                scratch[2 * i] = (a + d) * FRAC_1_SQRT_2;
                scratch[2 * i + 1] = (a - d) * FRAC_1_SQRT_2;
            }
            approx[..2 * half].copy_from_slice(&scratch[..2 * half]);
            half *= 2;
        }
        Ok(approx)
    }

    /// Dense-path `H x`.
    pub fn forward_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok((0..self.n)
            .map(|j| {
                let atom = self.atom(j);
                atom.range().map(|k| atom.value(k) * x[k]).sum()
            })
            .collect())
    }

    /// Dense-path `H^T α`.
    pub fn inverse_dense(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, alpha.len())?;
        let mut x = vec![0.0; self.n];
        for (j, &a) in alpha.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let atom = self.atom(j);
            for k in atom.range() {
                x[k] += atom.value(k) * a;
            }
        }
        Ok(x)
    }

    /// Column `idx` of `H^T`, i.e. row `idx` of `H`.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        let atom = self.atom(idx);
        (0..self.n).map(|k| atom.value(k)).collect()
    }

    /// `H^T` restricted to the columns in `support`.
    pub fn synthesis_columns(&self, support: &[usize]) -> Result<DMatrix<f64>> {
        validate_support(self.n, support)?;
        let atoms: Vec<HaarAtom> = support.iter().map(|&i| self.atom(i)).collect();
        Ok(DMatrix::from_fn(self.n, support.len(), |k, c| atoms[c].value(k)))
    }

    /// Wavelet block containing index `idx ≥ 1`.
    pub fn block_of_index(&self, idx: usize) -> Result<u32> {
        if idx == 0 {
            return Err(Error::arg("the scaling index 0 has no wavelet block"));
        }
        if idx >= self.n {
            return Err(Error::arg(format!("index {idx} out of range for n = {}", self.n)));
        }
        Ok(self.levels - idx.ilog2())
    }

    /// Indices belonging to block `a`.
    pub fn block_range(&self, a: u32) -> Result<Range<usize>> {
        if a == 0 || a > self.levels {
            return Err(Error::arg(format!(
                "block {a} outside 1..={} for n = {}",
                self.levels, self.n
            )));
        }
        Ok((self.n >> a)..(self.n >> (a - 1)))
    }
}

/// Checks that `support` is nonempty, in range and free of duplicates.
pub fn validate_support(n: usize, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::arg("support must be nonempty"));
    }
    let mut seen = vec![false; n];
    for &i in support {
        if i >= n {
            return Err(Error::arg(format!("support index {i} out of range for n = {n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::arg(format!("duplicate support index {i}")));
        }
    }
    Ok(())
}

/// Sparsity basis tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Canonical,
    Haar,
}

/// A sparsity basis `Ψ` with `x = Ψ α`.
#[derive(Debug, Clone)]
pub struct SparsityBasis {
    kind: BasisKind,
    haar: HaarBasis,
}

impl SparsityBasis {
    pub fn new(kind: BasisKind, n: usize) -> Result<Self> {
        Ok(Self {
            kind,
            haar: HaarBasis::new(n)?,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.haar.n()
    }

    /// `x = Ψ α`.
    pub fn synthesize(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            BasisKind::Canonical => {
                check_len(self.n(), alpha.len())?;
                Ok(alpha.to_vec())
            }
            BasisKind::Haar => self.haar.inverse(alpha),
        }
    }

    /// Complex synthesis, applied to real and imaginary parts separately.
    pub fn synthesize_complex(&self, alpha: &[Complex64]) -> Result<Vec<Complex64>> {
        let re: Vec<f64> = alpha.iter().map(|z| z.re).collect();
        let im: Vec<f64> = alpha.iter().map(|z| z.im).collect();
        let (re, im) = (self.synthesize(&re)?, self.synthesize(&im)?);
        Ok(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
    }

    /// `α = Ψ^T x`.
    pub fn analyze(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            BasisKind::Canonical => {
                check_len(self.n(), x.len())?;
                Ok(x.to_vec())
            }
            BasisKind::Haar => self.haar.forward(x),
        }
    }

    /// `Ψ_Λ`, the synthesis columns at `support`.
    pub fn synthesis_columns(&self, support: &[usize]) -> Result<DMatrix<f64>> {
        match self.kind {
            BasisKind::Canonical => {
                validate_support(self.n(), support)?;
                Ok(DMatrix::from_fn(self.n(), support.len(), |k, c| {
                    if k == support[c] {
                        1.0
                    } else {
                        0.0
                    }
                }))
            }
            BasisKind::Haar => self.haar.synthesis_columns(support),
        }
    }

    /// The ensemble expressed in coefficient space, `G = F Ψ` (`n × n`).
    ///
    /// Row `j` of `G` is the measurement functional `α ↦ <f_j, Ψ α>`, so a plan's
    /// effective operator is `G` restricted to its rows and a support's design
    /// operator is `G` restricted to its columns.
    pub fn coefficient_ensemble(&self, dft: &DftEnsemble) -> Result<CMatrix> {
        let n = self.n();
        if dft.n() != n {
            return Err(Error::arg("DFT and basis dimensions differ"));
        }
        Ok(match self.kind {
            BasisKind::Canonical => dft.matrix(),
            BasisKind::Haar => {
                let mut g = CMatrix::zeros(n, n);
                for c in 0..n {
                    let atom = self.haar.atom(c);
                    for j in 0..n {
                        g[(j, c)] = atom
                            .range()
                            .map(|k| dft.entry(j, k) * atom.value(k))
                            .sum();
                    }
                }
                g
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Haar entry straight from the dyadic-interval inequalities, in floating point.
    fn haar_entry_oracle(n: usize, j: usize, k: usize) -> f64 {
        let nf = n as f64;
        if j == 0 {
            return 1.0 / nf.sqrt();
        }
        let p = (j as f64).log2().floor();
        let q = j as f64 - 2f64.powf(p) + 1.0;
        let k = k as f64;
        let c = 2f64.powf(p / 2.0) / nf.sqrt();
        let scale = nf / 2f64.powf(p);
        if (q - 1.0) * scale <= k && k < (q - 0.5) * scale {
            c
        } else if (q - 0.5) * scale <= k && k < q * scale {
            -c
        } else {
            0.0
        }
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn dft_row_examples() {
        let f4 = DftEnsemble::new(4).unwrap();
        for z in f4.row(0).unwrap() {
            assert!((z - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let f2 = DftEnsemble::new(2).unwrap();
        let r = f2.row(1).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!((r[0] - Complex64::new(h, 0.0)).norm() < 1e-15);
        assert!((r[1] - Complex64::new(-h, 0.0)).norm() < 1e-15);

        let f8 = DftEnsemble::new(8).unwrap();
        let r = f8.row(3).unwrap();
        for (k, z) in r.iter().enumerate() {
            let theta = -2.0 * PI * 3.0 * k as f64 / 8.0;
            let expect = Complex64::new(theta.cos(), theta.sin()) / 8f64.sqrt();
            assert!((z - expect).norm() < 1e-14);
        }
        let nrm: f64 = r.iter().map(|z| z.norm_sqr()).sum();
        assert!((nrm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dft_row_out_of_range() {
        let f = DftEnsemble::new(8).unwrap();
        assert!(matches!(f.row(8), Err(Error::InvalidArgument(_))));
        assert!(DftEnsemble::new(6).is_err());
        assert!(DftEnsemble::new(0).is_err());
    }

    #[test]
    fn haar_forward_examples() {
        let h2 = HaarBasis::new(2).unwrap();
        let a = h2.forward(&[1.0, 1.0]).unwrap();
        assert!((a[0] - 2f64.sqrt()).abs() < 1e-15 && a[1].abs() < 1e-15);
        let a = h2.forward(&[1.0, -1.0]).unwrap();
        assert!(a[0].abs() < 1e-15 && (a[1] - 2f64.sqrt()).abs() < 1e-15);
        assert!(HaarBasis::new(12).is_err());
        assert!(h2.forward(&[1.0]).is_err());
    }

    #[test]
    fn haar_matches_entrywise_oracle() {
        for n in [2usize, 4, 8, 16, 64] {
            let h = HaarBasis::new(n).unwrap();
            for j in 0..n {
                for k in 0..n {
                    assert!((h.entry(j, k) - haar_entry_oracle(n, j, k)).abs() < 1e-15);
                }
            }
        }
        let n = 8;
        let h = HaarBasis::new(n).unwrap();
        let x = random_vec(n, 3);
        let fast = h.forward(&x).unwrap();
        for j in 0..n {
            let direct: f64 = (0..n).map(|k| haar_entry_oracle(n, j, k) * x[k]).sum();
            assert!((fast[j] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn synthesis_column_examples() {
        let h2 = HaarBasis::new(2).unwrap();
        let c = h2.synthesis_columns(&[0]).unwrap();
        assert!((c[(0, 0)] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c[(1, 0)] - FRAC_1_SQRT_2).abs() < 1e-15);

        let h4 = HaarBasis::new(4).unwrap();
        let full = h4.synthesis_columns(&[0, 1, 2, 3]).unwrap();
        let gram = full.transpose() * &full;
        assert!((gram - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-14);

        let h8 = HaarBasis::new(8).unwrap();
        let c = h8.synthesis_columns(&[5]).unwrap();
        for k in 0..8 {
            assert!((c[(k, 0)] - haar_entry_oracle(8, 5, k)).abs() < 1e-15);
        }
        assert!(h8.synthesis_columns(&[1, 1]).is_err());
        assert!(h8.synthesis_columns(&[8]).is_err());
        assert!(h8.synthesis_columns(&[]).is_err());
    }

    #[test]
    fn block_indexing() {
        let h = HaarBasis::new(8).unwrap();
        assert_eq!(h.block_of_index(4).unwrap(), 1);
        assert_eq!(h.block_of_index(7).unwrap(), 1);
        assert_eq!(h.block_of_index(2).unwrap(), 2);
        assert_eq!(h.block_of_index(3).unwrap(), 2);
        assert_eq!(h.block_of_index(1).unwrap(), 3);
        assert!(h.block_of_index(0).is_err());
        assert_eq!(h.block_range(1).unwrap(), 4..8);
        assert_eq!(h.block_range(3).unwrap(), 1..2);
        assert!(h.block_range(4).is_err());
    }

    #[test]
    fn block_magnitudes_follow_definition() {
        for n in [8usize, 32, 256] {
            let h = HaarBasis::new(n).unwrap();
            let levels = h.levels() as i32;
            for a in 1..=h.levels() {
                let expect = 2f64.powf((levels - a as i32) as f64 / 2.0) / (n as f64).sqrt();
                for j in h.block_range(a).unwrap() {
                    for k in 0..n {
                        let v = haar_entry_oracle(n, j, k);
                        if v != 0.0 {
                            assert!((v.abs() - expect).abs() < 1e-14);
                            assert!((h.entry(j, k).abs() - expect).abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn haar_is_orthonormal() {
        for n in [2usize, 16, 128] {
            let m = HaarBasis::new(n).unwrap().matrix();
            let err = (&m * m.transpose() - DMatrix::<f64>::identity(n, n)).abs().max();
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn coefficient_ensemble_equals_dense_product() {
        let n = 16;
        let dft = DftEnsemble::new(n).unwrap();
        let basis = SparsityBasis::new(BasisKind::Haar, n).unwrap();
        let g = basis.coefficient_ensemble(&dft).unwrap();
        let h = HaarBasis::new(n).unwrap().matrix();
        let ht = h.transpose().map(|v| Complex64::new(v, 0.0));
        let dense = dft.matrix() * ht;
        assert!((g - dense).camax() < 1e-13);
    }

    #[test]
    fn frobenius_identity_on_canonical_basis() {
        let n = 32;
        let dft = DftEnsemble::new(n).unwrap();
        let rows = [0usize, 3, 3, 7, 31];
        let support = [1usize, 4, 9];
        let f = dft.rows_matrix(&rows);
        let sub = crate::linalg::select_columns(&f, &support);
        let fro: f64 = sub.iter().map(|z| z.norm_sqr()).sum();
        let expect = (support.len() * rows.len()) as f64 / n as f64;
        assert!((fro - expect).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unitary_round_trips(log_n in 1u32..=10, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let x = random_vec(n, seed);
            let nx = norm(&x);

            let h = HaarBasis::new(n).unwrap();
            let a = h.forward(&x).unwrap();
            prop_assert!((norm(&a) - nx).abs() <= 1e-10 * nx);
            let back = h.inverse(&a).unwrap();
            let err: f64 = norm(&back.iter().zip(&x).map(|(u, v)| u - v).collect::<Vec<_>>());
            prop_assert!(err <= 1e-10 * nx);

            let dense = h.forward_dense(&x).unwrap();
            let diff = norm(&dense.iter().zip(&a).map(|(u, v)| u - v).collect::<Vec<_>>());
            prop_assert!(diff <= 1e-10 * nx);
            let dense_back = h.inverse_dense(&a).unwrap();
            let diff = norm(&dense_back.iter().zip(&back).map(|(u, v)| u - v).collect::<Vec<_>>());
            prop_assert!(diff <= 1e-10 * nx);

            if n <= 256 {
                let f = DftEnsemble::new(n).unwrap();
                let xc = crate::linalg::to_complex(&x);
                let y = f.forward(&xc).unwrap();
                let ny = crate::linalg::norm_sqr(&y).sqrt();
                prop_assert!((ny - nx).abs() <= 1e-10 * nx);
                let back = f.adjoint(&y).unwrap();
                let err = back.iter().zip(&xc).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(err <= 1e-10 * nx);
            }
        }

        #[test]
        fn frobenius_identity(rows in prop::collection::vec(0usize..64, 1..40),
                              seed in any::<u64>(), s in 1usize..10) {
            let n = 64;
            let dft = DftEnsemble::new(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let support = rand::seq::index::sample(&mut rng, n, s).into_vec();
            let sub = crate::linalg::select_columns(&dft.rows_matrix(&rows), &support);
            let fro: f64 = sub.iter().map(|z| z.norm_sqr()).sum();
            let expect = (s * rows.len()) as f64 / n as f64;
            prop_assert!((fro - expect).abs() <= 1e-10 * expect.max(1.0));
        }
    }
}
