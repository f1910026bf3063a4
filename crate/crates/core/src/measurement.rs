//! The compression operator `C` that maps a state snapshot to `p` measurements.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{check_finite, real_times_complex, ComplexMatrix, RealMatrix, RealVector};
use crate::rng;

/// Above this many entries a random operator is not stored; its rows are
/// regenerated from their seeded streams whenever it is applied.
const DENSE_LIMIT: usize = 1 << 24;
const ROW_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementKind {
    /// Entries `U(−1, 1) / √n`.
    #[serde(rename = "uniform", alias = "uniform-random")]
    UniformRandom,
    /// Entries `N(0, 1/p)`.
    #[serde(rename = "gaussian", alias = "gaussian-random")]
    GaussianRandom,
    /// Entries `±1/√p` with equal probability.
    #[serde(rename = "bernoulli", alias = "bernoulli-random")]
    BernoulliRandom,
    /// `p` distinct rows of the identity.
    SinglePixel,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 4] = [
        MeasurementKind::UniformRandom,
        MeasurementKind::GaussianRandom,
        MeasurementKind::BernoulliRandom,
        MeasurementKind::SinglePixel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasurementKind::UniformRandom => "uniform",
            MeasurementKind::GaussianRandom => "gaussian",
            MeasurementKind::BernoulliRandom => "bernoulli",
            MeasurementKind::SinglePixel => "single-pixel",
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasurementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "uniform" | "uniform-random" => Ok(MeasurementKind::UniformRandom),
            "gaussian" | "gaussian-random" | "normal" => Ok(MeasurementKind::GaussianRandom),
            "bernoulli" | "bernoulli-random" => Ok(MeasurementKind::BernoulliRandom),
            "single-pixel" | "singlepixel" | "pixel" => Ok(MeasurementKind::SinglePixel),
            other => Err(Error::InvalidArgument(format!(
                "unknown measurement kind '{other}' (expected uniform, gaussian, bernoulli or single-pixel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub kind: MeasurementKind,
    pub p: usize,
    pub n: usize,
    pub seed: u64,
}

impl MeasurementSpec {
    pub fn new(kind: MeasurementKind, p: usize, n: usize, seed: u64) -> Self {
        MeasurementSpec { kind, p, n, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidArgument(
                "measurement count p must be at least 1".into(),
            ));
        }
        if self.p > self.n {
            return Err(Error::InvalidArgument(format!(
                "measurement count p = {} exceeds state dimension n = {}",
                self.p, self.n
            )));
        }
        Ok(())
    }

    fn row_scale(&self) -> f64 {
        match self.kind {
            MeasurementKind::UniformRandom => 1.0 / (self.n as f64).sqrt(),
            _ => 1.0 / (self.p as f64).sqrt(),
        }
    }

    /// Given `Y = C X` for this spec, the compression of the same `X` by the
    /// spec with only `p` rows. Random projection rows depend on the seed and
    /// row index alone, so this is a rescaled leading block of `Y`.
    pub fn leading_rows(&self, compressed: &RealMatrix, p: usize) -> Result<RealMatrix> {
        if self.kind == MeasurementKind::SinglePixel {
            return Err(Error::InvalidArgument(
                "single-pixel selections are not nested across measurement counts".into(),
            ));
        }
        if compressed.nrows() != self.p {
            return Err(Error::dims(
                "rows of compressed data",
                self.p,
                compressed.nrows(),
            ));
        }
        let smaller = MeasurementSpec { p, ..*self };
        smaller.validate()?;
        Ok(compressed.rows(0, p) * (smaller.row_scale() / self.row_scale()))
    }

    fn fill_row(&self, i: usize, out: &mut [f64]) {
        let mut stream = rng::stream(self.seed, i as u64);
        let s = self.row_scale();
        match self.kind {
            MeasurementKind::UniformRandom => out
                .iter_mut()
                .for_each(|v| *v = s * stream.random_range(-1.0..1.0)),
            MeasurementKind::GaussianRandom => out
                .iter_mut()
                .for_each(|v| *v = s * stream.sample::<f64, _>(StandardNormal)),
            MeasurementKind::BernoulliRandom => out
                .iter_mut()
                .for_each(|v| *v = if stream.random::<bool>() { s } else { -s }),
            MeasurementKind::SinglePixel => unreachable!("single-pixel rows are index selections"),
        }
    }

    fn row(&self, i: usize) -> RealVector {
        let mut v = RealVector::zeros(self.n);
        self.fill_row(i, v.as_mut_slice());
        v
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Selection(Vec<usize>),
    Dense(RealMatrix),
    Streamed,
}

#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    spec: Option<MeasurementSpec>,
    p: usize,
    n: usize,
    repr: Repr,
}

pub fn build_measurement(spec: MeasurementSpec) -> Result<MeasurementOperator> {
    MeasurementOperator::build(spec)
}

impl MeasurementOperator {
    /// Deterministic in `spec`: row `i` of a random operator comes from
    /// stream `i` of `spec.seed`, single-pixel indices from the selection
    /// stream.
    pub fn build(spec: MeasurementSpec) -> Result<Self> {
        spec.validate()?;
        let repr = match spec.kind {
            MeasurementKind::SinglePixel => {
                let mut stream = rng::stream(spec.seed, rng::SELECTION);
                Repr::Selection(sample(&mut stream, spec.n, spec.p).into_vec())
            }
            _ if spec.p.saturating_mul(spec.n) > DENSE_LIMIT => Repr::Streamed,
            _ => {
                let rows: Vec<RealVector> =
                    (0..spec.p).into_par_iter().map(|i| spec.row(i)).collect();
                let mut c = RealMatrix::zeros(spec.p, spec.n);
                for (i, r) in rows.iter().enumerate() {
                    c.row_mut(i).tr_copy_from(r);
                }
                Repr::Dense(c)
            }
        };
        Ok(MeasurementOperator {
            spec: Some(spec),
            p: spec.p,
            n: spec.n,
            repr,
        })
    }

    /// Wrap an explicit matrix, e.g. one read from a file.
    pub fn from_dense(c: RealMatrix) -> Result<Self> {
        if c.nrows() == 0 || c.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "measurement matrix must be non-empty".into(),
            ));
        }
        check_finite(&c, "measurement matrix")?;
        Ok(MeasurementOperator {
            spec: None,
            p: c.nrows(),
            n: c.ncols(),
            repr: Repr::Dense(c),
        })
    }

    /// Row `i` of the operator is `e_{indices[i]}ᵀ`.
    pub fn single_pixel(n: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() || indices.len() > n {
            return Err(Error::InvalidArgument(format!(
                "single-pixel operator needs 1..={n} indices, got {}",
                indices.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "single-pixel index {i} out of range or repeated"
                )));
            }
        }
        Ok(MeasurementOperator {
            spec: None,
            p: indices.len(),
            n,
            repr: Repr::Selection(indices),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> Option<&MeasurementSpec> {
        self.spec.as_ref()
    }

    pub fn selection(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Selection(idx) => Some(idx),
            _ => None,
        }
    }

    pub fn is_streamed(&self) -> bool {
        matches!(self.repr, Repr::Streamed)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n {
            return Err(Error::dims(
                "compress (rows of operand = columns of C)",
                self.n,
                rows,
            ));
        }
        Ok(())
    }

    /// `Y = C X`.
    pub fn compress(&self, x: &RealMatrix) -> Result<RealMatrix> {
        self.check_rows(x.nrows())?;
        Ok(match &self.repr {
            Repr::Selection(idx) => x.select_rows(idx),
            Repr::Dense(c) => c * x,
            Repr::Streamed => {
                let spec = self.spec.expect("streamed operators always carry a spec");
                let blocks: Vec<RealMatrix> = (0..self.p.div_ceil(ROW_BLOCK))
                    .into_par_iter()
                    .map(|b| {
                        let lo = b * ROW_BLOCK;
                        let hi = (lo + ROW_BLOCK).min(self.p);
                        let mut rows_t = RealMatrix::zeros(self.n, hi - lo);
                        for (i, col) in (lo..hi).zip(rows_t.as_mut_slice().chunks_exact_mut(self.n))
                        {
                            spec.fill_row(i, col);
                        }
                        rows_t.tr_mul(x)
                    })
                    .collect();
                let mut y = RealMatrix::zeros(self.p, x.ncols());
                for (b, block) in blocks.iter().enumerate() {
                    y.rows_mut(b * ROW_BLOCK, block.nrows()).copy_from(block);
                }
                y
            }
        })
    }

    pub fn compress_complex(&self, z: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_rows(z.nrows())?;
        match &self.repr {
            Repr::Selection(idx) => Ok(z.select_rows(idx)),
            Repr::Dense(c) => Ok(real_times_complex(c, z)),
            Repr::Streamed => {
                let re = self.compress(&z.map(|v| v.re))?;
                let im = self.compress(&z.map(|v| v.im))?;
                Ok(ComplexMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
                    crate::Complex64::new(re[(i, j)], im[(i, j)])
                }))
            }
        }
    }

    /// `C (left · right)` evaluated as `(C left) right`, which is far cheaper
    /// when the operand is known to be low rank.
    pub fn compress_factored(&self, left: &RealMatrix, right: &RealMatrix) -> Result<RealMatrix> {
        if left.ncols() != right.nrows() {
            return Err(Error::dims(
                "compress_factored (inner dimension)",
                left.ncols(),
                right.nrows(),
            ));
        }
        Ok(self.compress(left)? * right)
    }

    pub fn to_dense(&self) -> RealMatrix {
        match &self.repr {
            Repr::Dense(c) => c.clone(),
            Repr::Selection(idx) => {
                let mut c = RealMatrix::zeros(self.p, self.n);
                for (i, &j) in idx.iter().enumerate() {
                    c[(i, j)] = 1.0;
                }
                c
            }
            Repr::Streamed => self
                .compress(&RealMatrix::identity(self.n, self.n))
                .expect("identity has matching rows"),
        }
    }

    /// `Θ = C Ψ` for a dense basis `Ψ`.
    pub fn sensing_matrix(&self, psi: &RealMatrix) -> Result<RealMatrix> {
        self.compress(psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_full_is_permutation() {
        let op = build_measurement(MeasurementSpec::new(
            MeasurementKind::SinglePixel,
            16,
            16,
            3,
        ))
        .unwrap();
        let c = op.to_dense();
        for i in 0..16 {
            assert_eq!(c.row(i).sum(), 1.0);
            assert_eq!(c.column(i).sum(), 1.0);
        }
    }

    #[test]
    fn gaussian_shape_and_determinism() {
        let spec = MeasurementSpec::new(MeasurementKind::GaussianRandom, 128, 1024, 11);
        let a = build_measurement(spec).unwrap().to_dense();
        let b = build_measurement(spec).unwrap().to_dense();
        assert_eq!(a.shape(), (128, 1024));
        assert_eq!(a, b);
        let other = build_measurement(MeasurementSpec { seed: 12, ..spec })
            .unwrap()
            .to_dense();
        assert_ne!(a, other);
    }

    #[test]
    fn entry_distributions() {
        let (p, n) = (200, 500);
        let g = build_measurement(MeasurementSpec::new(
            MeasurementKind::GaussianRandom,
            p,
            n,
            1,
        ))
        .unwrap()
        .to_dense();
        let var = g.iter().map(|v| v * v).sum::<f64>() / (p * n) as f64;
        assert!((var * p as f64 - 1.0).abs() < 0.02);

        let b = build_measurement(MeasurementSpec::new(
            MeasurementKind::BernoulliRandom,
            p,
            n,
            1,
        ))
        .unwrap()
        .to_dense();
        let s = 1.0 / (p as f64).sqrt();
        assert!(b.iter().all(|&v| v == s || v == -s));
        let mean = b.sum() / (p * n) as f64 / s;
        assert!(mean.abs() < 0.01);

        let u = build_measurement(MeasurementSpec::new(
            MeasurementKind::UniformRandom,
            p,
            n,
            1,
        ))
        .unwrap()
        .to_dense();
        let bound = 1.0 / (n as f64).sqrt();
        assert!(u.iter().all(|&v| v.abs() < bound));
        let var = u.iter().map(|v| v * v).sum::<f64>() / (p * n) as f64;
        assert!((var / (bound * bound / 3.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn streamed_matches_dense_rows() {
        let spec = MeasurementSpec::new(MeasurementKind::GaussianRandom, 300, 60_000, 5);
        let op = build_measurement(spec).unwrap();
        assert!(op.is_streamed());
        let x = RealMatrix::from_fn(60_000, 2, |i, j| ((i * (j + 1)) % 7) as f64 - 3.0);
        let y = op.compress(&x).unwrap();
        let row = spec.row(123);
        assert!((y[(123, 1)] - row.dot(&x.column(1))).abs() < 1e-9);
        let yf = op
            .compress_factored(&x, &RealMatrix::identity(2, 2))
            .unwrap();
        assert!((y - yf).amax() < 1e-12);
    }

    #[test]
    fn compress_examples() {
        let x = RealMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64);
        let id = MeasurementOperator::single_pixel(5, (0..5).collect()).unwrap();
        assert_eq!(id.compress(&x).unwrap(), x);
        let e2 = MeasurementOperator::single_pixel(5, vec![2]).unwrap();
        assert_eq!(e2.compress(&x).unwrap(), x.rows(2, 1).into_owned());
        let g = build_measurement(MeasurementSpec::new(
            MeasurementKind::GaussianRandom,
            3,
            5,
            0,
        ))
        .unwrap();
        assert_eq!(g.compress(&RealMatrix::zeros(5, 4)).unwrap().norm(), 0.0);
        assert!(matches!(
            g.compress(&RealMatrix::zeros(4, 4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn leading_rows_match_smaller_operator() {
        let x = RealMatrix::from_fn(200, 3, |i, j| ((i + 5 * j) % 13) as f64 - 6.0);
        for kind in [
            MeasurementKind::UniformRandom,
            MeasurementKind::GaussianRandom,
            MeasurementKind::BernoulliRandom,
        ] {
            let big = MeasurementSpec::new(kind, 80, 200, 4);
            let y_big = build_measurement(big).unwrap().compress(&x).unwrap();
            let direct = build_measurement(MeasurementSpec { p: 20, ..big })
                .unwrap()
                .compress(&x)
                .unwrap();
            let nested = big.leading_rows(&y_big, 20).unwrap();
            assert!((nested - &direct).amax() < 1e-12 * direct.amax());
        }
        let sp = MeasurementSpec::new(MeasurementKind::SinglePixel, 80, 200, 4);
        assert!(sp.leading_rows(&RealMatrix::zeros(80, 1), 10).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(build_measurement(MeasurementSpec::new(
            MeasurementKind::GaussianRandom,
            0,
            5,
            0
        ))
        .is_err());
        assert!(
            build_measurement(MeasurementSpec::new(MeasurementKind::SinglePixel, 6, 5, 0)).is_err()
        );
        assert!(MeasurementOperator::single_pixel(5, vec![1, 1]).is_err());
        assert_eq!(
            "Single_Pixel".parse::<MeasurementKind>().unwrap(),
            MeasurementKind::SinglePixel
        );
        assert!("type-3".parse::<MeasurementKind>().is_err());
    }
}
