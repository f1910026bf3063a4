//! CoSaMP sparse recovery and lifting of compressed vectors back to the
//! full state through a sparsifying basis.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::{
    dct_basis, fix_phase, normalize_columns, pseudoinverse, Complex64, ComplexMatrix,
    ComplexVector, RealMatrix, RealVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SparseRecoveryConfig {
    pub sparsity: usize,
    pub max_iterations: usize,
    pub residual_tol: f64,
}

impl Default for SparseRecoveryConfig {
    fn default() -> Self {
        SparseRecoveryConfig {
            sparsity: 4,
            max_iterations: 10,
            residual_tol: 1e-10,
        }
    }
}

impl SparseRecoveryConfig {
    pub fn with_sparsity(sparsity: usize) -> Self {
        SparseRecoveryConfig {
            sparsity,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::InvalidArgument(
                "sparsity K must be at least 1".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::InvalidArgument(
                "residual_tol must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Diagnostics for one recovered vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRecovery {
    pub support: Vec<usize>,
    /// `‖y − Θ s‖ / ‖y‖` of the returned coefficients.
    pub relative_residual: f64,
    pub iterations: usize,
    /// Whether the residual reached the configured tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SparseSolution {
    pub coefficients: ComplexVector,
    pub report: ColumnRecovery,
}

fn times(a: &RealMatrix, y: &ComplexVector) -> ComplexVector {
    let re = a * y.map(|z| z.re);
    let im = a * y.map(|z| z.im);
    ComplexVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

fn transpose_times(a: &RealMatrix, y: &ComplexVector) -> ComplexVector {
    let re = a.tr_mul(&y.map(|z| z.re));
    let im = a.tr_mul(&y.map(|z| z.im));
    ComplexVector::from_fn(re.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// Indices of the `k` largest entries, ties going to the lower index.
fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

struct Iterate {
    support: Vec<usize>,
    values: ComplexVector,
    residual: f64,
}

fn fit(theta: &RealMatrix, y: &ComplexVector, support: Vec<usize>) -> Result<Iterate> {
    let sub = theta.select_columns(&support);
    let values = times(&pseudoinverse(&sub)?, y);
    let residual = (y - times(&sub, &values)).norm();
    Ok(Iterate {
        support,
        values,
        residual,
    })
}

/// CoSaMP for `y ≈ Θ s` with at most `K` nonzeros in `s`.
///
/// Complex right-hand sides keep real and imaginary parts on one support,
/// chosen by coefficient modulus. The returned iterate is the best one seen,
/// including the single greedy thresholding step used to seed the search.
pub fn cosamp(
    theta: &RealMatrix,
    y: &ComplexVector,
    cfg: &SparseRecoveryConfig,
) -> Result<SparseSolution> {
    cfg.validate()?;
    let (p, n) = theta.shape();
    if y.len() != p {
        return Err(Error::dims("cosamp (length of y = rows of Θ)", p, y.len()));
    }
    let k = cfg.sparsity.min(n);
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(SparseSolution {
            coefficients: ComplexVector::zeros(n),
            report: ColumnRecovery {
                support: Vec::new(),
                relative_residual: 0.0,
                iterations: 0,
                converged: true,
            },
        });
    }
    if 2 * k > p {
        warn!(
            "cosamp: 2K = {} exceeds the number of measurements p = {p}",
            2 * k
        );
    }
    let target = cfg.residual_tol * y_norm;

    let proxy = |r: &ComplexVector| -> Vec<f64> {
        transpose_times(theta, r).iter().map(|z| z.norm()).collect()
    };

    let mut best = fit(theta, y, top_k(&proxy(y), k))?;
    let mut iterations = 0;
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    while best.residual > target && iterations < cfg.max_iterations {
        iterations += 1;
        let mut candidate = top_k(&proxy(&residual), 2 * k);
        candidate.extend_from_slice(&support);
        candidate.sort_unstable();
        candidate.dedup();

        let wide = fit(theta, y, candidate)?;
        let magnitudes: Vec<f64> = wide.values.iter().map(|z| z.norm()).collect();
        let pruned: Vec<usize> = top_k(&magnitudes, k)
            .into_iter()
            .map(|i| wide.support[i])
            .collect();
        let stalled = pruned == support;
        let current = fit(theta, y, pruned)?;
        residual = y - times(&theta.select_columns(&current.support), &current.values);
        support = current.support.clone();
        if current.residual < best.residual {
            best = current;
        }
        if stalled {
            break;
        }
    }

    let mut coefficients = ComplexVector::zeros(n);
    for (&i, &v) in best.support.iter().zip(best.values.iter()) {
        coefficients[i] = v;
    }
    let support: Vec<usize> = best
        .support
        .iter()
        .zip(best.values.iter())
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(&i, _)| i)
        .collect();
    Ok(SparseSolution {
        coefficients,
        report: ColumnRecovery {
            support,
            relative_residual: best.residual / y_norm,
            iterations,
            converged: best.residual <= target,
        },
    })
}

/// Real-valued convenience wrapper around [`cosamp`].
pub fn cosamp_real(
    theta: &RealMatrix,
    y: &RealVector,
    cfg: &SparseRecoveryConfig,
) -> Result<(RealVector, ColumnRecovery)> {
    let yc = y.map(|v| Complex64::new(v, 0.0));
    let sol = cosamp(theta, &yc, cfg)?;
    Ok((sol.coefficients.map(|z| z.re), sol.report))
}

/// An orthonormal basis `Ψ` in which the recovered vectors are sparse.
#[derive(Debug, Clone)]
pub struct SparsifyingBasis {
    psi: RealMatrix,
}

impl SparsifyingBasis {
    pub fn dct(n: usize) -> Result<Self> {
        Ok(SparsifyingBasis { psi: dct_basis(n)? })
    }

    pub fn from_matrix(psi: RealMatrix) -> Result<Self> {
        let n = psi.nrows();
        if psi.ncols() != n || n == 0 {
            return Err(Error::dims(
                "sparsifying basis (square)",
                format!("{n}×{n}"),
                format!("{}×{}", n, psi.ncols()),
            ));
        }
        let err = (psi.tr_mul(&psi) - RealMatrix::identity(n, n)).amax();
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "sparsifying basis is not orthonormal (max |ΨᵀΨ − I| = {err:.2e})"
            )));
        }
        Ok(SparsifyingBasis { psi })
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.psi
    }

    /// `Θ = C Ψ`.
    pub fn sensing_matrix(&self, c: &MeasurementOperator) -> Result<RealMatrix> {
        c.sensing_matrix(&self.psi)
    }

    /// `Ψ s` for a sparse coefficient vector, touching only its support.
    pub fn synthesize(&self, s: &ComplexVector) -> ComplexVector {
        let mut out = ComplexVector::zeros(self.n());
        for (k, z) in s.iter().enumerate() {
            if z.norm() > 0.0 {
                for (o, &v) in out.iter_mut().zip(self.psi.column(k).iter()) {
                    *o += z * v;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct VectorRecovery {
    /// Full-state vectors `Ψ s`, one per input column.
    pub vectors: ComplexMatrix,
    pub columns: Vec<ColumnRecovery>,
}

impl VectorRecovery {
    pub fn all_converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }

    pub fn max_residual(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.relative_residual)
            .fold(0.0, f64::max)
    }
}

/// Recover `x_i` with `C x_i ≈ v_i` for every column of `v` without
/// normalising the result.
pub fn recover_vectors(
    v: &ComplexMatrix,
    c: &MeasurementOperator,
    basis: &SparsifyingBasis,
    cfg: &SparseRecoveryConfig,
) -> Result<VectorRecovery> {
    cfg.validate()?;
    if v.nrows() != c.p() {
        return Err(Error::dims(
            "vector recovery (rows = measurement count p)",
            c.p(),
            v.nrows(),
        ));
    }
    if basis.n() != c.n() {
        return Err(Error::dims(
            "vector recovery (basis dimension = n)",
            c.n(),
            basis.n(),
        ));
    }
    let n = c.n();
    if v.ncols() == 0 {
        return Ok(VectorRecovery {
            vectors: ComplexMatrix::zeros(n, 0),
            columns: Vec::new(),
        });
    }
    let theta = basis.sensing_matrix(c)?;
    let solutions: Vec<SparseSolution> = (0..v.ncols())
        .into_par_iter()
        .map(|j| cosamp(&theta, &v.column(j).into_owned(), cfg))
        .collect::<Result<_>>()?;

    let mut vectors = ComplexMatrix::zeros(n, v.ncols());
    let mut columns = Vec::with_capacity(v.ncols());
    for (j, sol) in solutions.into_iter().enumerate() {
        vectors.set_column(j, &basis.synthesize(&sol.coefficients));
        if !sol.report.converged {
            warn!(
                "sparse recovery of column {j}: relative residual {:.3e} after {} iterations",
                sol.report.relative_residual, sol.report.iterations
            );
        }
        columns.push(sol.report);
    }
    Ok(VectorRecovery { vectors, columns })
}

/// [`recover_vectors`] followed by unit normalisation and the phase
/// convention of [`fix_phase`]; used for DMD modes.
pub fn recover_full_vectors(
    v: &ComplexMatrix,
    c: &MeasurementOperator,
    basis: &SparsifyingBasis,
    cfg: &SparseRecoveryConfig,
) -> Result<VectorRecovery> {
    let mut out = recover_vectors(v, c, basis, cfg)?;
    normalize_columns(&mut out.vectors);
    fix_phase(&mut out.vectors);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{build_measurement, MeasurementKind, MeasurementSpec};
    use crate::numerics::to_complex;

    fn gaussian_theta(p: usize, n: usize, seed: u64) -> RealMatrix {
        build_measurement(MeasurementSpec::new(
            MeasurementKind::GaussianRandom,
            p,
            n,
            seed,
        ))
        .unwrap()
        .to_dense()
    }

    #[test]
    fn zero_rhs() {
        let theta = gaussian_theta(8, 20, 0);
        let sol = cosamp(
            &theta,
            &ComplexVector::zeros(8),
            &SparseRecoveryConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.coefficients.norm(), 0.0);
        assert!(sol.report.converged && sol.report.support.is_empty());
    }

    #[test]
    fn planted_spikes_gaussian() {
        let theta = gaussian_theta(128, 1024, 42);
        let mut s = RealVector::zeros(1024);
        for (i, v) in [(17, 1.0), (300, -1.0), (301, 1.0), (900, -1.0)] {
            s[i] = v;
        }
        let y = &theta * &s;
        let (rec, report) =
            cosamp_real(&theta, &y, &SparseRecoveryConfig::with_sparsity(4)).unwrap();
        assert!((&rec - &s).norm() / s.norm() < 1e-6);
        assert_eq!(report.support, vec![17, 300, 301, 900]);
        assert!(report.converged);
    }

    #[test]
    fn identity_sensing_full_sparsity() {
        let n = 12;
        let y = RealVector::from_fn(n, |i, _| (i as f64 - 5.5) * 0.3);
        let (rec, _) = cosamp_real(
            &RealMatrix::identity(n, n),
            &y,
            &SparseRecoveryConfig::with_sparsity(n),
        )
        .unwrap();
        assert!((rec - y).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        let theta = gaussian_theta(8, 20, 0);
        assert!(cosamp(
            &theta,
            &ComplexVector::zeros(7),
            &SparseRecoveryConfig::default()
        )
        .is_err());
        let bad = SparseRecoveryConfig {
            sparsity: 0,
            ..Default::default()
        };
        assert!(cosamp(&theta, &ComplexVector::zeros(8), &bad).is_err());
    }

    #[test]
    fn recover_full_vectors_plant_and_recover() {
        let n = 256;
        let basis = SparsifyingBasis::dct(n).unwrap();
        let c = build_measurement(MeasurementSpec::new(
            MeasurementKind::GaussianRandom,
            64,
            n,
            9,
        ))
        .unwrap();
        let mut s = ComplexMatrix::zeros(n, 2);
        s[(3, 0)] = Complex64::new(2.0, 0.5);
        s[(40, 0)] = Complex64::new(-1.0, 1.0);
        s[(7, 1)] = Complex64::new(0.3, 0.0);
        s[(8, 1)] = Complex64::new(-0.2, 0.0);
        s[(100, 1)] = Complex64::new(0.1, 0.0);
        let x = crate::numerics::real_times_complex(basis.matrix(), &s);
        let v = c.compress_complex(&x).unwrap();
        let out =
            recover_full_vectors(&v, &c, &basis, &SparseRecoveryConfig::with_sparsity(4)).unwrap();
        let mut expected = x.clone();
        normalize_columns(&mut expected);
        fix_phase(&mut expected);
        assert!((out.vectors - expected).norm() < 1e-6);
        assert!(out.columns.iter().all(|c| c.converged));

        let empty = recover_full_vectors(
            &ComplexMatrix::zeros(64, 0),
            &c,
            &basis,
            &SparseRecoveryConfig::default(),
        )
        .unwrap();
        assert_eq!(empty.vectors.shape(), (n, 0));
    }

    #[test]
    fn invertible_selection_is_exact_for_any_sparsity() {
        let n = 32;
        let basis = SparsifyingBasis::dct(n).unwrap();
        let c = MeasurementOperator::single_pixel(n, (0..n).rev().collect()).unwrap();
        let col = RealMatrix::from_column_slice(
            n,
            1,
            (basis.matrix().column(5) * 1.5 - basis.matrix().column(9)).as_slice(),
        );
        let x = to_complex(&col);
        let v = c.compress_complex(&x).unwrap();
        for k in [2, 5, 32] {
            let out =
                recover_vectors(&v, &c, &basis, &SparseRecoveryConfig::with_sparsity(k)).unwrap();
            assert!((&out.vectors - &x).norm() < 1e-12, "K = {k}");
        }
    }

    #[test]
    fn basis_must_be_orthonormal() {
        assert!(SparsifyingBasis::from_matrix(RealMatrix::identity(3, 3) * 2.0).is_err());
        assert!(SparsifyingBasis::from_matrix(RealMatrix::identity(3, 3)).is_ok());
    }
}
