use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm2, Complex64, ComplexMatrix, ComplexVector, RealMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mode_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_error: Option<f64>,
    pub eig_errors: Vec<f64>,
}

impl ErrorMetrics {
    pub fn max_eig_error(&self) -> f64 {
        self.eig_errors.iter().copied().fold(0.0, f64::max)
    }
}

const EXACT_PAIRING_LIMIT: usize = 12;

/// For each reference eigenvalue the index of a distinct estimate, minimising
/// the total distance `Σ |λ_ref − λ_est|`. Exact for up to 12 estimates,
/// greedy on the closest remaining pair beyond that.
pub fn pair_eigenvalues(reference: &[Complex64], estimate: &[Complex64]) -> Result<Vec<usize>> {
    let (nr, ne) = (reference.len(), estimate.len());
    if ne < nr {
        return Err(Error::dims(
            "eigenvalue pairing (estimates ≥ references)",
            nr,
            ne,
        ));
    }
    let dist = |i: usize, j: usize| (reference[i] - estimate[j]).norm();
    if ne <= EXACT_PAIRING_LIMIT {
        // dp[mask] = best cost of assigning the first popcount(mask) references
        let full = 1usize << ne;
        let mut dp = vec![f64::INFINITY; full];
        let mut choice = vec![usize::MAX; full];
        dp[0] = 0.0;
        for mask in 0..full {
            let i = mask.count_ones() as usize;
            if i >= nr || !dp[mask].is_finite() {
                continue;
            }
            for j in 0..ne {
                if mask & (1 << j) == 0 {
                    let next = mask | (1 << j);
                    let cost = dp[mask] + dist(i, j);
                    if cost < dp[next] {
                        dp[next] = cost;
                        choice[next] = j;
                    }
                }
            }
        }
        let best = (0..full)
            .filter(|m| m.count_ones() as usize == nr)
            .min_by(|&a, &b| dp[a].total_cmp(&dp[b]).then(a.cmp(&b)))
            .expect("at least one complete assignment");
        let mut out = vec![0; nr];
        let mut mask = best;
        for i in (0..nr).rev() {
            let j = choice[mask];
            out[i] = j;
            mask &= !(1 << j);
        }
        return Ok(out);
    }
    let mut pairs: Vec<(f64, usize, usize)> = (0..nr)
        .flat_map(|i| (0..ne).map(move |j| (i, j)))
        .map(|(i, j)| (dist(i, j), i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![usize::MAX; nr];
    let mut used = vec![false; ne];
    for (_, i, j) in pairs {
        if out[i] == usize::MAX && !used[j] {
            out[i] = j;
            used[j] = true;
        }
    }
    Ok(out)
}

/// Normalised Frobenius error `‖Φ − Φ̂ D‖_F / ‖Φ‖_F`, where columns of `Φ̂`
/// are first paired with `Φ` (by eigenvalue when spectra are given) and `D`
/// holds the least-squares complex scale of each paired column.
pub fn mode_error(
    reference: &ComplexMatrix,
    estimate: &ComplexMatrix,
    spectra: Option<(&ComplexVector, &ComplexVector)>,
) -> Result<f64> {
    if reference.ncols() != estimate.ncols() {
        return Err(Error::dims(
            "mode error (column count)",
            reference.ncols(),
            estimate.ncols(),
        ));
    }
    if reference.nrows() != estimate.nrows() {
        return Err(Error::dims(
            "mode error (row count)",
            reference.nrows(),
            estimate.nrows(),
        ));
    }
    let order: Vec<usize> = match spectra {
        Some((lr, le)) => pair_eigenvalues(lr.as_slice(), le.as_slice())?,
        None => (0..reference.ncols()).collect(),
    };
    let mut num = 0.0;
    for (i, &j) in order.iter().enumerate() {
        let r = reference.column(i);
        let e = estimate.column(j);
        let ee = e.norm_squared();
        let alpha = if ee > 0.0 {
            e.dotc(&r) / ee
        } else {
            Complex64::new(0.0, 0.0)
        };
        num += (r - e * alpha).norm_squared();
    }
    let den = reference.norm();
    let num = num.sqrt();
    Ok(if den > 0.0 { num / den } else { num })
}

/// `‖B − B̂‖₂ / ‖B‖₂`.
pub fn b_error(reference: &RealMatrix, estimate: &RealMatrix) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::dims(
            "actuation error (shape)",
            format!("{:?}", reference.shape()),
            format!("{:?}", estimate.shape()),
        ));
    }
    let den = norm2(reference);
    let num = norm2(&(reference - estimate));
    Ok(if den > 0.0 { num / den } else { num })
}

/// `|λ − λ̂| / |λ|` for every reference eigenvalue after pairing.
pub fn eig_errors(reference: &ComplexVector, estimate: &ComplexVector) -> Result<Vec<f64>> {
    let order = pair_eigenvalues(reference.as_slice(), estimate.as_slice())?;
    Ok(order
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let d = (reference[i] - estimate[j]).norm();
            let s = reference[i].norm();
            if s > 0.0 {
                d / s
            } else {
                d
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (ComplexMatrix, ComplexVector) {
        let phi = ComplexMatrix::from_fn(6, 3, |i, j| {
            Complex64::new((i + j) as f64 * 0.3 - 0.5, (i * j) as f64 * 0.1)
        });
        let lam = ComplexVector::from_vec(vec![
            Complex64::new(0.9, 0.1),
            Complex64::new(0.9, -0.1),
            Complex64::new(0.5, 0.0),
        ]);
        (phi, lam)
    }

    #[test]
    fn identical_is_zero() {
        let (phi, lam) = sample();
        assert_eq!(mode_error(&phi, &phi, Some((&lam, &lam))).unwrap(), 0.0);
    }

    #[test]
    fn permutation_and_phase_invariance() {
        let (phi, lam) = sample();
        let perm = [2, 0, 1];
        let rot = Complex64::from_polar(2.5, 0.7);
        let est = ComplexMatrix::from_fn(6, 3, |i, j| phi[(i, perm[j])] * rot);
        let lam_est = ComplexVector::from_fn(3, |j, _| lam[perm[j]]);
        assert!(mode_error(&phi, &est, Some((&lam, &lam_est))).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_perturbation_closed_form() {
        let mut phi = ComplexMatrix::zeros(6, 2);
        phi[(0, 0)] = Complex64::new(1.0, 0.0);
        phi[(1, 1)] = Complex64::new(0.0, 2.0);
        let mut e = ComplexMatrix::zeros(6, 2);
        e[(3, 0)] = Complex64::new(1.0, 1.0);
        e[(4, 1)] = Complex64::new(-0.5, 0.0);
        let eps = 1e-3;
        let est = &phi + &e * Complex64::new(eps, 0.0);
        // the best scale shrinks each column slightly, so the error is
        // sqrt(Σ a b / (a + b)) with a = ‖φ_j‖², b = ε² ‖e_j‖²
        let expected = (0..2)
            .map(|j| {
                let a = phi.column(j).norm_squared();
                let b = eps * eps * e.column(j).norm_squared();
                a * b / (a + b)
            })
            .sum::<f64>()
            .sqrt()
            / phi.norm();
        let got = mode_error(&phi, &est, None).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - eps * e.norm() / phi.norm()).abs() < 1e-8);
    }

    #[test]
    fn pairing_prefers_global_assignment() {
        let z = |re: f64| Complex64::new(re, 0.0);
        let reference = [z(0.0), z(1.0)];
        let estimate = [z(0.6), z(-0.1)];
        assert_eq!(pair_eigenvalues(&reference, &estimate).unwrap(), vec![1, 0]);
        let errs = eig_errors(
            &ComplexVector::from_vec(vec![z(1.0), z(0.5)]),
            &ComplexVector::from_vec(vec![z(0.5), z(1.1)]),
        )
        .unwrap();
        assert!((errs[0] - 0.1).abs() < 1e-15 && errs[1] == 0.0);
    }

    #[test]
    fn b_error_spectral() {
        let b = RealMatrix::from_column_slice(3, 1, &[3.0, 4.0, 0.0]);
        let e = RealMatrix::from_column_slice(3, 1, &[3.0, 4.0, 0.5]);
        assert!((b_error(&b, &e).unwrap() - 0.1).abs() < 1e-15);
    }
}
