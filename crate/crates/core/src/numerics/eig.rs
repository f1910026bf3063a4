use nalgebra::linalg::Schur;

use super::{Complex64, ComplexMatrix, ComplexVector, RealMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: ComplexVector,
    /// Unit-norm eigenvectors, column-aligned with `values`.
    pub vectors: ComplexMatrix,
}

/// Eigendecomposition of a real square matrix.
///
/// Complex eigenvalues come out as exact conjugate pairs with conjugate
/// eigenvectors, and real eigenvalues carry real eigenvectors. Ordering
/// follows [`order_spectrum`].
pub fn eig(a: &RealMatrix) -> Result<EigenDecomposition> {
    super::check_finite(a, "eigendecomposition input")?;
    let mut dec = eig_complex(&super::to_complex(a))?;
    enforce_conjugate_pairs(&mut dec, a.norm());
    let order = order_spectrum(dec.values.as_slice());
    Ok(reorder(dec, &order))
}

/// Eigendecomposition of a complex square matrix through the complex Schur
/// form `A = Q T Qᴴ`, with eigenvectors of `T` found by back substitution.
pub fn eig_complex(a: &ComplexMatrix) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims(
            "eigendecomposition (square input)",
            format!("{n}×{n}"),
            format!("{n}×{}", a.ncols()),
        ));
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            values: ComplexVector::zeros(0),
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::NoConvergence("Schur decomposition"))?;
    let (q, t) = schur.unpack();

    let scale = t.norm().max(f64::MIN_POSITIVE);
    let guard = f64::EPSILON * scale;
    let mut y = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < guard {
                denom = Complex64::new(guard, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    normalize_columns(&mut vectors);
    fix_phase(&mut vectors);
    let values = t.diagonal();
    let order = order_spectrum(values.as_slice());
    Ok(reorder(EigenDecomposition { values, vectors }, &order))
}

fn reorder(dec: EigenDecomposition, order: &[usize]) -> EigenDecomposition {
    EigenDecomposition {
        values: ComplexVector::from_iterator(order.len(), order.iter().map(|&i| dec.values[i])),
        vectors: dec.vectors.select_columns(order),
    }
}

fn enforce_conjugate_pairs(dec: &mut EigenDecomposition, norm: f64) {
    let n = dec.values.len();
    let tol = 64.0 * f64::EPSILON * norm.max(1.0);
    let mut paired = vec![false; n];
    for i in 0..n {
        if paired[i] {
            continue;
        }
        let li = dec.values[i];
        if li.im.abs() <= tol {
            dec.values[i].im = 0.0;
            // a real eigenvalue of a real matrix has a real eigenvector; the
            // phase fix already rotated it onto the real axis
            for z in dec.vectors.column_mut(i).iter_mut() {
                z.im = 0.0;
            }
            let norm = dec.vectors.column(i).norm();
            if norm > 0.0 {
                dec.vectors.column_mut(i).unscale_mut(norm);
            }
            paired[i] = true;
            continue;
        }
        let partner = (0..n).filter(|&j| j != i && !paired[j]).min_by(|&a, &b| {
            (dec.values[a] - li.conj())
                .norm()
                .total_cmp(&(dec.values[b] - li.conj()).norm())
        });
        paired[i] = true;
        if let Some(j) = partner {
            let (upper, lower) = if li.im > 0.0 { (i, j) } else { (j, i) };
            let lam = dec.values[upper];
            let mid = Complex64::new(
                0.5 * (lam.re + dec.values[lower].re),
                0.5 * (lam.im - dec.values[lower].im),
            );
            dec.values[upper] = mid;
            dec.values[lower] = mid.conj();
            let v = dec.vectors.column(upper).map(|z| z.conj());
            dec.vectors.set_column(lower, &v);
            paired[j] = true;
        }
    }
}

/// Ordering used for every spectrum in the crate: decreasing modulus (that
/// is, decreasing growth rate `Re ln λ`); eigenvalues of equal modulus by
/// increasing `|arg λ|`, and within a conjugate pair the positive imaginary
/// part first.
pub fn order_spectrum(values: &[Complex64]) -> Vec<usize> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .norm()
            .total_cmp(&values[a].norm())
            .then(a.cmp(&b))
    });
    let top = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * top.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let lead = values[idx[start]].norm();
        let mut end = start + 1;
        while end < n && lead - values[idx[end]].norm() <= tol {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| {
            let (za, zb) = (values[a], values[b]);
            let arg_a = za.im.atan2(za.re).abs();
            let arg_b = zb.im.atan2(zb.re).abs();
            if (arg_a - arg_b).abs() > 1e-10 {
                arg_a.total_cmp(&arg_b)
            } else {
                zb.im.total_cmp(&za.im).then(a.cmp(&b))
            }
        });
        start = end;
    }
    idx
}

pub fn normalize_columns(m: &mut ComplexMatrix) {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
}

/// Rotate every column so its largest-modulus entry is real and positive.
/// The first of several entries of equal modulus wins.
pub fn fix_phase(m: &mut ComplexMatrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        let mut best_mod = -1.0;
        for (i, z) in col.iter().enumerate() {
            // small slack so rounding does not flip the pivot between equal entries
            if z.norm() > best_mod * (1.0 + 1e-12) {
                best = i;
                best_mod = z.norm();
            }
        }
        if best_mod > 0.0 {
            let rot = col[best].conj() / best_mod;
            for z in col.iter_mut() {
                *z *= rot;
            }
            col[best].im = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn residual(a: &RealMatrix, dec: &EigenDecomposition) -> f64 {
        let ac = super::super::to_complex(a);
        (0..dec.values.len())
            .map(|i| {
                let w = dec.vectors.column(i);
                (&ac * w - w * dec.values[i]).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal() {
        let a = dmatrix![0.5, 0.0; 0.0, -0.3];
        let dec = eig(&a).unwrap();
        assert_eq!(dec.values[0], Complex64::new(0.5, 0.0));
        assert_eq!(dec.values[1], Complex64::new(-0.3, 0.0));
        assert!(residual(&a, &dec) < 1e-14);
    }

    #[test]
    fn two_state_pair() {
        let a = dmatrix![0.9, 0.2; -0.1, 0.9];
        let dec = eig(&a).unwrap();
        let s = 0.02_f64.sqrt();
        assert!((dec.values[0] - Complex64::new(0.9, s)).norm() < 1e-14);
        assert!((dec.values[1] - Complex64::new(0.9, -s)).norm() < 1e-14);
        assert_eq!(dec.values[0], dec.values[1].conj());
        assert!(residual(&a, &dec) < 1e-13);
        for col in dec.vectors.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-14);
            let pivot = col
                .iter()
                .map(|z| z.norm())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            assert!(col[pivot].im == 0.0 && col[pivot].re > 0.0);
        }
        assert_eq!(
            dec.vectors.column(1),
            dec.vectors.column(0).map(|z| z.conj())
        );
    }

    #[test]
    fn identity_and_errors() {
        let dec = eig(&RealMatrix::identity(2, 2)).unwrap();
        assert!(dec
            .values
            .iter()
            .all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(residual(&RealMatrix::identity(2, 2), &dec) < 1e-15);
        assert!(matches!(
            eig(&RealMatrix::zeros(2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ordering_rule() {
        let z = |re, im| Complex64::new(re, im);
        let vals = [
            z(0.5, 0.0),
            z(0.0, 0.0),
            z(0.6, -0.8),
            z(1.0, 0.0),
            z(0.6, 0.8),
            z(-0.9, 0.0),
        ];
        let order = order_spectrum(&vals);
        assert_eq!(order, vec![3, 4, 2, 5, 0, 1]);
    }

    #[test]
    fn rotation_block_with_real_modes() {
        let a = dmatrix![0.2, -0.7, 0.0; 0.7, 0.2, 0.0; 0.0, 0.0, 0.95];
        let dec = eig(&a).unwrap();
        assert!((dec.values[0] - Complex64::new(0.95, 0.0)).norm() < 1e-14);
        assert!(dec.vectors.column(0).iter().all(|z| z.im == 0.0));
        assert!(residual(&a, &dec) < 1e-13);
    }
}
