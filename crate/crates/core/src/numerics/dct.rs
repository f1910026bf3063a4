use std::f64::consts::PI;

use super::{RealMatrix, RealVector};
use crate::error::{Error, Result};

fn alpha(n: usize, k: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal DCT-II synthesis matrix: `Ψ[i, k] = α_k cos(π (2i + 1) k / 2n)`.
pub fn dct_basis(n: usize) -> Result<RealMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "DCT basis dimension must be at least 1".into(),
        ));
    }
    let step = PI / (2 * n) as f64;
    Ok(RealMatrix::from_fn(n, n, |i, k| {
        // reduce the phase modulo 4n before the cosine to keep large-n columns accurate
        let phase = ((2 * i + 1) * k) % (4 * n);
        alpha(n, k) * (step * phase as f64).cos()
    }))
}

/// Column `k` of [`dct_basis`]`(n)` without forming the basis.
pub fn dct_mode(n: usize, k: usize) -> Result<RealVector> {
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "DCT wavenumber {k} not below dimension {n}"
        )));
    }
    let step = PI / (2 * n) as f64;
    let a = alpha(n, k);
    Ok(RealVector::from_fn(n, |i, _| {
        let phase = ((2 * i + 1) * k) % (4 * n);
        a * (step * phase as f64).cos()
    }))
}

/// `Ψ s` for a sparse coefficient list `(wavenumber, value)`.
pub fn dct_synthesize(n: usize, coefficients: &[(usize, f64)]) -> Result<RealVector> {
    let mut out = RealVector::zeros(n);
    for &(k, v) in coefficients {
        out.axpy(v, &dct_mode(n, k)?, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(dct_basis(1).unwrap()[(0, 0)], 1.0);
        let psi = dct_basis(2).unwrap();
        let h = 0.5_f64.sqrt();
        let expected = RealMatrix::from_row_slice(2, 2, &[h, h, h, -h]);
        assert!((psi - expected).norm() < 1e-15);
        assert!(dct_basis(0).is_err());
    }

    #[test]
    fn orthonormal() {
        for n in [1, 2, 16, 1024] {
            let psi = dct_basis(n).unwrap();
            let err = (psi.transpose() * &psi - RealMatrix::identity(n, n)).amax();
            assert!(err < 1e-12, "n = {n}: {err}");
        }
    }

    #[test]
    fn mode_matches_basis_column() {
        let psi = dct_basis(37).unwrap();
        for k in [0, 1, 17, 36] {
            assert!((dct_mode(37, k).unwrap() - psi.column(k)).amax() < 1e-14);
        }
        let v = dct_synthesize(37, &[(3, 2.0), (5, -1.0)]).unwrap();
        let w = psi.column(3) * 2.0 - psi.column(5);
        assert!((v - w).amax() < 1e-14);
        assert!(dct_mode(4, 4).is_err());
    }
}
