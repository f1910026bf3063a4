use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;
use crate::rng;

/// `η · max_i σ_i`, where `σ_i` is the (population) standard deviation of row
/// `i` across snapshots.
pub fn noise_sigma(x: &RealMatrix, eta: f64) -> f64 {
    let m = x.ncols() as f64;
    let max_std = x
        .row_iter()
        .map(|row| {
            let mean = row.sum() / m;
            (row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m).sqrt()
        })
        .fold(0.0, f64::max);
    eta * max_std
}

/// Add i.i.d. `N(0, σ²)` noise with `σ = η · max_i σ_i` to every entry.
pub fn add_noise(x: &RealMatrix, eta: f64, seed: u64) -> Result<RealMatrix> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level must be non-negative, got {eta}"
        )));
    }
    if eta == 0.0 {
        return Ok(x.clone());
    }
    let sigma = noise_sigma(x, eta);
    let mut stream = rng::stream(seed, rng::NOISE);
    let mut out = x.clone();
    for v in out.iter_mut() {
        *v += sigma * stream.sample::<f64, _>(StandardNormal);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eta_is_identity() {
        let x = RealMatrix::from_fn(4, 6, |i, j| (i * j) as f64);
        assert_eq!(add_noise(&x, 0.0, 1).unwrap(), x);
        assert!(add_noise(&x, -0.1, 1).is_err());
    }

    #[test]
    fn empirical_std() {
        let x = RealMatrix::from_fn(300, 400, |i, j| {
            ((i + 1) as f64) * ((j as f64) * 0.37).sin()
        });
        let eta = 0.1;
        let expected = noise_sigma(&x, eta);
        let noisy = add_noise(&x, eta, 5).unwrap();
        let diff = noisy - &x;
        let n = diff.len() as f64;
        let mean = diff.sum() / n;
        let std = (diff.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!((std / expected - 1.0).abs() < 0.05);
        assert_eq!(add_noise(&x, eta, 5).unwrap(), &x + &diff);
    }
}
