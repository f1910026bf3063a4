use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::{relative_distance, singular_values, RealMatrix};

use super::identities::{LowRankOperator, TheoremReport};

/// `[B, A B, …, A^{h−1} B]` for an operator given by its action.
pub fn controllability_matrix(
    apply: impl Fn(&RealMatrix) -> RealMatrix,
    b: &RealMatrix,
    horizon: usize,
) -> RealMatrix {
    let q = b.ncols();
    let mut out = RealMatrix::zeros(b.nrows(), q * horizon);
    let mut block = b.clone();
    for k in 0..horizon {
        if k > 0 {
            block = apply(&block);
        }
        out.columns_mut(k * q, q).copy_from(&block);
    }
    out
}

/// Singular values above `max(rows, cols) · ε · σ₁`.
pub fn numerical_rank(m: &RealMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * top;
    s.iter().filter(|&&v| v > tol).count()
}

/// Controllability matrix of `(A, B)` over `horizon` blocks (the state
/// dimension when `None`) and its numerical rank.
pub fn controllability(
    a: &RealMatrix,
    b: &RealMatrix,
    horizon: Option<usize>,
) -> Result<(RealMatrix, usize)> {
    if a.nrows() != a.ncols() {
        return Err(Error::dims(
            "controllability (square A)",
            a.nrows(),
            a.ncols(),
        ));
    }
    if b.nrows() != a.nrows() {
        return Err(Error::dims(
            "controllability (rows of B)",
            a.nrows(),
            b.nrows(),
        ));
    }
    let m = controllability_matrix(|z| a * z, b, horizon.unwrap_or(a.nrows()));
    let rank = numerical_rank(&m);
    Ok((m, rank))
}

/// `C 𝒞 = 𝒞_Y` over `horizon` blocks.
pub fn check_controllability(
    a: &LowRankOperator,
    b: &RealMatrix,
    a_y: &LowRankOperator,
    b_y: &RealMatrix,
    c: &MeasurementOperator,
    horizon: usize,
    tol: f64,
) -> Result<TheoremReport> {
    let full = controllability_matrix(|z| a.apply(z), b, horizon);
    let compressed = controllability_matrix(|z| a_y.apply(z), b_y, horizon);
    let lhs = c.compress(&full)?;
    let residual = relative_distance(&lhs, &compressed);
    Ok(TheoremReport {
        identity: format!("controllability: C𝒞 = 𝒞_Y ({horizon} blocks)"),
        lhs_norm: lhs.norm(),
        rhs_norm: compressed.norm(),
        residual,
        tolerance: tol,
        advisory: false,
        passed: residual <= tol,
        assumptions: None,
        note: Some(format!(
            "rank 𝒞 = {}, rank 𝒞_Y = {}",
            numerical_rank(&full),
            numerical_rank(&compressed)
        )),
    })
}
