use log::warn;
use nalgebra::{ComplexField, DMatrix, DVector, SVD};

use super::{check_finite, ComplexMatrix, RealMatrix, RANK_RTOL};
use crate::error::{Error, Result};

/// Rank-r factors `U diag(S) Vᵀ` with nonincreasing, strictly positive `S`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: RealMatrix,
    pub s: DVector<f64>,
    pub v: RealMatrix,
    /// Rank the caller asked for; `rank()` is smaller when the matrix was
    /// numerically rank deficient.
    pub requested_rank: usize,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank() < self.requested_rank
    }

    /// `V Σ⁻¹`, the right factor every DMD variant multiplies data by.
    pub fn v_sigma_inv(&self) -> RealMatrix {
        let mut out = self.v.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col /= self.s[j];
        }
        out
    }

    pub fn reconstruct(&self) -> RealMatrix {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us * self.v.transpose()
    }
}

/// Full thin SVD sorted by decreasing singular value.
///
/// Tall inputs go through a Householder QR first so the bidiagonalization
/// only sees the small triangular factor. Column signs are fixed so that the
/// largest-magnitude entry of every left singular vector is positive, which
/// makes the factors deterministic.
pub fn thin_svd(m: &RealMatrix) -> (RealMatrix, DVector<f64>, RealMatrix) {
    let (rows, cols) = m.shape();
    let (mut u, s, mut v) = if rows >= 2 * cols && cols > 0 {
        let (q, r) = m.clone().qr().unpack();
        let svd = SVD::new(r, true, true);
        let u = q * svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᵀ").transpose();
        (u, svd.singular_values, v)
    } else if cols >= 2 * rows && rows > 0 {
        let (v, s, u) = thin_svd(&m.transpose());
        return (u, s, v);
    } else {
        let svd = SVD::new(m.clone(), true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᵀ").transpose();
        (u, svd.singular_values, v)
    };

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    if order.iter().enumerate().any(|(k, &i)| k != i) {
        u = u.select_columns(&order);
        v = v.select_columns(&order);
    }
    let s = DVector::from_iterator(order.len(), order.iter().map(|&i| s[i]));

    for j in 0..u.ncols() {
        let col = u.column(j);
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    (u, s, v)
}

pub fn singular_values(m: &RealMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = if m.nrows() >= 2 * m.ncols() {
        let r = m.clone().qr().r();
        r.singular_values().iter().copied().collect()
    } else if m.ncols() >= 2 * m.nrows() {
        let r = m.transpose().qr().r();
        r.singular_values().iter().copied().collect()
    } else {
        m.singular_values().iter().copied().collect()
    };
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Best rank-`r` approximation of `m`.
///
/// When `m` has fewer than `r` singular values above `RANK_RTOL · σ₁` the
/// factors are truncated to that numerical rank and a warning is logged.
pub fn truncated_svd(m: &RealMatrix, r: usize) -> Result<TruncatedSvd> {
    let max = m.nrows().min(m.ncols());
    if r == 0 || r > max {
        return Err(Error::RankOutOfRange {
            context: "truncated SVD",
            rank: r,
            max,
        });
    }
    check_finite(m, "truncated SVD input")?;

    let (u, s, v) = thin_svd(m);
    let sigma1 = s[0];
    if sigma1 <= 0.0 {
        return Err(Error::ZeroRank {
            context: "truncated SVD",
        });
    }
    let keep = s
        .iter()
        .take(r)
        .take_while(|&&x| x > RANK_RTOL * sigma1)
        .count();
    if keep < r {
        warn!("truncated SVD: requested rank {r} but numerical rank is {keep}");
    }
    Ok(TruncatedSvd {
        u: u.columns(0, keep).into_owned(),
        s: s.rows(0, keep).into_owned(),
        v: v.columns(0, keep).into_owned(),
        requested_rank: r,
    })
}

fn pinv_generic<T>(m: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = SVD::new(m.clone(), true, true);
    let sigma1 = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    if sigma1 == 0.0 {
        return DMatrix::zeros(cols, rows);
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &sk) in svd.singular_values.iter().enumerate() {
        if sk > RANK_RTOL * sigma1 {
            let scale = T::from_real(1.0 / sk);
            out += v_t.row(k).adjoint() * (u.column(k).adjoint() * scale);
        }
    }
    out
}

/// Moore–Penrose pseudoinverse via the SVD, with singular values below
/// `RANK_RTOL · σ₁` treated as zero. The zero matrix maps to the zero matrix
/// of transposed shape.
pub fn pseudoinverse(m: &RealMatrix) -> Result<RealMatrix> {
    check_finite(m, "pseudoinverse input")?;
    Ok(pinv_generic(m))
}

pub fn pseudoinverse_complex(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if let Some(pos) = m
        .iter()
        .position(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::NonFinite {
            context: "pseudoinverse input".into(),
            row: pos % m.nrows(),
            col: pos / m.nrows(),
        });
    }
    Ok(pinv_generic(m))
}
