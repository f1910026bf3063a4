//! Dense linear-algebra kernels shared by every algorithm in the crate.
//!
//! Matrices are `nalgebra` column-major [`DMatrix`] values. Rank decisions
//! use a relative singular-value threshold of [`RANK_RTOL`]` · σ₁`.

mod dct;
mod eig;
mod svd;

pub use dct::{dct_basis, dct_mode, dct_synthesize};
pub use eig::{eig, eig_complex, fix_phase, normalize_columns, order_spectrum, EigenDecomposition};
pub use svd::{
    pseudoinverse, pseudoinverse_complex, singular_values, thin_svd, truncated_svd, TruncatedSvd,
};

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;
pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;
pub type ComplexVector = DVector<Complex64>;

/// Singular values below `RANK_RTOL · σ₁` are treated as zero.
pub const RANK_RTOL: f64 = 1e-12;

pub fn check_finite(m: &RealMatrix, context: &str) -> Result<()> {
    for (j, col) in m.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: context.to_string(),
                row: i,
                col: j,
            });
        }
    }
    Ok(())
}

pub fn to_complex(m: &RealMatrix) -> ComplexMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|v| v.re)
}

pub fn imag_part(m: &ComplexMatrix) -> RealMatrix {
    m.map(|v| v.im)
}

/// `a · z` for real `a` and complex `z`, without promoting `a`.
pub fn real_times_complex(a: &RealMatrix, z: &ComplexMatrix) -> ComplexMatrix {
    let re = a * real_part(z);
    let im = a * imag_part(z);
    ComplexMatrix::from_fn(re.nrows(), re.ncols(), |i, j| {
        Complex64::new(re[(i, j)], im[(i, j)])
    })
}

/// Stack `top` over `bottom`.
pub fn vstack(top: &RealMatrix, bottom: &RealMatrix) -> Result<RealMatrix> {
    if top.ncols() != bottom.ncols() {
        return Err(Error::dims("vstack", top.ncols(), bottom.ncols()));
    }
    let mut out = RealMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    Ok(out)
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &RealMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Relative Frobenius distance `‖a − b‖ / ‖a‖`, or the absolute distance when
/// `a` vanishes.
pub fn relative_distance(a: &RealMatrix, b: &RealMatrix) -> f64 {
    let diff = (a - b).norm();
    let scale = a.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
