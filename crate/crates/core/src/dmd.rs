//! Exact DMD and DMD with control.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{
    eig, fix_phase, normalize_columns, pseudoinverse_complex, real_times_complex, singular_values,
    to_complex, truncated_svd, vstack, Complex64, ComplexMatrix, ComplexVector, RealMatrix,
    RealVector, TruncatedSvd,
};

/// Eigenvalues with `|λ| ≤ ZERO_EIGENVALUE_RTOL · max |λ|` take the
/// zero-eigenvalue mode formula.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-12;

/// Default fraction of singular-value energy (`Σ σ²`) retained when no rank
/// is given.
pub const DEFAULT_ENERGY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub x: RealMatrix,
    pub x_shifted: RealMatrix,
    pub inputs: Option<RealMatrix>,
    pub dt: f64,
}

impl SnapshotSet {
    pub fn new(
        x: RealMatrix,
        x_shifted: RealMatrix,
        inputs: Option<RealMatrix>,
        dt: f64,
    ) -> Result<Self> {
        if x.shape() != x_shifted.shape() {
            return Err(Error::dims(
                "snapshot pair X, X′",
                format!("{}×{}", x.nrows(), x.ncols()),
                format!("{}×{}", x_shifted.nrows(), x_shifted.ncols()),
            ));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "snapshot matrices must be non-empty".into(),
            ));
        }
        if let Some(u) = &inputs {
            if u.ncols() != x.ncols() || u.nrows() == 0 {
                return Err(Error::dims(
                    "input snapshots Υ (columns)",
                    x.ncols(),
                    u.ncols(),
                ));
            }
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {dt}"
            )));
        }
        Ok(SnapshotSet {
            x,
            x_shifted,
            inputs,
            dt,
        })
    }

    /// Split a trajectory `[x_0 … x_m]` into `X = [x_0 … x_{m−1}]` and
    /// `X′ = [x_1 … x_m]`.
    pub fn from_trajectory(
        trajectory: &RealMatrix,
        inputs: Option<RealMatrix>,
        dt: f64,
    ) -> Result<Self> {
        let cols = trajectory.ncols();
        if cols < 2 {
            return Err(Error::InvalidArgument(
                "a trajectory needs at least two snapshots".into(),
            ));
        }
        let x = trajectory.columns(0, cols - 1).into_owned();
        let xp = trajectory.columns(1, cols - 1).into_owned();
        SnapshotSet::new(x, xp, inputs, dt)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.inputs.as_ref().map_or(0, |u| u.nrows())
    }

    pub fn initial_state(&self) -> RealVector {
        self.x.column(0).into_owned()
    }

    pub fn require_inputs(&self) -> Result<&RealMatrix> {
        self.inputs
            .as_ref()
            .ok_or(Error::MissingInput("input snapshots Υ"))
    }
}

/// The two truncated SVDs behind DMD with unknown actuation: the `r̃`-rank
/// SVD of `Ω = [X; Υ]` split row-wise into `Ũ₁` (n rows) and `Ũ₂` (q rows),
/// and the `r`-rank SVD of `X′`.
#[derive(Debug, Clone)]
pub struct AugmentedSvd {
    pub u1: RealMatrix,
    pub u2: RealMatrix,
    pub sigma: RealVector,
    pub v: RealMatrix,
    pub u_hat: RealMatrix,
    pub sigma_hat: RealVector,
    pub v_hat: RealMatrix,
}

impl AugmentedSvd {
    pub fn compute(snaps: &SnapshotSet, r: usize, r_tilde: usize) -> Result<Self> {
        let inputs = snaps.require_inputs()?;
        let omega = vstack(&snaps.x, inputs)?;
        let aug = truncated_svd(&omega, r_tilde)?;
        let hat = truncated_svd(&snaps.x_shifted, r)?;
        if hat.rank() > aug.rank() {
            warn!("DMDc: rank r = {} exceeds r̃ = {}", hat.rank(), aug.rank());
        }
        let n = snaps.n();
        Ok(AugmentedSvd {
            u1: aug.u.rows(0, n).into_owned(),
            u2: aug.u.rows(n, inputs.nrows()).into_owned(),
            sigma: aug.s,
            v: aug.v,
            u_hat: hat.u,
            sigma_hat: hat.s,
            v_hat: hat.v,
        })
    }

    pub fn r(&self) -> usize {
        self.u_hat.ncols()
    }

    pub fn r_tilde(&self) -> usize {
        self.sigma.len()
    }

    /// `Ṽ Σ̃⁻¹`.
    pub fn v_sigma_inv(&self) -> RealMatrix {
        let mut out = self.v.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col /= self.sigma[j];
        }
        out
    }

    /// `Ũ₁ᵀ Û`, the map from the reduced coordinates back into the `Ω` basis.
    pub fn u1t_uhat(&self) -> RealMatrix {
        self.u1.tr_mul(&self.u_hat)
    }
}

#[derive(Debug, Clone)]
pub enum ModelFactors {
    Exact(TruncatedSvd),
    Augmented(AugmentedSvd),
}

#[derive(Debug, Clone)]
pub struct DmdModel {
    pub rank: usize,
    pub dt: f64,
    pub atilde: RealMatrix,
    pub btilde: Option<RealMatrix>,
    pub eigenvalues: ComplexVector,
    pub omega: ComplexVector,
    /// Unit-norm modes, column-aligned with `eigenvalues`.
    pub modes: ComplexMatrix,
    /// Eigenvectors `W` of `Ã`.
    pub eigenvectors: ComplexMatrix,
    pub amplitudes: ComplexVector,
    pub b_hat: Option<RealMatrix>,
    /// SVD pieces; absent for models reloaded from disk.
    pub factors: Option<ModelFactors>,
}

impl DmdModel {
    pub fn n(&self) -> usize {
        self.modes.nrows()
    }

    pub fn augmented(&self) -> Option<&AugmentedSvd> {
        match &self.factors {
            Some(ModelFactors::Augmented(a)) => Some(a),
            _ => None,
        }
    }

    pub fn exact_svd(&self) -> Option<&TruncatedSvd> {
        match &self.factors {
            Some(ModelFactors::Exact(s)) => Some(s),
            _ => None,
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn zero_eigenvalues(values: &ComplexVector) -> Vec<bool> {
    let top = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    values
        .iter()
        .map(|z| z.norm() <= ZERO_EIGENVALUE_RTOL * top)
        .collect()
}

/// Form `lift · W`, replacing the columns of zero eigenvalues with
/// `zero_lift · w_i`, then normalise with the phase convention.
pub(crate) fn lift_modes(
    lift: &RealMatrix,
    zero_lift: &RealMatrix,
    w: &ComplexMatrix,
    values: &ComplexVector,
) -> ComplexMatrix {
    let mut modes = real_times_complex(lift, w);
    let zeros = zero_eigenvalues(values);
    if zeros.iter().any(|&z| z) {
        let alt = real_times_complex(zero_lift, w);
        for (j, _) in zeros.iter().enumerate().filter(|(_, &z)| z) {
            modes.set_column(j, &alt.column(j));
        }
    }
    normalize_columns(&mut modes);
    fix_phase(&mut modes);
    modes
}

/// `b = Φ⁺ x₀`.
pub fn amplitudes(modes: &ComplexMatrix, x0: &RealVector) -> Result<ComplexVector> {
    if modes.nrows() != x0.len() {
        return Err(Error::dims(
            "amplitudes (state dimension)",
            modes.nrows(),
            x0.len(),
        ));
    }
    let pinv = pseudoinverse_complex(modes)?;
    Ok(&pinv * x0.map(|v| Complex64::new(v, 0.0)))
}

/// `ω = ln λ / dt` on the principal branch; `λ = 0` maps to `−∞`.
pub fn continuous_spectrum(values: &ComplexVector, dt: f64) -> Result<ComplexVector> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(values.map(|z| {
        if z.norm() == 0.0 {
            Complex64::new(f64::NEG_INFINITY, 0.0)
        } else {
            z.ln() / dt
        }
    }))
}

/// Smallest rank whose leading singular values hold `fraction` of `Σ σ²`.
pub fn rank_for_energy(singular_values: &[f64], fraction: f64) -> usize {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= fraction * total * (1.0 - 1e-14) {
            return i + 1;
        }
    }
    singular_values.len()
}

pub fn default_rank(m: &RealMatrix) -> usize {
    rank_for_energy(&singular_values(m), DEFAULT_ENERGY).max(1)
}

fn finish(
    atilde: RealMatrix,
    btilde: Option<RealMatrix>,
    lift: &RealMatrix,
    zero_lift: &RealMatrix,
    b_hat: Option<RealMatrix>,
    factors: ModelFactors,
    snaps: &SnapshotSet,
) -> Result<DmdModel> {
    let dec = eig(&atilde)?;
    let modes = lift_modes(lift, zero_lift, &dec.vectors, &dec.values);
    let amplitudes = amplitudes(&modes, &snaps.initial_state())?;
    Ok(DmdModel {
        rank: atilde.nrows(),
        dt: snaps.dt,
        omega: continuous_spectrum(&dec.values, snaps.dt)?,
        atilde,
        btilde,
        eigenvalues: dec.values,
        eigenvectors: dec.vectors,
        modes,
        amplitudes,
        b_hat,
        factors: Some(factors),
    })
}

fn exact_from(
    snaps: &SnapshotSet,
    x_shifted: &RealMatrix,
    r: usize,
    b_hat: Option<RealMatrix>,
) -> Result<DmdModel> {
    let svd = truncated_svd(&snaps.x, r)?;
    let lift = x_shifted * svd.v_sigma_inv();
    let atilde = svd.u.tr_mul(&lift);
    let zero_lift = svd.u.clone();
    finish(
        atilde,
        None,
        &lift,
        &zero_lift,
        b_hat,
        ModelFactors::Exact(svd),
        snaps,
    )
}

/// Exact DMD: `Ã = Uᵀ X′ V Σ⁻¹`, `Φ = X′ V Σ⁻¹ W` (`Φ = U W` for zero
/// eigenvalues). Inputs in `snaps` are ignored.
pub fn exact_dmd(snaps: &SnapshotSet, r: usize) -> Result<DmdModel> {
    exact_from(snaps, &snaps.x_shifted, r, None)
}

/// DMD on `(X, X′ − B Υ)` with the given actuation matrix echoed as `B̂`.
pub fn dmdc_known_b(snaps: &SnapshotSet, b: &RealMatrix, r: usize) -> Result<DmdModel> {
    let inputs = snaps.require_inputs()?;
    if b.nrows() != snaps.n() || b.ncols() != inputs.nrows() {
        return Err(Error::dims(
            "actuation matrix B",
            format!("{}×{}", snaps.n(), inputs.nrows()),
            format!("{}×{}", b.nrows(), b.ncols()),
        ));
    }
    crate::numerics::check_finite(b, "actuation matrix B")?;
    let corrected = &snaps.x_shifted - b * inputs;
    exact_from(snaps, &corrected, r, Some(b.clone()))
}

/// DMD with control and unknown actuation.
pub fn dmdc_unknown_b(snaps: &SnapshotSet, r: usize, r_tilde: usize) -> Result<DmdModel> {
    let aug = AugmentedSvd::compute(snaps, r, r_tilde)?;
    let k = &snaps.x_shifted * aug.v_sigma_inv();
    let u1t_uhat = aug.u1t_uhat();
    let lift = &k * &u1t_uhat;
    let atilde = aug.u_hat.tr_mul(&lift);
    let b_hat = &k * aug.u2.transpose();
    let btilde = aug.u_hat.tr_mul(&b_hat);
    let zero_lift = &aug.u1 * &u1t_uhat;
    finish(
        atilde,
        Some(btilde),
        &lift,
        &zero_lift,
        Some(b_hat),
        ModelFactors::Augmented(aug),
        snaps,
    )
}

/// Roll the identified model forward in modal coordinates:
/// `z₀ = Φ⁺ x₀`, `z_{k+1} = Λ z_k + Φ⁺ B̂ u_k`, `x_k = Re(Φ z_k)`.
/// Returns `steps + 1` columns starting with the lifted projection of `x₀`.
pub fn predict(
    model: &DmdModel,
    x0: &RealVector,
    inputs: Option<&RealMatrix>,
    steps: usize,
) -> Result<RealMatrix> {
    let n = model.n();
    if x0.len() != n {
        return Err(Error::dims("predict (initial state)", n, x0.len()));
    }
    let pinv = pseudoinverse_complex(&model.modes)?;
    let forcing = match inputs {
        None => None,
        Some(u) => {
            let b_hat = model.b_hat.as_ref().ok_or(Error::MissingInput(
                "actuation matrix B̂ for forced prediction",
            ))?;
            if u.nrows() != b_hat.ncols() {
                return Err(Error::dims(
                    "predict (input dimension)",
                    b_hat.ncols(),
                    u.nrows(),
                ));
            }
            if u.ncols() < steps {
                return Err(Error::InvalidArgument(format!(
                    "predict needs {steps} input columns, got {}",
                    u.ncols()
                )));
            }
            Some((&pinv * to_complex(b_hat), u))
        }
    };
    let mut z = &pinv * x0.map(|v| Complex64::new(v, 0.0));
    let mut out = RealMatrix::zeros(n, steps + 1);
    let lift = |z: &ComplexVector| (&model.modes * z).map(|v| v.re);
    out.set_column(0, &lift(&z));
    for k in 0..steps {
        z.component_mul_assign(&model.eigenvalues);
        if let Some((gamma, u)) = &forcing {
            z += gamma * u.column(k).map(|v| Complex64::new(v, 0.0));
        }
        out.set_column(k + 1, &lift(&z));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn trajectory(a: &RealMatrix, x0: &[f64], steps: usize) -> RealMatrix {
        let mut out = RealMatrix::zeros(a.nrows(), steps + 1);
        out.set_column(0, &RealVector::from_column_slice(x0));
        for k in 0..steps {
            let next = a * out.column(k);
            out.set_column(k + 1, &next);
        }
        out
    }

    #[test]
    fn diagonal_system() {
        let a = dmatrix![0.5, 0.0; 0.0, 0.9];
        let snaps =
            SnapshotSet::from_trajectory(&trajectory(&a, &[1.0, 2.0], 10), None, 1.0).unwrap();
        let model = exact_dmd(&snaps, 2).unwrap();
        assert!((model.eigenvalues[0] - Complex64::new(0.9, 0.0)).norm() < 1e-12);
        assert!((model.eigenvalues[1] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        // modes are the coordinate axes
        assert!((model.modes[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!((model.modes[(0, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn fixed_point() {
        let x0 = RealVector::from_vec(vec![3.0, -1.0, 2.0]);
        let traj = RealMatrix::from_fn(3, 6, |i, _| x0[i]);
        let snaps = SnapshotSet::from_trajectory(&traj, None, 0.1).unwrap();
        let model = exact_dmd(&snaps, 1).unwrap();
        assert!((model.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let phi = model.modes.column(0).map(|z| z.re);
        assert!((phi - x0.normalize()).norm() < 1e-14);
        assert!(model.omega[0].norm() < 1e-13);
    }

    #[test]
    fn zero_data_is_rank_error() {
        let snaps =
            SnapshotSet::new(RealMatrix::zeros(4, 5), RealMatrix::zeros(4, 5), None, 1.0).unwrap();
        assert!(matches!(exact_dmd(&snaps, 1), Err(Error::ZeroRank { .. })));
    }

    #[test]
    fn known_b_with_zero_input_or_zero_b_matches_exact() {
        let a = dmatrix![0.8, 0.3, 0.0; -0.2, 0.7, 0.1; 0.0, 0.0, 0.5];
        let traj = trajectory(&a, &[1.0, 0.5, -0.3], 12);
        let plain = SnapshotSet::from_trajectory(&traj, None, 0.1).unwrap();
        let reference = exact_dmd(&plain, 3).unwrap();
        let zeros =
            SnapshotSet::from_trajectory(&traj, Some(RealMatrix::zeros(1, 12)), 0.1).unwrap();
        let b = RealMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let with_b = dmdc_known_b(&zeros, &b, 3).unwrap();
        assert_eq!(with_b.eigenvalues, reference.eigenvalues);
        assert_eq!(with_b.modes, reference.modes);
        let forced =
            SnapshotSet::from_trajectory(&traj, Some(RealMatrix::from_element(1, 12, 1.0)), 0.1)
                .unwrap();
        let with_zero_b = dmdc_known_b(&forced, &RealMatrix::zeros(3, 1), 3).unwrap();
        assert_eq!(with_zero_b.eigenvalues, reference.eigenvalues);
        assert!(dmdc_known_b(&plain, &b, 3).is_err());
    }

    #[test]
    fn dmdc_zero_input_gives_zero_b() {
        let a = dmatrix![0.9, 0.1, 0.0, 0.0; -0.1, 0.9, 0.0, 0.0; 0.0, 0.0, 0.7, 0.2; 0.0, 0.0, 0.0, 0.6];
        let traj = trajectory(&a, &[1.0, -0.5, 0.3, 0.8], 30);
        let snaps =
            SnapshotSet::from_trajectory(&traj, Some(RealMatrix::zeros(1, 30)), 0.1).unwrap();
        let model = dmdc_unknown_b(&snaps, 4, 4).unwrap();
        let b_hat = model.b_hat.unwrap();
        assert!(b_hat.norm() < 1e-8 * snaps.x_shifted.norm());
        assert!((model.eigenvalues[2].re - 0.7).abs() < 1e-8);
    }

    #[test]
    fn dmdc_rank_infeasible() {
        let snaps = SnapshotSet::new(
            RealMatrix::identity(4, 3),
            RealMatrix::identity(4, 3),
            Some(RealMatrix::from_element(1, 3, 1.0)),
            1.0,
        )
        .unwrap();
        assert!(matches!(
            dmdc_unknown_b(&snaps, 2, 4),
            Err(Error::RankOutOfRange { .. })
        ));
        let no_inputs = SnapshotSet {
            inputs: None,
            ..snaps
        };
        assert!(matches!(
            dmdc_unknown_b(&no_inputs, 2, 2),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn spectrum_examples() {
        let dt = 0.1;
        let vals = ComplexVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new((0.2_f64 * 0.1).exp(), 0.0),
            Complex64::new(0.9, 0.02_f64.sqrt()),
            Complex64::new(0.0, 0.0),
        ]);
        let w = continuous_spectrum(&vals, dt).unwrap();
        assert_eq!(w[0], Complex64::new(0.0, 0.0));
        assert!((w[1].re - 0.2).abs() < 1e-12);
        let lam = vals[2];
        assert!(
            (w[2] - Complex64::new(lam.norm().ln() / dt, lam.im.atan2(lam.re) / dt)).norm() < 1e-12
        );
        assert!((w[2].re - 0.5 * 0.83_f64.ln() / dt).abs() < 1e-12);
        assert!((w[2].re + 0.931648).abs() < 1e-6 && (w[2].im - 1.558604).abs() < 1e-6);
        assert_eq!(w[3].re, f64::NEG_INFINITY);
        assert!(continuous_spectrum(&vals, 0.0).is_err());
    }

    #[test]
    fn energy_rank() {
        assert_eq!(rank_for_energy(&[3.0, 1.0, 0.1], 0.85), 1);
        assert_eq!(rank_for_energy(&[3.0, 1.0, 0.1], 0.9), 2);
        assert_eq!(rank_for_energy(&[3.0, 1.0, 0.1], 0.99), 2);
        assert_eq!(rank_for_energy(&[1.0, 1.0], 1.0), 2);
        assert_eq!(rank_for_energy(&[0.0], 0.99), 0);
    }

    #[test]
    fn predict_zero_steps_and_stability() {
        let a = dmatrix![0.8, 0.3; -0.3, 0.8];
        let traj = trajectory(&a, &[1.0, 0.0], 20);
        let snaps = SnapshotSet::from_trajectory(&traj, None, 0.1).unwrap();
        let model = exact_dmd(&snaps, 2).unwrap();
        let x0 = snaps.initial_state();
        let p0 = predict(&model, &x0, None, 0).unwrap();
        assert_eq!(p0.ncols(), 1);
        assert!((p0.column(0) - &x0).norm() < 1e-12);
        let roll = predict(&model, &x0, None, 200).unwrap();
        assert!(roll.column(200).norm() < 1e-6 * x0.norm());
        assert!((roll.columns(0, 21) - &traj).norm() < 1e-10);
        assert!(matches!(
            predict(&model, &x0, Some(&RealMatrix::zeros(1, 5)), 5),
            Err(Error::MissingInput(_))
        ));
    }
}
