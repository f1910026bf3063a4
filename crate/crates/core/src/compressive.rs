//! Compressive DMD and compressive DMD with control.
//!
//! Every variant solves the reduced eigenproblem on compressed snapshots
//! `Y = C X`. Full-state modes (and the actuation matrix) then come either
//! from projecting onto available full-state data or from sparse recovery in
//! a sparsifying basis.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dmd::{
    amplitudes, continuous_spectrum, default_rank, lift_modes, AugmentedSvd, DmdModel,
    ModelFactors, SnapshotSet,
};
use crate::error::{Error, Result};
use crate::measurement::MeasurementOperator;
use crate::numerics::{
    eig, pseudoinverse_complex, to_complex, truncated_svd, vstack, Complex64, ComplexMatrix,
    ComplexVector, RealMatrix,
};
use crate::rng;
use crate::sparse_recovery::{
    recover_full_vectors, recover_vectors, ColumnRecovery, SparseRecoveryConfig, SparsifyingBasis,
};

/// Relative tolerance of the `C X = Y` consistency probe.
pub const CONSISTENCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryPath {
    /// Lift through full-state snapshots.
    #[serde(alias = "compressed", alias = "projection")]
    CompressedProjection,
    /// Recover by sparse approximation in the sparsifying basis.
    #[serde(alias = "sensing")]
    CompressedSensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    CompressedDmd,
    CompressedSensingDmd,
    CompressedDmdKnownB,
    CompressedDmdcUnknownB,
    CompressedSensingDmdKnownB,
    CompressedSensingDmdcUnknownB,
}

impl Branch {
    pub fn path(self) -> RecoveryPath {
        match self {
            Branch::CompressedDmd
            | Branch::CompressedDmdKnownB
            | Branch::CompressedDmdcUnknownB => RecoveryPath::CompressedProjection,
            _ => RecoveryPath::CompressedSensing,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::CompressedDmd => "compressed-dmd",
            Branch::CompressedSensingDmd => "compressed-sensing-dmd",
            Branch::CompressedDmdKnownB => "compressed-dmd-known-b",
            Branch::CompressedDmdcUnknownB => "compressed-dmdc-unknown-b",
            Branch::CompressedSensingDmdKnownB => "compressed-sensing-dmd-known-b",
            Branch::CompressedSensingDmdcUnknownB => "compressed-sensing-dmdc-unknown-b",
        }
    }
}

/// Everything a compressive decomposition may use. Only `y`, `y_shifted`,
/// `c`, `dt` and `r` are mandatory; the rest select the branch.
#[derive(Debug, Clone)]
pub struct CompressiveInputs<'a> {
    pub y: &'a RealMatrix,
    pub y_shifted: &'a RealMatrix,
    pub c: &'a MeasurementOperator,
    pub dt: f64,
    pub r: usize,
    pub r_tilde: Option<usize>,
    pub inputs: Option<&'a RealMatrix>,
    pub full_state: Option<(&'a RealMatrix, &'a RealMatrix)>,
    pub b_known: Option<&'a RealMatrix>,
    pub basis: Option<&'a SparsifyingBasis>,
    pub recovery: SparseRecoveryConfig,
    /// Sparsity used for the columns of `B̂`; defaults to `recovery`.
    pub b_recovery: Option<SparseRecoveryConfig>,
    /// Verify `C X = Y` before using full-state data.
    pub consistency_check: bool,
}

impl<'a> CompressiveInputs<'a> {
    pub fn new(
        y: &'a RealMatrix,
        y_shifted: &'a RealMatrix,
        c: &'a MeasurementOperator,
        dt: f64,
        r: usize,
    ) -> Self {
        CompressiveInputs {
            y,
            y_shifted,
            c,
            dt,
            r,
            r_tilde: None,
            inputs: None,
            full_state: None,
            b_known: None,
            basis: None,
            recovery: SparseRecoveryConfig::default(),
            b_recovery: None,
            consistency_check: true,
        }
    }

    pub fn with_inputs(mut self, inputs: &'a RealMatrix) -> Self {
        self.inputs = Some(inputs);
        self
    }

    pub fn with_full_state(mut self, x: &'a RealMatrix, x_shifted: &'a RealMatrix) -> Self {
        self.full_state = Some((x, x_shifted));
        self
    }

    pub fn with_known_b(mut self, b: &'a RealMatrix) -> Self {
        self.b_known = Some(b);
        self
    }

    pub fn with_r_tilde(mut self, r_tilde: usize) -> Self {
        self.r_tilde = Some(r_tilde);
        self
    }

    pub fn with_basis(mut self, basis: &'a SparsifyingBasis) -> Self {
        self.basis = Some(basis);
        self
    }

    pub fn with_recovery(mut self, cfg: SparseRecoveryConfig) -> Self {
        self.recovery = cfg;
        self
    }

    pub fn with_b_recovery(mut self, cfg: SparseRecoveryConfig) -> Self {
        self.b_recovery = Some(cfg);
        self
    }

    pub fn without_consistency_check(mut self) -> Self {
        self.consistency_check = false;
        self
    }

    fn validate(&self) -> Result<Option<f64>> {
        let (p, m) = self.y.shape();
        if self.y_shifted.shape() != (p, m) {
            return Err(Error::dims(
                "compressed snapshot pair Y, Y′",
                format!("{p}×{m}"),
                format!("{}×{}", self.y_shifted.nrows(), self.y_shifted.ncols()),
            ));
        }
        if p != self.c.p() {
            return Err(Error::dims(
                "rows of Y = measurement count of C",
                self.c.p(),
                p,
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if let Some(u) = self.inputs {
            if u.ncols() != m {
                return Err(Error::dims("input snapshots Υ (columns)", m, u.ncols()));
            }
        }
        if let Some(b) = self.b_known {
            let q = self.inputs.map_or(b.ncols(), |u| u.nrows());
            if b.nrows() != self.c.n() || b.ncols() != q {
                return Err(Error::dims(
                    "actuation matrix B",
                    format!("{}×{q}", self.c.n()),
                    format!("{}×{}", b.nrows(), b.ncols()),
                ));
            }
        }
        let Some((x, xp)) = self.full_state else {
            return Ok(None);
        };
        for (name, mat) in [("X", x), ("X′", xp)] {
            if mat.shape() != (self.c.n(), m) {
                return Err(Error::dims(
                    if name == "X" {
                        "full-state X"
                    } else {
                        "full-state X′"
                    },
                    format!("{}×{m}", self.c.n()),
                    format!("{}×{}", mat.nrows(), mat.ncols()),
                ));
            }
        }
        if !self.consistency_check {
            return Ok(None);
        }
        let residual = consistency_residual(self.c, x, self.y)?.max(consistency_residual(
            self.c,
            xp,
            self.y_shifted,
        )?);
        if residual > CONSISTENCY_TOL {
            return Err(Error::Inconsistent {
                what: "full-state snapshots do not reproduce the measurements (C X ≠ Y)".into(),
                residual,
            });
        }
        Ok(Some(residual))
    }
}

/// `‖C X g − Y g‖ / ‖Y g‖` for a fixed random probe `g`; a cheap stand-in
/// for comparing `C X` with `Y` entrywise.
pub fn consistency_residual(
    c: &MeasurementOperator,
    x: &RealMatrix,
    y: &RealMatrix,
) -> Result<f64> {
    let mut stream = rng::stream(0x5eed, rng::AUXILIARY);
    let g = RealMatrix::from_fn(x.ncols(), 1, |_, _| stream.sample::<f64, _>(StandardNormal));
    let cxg = c.compress(&(x * &g))?;
    let yg = y * &g;
    let diff = (&cxg - &yg).norm();
    let scale = yg.norm().max(cxg.norm());
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

#[derive(Debug, Clone)]
pub struct CompressiveModel {
    /// Spectrum, full-state modes `Φ̂`, `B̂` and the compressed SVD factors.
    /// The reduced operator is `Ã_Y`.
    pub model: DmdModel,
    /// Modes `Φ_Y` of the compressed operator, unit-normalised.
    pub compressed_modes: ComplexMatrix,
    /// Compressed actuation matrix, when it was estimated from data.
    pub b_y: Option<RealMatrix>,
    pub branch: Branch,
    pub mode_recovery: Vec<ColumnRecovery>,
    pub b_recovery: Vec<ColumnRecovery>,
    pub consistency_residual: Option<f64>,
}

impl CompressiveModel {
    pub fn path(&self) -> RecoveryPath {
        self.branch.path()
    }

    pub fn eigenvalues(&self) -> &ComplexVector {
        &self.model.eigenvalues
    }

    pub fn recovery_converged(&self) -> bool {
        self.mode_recovery
            .iter()
            .chain(&self.b_recovery)
            .all(|c| c.converged)
    }
}

fn resolve_basis<'b>(
    inputs: &CompressiveInputs<'b>,
    owned: &'b mut Option<SparsifyingBasis>,
) -> Result<&'b SparsifyingBasis> {
    if let Some(b) = inputs.basis {
        return Ok(b);
    }
    let n = inputs.c.n();
    if n > 1 << 14 {
        return Err(Error::InvalidArgument(format!(
            "compressed sensing at n = {n} needs an explicit sparsifying basis"
        )));
    }
    Ok(owned.insert(SparsifyingBasis::dct(n)?))
}

fn compressed_amplitudes(
    c: &MeasurementOperator,
    modes: &ComplexMatrix,
    y0: &RealMatrix,
) -> Result<ComplexVector> {
    let cphi = c.compress_complex(modes)?;
    let pinv = pseudoinverse_complex(&cphi)?;
    Ok(&pinv * y0.column(0).map(|v| Complex64::new(v, 0.0)))
}

struct Assembled {
    atilde: RealMatrix,
    btilde: Option<RealMatrix>,
    values: ComplexVector,
    w: ComplexMatrix,
    phi_y: ComplexMatrix,
    factors: ModelFactors,
}

/// Reduced eigenproblem of compressive DMD on `(Y, Y′_eff)`.
fn reduced_dmd(y: &RealMatrix, y_eff: &RealMatrix, r: usize) -> Result<(Assembled, RealMatrix)> {
    let svd = truncated_svd(y, r)?;
    if svd.is_rank_deficient() {
        warn!(
            "compressed data has numerical rank {} < r = {r}",
            svd.rank()
        );
    }
    let v_sinv = svd.v_sigma_inv();
    let lift_y = y_eff * &v_sinv;
    let atilde = svd.u.tr_mul(&lift_y);
    let dec = eig(&atilde)?;
    let phi_y = lift_modes(&lift_y, &svd.u, &dec.vectors, &dec.values);
    Ok((
        Assembled {
            atilde,
            btilde: None,
            values: dec.values,
            w: dec.vectors,
            phi_y,
            factors: ModelFactors::Exact(svd),
        },
        v_sinv,
    ))
}

/// Compressive DMD. Full-state modes come from `X′ V_Y Σ_Y⁻¹ W_Y` when `X`
/// is available, otherwise from sparse recovery of `Φ_Y`.
pub fn cdmd(inputs: &CompressiveInputs) -> Result<CompressiveModel> {
    if inputs.inputs.is_some() || inputs.b_known.is_some() {
        warn!("cdmd ignores input snapshots and actuation; use cdmdc for controlled data");
    }
    let plain = CompressiveInputs {
        inputs: None,
        b_known: None,
        ..inputs.clone()
    };
    let consistency = plain.validate()?;
    compressive_dmd(&plain, plain.y_shifted, None, consistency, false)
}

fn compressive_dmd(
    inputs: &CompressiveInputs,
    y_eff: &RealMatrix,
    b_known: Option<(&RealMatrix, &RealMatrix)>,
    consistency: Option<f64>,
    controlled: bool,
) -> Result<CompressiveModel> {
    let (red, v_sinv) = reduced_dmd(inputs.y, y_eff, inputs.r)?;
    let mut owned = None;
    let (modes, mode_recovery, branch, amps) = match inputs.full_state {
        Some((x, xp)) => {
            let x_eff = match b_known {
                Some((b, u)) => xp - b * u,
                None => xp.clone(),
            };
            let lift = &x_eff * &v_sinv;
            let zero_lift = x * &v_sinv;
            let modes = lift_modes(&lift, &zero_lift, &red.w, &red.values);
            let amps = amplitudes(&modes, &x.column(0).into_owned())?;
            let branch = if controlled {
                Branch::CompressedDmdKnownB
            } else {
                Branch::CompressedDmd
            };
            (modes, Vec::new(), branch, amps)
        }
        None => {
            let basis = resolve_basis(inputs, &mut owned)?;
            let rec = recover_full_vectors(&red.phi_y, inputs.c, basis, &inputs.recovery)?;
            let amps = compressed_amplitudes(inputs.c, &rec.vectors, inputs.y)?;
            let branch = if controlled {
                Branch::CompressedSensingDmdKnownB
            } else {
                Branch::CompressedSensingDmd
            };
            (rec.vectors, rec.columns, branch, amps)
        }
    };
    Ok(CompressiveModel {
        model: DmdModel {
            rank: red.atilde.nrows(),
            dt: inputs.dt,
            omega: continuous_spectrum(&red.values, inputs.dt)?,
            atilde: red.atilde,
            btilde: red.btilde,
            eigenvalues: red.values,
            eigenvectors: red.w,
            modes,
            amplitudes: amps,
            b_hat: b_known.map(|(b, _)| b.clone()),
            factors: Some(red.factors),
        },
        compressed_modes: red.phi_y,
        b_y: None,
        branch,
        mode_recovery,
        b_recovery: Vec::new(),
        consistency_residual: consistency,
    })
}

/// Compressive DMD with control, dispatching on which of the full-state
/// snapshots and the actuation matrix are available.
pub fn cdmdc(inputs: &CompressiveInputs) -> Result<CompressiveModel> {
    let u = inputs
        .inputs
        .ok_or(Error::MissingInput("input snapshots Υ"))?;
    let consistency = inputs.validate()?;

    if let Some(b) = inputs.b_known {
        let cb = inputs.c.compress(b)?;
        let y_eff = inputs.y_shifted - &cb * u;
        return compressive_dmd(inputs, &y_eff, Some((b, u)), consistency, true);
    }

    let r_tilde = match inputs.r_tilde {
        Some(r) => r,
        None => default_rank(&vstack(inputs.y, u)?),
    };
    let snaps = SnapshotSet::new(
        inputs.y.clone(),
        inputs.y_shifted.clone(),
        Some(u.clone()),
        inputs.dt,
    )?;
    let aug = AugmentedSvd::compute(&snaps, inputs.r, r_tilde)?;
    let v_sinv = aug.v_sigma_inv();
    let t = aug.u1t_uhat();
    let k = inputs.y_shifted * &v_sinv;
    let lift_y = &k * &t;
    let atilde = aug.u_hat.tr_mul(&lift_y);
    let b_y = &k * aug.u2.transpose();
    let btilde = aug.u_hat.tr_mul(&b_y);
    let dec = eig(&atilde)?;
    let phi_y = lift_modes(&lift_y, &(&aug.u1 * &t), &dec.vectors, &dec.values);

    let mut owned = None;
    let (modes, b_hat, mode_recovery, b_recovery, branch, amps) = match inputs.full_state {
        Some((x, xp)) => {
            let kx = xp * &v_sinv;
            let zero_lift = x * &v_sinv * &t;
            let modes = lift_modes(&(&kx * &t), &zero_lift, &dec.vectors, &dec.values);
            let b_hat = &kx * aug.u2.transpose();
            let amps = amplitudes(&modes, &x.column(0).into_owned())?;
            (
                modes,
                b_hat,
                Vec::new(),
                Vec::new(),
                Branch::CompressedDmdcUnknownB,
                amps,
            )
        }
        None => {
            let basis = resolve_basis(inputs, &mut owned)?;
            let modes = recover_full_vectors(&phi_y, inputs.c, basis, &inputs.recovery)?;
            let b_cfg = inputs.b_recovery.unwrap_or(inputs.recovery);
            let b_rec = recover_vectors(&to_complex(&b_y), inputs.c, basis, &b_cfg)?;
            let b_hat = b_rec.vectors.map(|z| z.re);
            let amps = compressed_amplitudes(inputs.c, &modes.vectors, inputs.y)?;
            (
                modes.vectors,
                b_hat,
                modes.columns,
                b_rec.columns,
                Branch::CompressedSensingDmdcUnknownB,
                amps,
            )
        }
    };

    Ok(CompressiveModel {
        model: DmdModel {
            rank: atilde.nrows(),
            dt: inputs.dt,
            omega: continuous_spectrum(&dec.values, inputs.dt)?,
            atilde,
            btilde: Some(btilde),
            eigenvalues: dec.values,
            eigenvectors: dec.vectors,
            modes,
            amplitudes: amps,
            b_hat: Some(b_hat),
            factors: Some(ModelFactors::Augmented(aug)),
        },
        compressed_modes: phi_y,
        b_y: Some(b_y),
        branch,
        mode_recovery,
        b_recovery,
        consistency_residual: consistency,
    })
}
