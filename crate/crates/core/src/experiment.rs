//! Declarative parameter sweeps over compression ratio, noise level and
//! measurement kind, producing long-format metric tables.
//!
//! A sweep is described by a TOML document:
//!
//! ```toml
//! master_seed = 0
//! realizations = 10
//! methods = ["dmdc", "cdmdc"]
//! measurement = "gaussian"
//! sensor_noise = 0.01
//!
//! [plant]
//! kind = "rank-nine"
//! n = 4096
//!
//! [sweep]
//! axis = "compression"
//! values = [0.01, 0.02, 0.05, 0.1, 0.2]
//! ```
//!
//! Realization `k` uses seed `master_seed + k` for its measurement matrix
//! and noise; the forcing record is drawn once from `master_seed`, so every
//! realization observes the same trajectory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compressive::{cdmdc, CompressiveInputs, RecoveryPath};
use crate::dmd::{default_rank, dmdc_known_b, dmdc_unknown_b, DmdModel, SnapshotSet};
use crate::error::{Error, Result};
use crate::measurement::{MeasurementKind, MeasurementOperator, MeasurementSpec};
use crate::numerics::{vstack, Complex64, ComplexMatrix, ComplexVector, RealMatrix, RealVector};
use crate::rng::realization_seed;
use crate::sparse_recovery::SparseRecoveryConfig;
use crate::testbed::{
    add_noise, load_snapshots, read_snapshot_manifest, simulate, Forcing, LowRankPlant,
    MatrixFormat,
};
use crate::verify::{b_error, eig_errors, mode_error};

const SHIFTED_NOISE_MASK: u64 = 0xa5a5_a5a5_a5a5_a5a5;
const SENSOR_NOISE_MASK: u64 = 0x5e75_0a5e_75e7_5e70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Values are compression ratios `p / n`.
    Compression,
    /// Values are state-noise levels `η`.
    Noise,
    /// Values are measurement kinds.
    Measurement,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Compression => "compression",
            SweepAxis::Noise => "noise",
            SweepAxis::Measurement => "measurement",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub kinds: Vec<MeasurementKind>,
}

fn default_n() -> usize {
    1024
}

fn default_one() -> usize {
    1
}

fn default_sparsity() -> usize {
    4
}

fn default_dt() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlantConfig {
    /// The two-state plant lifted to `n` states.
    TwoState {
        #[serde(default = "default_n")]
        n: usize,
    },
    /// Nine states (four oscillatory pairs and one decay), one input.
    RankNine {
        n: usize,
        #[serde(default)]
        plant_seed: u64,
    },
    /// Arbitrary spectrum given as `[re, im]` pairs; positive imaginary
    /// parts stand for conjugate pairs.
    Spectrum {
        n: usize,
        eigenvalues: Vec<[f64; 2]>,
        #[serde(default = "default_one")]
        inputs: usize,
        #[serde(default = "default_sparsity")]
        sparsity: usize,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default)]
        plant_seed: u64,
    },
    /// Snapshots saved by `save_snapshots`; the reference is DMDc on the
    /// clean files.
    Files {
        dir: PathBuf,
        #[serde(default)]
        format: Option<MatrixFormat>,
    },
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::TwoState { n: default_n() }
    }
}

impl PlantConfig {
    pub fn build(&self) -> Result<Option<LowRankPlant>> {
        Ok(Some(match self {
            PlantConfig::TwoState { n } => LowRankPlant::two_state(*n)?,
            PlantConfig::RankNine { n, plant_seed } => LowRankPlant::rank_nine(*n, *plant_seed)?,
            PlantConfig::Spectrum {
                n,
                eigenvalues,
                inputs,
                sparsity,
                dt,
                plant_seed,
            } => {
                let spectrum: Vec<Complex64> = eigenvalues
                    .iter()
                    .map(|&[re, im]| Complex64::new(re, im))
                    .collect();
                LowRankPlant::from_spectrum(*n, &spectrum, *inputs, *sparsity, *dt, *plant_seed)?
            }
            PlantConfig::Files { .. } => return Ok(None),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// DMD with control on the full-state data.
    Dmdc,
    /// Compressive DMD with control on `Y = C X`.
    Cdmdc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dmdc => "dmdc",
            Method::Cdmdc => "cdmdc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    EigErrorMax,
    EigErrorMean,
    ModeError,
    BError,
    RecoveryConverged,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::EigErrorMax => "eig_error_max",
            Metric::EigErrorMean => "eig_error_mean",
            Metric::ModeError => "mode_error",
            Metric::BError => "b_error",
            Metric::RecoveryConverged => "recovery_converged",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_realizations() -> usize {
    1
}

fn default_snapshots() -> usize {
    301
}

fn default_forcing_std() -> f64 {
    1.0
}

fn default_methods() -> Vec<Method> {
    vec![Method::Dmdc, Method::Cdmdc]
}

fn default_kind() -> MeasurementKind {
    MeasurementKind::GaussianRandom
}

fn default_path() -> RecoveryPath {
    RecoveryPath::CompressedProjection
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub plant: PlantConfig,
    /// Number of state snapshots `m + 1` for synthetic plants.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Reduced initial state; the plant's default when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_forcing_std")]
    pub forcing_std: f64,
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub r_tilde: Option<usize>,
    #[serde(default = "default_kind")]
    pub measurement: MeasurementKind,
    /// Measurement count; `ratio · n` or `min(128, n)` when absent.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub ratio: Option<f64>,
    /// Noise on the full state, `σ = η max σ_i` (the noise axis overrides).
    #[serde(default)]
    pub state_noise: f64,
    /// Noise on the compressed measurements, relative to their largest
    /// per-sensor standard deviation.
    #[serde(default)]
    pub sensor_noise: f64,
    #[serde(default)]
    pub b_known: bool,
    #[serde(default = "default_path")]
    pub path: RecoveryPath,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub recovery: SparseRecoveryConfig,
    #[serde(default)]
    pub b_recovery: Option<SparseRecoveryConfig>,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let config = |msg: String| Err(Error::Config(msg));
        if self.realizations == 0 {
            return config("ensemble size (realizations) must be at least 1".into());
        }
        if self.methods.is_empty() {
            return config("at least one method is required".into());
        }
        match self.sweep.axis {
            SweepAxis::Measurement if self.sweep.kinds.is_empty() => {
                return config("empty sweep axis: measurement sweeps need `kinds`".into())
            }
            SweepAxis::Compression | SweepAxis::Noise if self.sweep.values.is_empty() => {
                return config(format!(
                    "empty sweep axis: {} sweeps need `values`",
                    self.sweep.axis.name()
                ))
            }
            _ => {}
        }
        if self.sweep.axis == SweepAxis::Compression
            && self.sweep.values.iter().any(|&v| !(v > 0.0 && v <= 1.0))
        {
            return config("compression ratios must lie in (0, 1]".into());
        }
        if self.sweep.axis == SweepAxis::Noise
            && self
                .sweep
                .values
                .iter()
                .any(|&v| !(v >= 0.0 && v.is_finite()))
        {
            return config("noise levels must be finite and non-negative".into());
        }
        if !(self.state_noise >= 0.0 && self.sensor_noise >= 0.0) {
            return config("noise levels must be non-negative".into());
        }
        if self.p.is_some() && self.ratio.is_some() {
            return config("give either `p` or `ratio`, not both".into());
        }
        if let Some(ratio) = self.ratio {
            if !(ratio > 0.0 && ratio <= 1.0) {
                return config(format!("ratio must lie in (0, 1], got {ratio}"));
            }
        }
        if let PlantConfig::Files { dir, .. } = &self.plant {
            if !dir.is_dir() {
                return config(format!(
                    "snapshot directory {} does not exist",
                    dir.display()
                ));
            }
            if self.b_known {
                return config("known-B runs need a synthetic plant".into());
            }
        }
        self.recovery.validate()?;
        if let Some(b) = &self.b_recovery {
            b.validate()?;
        }
        Ok(())
    }

    fn base_p(&self, n: usize) -> usize {
        match (self.p, self.ratio) {
            (Some(p), _) => p,
            (None, Some(ratio)) => ratio_to_p(ratio, n),
            (None, None) => n.min(128),
        }
    }
}

fn ratio_to_p(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n)
}

/// One metric of one method in one realization at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub parameter: String,
    pub measurement: String,
    pub method: String,
    pub realization: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// Statistics of one metric over the realizations of a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub axis: String,
    pub parameter: String,
    pub measurement: String,
    pub method: String,
    pub metric: String,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutput {
    /// Summary statistic lookup by parameter label, method and metric.
    pub fn summary_for(
        &self,
        parameter: &str,
        method: Method,
        metric: Metric,
    ) -> Option<&SummaryRow> {
        self.summary.iter().find(|s| {
            s.parameter == parameter && s.method == method.name() && s.metric == metric.name()
        })
    }

    /// Writes `results.csv` and `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("results.csv"))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for row in &self.summary {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Full-state data: a trajectory whose shift gives `(X, X′)`, or a pair read
/// from files.
#[derive(Debug, Clone)]
enum Observed {
    Trajectory(RealMatrix),
    Pair(RealMatrix, RealMatrix),
}

impl Observed {
    fn try_map(&self, f: impl Fn(&RealMatrix, u64) -> Result<RealMatrix>) -> Result<Observed> {
        Ok(match self {
            Observed::Trajectory(t) => Observed::Trajectory(f(t, 0)?),
            Observed::Pair(a, b) => Observed::Pair(f(a, 0)?, f(b, SHIFTED_NOISE_MASK)?),
        })
    }

    fn noisy(&self, eta: f64, seed: u64) -> Result<Observed> {
        if eta == 0.0 {
            return Ok(self.clone());
        }
        self.try_map(|m, mask| add_noise(m, eta, seed ^ mask))
    }

    fn split(&self) -> (RealMatrix, RealMatrix) {
        match self {
            Observed::Trajectory(t) => {
                let m = t.ncols() - 1;
                (t.columns(0, m).into_owned(), t.columns(1, m).into_owned())
            }
            Observed::Pair(a, b) => (a.clone(), b.clone()),
        }
    }
}

struct Truth {
    eigenvalues: ComplexVector,
    modes: ComplexMatrix,
    b: Option<RealMatrix>,
}

struct Prepared {
    n: usize,
    dt: f64,
    inputs: RealMatrix,
    clean: Observed,
    /// `(P, X̃)` for noiseless synthetic data, compressed as `(C P) X̃`.
    factors: Option<(RealMatrix, RealMatrix)>,
    truth: Truth,
    b_true: Option<RealMatrix>,
    r: usize,
    r_tilde: usize,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    match cfg.plant.build()? {
        Some(plant) => {
            let x0 = match &cfg.x0 {
                Some(v) => {
                    if v.len() != plant.k() {
                        return Err(Error::Config(format!(
                            "x0 has {} entries, plant has {} states",
                            v.len(),
                            plant.k()
                        )));
                    }
                    RealVector::from_column_slice(v)
                }
                None if matches!(cfg.plant, PlantConfig::TwoState { .. }) => {
                    RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0)
                }
                None => RealVector::zeros(plant.k()),
            };
            let forcing = Forcing::Gaussian {
                std: cfg.forcing_std,
                seed: cfg.master_seed,
            };
            let run = simulate(&plant, &x0, &forcing, cfg.snapshots)?;
            Ok(Prepared {
                n: plant.n(),
                dt: plant.dt,
                inputs: run.reduced.inputs.clone(),
                factors: Some((plant.lifting.clone(), run.reduced.states.clone())),
                truth: Truth {
                    eigenvalues: run.true_eigenvalues.clone(),
                    modes: run.true_modes.clone(),
                    b: Some(run.b_true.clone()),
                },
                b_true: Some(run.b_true.clone()),
                r: cfg.r.unwrap_or(plant.k()),
                r_tilde: cfg.r_tilde.unwrap_or(plant.k() + plant.q()),
                clean: Observed::Trajectory(run.trajectory),
            })
        }
        None => {
            let PlantConfig::Files { dir, format } = &cfg.plant else {
                unreachable!("only file plants have no generator")
            };
            let format = match format {
                Some(f) => *f,
                None => read_snapshot_manifest(dir)?.format,
            };
            let snaps = load_snapshots(dir, format)?;
            let inputs = snaps.require_inputs()?.clone();
            let r = cfg.r.unwrap_or_else(|| default_rank(&snaps.x));
            let r_tilde = match cfg.r_tilde {
                Some(v) => v,
                None => default_rank(&vstack(&snaps.x, &inputs)?),
            };
            let reference = dmdc_unknown_b(&snaps, r, r_tilde)?;
            Ok(Prepared {
                n: snaps.n(),
                dt: snaps.dt,
                inputs,
                factors: None,
                truth: Truth {
                    eigenvalues: reference.eigenvalues.clone(),
                    modes: reference.modes.clone(),
                    b: reference.b_hat.clone(),
                },
                b_true: None,
                r,
                r_tilde,
                clean: Observed::Pair(snaps.x, snaps.x_shifted),
            })
        }
    }
}

/// A sweep point: what varies along the axis, resolved to concrete values.
#[derive(Debug, Clone, Copy)]
struct Point {
    label_index: usize,
    kind: MeasurementKind,
    p: usize,
    state_noise: f64,
}

fn points(cfg: &ExperimentConfig, n: usize) -> Vec<(String, Point)> {
    let base = Point {
        label_index: 0,
        kind: cfg.measurement,
        p: cfg.base_p(n),
        state_noise: cfg.state_noise,
    };
    match cfg.sweep.axis {
        SweepAxis::Compression => cfg
            .sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                (
                    format!("{v}"),
                    Point {
                        label_index: i,
                        p: ratio_to_p(v, n),
                        ..base
                    },
                )
            })
            .collect(),
        SweepAxis::Noise => cfg
            .sweep
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                (
                    format!("{v}"),
                    Point {
                        label_index: i,
                        state_noise: v,
                        ..base
                    },
                )
            })
            .collect(),
        SweepAxis::Measurement => cfg
            .sweep
            .kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                (
                    k.name().to_string(),
                    Point {
                        label_index: i,
                        kind: k,
                        ..base
                    },
                )
            })
            .collect(),
    }
}

fn model_metrics(model: &DmdModel, truth: &Truth, with_b: bool) -> Result<Vec<(Metric, f64)>> {
    let errs = eig_errors(&truth.eigenvalues, &model.eigenvalues)?;
    let mut out = vec![
        (
            Metric::EigErrorMax,
            errs.iter().copied().fold(0.0, f64::max),
        ),
        (
            Metric::EigErrorMean,
            errs.iter().sum::<f64>() / errs.len().max(1) as f64,
        ),
    ];
    if model.modes.ncols() == truth.modes.ncols() {
        out.push((
            Metric::ModeError,
            mode_error(
                &truth.modes,
                &model.modes,
                Some((&truth.eigenvalues, &model.eigenvalues)),
            )?,
        ));
    }
    if with_b {
        if let (Some(b_ref), Some(b_est)) = (&truth.b, &model.b_hat) {
            out.push((Metric::BError, b_error(b_ref, b_est)?));
        }
    }
    Ok(out)
}

struct Compressed {
    /// Compressed observation for every point, in point order.
    data: Vec<Observed>,
}

fn compress_observed(
    prep: &Prepared,
    full: &Observed,
    noiseless: bool,
    c: &MeasurementOperator,
) -> Result<Observed> {
    match (&prep.factors, noiseless) {
        (Some((p, states)), true) => Ok(Observed::Trajectory(c.compress_factored(p, states)?)),
        _ => full.try_map(|m, _| c.compress(m)),
    }
}

fn sensor_noise(obs: Observed, eta: f64, seed: u64) -> Result<Observed> {
    obs.noisy(eta, seed ^ SENSOR_NOISE_MASK)
}

/// Compressions of every point for one realization. Random projections on
/// a compression sweep are drawn once at the largest `p` and reused as
/// nested leading rows, sensor noise included.
fn compress_points(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    pts: &[(String, Point)],
    fulls: &[Arc<Observed>],
    seed: u64,
) -> Result<Compressed> {
    let nested =
        cfg.sweep.axis == SweepAxis::Compression && cfg.measurement != MeasurementKind::SinglePixel;
    if nested {
        let p_max = pts
            .iter()
            .map(|(_, pt)| pt.p)
            .max()
            .expect("validated non-empty sweep");
        let spec = MeasurementSpec::new(cfg.measurement, p_max, prep.n, seed);
        let c = MeasurementOperator::build(spec)?;
        let big = compress_observed(prep, &fulls[0], cfg.state_noise == 0.0, &c)?;
        let big = sensor_noise(big, cfg.sensor_noise, seed)?;
        let data = pts
            .iter()
            .map(|(_, pt)| big.try_map(|m, _| spec.leading_rows(m, pt.p)))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Compressed { data });
    }
    let data = pts
        .iter()
        .zip(fulls)
        .map(|((_, pt), full)| {
            let c = MeasurementOperator::build(MeasurementSpec::new(pt.kind, pt.p, prep.n, seed))?;
            let obs = compress_observed(prep, full, pt.state_noise == 0.0, &c)?;
            sensor_noise(obs, cfg.sensor_noise, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Compressed { data })
}

struct RawRow {
    point: usize,
    realization: usize,
    seed: u64,
    method: Method,
    measurement: String,
    metric: Metric,
    value: f64,
}

fn run_realization(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    pts: &[(String, Point)],
    k: usize,
) -> Result<Vec<RawRow>> {
    let seed = realization_seed(cfg.master_seed, k as u64);
    info!("realization {k} (seed {seed})");
    // state noise differs between points only on a noise sweep
    let fulls: Vec<Arc<Observed>> = if cfg.sweep.axis == SweepAxis::Noise {
        pts.iter()
            .map(|(_, pt)| prep.clean.noisy(pt.state_noise, seed).map(Arc::new))
            .collect::<Result<_>>()?
    } else {
        vec![Arc::new(prep.clean.noisy(cfg.state_noise, seed)?); pts.len()]
    };
    let compressed = if cfg.methods.contains(&Method::Cdmdc) {
        Some(compress_points(cfg, prep, pts, &fulls, seed)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    let mut dmdc_cache: Option<Vec<(Metric, f64)>> = None;
    let mut split: Option<(*const Observed, Arc<(RealMatrix, RealMatrix)>)> = None;
    for (i, (_, pt)) in pts.iter().enumerate() {
        let key = Arc::as_ptr(&fulls[i]);
        let pair = match &split {
            Some((k, pair)) if *k == key => Arc::clone(pair),
            _ => {
                let pair = Arc::new(fulls[i].split());
                split = Some((key, Arc::clone(&pair)));
                pair
            }
        };
        let (x, xp) = (&pair.0, &pair.1);
        for &method in &cfg.methods {
            let (measurement, metrics) = match method {
                Method::Dmdc => {
                    let metrics = match (&dmdc_cache, cfg.sweep.axis) {
                        (Some(cached), axis) if axis != SweepAxis::Noise => cached.clone(),
                        _ => {
                            let snaps = SnapshotSet::new(
                                x.clone(),
                                xp.clone(),
                                Some(prep.inputs.clone()),
                                prep.dt,
                            )?;
                            let model = match (&prep.b_true, cfg.b_known) {
                                (Some(b), true) => dmdc_known_b(&snaps, b, prep.r)?,
                                _ => dmdc_unknown_b(&snaps, prep.r, prep.r_tilde)?,
                            };
                            let m = model_metrics(&model, &prep.truth, !cfg.b_known)?;
                            dmdc_cache = Some(m.clone());
                            m
                        }
                    };
                    ("full-state".to_string(), metrics)
                }
                Method::Cdmdc => {
                    let obs = &compressed
                        .as_ref()
                        .expect("compressed when cdmdc is requested")
                        .data[i];
                    let (y, yp) = obs.split();
                    let c = MeasurementOperator::build(MeasurementSpec::new(
                        pt.kind, pt.p, prep.n, seed,
                    ))?;
                    let mut inputs = CompressiveInputs::new(&y, &yp, &c, prep.dt, prep.r)
                        .with_inputs(&prep.inputs)
                        .with_r_tilde(prep.r_tilde)
                        .with_recovery(cfg.recovery);
                    if let Some(b_cfg) = cfg.b_recovery {
                        inputs = inputs.with_b_recovery(b_cfg);
                    }
                    if cfg.path == RecoveryPath::CompressedProjection {
                        inputs = inputs.with_full_state(x, xp);
                    }
                    if cfg.b_known {
                        inputs = inputs
                            .with_known_b(prep.b_true.as_ref().expect("validated synthetic plant"));
                    }
                    if cfg.sensor_noise > 0.0 {
                        inputs = inputs.without_consistency_check();
                    }
                    let result = cdmdc(&inputs)?;
                    let mut metrics = model_metrics(&result.model, &prep.truth, !cfg.b_known)?;
                    if cfg.path == RecoveryPath::CompressedSensing {
                        metrics.push((
                            Metric::RecoveryConverged,
                            f64::from(u8::from(result.recovery_converged())),
                        ));
                    }
                    (pt.kind.name().to_string(), metrics)
                }
            };
            rows.extend(metrics.into_iter().map(|(metric, value)| RawRow {
                point: pt.label_index,
                realization: k,
                seed,
                method,
                measurement: measurement.clone(),
                metric,
                value,
            }));
        }
    }
    Ok(rows)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Run every realization at every sweep point. Rows are ordered by
/// (point, realization) whatever order the work pool finishes in.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let pts = points(cfg, prep.n);
    let per_realization: Vec<Vec<RawRow>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|k| run_realization(cfg, &prep, &pts, k))
        .collect::<Result<_>>()?;
    let mut raw: Vec<RawRow> = per_realization.into_iter().flatten().collect();
    raw.sort_by_key(|r| (r.point, r.realization));

    let axis = cfg.sweep.axis.name().to_string();
    let rows: Vec<SweepRow> = raw
        .iter()
        .map(|r| SweepRow {
            axis: axis.clone(),
            parameter: pts[r.point].0.clone(),
            measurement: r.measurement.clone(),
            method: r.method.name().to_string(),
            realization: r.realization,
            seed: r.seed,
            metric: r.metric.name().to_string(),
            value: r.value,
        })
        .collect();

    let mut groups: BTreeMap<(usize, Method, Metric), (String, Vec<f64>)> = BTreeMap::new();
    for r in &raw {
        let entry = groups
            .entry((r.point, r.method, r.metric))
            .or_insert_with(|| (r.measurement.clone(), Vec::new()));
        if r.value.is_finite() {
            entry.1.push(r.value);
        }
    }
    let summary = groups
        .into_iter()
        .map(|((point, method, metric), (measurement, mut values))| {
            values.sort_by(f64::total_cmp);
            let count = values.len();
            SummaryRow {
                axis: axis.clone(),
                parameter: pts[point].0.clone(),
                measurement,
                method: method.name().to_string(),
                metric: metric.name().to_string(),
                count,
                median: median(&values),
                mean: if count > 0 {
                    values.iter().sum::<f64>() / count as f64
                } else {
                    f64::NAN
                },
                min: values.first().copied().unwrap_or(f64::NAN),
                max: values.last().copied().unwrap_or(f64::NAN),
            }
        })
        .collect();
    Ok(SweepOutput { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[1.0, 2.0, 10.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 10.0]), 3.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn empty_axis_is_rejected() {
        let err = ExperimentConfig::from_toml_str("[sweep]\naxis = \"compression\"\n").unwrap_err();
        assert!(err.to_string().contains("empty sweep axis"), "{err}");
        let err =
            ExperimentConfig::from_toml_str("[sweep]\naxis = \"measurement\"\nvalues = [0.1]\n")
                .unwrap_err();
        assert!(err.to_string().contains("empty sweep axis"));
        let err = ExperimentConfig::from_toml_str(
            "realizations = 0\n[sweep]\naxis = \"noise\"\nvalues = [0.1]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("at least 1"));
    }

    #[test]
    fn defaults_and_aliases() {
        let cfg = ExperimentConfig::from_toml_str(
            "path = \"sensing\"\nmeasurement = \"single-pixel\"\n[plant]\nkind = \"rank-nine\"\nn = 512\n[sweep]\naxis = \"noise\"\nvalues = [0.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.path, RecoveryPath::CompressedSensing);
        assert_eq!(cfg.measurement, MeasurementKind::SinglePixel);
        assert_eq!(cfg.methods, vec![Method::Dmdc, Method::Cdmdc]);
        assert_eq!(cfg.realizations, 1);
        assert_eq!(
            cfg.plant,
            PlantConfig::RankNine {
                n: 512,
                plant_seed: 0
            }
        );
        assert_eq!(cfg.base_p(512), 128);
        assert!(ExperimentConfig::from_toml_str(
            "bogus = 1\n[sweep]\naxis = \"noise\"\nvalues = [0.0]\n"
        )
        .is_err());
    }
}
