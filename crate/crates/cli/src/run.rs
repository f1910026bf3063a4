use std::path::Path;

use cdmdc::compressive::{cdmd, cdmdc, CompressiveInputs, CompressiveModel, RecoveryPath};
use cdmdc::dmd::{default_rank, dmdc_known_b, dmdc_unknown_b, exact_dmd, DmdModel, SnapshotSet};
use cdmdc::measurement::{MeasurementOperator, MeasurementSpec};
use cdmdc::numerics::{vstack, ComplexMatrix, RealMatrix};
use cdmdc::sparse_recovery::SparseRecoveryConfig;
use cdmdc::testbed::{load_snapshots, read_matrix, read_snapshot_manifest};
use cdmdc::verify::{assumption_scores, b_error, eig_errors, mode_error, pair_eigenvalues, ErrorMetrics};
use log::warn;

use crate::args::{Algorithm, RunArgs};
use crate::failure::Failure;
use crate::model_io::{write_model, ModelManifest, RecoveryReport};
use crate::output::{ensure_dir, resolve_out_dir};
use crate::truth::{has_truth, read_truth, Truth};

fn load_data(dir: &Path) -> Result<SnapshotSet, Failure> {
    let manifest = read_snapshot_manifest(dir)?;
    Ok(load_snapshots(dir, manifest.format)?)
}

fn load_truth(a: &RunArgs) -> Result<Option<Truth>, Failure> {
    match (&a.truth, &a.data) {
        (Some(dir), _) => read_truth(dir).map(Some),
        (None, Some(dir)) if has_truth(dir) => read_truth(dir).map(Some),
        _ => Ok(None),
    }
}

fn rank_defaults(truth: Option<&Truth>) -> RankDefaults {
    RankDefaults {
        plant: truth.map(|t| (t.order, t.order + t.b.ncols())),
    }
}

/// Errors of `model` against the ground truth; `None` when the estimate has
/// fewer modes than the truth or a different state dimension.
pub fn compare(truth: &Truth, model: &DmdModel) -> Result<Option<ErrorMetrics>, Failure> {
    let k = truth.eigenvalues.len();
    if model.eigenvalues.len() < k || model.modes.nrows() != truth.modes.nrows() {
        warn!(
            "model with {} modes on {} states is not comparable with the {}-mode truth",
            model.eigenvalues.len(),
            model.modes.nrows(),
            k
        );
        return Ok(None);
    }
    let order = pair_eigenvalues(truth.eigenvalues.as_slice(), model.eigenvalues.as_slice())?;
    let paired = ComplexMatrix::from_fn(model.modes.nrows(), k, |i, j| model.modes[(i, order[j])]);
    let b = match &model.b_hat {
        Some(b_hat) if b_hat.shape() == truth.b.shape() => Some(b_error(&truth.b, b_hat)?),
        _ => None,
    };
    Ok(Some(ErrorMetrics {
        mode_error: mode_error(&truth.modes, &paired, None)?,
        b_error: b,
        eig_errors: eig_errors(&truth.eigenvalues, &model.eigenvalues)?,
    }))
}

/// Ranks used when `--r`/`--r-tilde` are absent: the plant order recorded in
/// the truth manifest, otherwise the 99%-energy rank of the data.
struct RankDefaults {
    plant: Option<(usize, usize)>,
}

impl RankDefaults {
    fn r(&self, given: Option<usize>, data: &RealMatrix) -> usize {
        given
            .or(self.plant.map(|(k, _)| k))
            .unwrap_or_else(|| default_rank(data))
    }

    fn r_tilde(&self, given: Option<usize>, data: &RealMatrix) -> usize {
        given
            .or(self.plant.map(|(_, kq)| kq))
            .unwrap_or_else(|| default_rank(data))
    }
}

fn require_data<'a>(a: &'a RunArgs) -> Result<&'a Path, Failure> {
    a.data.as_deref().ok_or_else(|| {
        Failure::usage(format!(
            "{} needs full-state snapshots: pass --data <dir>",
            a.algorithm.name()
        ))
    })
}

pub fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    if a.sparsity == 0 || a.b_sparsity == Some(0) {
        return Err(Failure::usage("sparsity must be at least 1"));
    }
    let snaps = a.data.as_deref().map(load_data).transpose()?;
    let truth = load_truth(a)?;
    let known_b = a.b.as_deref().map(read_matrix).transpose()?;
    if known_b.is_some() && matches!(a.algorithm, Algorithm::Dmd | Algorithm::Cdmd) {
        return Err(Failure::usage(format!(
            "--b applies to dmdc and cdmdc, not {}",
            a.algorithm.name()
        )));
    }
    let dir = resolve_out_dir(a.out.as_deref(), None);
    let ranks = rank_defaults(truth.as_ref());

    let (mut manifest, model, compressed) = match a.algorithm {
        Algorithm::Dmd | Algorithm::Dmdc => {
            require_data(a)?;
            let snaps = snaps.as_ref().expect("data loaded");
            let model = match (a.algorithm, &known_b) {
                (Algorithm::Dmd, _) => exact_dmd(snaps, ranks.r(a.r, &snaps.x))?,
                (_, Some(b)) => dmdc_known_b(snaps, b, ranks.r(a.r, &snaps.x))?,
                (_, None) => {
                    let omega = vstack(&snaps.x, snaps.require_inputs()?)?;
                    let r_tilde = ranks.r_tilde(a.r_tilde, &omega);
                    dmdc_unknown_b(snaps, ranks.r(a.r, &snaps.x_shifted), r_tilde)?
                }
            };
            (ModelManifest::new(a.algorithm.name(), &model), model, None)
        }
        Algorithm::Cdmd | Algorithm::Cdmdc => {
            let cm = compressive(a, &ranks, snaps.as_ref(), known_b.as_ref())?;
            let mut manifest = ModelManifest::new(a.algorithm.name(), &cm.model);
            manifest.branch = Some(cm.branch.name().to_string());
            manifest.recovery = (cm.path() == RecoveryPath::CompressedSensing).then(|| RecoveryReport {
                modes: cm.mode_recovery.clone(),
                b: cm.b_recovery.clone(),
            });
            manifest.consistency_residual = cm.consistency_residual;
            if let (Some(snaps), None, Some(comp)) =
                (snaps.as_ref(), &known_b, cm.model.augmented())
            {
                if a.algorithm == Algorithm::Cdmdc {
                    let full = dmdc_unknown_b(snaps, comp.r(), comp.r_tilde())?;
                    let full = full.augmented().expect("DMDc keeps its augmented SVD");
                    manifest.assumption_scores =
                        Some(assumption_scores(full, comp, &snaps.x_shifted));
                }
            }
            let model = cm.model.clone();
            (manifest, model, Some(cm))
        }
    };

    if let Some(t) = &truth {
        manifest.metrics = compare(t, &model)?;
    }
    ensure_dir(&dir)?;
    let manifest = write_model(
        &dir,
        manifest,
        &model,
        compressed.as_ref().map(|c| &c.compressed_modes),
        compressed.as_ref().and_then(|c| c.b_y.as_ref()),
    )?;
    report(&manifest, &dir);

    if let Some(cm) = &compressed {
        if !cm.recovery_converged() {
            let worst = cm
                .mode_recovery
                .iter()
                .chain(&cm.b_recovery)
                .map(|c| c.relative_residual)
                .fold(0.0, f64::max);
            return Err(Failure::numerical(format!(
                "sparse recovery did not converge (worst relative residual {worst:.3e}); \
                 the recovered vectors may not be sparse in the basis"
            )));
        }
    }
    Ok(())
}

fn measurement(a: &RunArgs, n: Option<usize>) -> Result<MeasurementOperator, Failure> {
    if let Some(path) = &a.c {
        return Ok(MeasurementOperator::from_dense(read_matrix(path)?)?);
    }
    let Some(kind) = a.measurement else {
        return Err(Failure::usage(format!(
            "{} needs a measurement matrix: pass --c <file> or --measurement <kind>",
            a.algorithm.name()
        )));
    };
    let n = n.ok_or_else(|| Failure::usage("state dimension unknown: pass --data or --n"))?;
    let p = a.p.unwrap_or(n.min(128));
    Ok(MeasurementOperator::build(MeasurementSpec::new(kind, p, n, a.measurement_seed))?)
}

fn compressive(
    a: &RunArgs,
    ranks: &RankDefaults,
    snaps: Option<&SnapshotSet>,
    known_b: Option<&RealMatrix>,
) -> Result<CompressiveModel, Failure> {
    let n = snaps.map(|s| s.n()).or(a.n);
    let c = measurement(a, n)?;
    if let Some(s) = snaps {
        if c.n() != s.n() {
            return Err(Failure::usage(format!(
                "measurement matrix has {} columns but the snapshots have {} states",
                c.n(),
                s.n()
            )));
        }
    }
    let (y, yp) = match (&a.y, &a.y_shifted, snaps) {
        (Some(y), Some(yp), _) => (read_matrix(y)?, read_matrix(yp)?),
        (None, None, Some(s)) => (c.compress(&s.x)?, c.compress(&s.x_shifted)?),
        _ => {
            return Err(Failure::usage(format!(
                "{} needs compressed snapshots: pass --y and --y-shifted, or --data to compress",
                a.algorithm.name()
            )))
        }
    };
    let inputs = match (&a.inputs, snaps.and_then(|s| s.inputs.as_ref())) {
        (Some(path), _) => Some(read_matrix(path)?),
        (None, Some(u)) => Some(u.clone()),
        (None, None) => None,
    };
    let dt = match (a.dt, snaps) {
        (Some(dt), _) => dt,
        (None, Some(s)) => s.dt,
        (None, None) => return Err(Failure::usage("pass --dt when no --data is given")),
    };
    let path = a.path.unwrap_or(if snaps.is_some() {
        RecoveryPath::CompressedProjection
    } else {
        RecoveryPath::CompressedSensing
    });
    if path == RecoveryPath::CompressedProjection && snaps.is_none() {
        return Err(Failure::usage(
            "the compressed path lifts through full-state snapshots: pass --data or use --path sensing",
        ));
    }

    let r = ranks.r(a.r, &y);
    let mut ci = CompressiveInputs::new(&y, &yp, &c, dt, r)
        .with_recovery(SparseRecoveryConfig::with_sparsity(a.sparsity));
    if let Some(k) = a.b_sparsity {
        ci = ci.with_b_recovery(SparseRecoveryConfig::with_sparsity(k));
    }
    if let (RecoveryPath::CompressedProjection, Some(s)) = (path, snaps) {
        ci = ci.with_full_state(&s.x, &s.x_shifted);
    }
    match a.algorithm {
        Algorithm::Cdmd => Ok(cdmd(&ci)?),
        _ => {
            let u = inputs.as_ref().ok_or_else(|| {
                Failure::usage("cdmdc needs input snapshots: pass --data with inputs or --inputs")
            })?;
            ci = ci.with_inputs(u);
            if let Some(b) = known_b {
                ci = ci.with_known_b(b);
            } else {
                ci = ci.with_r_tilde(ranks.r_tilde(a.r_tilde, &vstack(&y, u)?));
            }
            Ok(cdmdc(&ci)?)
        }
    }
}

fn report(manifest: &ModelManifest, dir: &Path) {
    match &manifest.branch {
        Some(b) => println!("{} ({b}), rank {}", manifest.algorithm, manifest.rank),
        None => println!("{}, rank {}", manifest.algorithm, manifest.rank),
    }
    for (i, (l, w)) in manifest.eigenvalues.iter().zip(&manifest.omega).enumerate() {
        let w = w.map_or("-inf".to_string(), |[re, im]| format!("{re:+.6} {im:+.6}i"));
        println!("  λ{i} = {:+.9} {:+.9}i   ω = {w}", l[0], l[1]);
    }
    if let Some(m) = &manifest.metrics {
        print!("  mode error {:.3e}, max eigenvalue error {:.3e}", m.mode_error, m.max_eig_error());
        match m.b_error {
            Some(e) => println!(", B error {e:.3e}"),
            None => println!(),
        }
    }
    println!("model written to {}", dir.join(crate::model_io::MODEL_FILE).display());
}
