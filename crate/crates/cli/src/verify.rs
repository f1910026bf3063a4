use cdmdc::compressive::{consistency_residual, CONSISTENCY_TOL};
use cdmdc::dmd::{default_rank, SnapshotSet};
use cdmdc::measurement::{MeasurementKind, MeasurementOperator, MeasurementSpec};
use cdmdc::numerics::{vstack, RealVector};
use cdmdc::testbed::{
    add_noise, load_snapshots, read_matrix, read_snapshot_manifest, simulate, Forcing,
    LowRankPlant,
};
use cdmdc::verify::{theorem_suite, SuiteOptions, TheoremReport};
use serde::Serialize;

use crate::args::VerifyArgs;
use crate::failure::{Failure, EXIT_VERIFY};
use crate::output::{ensure_dir, resolve_out_dir, write_json};

pub const VERIFY_FILE: &str = "verify.json";

const ALL_KINDS: [MeasurementKind; 4] = [
    MeasurementKind::UniformRandom,
    MeasurementKind::GaussianRandom,
    MeasurementKind::BernoulliRandom,
    MeasurementKind::SinglePixel,
];

#[derive(Debug, Serialize)]
struct Case {
    measurement: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    reports: Vec<TheoremReport>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    advisory: bool,
    noise: f64,
    r: usize,
    r_tilde: usize,
    tolerance: f64,
    checks: usize,
    failures: usize,
    cases: Vec<Case>,
}

/// Snapshots to check, plus ranks implied by the plant when synthesized.
fn data(a: &VerifyArgs) -> Result<(SnapshotSet, Option<(usize, usize)>), Failure> {
    if let Some(dir) = &a.data {
        let manifest = read_snapshot_manifest(dir)?;
        return Ok((load_snapshots(dir, manifest.format)?, None));
    }
    if a.steps < 2 {
        return Err(Failure::usage("--steps must be at least 2"));
    }
    let plant = LowRankPlant::two_state(a.n)?;
    let x0 = RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0);
    let forcing = Forcing::Gaussian {
        std: 1.0,
        seed: a.seed,
    };
    let run = simulate(&plant, &x0, &forcing, a.steps)?;
    let ranks = (plant.k(), plant.k() + plant.q());
    Ok((run.snapshots, Some(ranks)))
}

fn with_noise(snaps: SnapshotSet, eta: f64, seed: u64) -> Result<SnapshotSet, Failure> {
    if eta == 0.0 {
        return Ok(snaps);
    }
    let x = add_noise(&snaps.x, eta, seed)?;
    let xp = add_noise(&snaps.x_shifted, eta, seed.wrapping_add(1))?;
    Ok(SnapshotSet::new(x, xp, snaps.inputs, snaps.dt)?)
}

fn check_given_c(a: &VerifyArgs, snaps: &SnapshotSet) -> Result<MeasurementOperator, Failure> {
    let path = a.c.as_ref().expect("called with --c");
    let c = read_matrix(path)?;
    if c.ncols() != snaps.n() {
        return Err(Failure::usage(format!(
            "measurement matrix {} is {}×{} but the snapshots have {} states",
            path.display(),
            c.nrows(),
            c.ncols(),
            snaps.n()
        )));
    }
    let c = MeasurementOperator::from_dense(c)?;
    if let (Some(y), Some(yp)) = (&a.y, &a.y_shifted) {
        let (y, yp) = (read_matrix(y)?, read_matrix(yp)?);
        if y.shape() != (c.p(), snaps.m()) || yp.shape() != y.shape() {
            return Err(Failure::usage(format!(
                "compressed snapshots must be {}×{}, got {}×{} and {}×{}",
                c.p(),
                snaps.m(),
                y.nrows(),
                y.ncols(),
                yp.nrows(),
                yp.ncols()
            )));
        }
        let residual = consistency_residual(&c, &snaps.x, &y)?
            .max(consistency_residual(&c, &snaps.x_shifted, &yp)?);
        if residual > CONSISTENCY_TOL {
            return Err(Failure::usage(format!(
                "consistency precondition failed: C X does not reproduce Y \
                 (relative residual {residual:.3e} > {CONSISTENCY_TOL:.0e})"
            )));
        }
    }
    Ok(c)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(Failure::usage("--noise must be a non-negative number"));
    }
    if a.seeds == 0 {
        return Err(Failure::usage("--seeds must be at least 1"));
    }
    let (clean, plant_ranks) = data(a)?;
    if a.y.is_some() && a.c.is_none() {
        return Err(Failure::usage("--y needs the measurement matrix --c it was taken with"));
    }
    let given_c = a.c.as_ref().map(|_| check_given_c(a, &clean)).transpose()?;
    let snaps = with_noise(clean, a.noise, a.seed)?;
    snaps.require_inputs()?;

    let (r0, rt0) = plant_ranks.unwrap_or_else(|| {
        let u = snaps.inputs.as_ref().expect("checked above");
        let omega = vstack(&snaps.x, u).expect("same column count");
        (default_rank(&snaps.x_shifted), default_rank(&omega))
    });
    let opts = SuiteOptions {
        r: a.r.unwrap_or(r0),
        r_tilde: a.r_tilde.unwrap_or(rt0),
        k_max: a.k_max,
        tolerance: a.tol,
        advisory: a.noise > 0.0,
    };

    let mut cases = Vec::new();
    if let Some(c) = &given_c {
        cases.push(Case {
            measurement: "given".into(),
            seed: None,
            reports: theorem_suite(&snaps, c, &opts)?,
        });
    } else {
        let kinds = if a.measurement.is_empty() {
            ALL_KINDS.to_vec()
        } else {
            a.measurement.clone()
        };
        let p = a.p.min(snaps.n());
        for kind in kinds {
            for seed in a.measurement_seed..a.measurement_seed + a.seeds {
                let c = MeasurementOperator::build(MeasurementSpec::new(kind, p, snaps.n(), seed))?;
                cases.push(Case {
                    measurement: kind.name().to_string(),
                    seed: Some(seed),
                    reports: theorem_suite(&snaps, &c, &opts)?,
                });
            }
        }
    }

    let checks = cases.iter().map(|c| c.reports.len()).sum();
    let failures = cases
        .iter()
        .flat_map(|c| &c.reports)
        .filter(|r| r.failed())
        .count();
    print_table(&cases, opts.advisory);
    let report = VerifyReport {
        advisory: opts.advisory,
        noise: a.noise,
        r: opts.r,
        r_tilde: opts.r_tilde,
        tolerance: opts.tolerance,
        checks,
        failures,
        cases,
    };
    let dir = resolve_out_dir(a.out.as_deref(), None);
    ensure_dir(&dir)?;
    write_json(&dir.join(VERIFY_FILE), &report)?;

    if failures > 0 {
        return Err(Failure {
            code: EXIT_VERIFY,
            message: format!("{failures} of {checks} identity checks failed"),
        });
    }
    if opts.advisory {
        println!("{checks} checks reported (advisory: noisy data, no verdicts)");
    } else {
        println!("all {checks} identity checks passed");
    }
    Ok(())
}

fn print_table(cases: &[Case], advisory: bool) {
    println!(
        "{:<12} {:>4}  {:<56} {:>11} {:>9}  verdict",
        "C", "seed", "identity", "residual", "tol"
    );
    for case in cases {
        let seed = case.seed.map_or("-".to_string(), |s| s.to_string());
        for r in &case.reports {
            let verdict = match (advisory, r.passed) {
                (true, _) => "advisory",
                (false, true) => "pass",
                (false, false) => "FAIL",
            };
            let mut name: String = r.identity.chars().take(56).collect();
            if r.note.as_deref().is_some_and(|n| n.contains("null space")) {
                name = format!("{name} [null space]").chars().take(56).collect();
            }
            println!(
                "{:<12} {:>4}  {:<56} {:>11.3e} {:>9.1e}  {verdict}",
                case.measurement, seed, name, r.residual, r.tolerance
            );
        }
    }
}
