use cdmdc::experiment::{run_sweep, ExperimentConfig, Method, Metric};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).unwrap()
}

#[test]
fn compression_sweep_rows_and_determinism() {
    let cfg = config(
        r#"
realizations = 3
master_seed = 5
snapshots = 101
[plant]
kind = "two-state"
n = 256
[sweep]
axis = "compression"
values = [0.05, 0.1, 0.25]
"#,
    );
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    // 3 points × 3 realizations × 2 methods × 4 metrics
    assert_eq!(a.rows.len(), 72);
    let keys: Vec<(String, usize)> = a
        .rows
        .iter()
        .map(|r| (r.parameter.clone(), r.realization))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| {
        x.0.parse::<f64>()
            .unwrap()
            .total_cmp(&y.0.parse::<f64>().unwrap())
            .then(x.1.cmp(&y.1))
    });
    assert_eq!(keys, sorted);
    assert!(a.rows.iter().all(|r| r.axis == "compression"));
    assert_eq!(a.rows[0].seed, 5);
    for point in ["0.05", "0.1", "0.25"] {
        let s = a
            .summary_for(point, Method::Cdmdc, Metric::ModeError)
            .unwrap();
        assert_eq!(s.count, 3);
        assert!(s.max < 1e-10, "{point}: {}", s.max);
    }
}

#[test]
fn ensemble_of_one_gives_one_row_per_point_and_metric() {
    let cfg = config(
        r#"
snapshots = 51
methods = ["cdmdc"]
path = "sensing"
[plant]
kind = "two-state"
n = 128
[sweep]
axis = "measurement"
kinds = ["uniform", "gaussian", "bernoulli", "single-pixel"]
"#,
    );
    let out = run_sweep(&cfg).unwrap();
    // eig max, eig mean, mode, B, convergence
    assert_eq!(out.rows.len(), 4 * 5);
    for kind in ["uniform", "gaussian", "bernoulli", "single-pixel"] {
        let conv = out
            .summary_for(kind, Method::Cdmdc, Metric::RecoveryConverged)
            .unwrap();
        assert_eq!(conv.count, 1);
        assert_eq!(conv.median, 1.0, "{kind}");
        assert_eq!(out.rows.iter().filter(|r| r.parameter == kind).count(), 5);
    }
}

#[test]
fn noise_sweep_row_count_and_outputs() {
    let cfg = config(
        r#"
realizations = 4
snapshots = 101
[plant]
kind = "two-state"
n = 128
[sweep]
axis = "noise"
values = [0.1, 0.25, 0.5]
"#,
    );
    let out = run_sweep(&cfg).unwrap();
    let per_metric = out
        .rows
        .iter()
        .filter(|r| r.metric == "eig_error_mean" && r.method == "dmdc")
        .count();
    assert_eq!(per_metric, 3 * 4);
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(text.starts_with("axis,parameter,measurement,method,realization,seed,metric,value\n"));
    assert_eq!(text.lines().count(), out.rows.len() + 1);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(
        summary.starts_with("axis,parameter,measurement,method,metric,count,median,mean,min,max\n")
    );
}

#[test]
fn file_plant_uses_reference_dmdc() {
    use cdmdc::numerics::RealVector;
    use cdmdc::testbed::{save_snapshots, simulate, Forcing, LowRankPlant, MatrixFormat};
    let plant = LowRankPlant::two_state(200).unwrap();
    let run = simulate(
        &plant,
        &RealVector::from_column_slice(&[0.25, 0.25]),
        &Forcing::Gaussian { std: 1.0, seed: 2 },
        80,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_snapshots(&run.snapshots, dir.path(), MatrixFormat::Binary).unwrap();
    let cfg = config(&format!(
        "r = 2\nr_tilde = 3\n[plant]\nkind = \"files\"\ndir = {:?}\n[sweep]\naxis = \"compression\"\nvalues = [0.25]\n",
        dir.path()
    ));
    let out = run_sweep(&cfg).unwrap();
    let s = out
        .summary_for("0.25", Method::Cdmdc, Metric::EigErrorMax)
        .unwrap();
    assert!(s.max < 1e-10);
    let missing = ExperimentConfig::from_toml_str(
        "[plant]\nkind = \"files\"\ndir = \"/nonexistent/x\"\n[sweep]\naxis = \"noise\"\nvalues = [0.1]\n",
    );
    assert!(missing.is_err());
}
