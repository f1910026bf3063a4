use cdmdc::experiment::{run_sweep, ExperimentConfig};

use crate::args::SweepArgs;
use crate::failure::Failure;
use crate::output::{ensure_dir, resolve_out_dir};

pub fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    if !a.config.is_file() {
        return Err(Failure {
            code: crate::EXIT_IO,
            message: format!("config file {} not found", a.config.display()),
        });
    }
    let cfg = ExperimentConfig::from_file(&a.config)?;
    let dir = resolve_out_dir(a.out.as_deref(), cfg.output_dir.as_deref());
    ensure_dir(&dir)?;
    let out = run_sweep(&cfg)?;
    out.write(&dir)?;

    println!(
        "{:<12} {:>10} {:<14} {:<7} {:<18} {:>5} {:>12} {:>12}",
        "axis", "parameter", "measurement", "method", "metric", "count", "median", "max"
    );
    for s in &out.summary {
        println!(
            "{:<12} {:>10} {:<14} {:<7} {:<18} {:>5} {:>12.4e} {:>12.4e}",
            s.axis, s.parameter, s.measurement, s.method, s.metric, s.count, s.median, s.max
        );
    }
    println!(
        "{} rows written to {}",
        out.rows.len(),
        dir.join("results.csv").display()
    );
    Ok(())
}
