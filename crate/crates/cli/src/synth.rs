use cdmdc::dmd::continuous_spectrum;
use cdmdc::numerics::RealVector;
use cdmdc::testbed::{
    save_snapshots, simulate, write_complex_matrix, write_matrix, Forcing, LowRankPlant,
};

use crate::args::{PlantKind, SynthArgs};
use crate::failure::Failure;
use crate::output::{ensure_dir, resolve_out_dir, write_json};
use crate::truth::{eigen_pairs, TruthFiles, TruthManifest, TRUTH_FILE};

pub fn cmd_synth(a: &SynthArgs) -> Result<(), Failure> {
    if a.steps < 2 {
        return Err(Failure::usage(format!(
            "--steps must be at least 2 (got {})",
            a.steps
        )));
    }
    if !(a.forcing_std >= 0.0 && a.forcing_std.is_finite()) {
        return Err(Failure::usage("--forcing-std must be a non-negative number"));
    }
    let (plant, x0, name) = match a.plant {
        PlantKind::TwoState => (
            LowRankPlant::two_state(a.n)?,
            RealVector::from_column_slice(&LowRankPlant::TWO_STATE_X0),
            "two-state",
        ),
        PlantKind::RankNine => {
            let plant = LowRankPlant::rank_nine(a.n, a.seed)?;
            let k = plant.k();
            (plant, RealVector::zeros(k), "rank-nine")
        }
    };
    let forcing = Forcing::Gaussian {
        std: a.forcing_std,
        seed: a.seed,
    };
    let run = simulate(&plant, &x0, &forcing, a.steps)?;

    let dir = resolve_out_dir(a.out.as_deref(), None);
    ensure_dir(&dir)?;
    save_snapshots(&run.snapshots, &dir, a.format)?;
    let ext = a.format.extension();
    let files = TruthFiles {
        modes: "modes_true.cdmc".into(),
        b: format!("b_true.{ext}"),
        trajectory: format!("trajectory.{ext}"),
    };
    write_complex_matrix(&dir.join(&files.modes), &run.true_modes)?;
    write_matrix(&dir.join(&files.b), &run.b_true)?;
    write_matrix(&dir.join(&files.trajectory), &run.trajectory)?;

    let omega = continuous_spectrum(&run.true_eigenvalues, plant.dt)?;
    let manifest = TruthManifest {
        plant: name.into(),
        n: plant.n(),
        k: plant.k(),
        q: plant.q(),
        dt: plant.dt,
        snapshots: a.steps,
        seed: a.seed,
        forcing_std: a.forcing_std,
        eigenvalues: eigen_pairs(&run.true_eigenvalues),
        omega: eigen_pairs(&omega),
        files,
    };
    write_json(&dir.join(TRUTH_FILE), &manifest)?;
    println!(
        "wrote {} snapshots of a {}-state {name} plant (n = {}) to {}",
        a.steps,
        plant.k(),
        plant.n(),
        dir.display()
    );
    Ok(())
}
