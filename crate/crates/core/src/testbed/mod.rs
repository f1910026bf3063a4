//! Synthetic low-rank plants, measurement noise and snapshot files.

mod io;
mod noise;
mod plant;

pub use io::{
    load_snapshots, read_complex_matrix, read_matrix, read_snapshot_manifest, save_snapshots,
    write_complex_matrix, write_matrix, MatrixFormat, SnapshotManifest,
};
pub use noise::{add_noise, noise_sigma};
pub use plant::{
    build_lifting_modes, simulate, simulate_reduced, Forcing, LowRankPlant, ModeShape, ReducedRun,
    SyntheticRun,
};
