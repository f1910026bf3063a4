//! Ground truth written next to synthesized snapshots.

use std::path::Path;

use cdmdc::numerics::{ComplexMatrix, ComplexVector, RealMatrix};
use cdmdc::testbed::{read_complex_matrix, read_matrix};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;
use crate::model_io::{from_pairs, to_pairs};

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFiles {
    pub modes: String,
    pub b: String,
    pub trajectory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthManifest {
    pub plant: String,
    pub n: usize,
    pub k: usize,
    pub q: usize,
    pub dt: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub forcing_std: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    /// `ln λ / dt`.
    pub omega: Vec<[f64; 2]>,
    pub files: TruthFiles,
}

#[derive(Debug, Clone)]
pub struct Truth {
    /// Order `k` of the reduced plant.
    pub order: usize,
    pub eigenvalues: ComplexVector,
    pub modes: ComplexMatrix,
    pub b: RealMatrix,
}

impl TruthManifest {
    pub fn eigenvalues(&self) -> ComplexVector {
        from_pairs(&self.eigenvalues)
    }
}

pub fn has_truth(dir: &Path) -> bool {
    dir.join(TRUTH_FILE).is_file()
}

pub fn read_truth(dir: &Path) -> Result<Truth, Failure> {
    let manifest: TruthManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(TRUTH_FILE))?)?;
    Ok(Truth {
        order: manifest.k,
        eigenvalues: manifest.eigenvalues(),
        modes: read_complex_matrix(&dir.join(&manifest.files.modes))?,
        b: read_matrix(&dir.join(&manifest.files.b))?,
    })
}

pub fn eigen_pairs(v: &ComplexVector) -> Vec<[f64; 2]> {
    to_pairs(v)
}
