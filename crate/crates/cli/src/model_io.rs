//! A fitted model on disk: `model.json` with the spectrum as `[re, im]`
//! pairs and every matrix in a sibling binary file.

use std::path::Path;

use cdmdc::dmd::{continuous_spectrum, DmdModel};
use cdmdc::numerics::{Complex64, ComplexVector};
use cdmdc::sparse_recovery::ColumnRecovery;
use cdmdc::testbed::{read_complex_matrix, read_matrix, write_complex_matrix, write_matrix};
use cdmdc::verify::{AssumptionScores, ErrorMetrics};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

pub const MODEL_FILE: &str = "model.json";

pub fn to_pairs(v: &ComplexVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn from_pairs(pairs: &[[f64; 2]]) -> ComplexVector {
    ComplexVector::from_iterator(pairs.len(), pairs.iter().map(|&[re, im]| Complex64::new(re, im)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelFiles {
    pub modes: String,
    pub eigenvectors: String,
    pub atilde: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub btilde: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_hat: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compressed_modes: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_y: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub modes: Vec<ColumnRecovery>,
    pub b: Vec<ColumnRecovery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub algorithm: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_tilde: Option<usize>,
    pub n: usize,
    pub dt: f64,
    pub eigenvalues: Vec<[f64; 2]>,
    /// `ln λ / dt`; `null` for zero eigenvalues.
    pub omega: Vec<Option<[f64; 2]>>,
    pub amplitudes: Vec<[f64; 2]>,
    pub files: ModelFiles,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumption_scores: Option<AssumptionScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ErrorMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<RecoveryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency_residual: Option<f64>,
}

impl ModelManifest {
    pub fn new(algorithm: &str, model: &DmdModel) -> Self {
        ModelManifest {
            algorithm: algorithm.to_string(),
            branch: None,
            rank: model.rank,
            r_tilde: model.augmented().map(|a| a.r_tilde()),
            n: model.n(),
            dt: model.dt,
            eigenvalues: to_pairs(&model.eigenvalues),
            omega: model
                .omega
                .iter()
                .map(|z| (z.re.is_finite() && z.im.is_finite()).then_some([z.re, z.im]))
                .collect(),
            amplitudes: to_pairs(&model.amplitudes),
            files: ModelFiles::default(),
            assumption_scores: None,
            metrics: None,
            recovery: None,
            consistency_residual: None,
        }
    }
}

/// Writes the matrices of `model` (plus any `extra` complex/real pieces
/// already named in `manifest.files`) and `model.json` into `dir`.
pub fn write_model(
    dir: &Path,
    mut manifest: ModelManifest,
    model: &DmdModel,
    compressed_modes: Option<&cdmdc::ComplexMatrix>,
    b_y: Option<&cdmdc::RealMatrix>,
) -> Result<ModelManifest, Failure> {
    std::fs::create_dir_all(dir)?;
    let name = |s: &str| s.to_string();
    manifest.files.modes = name("modes.cdmc");
    write_complex_matrix(&dir.join("modes.cdmc"), &model.modes)?;
    manifest.files.eigenvectors = name("eigenvectors.cdmc");
    write_complex_matrix(&dir.join("eigenvectors.cdmc"), &model.eigenvectors)?;
    manifest.files.atilde = name("atilde.cdmc");
    write_matrix(&dir.join("atilde.cdmc"), &model.atilde)?;
    if let Some(bt) = &model.btilde {
        manifest.files.btilde = Some(name("btilde.cdmc"));
        write_matrix(&dir.join("btilde.cdmc"), bt)?;
    }
    if let Some(b) = &model.b_hat {
        manifest.files.b_hat = Some(name("b_hat.cdmc"));
        write_matrix(&dir.join("b_hat.cdmc"), b)?;
    }
    if let Some(cm) = compressed_modes {
        manifest.files.compressed_modes = Some(name("compressed_modes.cdmc"));
        write_complex_matrix(&dir.join("compressed_modes.cdmc"), cm)?;
    }
    if let Some(by) = b_y {
        manifest.files.b_y = Some(name("b_y.cdmc"));
        write_matrix(&dir.join("b_y.cdmc"), by)?;
    }
    crate::output::write_json(&dir.join(MODEL_FILE), &manifest)?;
    Ok(manifest)
}

/// Reloads a model written by [`write_model`]; SVD factors are not stored,
/// everything needed for prediction is.
pub fn read_model(dir: &Path) -> Result<(ModelManifest, DmdModel), Failure> {
    let manifest: ModelManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(MODEL_FILE))?)?;
    let eigenvalues = from_pairs(&manifest.eigenvalues);
    let model = DmdModel {
        rank: manifest.rank,
        dt: manifest.dt,
        atilde: read_matrix(&dir.join(&manifest.files.atilde))?,
        btilde: manifest.files.btilde.as_ref().map(|f| read_matrix(&dir.join(f))).transpose()?,
        omega: continuous_spectrum(&eigenvalues, manifest.dt)?,
        eigenvalues,
        modes: read_complex_matrix(&dir.join(&manifest.files.modes))?,
        eigenvectors: read_complex_matrix(&dir.join(&manifest.files.eigenvectors))?,
        amplitudes: from_pairs(&manifest.amplitudes),
        b_hat: manifest.files.b_hat.as_ref().map(|f| read_matrix(&dir.join(f))).transpose()?,
        factors: None,
    };
    Ok((manifest, model))
}
