//! Gaussian files, generated workloads, verification and experiment runs.

mod experiment;
mod file;
mod generate;
pub mod ply;
mod verify;

pub use experiment::{
    find_presets, resolve_profiles, run_experiment, run_presets, shipped_presets, ExperimentError,
    ExperimentOptions, ExperimentPreset, ExperimentReport, ExperimentRow, KernelCell, KernelTableRow, ANALYTIC_SAMPLE, SWEEP_PRESET,
};
pub use file::{FileError, GaussianFile, GaussianRecord, FORMAT_VERSION, HEADER_BYTES, MAGIC, RECORD_BYTES};
pub use generate::{generate, generate_gaussians, POSITION_RANGE, SCALE_RANGE, SH_DC_SHIFT, SH_STD};
pub use verify::{relative_deviation, verify, FieldDeviation, InvalidRecord, VerifyReport, VERIFY_TOLERANCE};

use std::path::Path;

use thiserror::Error;

use crate::kernels::CameraParams;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid camera document: {0}")]
    Json(#[from] serde_json::Error),
}

/// Camera from a JSON document with `rotation_cw`, `translation_cw`,
/// `focal` and `principal`.
pub fn camera_from_json(text: &str) -> Result<CameraParams, CameraError> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<CameraParams, CameraError> {
    camera_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camera_json_round_trip() {
        let cam = CameraParams::default_view();
        let text = serde_json::to_string(&cam).unwrap();
        assert_eq!(camera_from_json(&text).unwrap(), cam);
        let doc = r#"{"rotation_cw": [[1,0,0],[0,1,0],[0,0,1]], "translation_cw": [0,0,5],
                      "focal": [500,500], "principal": [320,240]}"#;
        assert_eq!(camera_from_json(doc).unwrap().position_w(), [0.0, 0.0, -5.0]);
        let skewed = doc.replace("[0,1,0]", "[0,2,0]");
        assert!(camera_from_json(&skewed).is_err());
    }
}
