use serde::{Deserialize, Serialize};

use super::file::GaussianFile;
use crate::kernels::{compute_features, CameraParams, GraphKind, StagedPipeline};

pub const VERIFY_TOLERANCE: f64 = 1e-5;

/// `|a - b| / max(1, |a|, |b|)`; non-finite pairs count as equal only when
/// their bits match.
pub fn relative_deviation(a: f32, b: f32) -> f64 {
    if a.to_bits() == b.to_bits() {
        return 0.0;
    }
    let (a, b) = (f64::from(a), f64::from(b));
    if !a.is_finite() || !b.is_finite() {
        return f64::INFINITY;
    }
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidRecord {
    pub index: usize,
    pub offset: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDeviation {
    pub field: String,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub records: usize,
    pub checked: usize,
    pub invalid: Vec<InvalidRecord>,
    pub fields: Vec<FieldDeviation>,
    pub flag_mismatches: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the scalar reference with the staged seven-kernel pipeline on
/// every valid record. Invalid records are reported and skipped.
pub fn verify(file: &GaussianFile, cam: &CameraParams) -> VerifyReport {
    let staged = StagedPipeline::new(GraphKind::Partitioned);
    let mut invalid = Vec::new();
    let mut fields: Vec<FieldDeviation> = Vec::new();
    let mut flag_mismatches = 0;
    let mut checked = 0;
    for (index, record) in file.records.iter().enumerate() {
        let g = match record.to_gaussian() {
            Ok(g) => g,
            Err(e) => {
                invalid.push(InvalidRecord { index, offset: GaussianFile::record_offset(index), error: e.to_string() });
                continue;
            }
        };
        let reference = compute_features(&g, cam);
        let candidate = staged.run(&g, cam);
        if reference.flags != candidate.flags {
            flag_mismatches += 1;
        }
        if fields.is_empty() {
            fields = reference
                .fields()
                .iter()
                .map(|(name, _)| FieldDeviation { field: name.to_string(), max_deviation: 0.0 })
                .collect();
        }
        for (acc, ((_, a), (_, b))) in fields.iter_mut().zip(reference.fields().iter().zip(candidate.fields().iter())) {
            acc.max_deviation = acc.max_deviation.max(relative_deviation(*a, *b));
        }
        checked += 1;
    }
    let max_deviation = fields.iter().map(|f| f.max_deviation).fold(0.0, f64::max);
    VerifyReport {
        records: file.len(),
        checked,
        invalid,
        fields,
        flag_mismatches,
        max_deviation,
        tolerance: VERIFY_TOLERANCE,
        passed: max_deviation <= VERIFY_TOLERANCE && flag_mismatches == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::generate;

    #[test]
    fn generated_file_passes() {
        let r = verify(&generate(300, 5), &CameraParams::default_view());
        assert!(r.passed);
        assert_eq!((r.records, r.checked), (300, 300));
        assert_eq!(r.fields.len(), 13);
        assert!(r.invalid.is_empty());
    }

    #[test]
    fn zero_quaternion_is_reported_and_skipped() {
        let mut file = generate(5, 1);
        file.records[2].rotation = [0.0; 4];
        let r = verify(&file, &CameraParams::default_view());
        assert_eq!(r.checked, 4);
        assert_eq!(r.invalid.len(), 1);
        assert_eq!(r.invalid[0].index, 2);
        assert_eq!(r.invalid[0].offset, 16 + 2 * 236);
        assert!(r.passed);
    }

    #[test]
    fn deviation_metric() {
        assert_eq!(relative_deviation(1.0, 1.0), 0.0);
        assert!((relative_deviation(0.0, 1e-6) - 1e-6).abs() < 1e-12);
        assert!((relative_deviation(100.0, 101.0) - 1.0 / 101.0).abs() < 1e-9);
        assert_eq!(relative_deviation(f32::NAN, 1.0), f64::INFINITY);
    }
}
