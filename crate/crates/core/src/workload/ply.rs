//! Mapping from trained-model PLY exports to [`GaussianRecord`]s.
//!
//! No PLY reader ships here. Extract the vertex properties listed in
//! [`ply_properties`] by name with any PLY tool, then pass each row to
//! [`record_from_ply_row`] and write the records with
//! [`GaussianFile::write`](super::GaussianFile::write).
//!
//! | PLY property            | record field   | transform        |
//! |-------------------------|----------------|------------------|
//! | `x y z`                 | position       | none             |
//! | `rot_0..rot_3`          | rotation w,x,y,z | none (normalized on load) |
//! | `scale_0..scale_2`      | scale          | `exp`            |
//! | `f_dc_0..f_dc_2`        | sh[0..3]       | none             |
//! | `f_rest_0..f_rest_44`   | sh[3..48]      | channel-major to interleaved |
//! | `opacity`               | opacity        | logistic sigmoid |

use super::file::GaussianRecord;
use crate::kernels::{SH_COEFFS, SH_LEN};

pub const PLY_ROW_LEN: usize = 3 + 4 + 3 + SH_LEN + 1;

/// Property names in the order [`record_from_ply_row`] expects.
pub fn ply_properties() -> Vec<String> {
    let mut names: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..SH_LEN - 3).map(|i| format!("f_rest_{i}")));
    names.push("opacity".to_string());
    names
}

pub fn record_from_ply_row(row: &[f32; PLY_ROW_LEN]) -> GaussianRecord {
    let position = [row[0], row[1], row[2]];
    let rotation = [row[3], row[4], row[5], row[6]];
    let scale = [row[7].exp(), row[8].exp(), row[9].exp()];
    let dc = &row[10..13];
    let rest = &row[13..13 + SH_LEN - 3];
    let rest_per_channel = SH_COEFFS - 1;
    let sh = std::array::from_fn(|slot| {
        let (coeff, channel) = (slot / 3, slot % 3);
        if coeff == 0 {
            dc[channel]
        } else {
            rest[channel * rest_per_channel + coeff - 1]
        }
    });
    let opacity = 1.0 / (1.0 + (-row[PLY_ROW_LEN - 1]).exp());
    GaussianRecord { position, rotation, scale, sh, opacity }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_list_matches_row() {
        let names = ply_properties();
        assert_eq!(names.len(), PLY_ROW_LEN);
        assert_eq!(names[13], "f_rest_0");
        assert_eq!(names[PLY_ROW_LEN - 1], "opacity");
    }

    #[test]
    fn transforms() {
        let mut row = [0.0f32; PLY_ROW_LEN];
        row[3] = 1.0;
        row[10] = 0.7;
        // f_rest_15 is the first higher-order coefficient of the second channel
        row[13 + 15] = 0.3;
        let r = record_from_ply_row(&row);
        assert_eq!(r.scale, [1.0; 3]);
        assert_eq!(r.opacity, 0.5);
        assert_eq!(r.sh[0], 0.7);
        assert_eq!(r.sh[3 + 1], 0.3);
        assert!(r.to_gaussian().is_ok());
    }
}
