//! Real spherical harmonics through degree 3 and view-dependent color.
//!
//! Basis ordering and signs follow the reference 3DGS rasterizer, and the 48
//! color coefficients are stored coefficient-major with channels interleaved:
//! coefficient `i` of channel `k` lives at `sh[3 * i + k]`.

use super::lanes::{LaneUnit, LaneVector, OpCounts};
use super::{KernelError, Vec3};

pub const SH_COEFFS: usize = 16;
pub const SH_LEN: usize = 3 * SH_COEFFS;

pub const SH_C0: f32 = 0.282_094_8;
pub const SH_C1: f32 = 0.488_602_5;
pub const SH_C2: [f32; 5] = [1.092_548_4, -1.092_548_4, 0.315_391_57, -1.092_548_4, 0.546_274_2];
pub const SH_C3: [f32; 7] = [
    -0.590_043_6,
    2.890_611_4,
    -0.457_045_8,
    0.373_176_3,
    -0.457_045_8,
    1.445_305_7,
    -0.590_043_6,
];

const UNIT_TOLERANCE: f32 = 1e-4;

/// Basis values `Y_lm(r)` for l = 0..3, ordered (l, m) with m ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShBasis(pub [f32; SH_COEFFS]);

impl ShBasis {
    pub fn values(&self) -> &[f32; SH_COEFFS] {
        &self.0
    }
}

pub fn sh_basis(r: Vec3) -> Result<ShBasis, KernelError> {
    sh_basis_counted(r, &mut OpCounts::default())
}

pub(crate) fn sh_basis_counted(r: Vec3, ops: &mut OpCounts) -> Result<ShBasis, KernelError> {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(KernelError::NotUnitDirection { norm });
    }
    let [x, y, z] = r;
    let mut b = [0.0f32; SH_COEFFS];

    b[0] = SH_C0;

    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;

    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    let xx_minus_yy = xx - yy;
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * xx_minus_yy;

    let four_zz_minus = 4.0 * zz - xx - yy;
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * four_zz_minus;
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * four_zz_minus;
    b[14] = SH_C3[5] * z * xx_minus_yy;
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);

    // norm check: 3 mul, 2 add, sqrt + compare
    ops.scalar(3, 2, 2);
    // l=1: 3, monomials: 6, l=2: 7 mul / 4 add, l=3: 20 mul / 8 add
    ops.scalar(3 + 6 + 7 + 20, 4 + 8, 0);
    Ok(ShBasis(b))
}

/// Sum the SH expansion per channel, then optionally apply the `+0.5` offset
/// and clamp at zero used by 3DGS color decoding.
pub fn sh_color(sh: &[f32; SH_LEN], basis: &ShBasis, offset_clamp: bool) -> Vec3 {
    sh_color_counted(sh, basis, offset_clamp, &mut OpCounts::default())
}

pub(crate) fn sh_color_counted(
    sh: &[f32; SH_LEN],
    basis: &ShBasis,
    offset_clamp: bool,
    ops: &mut OpCounts,
) -> Vec3 {
    let mut color = [0.0f32; 3];
    for (k, c) in color.iter_mut().enumerate() {
        let mut sum = 0.0f32;
        for i in 0..SH_COEFFS {
            sum += sh[3 * i + k] * basis.0[i];
        }
        *c = sum;
    }
    ops.scalar(SH_LEN as u64, SH_LEN as u64, 0);
    finish_color(color, offset_clamp, ops)
}

/// Lane form: one 3-lane multiply-accumulate per coefficient, RGB in lanes.
pub(crate) fn sh_color_lanes(
    sh: &[f32; SH_LEN],
    basis: &ShBasis,
    offset_clamp: bool,
    unit: &mut LaneUnit,
    ops: &mut OpCounts,
) -> Vec3 {
    let mut acc = LaneVector::zeros(3);
    for i in 0..SH_COEFFS {
        let coeff = LaneVector::from_slice(&sh[3 * i..3 * i + 3]);
        let y = LaneVector::splat(basis.0[i], 3);
        acc = unit.mac(&acc, &coeff, &y);
    }
    finish_color(acc.to_vec3(), offset_clamp, ops)
}

fn finish_color(mut color: Vec3, offset_clamp: bool, ops: &mut OpCounts) -> Vec3 {
    if offset_clamp {
        for c in &mut color {
            *c = (*c + 0.5).max(0.0);
        }
        ops.scalar(0, 3, 3);
    }
    color
}
