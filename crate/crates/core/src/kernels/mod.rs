//! Per-Gaussian feature computation: covariance, projection and color.
//!
//! Every operation exists as a plain function returning values only. The
//! `*_counted` and `*_lanes` variants used by the staged kernels compute the
//! same arithmetic in the same order while tallying operations, so the staged
//! pipeline and [`compute_features`] agree bit for bit.

mod lanes;
mod sh;
pub mod staged;

pub use lanes::{LaneUnit, LaneVector, OpCounts, LANES};
pub use sh::{sh_basis, sh_color, ShBasis, SH_C0, SH_COEFFS, SH_LEN};
pub use staged::{GraphKind, KernelKind, StagedPipeline};

use bitflags::bitflags;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f32; 3];
pub type Mat3 = [[f32; 3]; 3];
pub type Mat2x3 = [[f32; 3]; 2];

/// Smallest camera-space depth used as a divisor.
pub const DEPTH_EPSILON: f32 = 1e-6;
/// Determinant at or below which a 2D covariance has no usable inverse.
pub const CONIC_DET_EPSILON: f32 = 1e-9;
const QUAT_NORM_EPSILON: f32 = 1e-12;
const DIR_EPSILON: f32 = 1e-9;
const ORTHONORMAL_TOLERANCE: f32 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("scale component {axis} must be positive, got {value}")]
    NonPositiveScale { axis: usize, value: f32 },
    #[error("direction is not unit length (norm {norm})")]
    NotUnitDirection { norm: f32 },
    #[error("padding lane {lane} is nonzero")]
    NonZeroPadding { lane: usize },
    #[error("vector needs at least 3 populated lanes, got {len}")]
    ShortVector { len: usize },
    #[error("camera rotation is not orthonormal (max deviation {deviation})")]
    NonOrthonormalRotation { deviation: f32 },
    #[error("non-finite value in {field}")]
    NonFinite { field: &'static str },
}

bitflags! {
    /// Conditions that stop a Gaussian from being rasterized.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    #[serde(transparent)]
    pub struct FeatureFlags: u32 {
        /// Center at or behind the camera plane.
        const CULLED = 1;
        /// 2D covariance determinant at or below `CONIC_DET_EPSILON`.
        const DEGENERATE_CONIC = 1 << 1;
        /// Gaussian center coincides with the camera center.
        const DEGENERATE_DIR = 1 << 2;
    }
}

/// A single splat primitive.
///
/// The rotation quaternion is scalar-first `(w, x, y, z)` and normalized on
/// construction; scales are per-axis standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    position: Vec3,
    rotation: [f32; 4],
    scale: Vec3,
    sh: [f32; SH_LEN],
    opacity: f32,
}

impl Gaussian {
    /// Serialized width: 59 little-endian f32 values.
    pub const RECORD_BYTES: usize = 59 * 4;

    pub fn new(
        position: Vec3,
        rotation: [f32; 4],
        scale: Vec3,
        sh: [f32; SH_LEN],
        opacity: f32,
    ) -> Result<Self, KernelError> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite { field: "position" });
        }
        if sh.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite { field: "sh" });
        }
        if !opacity.is_finite() {
            return Err(KernelError::NonFinite { field: "opacity" });
        }
        for (axis, &value) in scale.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(KernelError::NonPositiveScale { axis, value });
            }
        }
        let rotation = normalize_quat(rotation)?;
        Ok(Self { position, rotation, scale, sh, opacity })
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn rotation(&self) -> [f32; 4] {
        self.rotation
    }

    pub fn scale(&self) -> Vec3 {
        self.scale
    }

    pub fn sh(&self) -> &[f32; SH_LEN] {
        &self.sh
    }

    pub fn opacity(&self) -> f32 {
        self.opacity
    }
}

fn normalize_quat(q: [f32; 4]) -> Result<[f32; 4], KernelError> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFinite { field: "rotation" });
    }
    let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !(norm > QUAT_NORM_EPSILON) {
        return Err(KernelError::ZeroQuaternion);
    }
    Ok([q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm])
}

/// Pinhole camera with world-to-camera extrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraDoc", into = "CameraDoc")]
pub struct CameraParams {
    rotation_cw: Mat3,
    translation_cw: Vec3,
    focal: [f32; 2],
    principal: [f32; 2],
    position_w: Vec3,
}

/// JSON shape of [`CameraParams`]; `position_w` is derived and never read.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraDoc {
    rotation_cw: Mat3,
    translation_cw: Vec3,
    focal: [f32; 2],
    principal: [f32; 2],
    #[serde(default, skip_deserializing)]
    position_w: Option<Vec3>,
}

impl TryFrom<CameraDoc> for CameraParams {
    type Error = KernelError;

    fn try_from(doc: CameraDoc) -> Result<Self, Self::Error> {
        CameraParams::new(doc.rotation_cw, doc.translation_cw, doc.focal, doc.principal)
    }
}

impl From<CameraParams> for CameraDoc {
    fn from(cam: CameraParams) -> Self {
        CameraDoc {
            rotation_cw: cam.rotation_cw,
            translation_cw: cam.translation_cw,
            focal: cam.focal,
            principal: cam.principal,
            position_w: Some(cam.position_w),
        }
    }
}

impl CameraParams {
    pub fn new(
        rotation_cw: Mat3,
        translation_cw: Vec3,
        focal: [f32; 2],
        principal: [f32; 2],
    ) -> Result<Self, KernelError> {
        let finite = rotation_cw.iter().flatten().all(|v| v.is_finite())
            && translation_cw.iter().chain(&focal).chain(&principal).all(|v| v.is_finite());
        if !finite {
            return Err(KernelError::NonFinite { field: "camera" });
        }
        let deviation = orthonormal_deviation(&rotation_cw);
        if !(deviation <= ORTHONORMAL_TOLERANCE) {
            return Err(KernelError::NonOrthonormalRotation { deviation });
        }
        let mut position_w = [0.0f32; 3];
        for (j, p) in position_w.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for i in 0..3 {
                acc += rotation_cw[i][j] * translation_cw[i];
            }
            *p = -acc;
        }
        Ok(Self { rotation_cw, translation_cw, focal, principal, position_w })
    }

    /// Axis-aligned camera at `(0, 0, -30)` looking down +z. Generated
    /// workloads sit entirely in front of it.
    pub fn default_view() -> Self {
        Self::new(IDENTITY, [0.0, 0.0, 30.0], [1000.0, 1000.0], [960.0, 540.0])
            .expect("identity rotation is orthonormal")
    }

    pub fn rotation_cw(&self) -> &Mat3 {
        &self.rotation_cw
    }

    pub fn translation_cw(&self) -> Vec3 {
        self.translation_cw
    }

    pub fn focal(&self) -> [f32; 2] {
        self.focal
    }

    pub fn principal(&self) -> [f32; 2] {
        self.principal
    }

    /// Camera center in world coordinates, `-R_cw^T t_cw`.
    pub fn position_w(&self) -> Vec3 {
        self.position_w
    }
}

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn orthonormal_deviation(r: &Mat3) -> f32 {
    let mut worst = 0.0f32;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f32 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - expect).abs());
        }
    }
    worst
}

/// Upper triangle of a symmetric 3x3 covariance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cov3D {
    pub xx: f32,
    pub xy: f32,
    pub xz: f32,
    pub yy: f32,
    pub yz: f32,
    pub zz: f32,
}

impl Cov3D {
    pub fn to_matrix(&self) -> Mat3 {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    pub fn as_array(&self) -> [f32; 6] {
        [self.xx, self.xy, self.xz, self.yy, self.yz, self.zz]
    }

    pub fn trace(&self) -> f32 {
        self.xx + self.yy + self.zz
    }
}

/// Symmetric 2x2 screen-space covariance `[[a, b], [b, c]]` with its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cov2D {
    pub a: f32,
    pub b: f32,
    pub c: f32,
    /// Inverse as `(a', b', c')`; zero until [`invert_cov2d`] succeeds.
    pub conic: [f32; 3],
    pub det: f32,
}

impl Cov2D {
    pub fn new(a: f32, b: f32, c: f32) -> Self {
        Self { a, b, c, conic: [0.0; 3], det: a * c - b * b }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.det > CONIC_DET_EPSILON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureOutput {
    pub u: [f32; 2],
    pub depth: f32,
    pub cov2d: Cov2D,
    pub color: Vec3,
    pub flags: FeatureFlags,
}

impl FeatureOutput {
    /// Every numeric field in a fixed order, for field-wise comparison.
    pub fn fields(&self) -> [(&'static str, f32); 13] {
        let c = &self.cov2d;
        [
            ("u.x", self.u[0]),
            ("u.y", self.u[1]),
            ("depth", self.depth),
            ("cov2d.a", c.a),
            ("cov2d.b", c.b),
            ("cov2d.c", c.c),
            ("conic.a", c.conic[0]),
            ("conic.b", c.conic[1]),
            ("conic.c", c.conic[2]),
            ("cov2d.det", c.det),
            ("color.r", self.color[0]),
            ("color.g", self.color[1]),
            ("color.b", self.color[2]),
        ]
    }
}

/// Tunables for the parts of the pipeline that vary between renderers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Added to both diagonal entries of the 2D covariance.
    pub dilation: f32,
    /// Apply `+0.5` and clamp at zero after the SH sum.
    pub color_offset_clamp: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self { dilation: 0.0, color_offset_clamp: true }
    }
}

/// Rotation matrix of a scalar-first quaternion. The input need not be unit.
pub fn quat_to_rotation(q: [f32; 4]) -> Result<Mat3, KernelError> {
    quat_to_rotation_counted(q, &mut OpCounts::default())
}

pub(crate) fn quat_to_rotation_counted(q: [f32; 4], ops: &mut OpCounts) -> Result<Mat3, KernelError> {
    let [w, x, y, z] = normalize_quat(q)?;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    ops.scalar(4 + 9 + 9, 3 + 12, 6);
    Ok([
        [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
        [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
        [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
    ])
}

/// `R diag(s^2) R^T` by two literal 3x3x3 loops.
pub fn cov3d_naive(r: &Mat3, s: Vec3) -> Cov3D {
    cov3d_naive_counted(r, s, &mut OpCounts::default())
}

pub(crate) fn cov3d_naive_counted(r: &Mat3, s: Vec3, ops: &mut OpCounts) -> Cov3D {
    let mut sm = [[0.0f32; 3]; 3];
    for k in 0..3 {
        sm[k][k] = s[k] * s[k];
    }
    ops.scalar(3, 0, 0);

    let mut temp = [[0.0f32; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            temp[i][j] = 0.0;
            for k in 0..3 {
                temp[i][j] += r[i][k] * sm[k][j];
            }
        }
    }
    let mut full = [[0.0f32; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            full[i][j] = 0.0;
            for k in 0..3 {
                full[i][j] += temp[i][k] * r[j][k];
            }
        }
    }
    ops.scalar(54, 54, 0);
    Cov3D {
        xx: full[0][0],
        xy: full[0][1],
        xz: full[0][2],
        yy: full[1][1],
        yz: full[1][2],
        zz: full[2][2],
    }
}

/// Upper-triangle covariance as `r_i . ((s^2 (.) r_i) (.) r_j)` per entry.
///
/// Rows and scale must carry at least three populated lanes with zero
/// padding, otherwise the horizontal reduction would pick up padding values.
pub fn cov3d_vectorized(
    r1: &LaneVector,
    r2: &LaneVector,
    r3: &LaneVector,
    s: &LaneVector,
) -> Result<Cov3D, KernelError> {
    cov3d_vectorized_counted(r1, r2, r3, s, &mut LaneUnit::new())
}

pub(crate) fn cov3d_vectorized_counted(
    r1: &LaneVector,
    r2: &LaneVector,
    r3: &LaneVector,
    s: &LaneVector,
    unit: &mut LaneUnit,
) -> Result<Cov3D, KernelError> {
    for v in [r1, r2, r3, s] {
        if v.len() < 3 {
            return Err(KernelError::ShortVector { len: v.len() });
        }
        if let Some(lane) = v.dirty_padding() {
            return Err(KernelError::NonZeroPadding { lane });
        }
        if let Some(lane) = (3..v.len()).find(|&i| v.get(i) != 0.0) {
            return Err(KernelError::NonZeroPadding { lane });
        }
    }
    let s2 = unit.mul(s, s);
    let mut entry = |a: &LaneVector, b: &LaneVector| {
        let t = unit.mul(&s2, a);
        let p = unit.mul(&t, b);
        unit.reduce(&p)
    };
    Ok(Cov3D {
        xx: entry(r1, r1),
        xy: entry(r1, r2),
        xz: entry(r1, r3),
        yy: entry(r2, r2),
        yz: entry(r2, r3),
        zz: entry(r3, r3),
    })
}

/// Convenience wrapper that loads matrix rows into lane vectors.
pub fn cov3d_vectorized_from(r: &Mat3, s: Vec3) -> Cov3D {
    let rows = r.map(LaneVector::from_vec3);
    cov3d_vectorized(&rows[0], &rows[1], &rows[2], &LaneVector::from_vec3(s))
        .expect("rows built from 3-vectors have clean padding")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: [f32; 2],
    /// Camera-space position.
    pub p_c: Vec3,
    pub culled: bool,
}

/// World point to pixel coordinates. Points with `z <= 0` are flagged culled;
/// the divisor is clamped to `DEPTH_EPSILON` so `u` stays finite.
pub fn project(p_w: Vec3, cam: &CameraParams) -> Projection {
    project_counted(p_w, cam, &mut OpCounts::default())
}

pub(crate) fn project_counted(p_w: Vec3, cam: &CameraParams, ops: &mut OpCounts) -> Projection {
    let r = &cam.rotation_cw;
    let t = cam.translation_cw;
    let mut p_c = [0.0f32; 3];
    for i in 0..3 {
        let mut acc = 0.0f32;
        for j in 0..3 {
            acc += r[i][j] * p_w[j];
        }
        p_c[i] = acc + t[i];
    }
    ops.scalar(9, 12, 0);
    finish_projection(p_c, cam, ops)
}

/// Camera transform on the vector unit: columns of `R` scaled and summed.
pub(crate) fn project_lanes(
    p_w: Vec3,
    cam: &CameraParams,
    unit: &mut LaneUnit,
    ops: &mut OpCounts,
) -> Projection {
    let r = &cam.rotation_cw;
    let mut acc = LaneVector::zeros(3);
    for j in 0..3 {
        let col = LaneVector::from_vec3([r[0][j], r[1][j], r[2][j]]);
        acc = unit.mac(&acc, &col, &LaneVector::splat(p_w[j], 3));
    }
    let p_c = unit.add(&acc, &LaneVector::from_vec3(cam.translation_cw));
    finish_projection(p_c.to_vec3(), cam, ops)
}

fn finish_projection(p_c: Vec3, cam: &CameraParams, ops: &mut OpCounts) -> Projection {
    let culled = !(p_c[2] > 0.0);
    let z = p_c[2].max(DEPTH_EPSILON);
    let u = [
        cam.focal[0] * p_c[0] / z + cam.principal[0],
        cam.focal[1] * p_c[1] / z + cam.principal[1],
    ];
    ops.scalar(2, 2, 4);
    Projection { u, p_c, culled }
}

/// First-order perspective Jacobian of `u(p_c)`; `None` when `z < DEPTH_EPSILON`.
pub fn jacobian(p_c: Vec3, focal: [f32; 2]) -> Option<Mat2x3> {
    jacobian_counted(p_c, focal, &mut OpCounts::default())
}

pub(crate) fn jacobian_counted(p_c: Vec3, focal: [f32; 2], ops: &mut OpCounts) -> Option<Mat2x3> {
    let [x, y, z] = p_c;
    ops.scalar(0, 0, 1);
    if !(z >= DEPTH_EPSILON) {
        return None;
    }
    let [fx, fy] = focal;
    let z2 = z * z;
    ops.scalar(3, 0, 6);
    Some([[fx / z, 0.0, -(fx * x) / z2], [0.0, fy / z, -(fy * y) / z2]])
}

/// `K = J R_cw`.
pub fn compute_k(j: &Mat2x3, r_cw: &Mat3) -> Mat2x3 {
    compute_k_counted(j, r_cw, &mut OpCounts::default())
}

pub(crate) fn compute_k_counted(j: &Mat2x3, r_cw: &Mat3, ops: &mut OpCounts) -> Mat2x3 {
    let mut k = [[0.0f32; 3]; 2];
    for i in 0..2 {
        for c in 0..3 {
            let mut acc = 0.0f32;
            for m in 0..3 {
                acc += j[i][m] * r_cw[m][c];
            }
            k[i][c] = acc;
        }
    }
    ops.scalar(18, 18, 0);
    k
}

pub(crate) fn compute_k_lanes(j: &Mat2x3, r_cw: &Mat3, unit: &mut LaneUnit) -> Mat2x3 {
    let rows = r_cw.map(LaneVector::from_vec3);
    let mut k = [[0.0f32; 3]; 2];
    for i in 0..2 {
        let mut acc = LaneVector::zeros(3);
        for m in 0..3 {
            acc = unit.mac(&acc, &LaneVector::splat(j[i][m], 3), &rows[m]);
        }
        k[i] = acc.to_vec3();
    }
    k
}

/// `K Sigma K^T`, with `dilation` added to the diagonal.
pub fn cov2d(k: &Mat2x3, cov3d: &Cov3D, dilation: f32) -> Cov2D {
    cov2d_counted(k, cov3d, dilation, &mut OpCounts::default())
}

pub(crate) fn cov2d_counted(k: &Mat2x3, cov3d: &Cov3D, dilation: f32, ops: &mut OpCounts) -> Cov2D {
    let sigma = cov3d.to_matrix();
    let mut m = [[0.0f32; 3]; 2];
    for i in 0..2 {
        for c in 0..3 {
            let mut acc = 0.0f32;
            for n in 0..3 {
                acc += k[i][n] * sigma[n][c];
            }
            m[i][c] = acc;
        }
    }
    let dot = |a: &Vec3, b: &Vec3| {
        let mut acc = 0.0f32;
        for c in 0..3 {
            acc += a[c] * b[c];
        }
        acc
    };
    let a = dot(&m[0], &k[0]);
    let b = dot(&m[0], &k[1]);
    let c = dot(&m[1], &k[1]);
    ops.scalar(18 + 9, 18 + 9 + 2, 0);
    Cov2D::new(a + dilation, b, c + dilation)
}

pub(crate) fn cov2d_lanes(
    k: &Mat2x3,
    cov3d: &Cov3D,
    dilation: f32,
    unit: &mut LaneUnit,
    ops: &mut OpCounts,
) -> Cov2D {
    let sigma = cov3d.to_matrix().map(LaneVector::from_vec3);
    let krows = k.map(LaneVector::from_vec3);
    let mut m = [LaneVector::zeros(3); 2];
    for i in 0..2 {
        for n in 0..3 {
            m[i] = unit.mac(&m[i], &LaneVector::splat(k[i][n], 3), &sigma[n]);
        }
    }
    let mut dot = |a: &LaneVector, b: &LaneVector| {
        let p = unit.mul(a, b);
        unit.reduce(&p)
    };
    let a = dot(&m[0], &krows[0]);
    let b = dot(&m[0], &krows[1]);
    let c = dot(&m[1], &krows[1]);
    ops.scalar(0, 2, 0);
    Cov2D::new(a + dilation, b, c + dilation)
}

/// Fill in the conic. Near-singular input keeps a zero conic.
pub fn invert_cov2d(cov: Cov2D) -> Cov2D {
    invert_cov2d_counted(cov, &mut OpCounts::default())
}

pub(crate) fn invert_cov2d_counted(cov: Cov2D, ops: &mut OpCounts) -> Cov2D {
    let det = det2(cov.a, cov.b, cov.c);
    ops.scalar(2, 3, 1);
    let conic = if det > CONIC_DET_EPSILON {
        ops.scalar(0, 0, 4);
        [cov.c / det, -cov.b / det, cov.a / det]
    } else {
        [0.0; 3]
    };
    Cov2D { conic, det, ..cov }
}

/// `a c - b^2` with Kahan's compensated product difference.
fn det2(a: f32, b: f32, c: f32) -> f32 {
    let w = b * b;
    let err = (-b).mul_add(b, w);
    a.mul_add(c, -w) + err
}

/// Unit viewing direction from the camera center. Coincident points return
/// `(0, 0, 1)` with the degenerate flag set.
pub fn ray_dir(p_w: Vec3, cam_pos: Vec3) -> (Vec3, bool) {
    ray_dir_counted(p_w, cam_pos, &mut OpCounts::default())
}

pub(crate) fn ray_dir_counted(p_w: Vec3, cam_pos: Vec3, ops: &mut OpCounts) -> (Vec3, bool) {
    let d = [p_w[0] - cam_pos[0], p_w[1] - cam_pos[1], p_w[2] - cam_pos[2]];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    ops.scalar(3, 5, 2);
    if !(norm > DIR_EPSILON) {
        return ([0.0, 0.0, 1.0], true);
    }
    ops.scalar(0, 0, 3);
    ([d[0] / norm, d[1] / norm, d[2] / norm], false)
}

/// Scalar reference for one Gaussian: rotation, covariance, projection,
/// Jacobian, `K`, 2D covariance, conic, view direction, SH basis, color.
pub fn compute_features(g: &Gaussian, cam: &CameraParams) -> FeatureOutput {
    compute_features_with(g, cam, &FeatureOptions::default())
}

pub fn compute_features_with(g: &Gaussian, cam: &CameraParams, opts: &FeatureOptions) -> FeatureOutput {
    let mut flags = FeatureFlags::empty();
    let r = quat_to_rotation(g.rotation).expect("Gaussian quaternions are normalized");
    let sigma = cov3d_naive(&r, g.scale);
    let proj = project(g.position, cam);
    if proj.culled {
        flags |= FeatureFlags::CULLED;
    }
    let cov = match jacobian(proj.p_c, cam.focal) {
        Some(j) if !proj.culled => {
            let k = compute_k(&j, &cam.rotation_cw);
            invert_cov2d(cov2d(&k, &sigma, opts.dilation))
        }
        _ => Cov2D::default(),
    };
    if cov.is_degenerate() {
        flags |= FeatureFlags::DEGENERATE_CONIC;
    }
    let (dir, dir_degenerate) = ray_dir(g.position, cam.position_w);
    if dir_degenerate {
        flags |= FeatureFlags::DEGENERATE_DIR;
    }
    let basis = sh_basis(dir).expect("ray_dir yields unit vectors");
    let color = sh_color(&g.sh, &basis, opts.color_offset_clamp);
    FeatureOutput { u: proj.u, depth: proj.p_c[2], cov2d: cov, color, flags }
}
