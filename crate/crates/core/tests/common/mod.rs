//! f64 reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix2x3, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatflow::kernels::{CameraParams, Cov3D, Mat3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn mat3(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| f64::from(m[i][j]))
}

pub fn cov3d_matrix(c: &Cov3D) -> Matrix3<f64> {
    mat3(&c.to_matrix())
}

/// Rotation of a scalar-first quaternion, normalized in f64.
pub fn rotation_oracle(q: [f32; 4]) -> Matrix3<f64> {
    let q = nalgebra::Quaternion::new(f64::from(q[0]), f64::from(q[1]), f64::from(q[2]), f64::from(q[3]));
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// `R diag(s^2) R^T` as a dense f64 product.
pub fn cov3d_oracle(q: [f32; 4], s: [f32; 3]) -> Matrix3<f64> {
    let r = rotation_oracle(q);
    let d = Matrix3::from_diagonal(&Vector3::from_fn(|i, _| f64::from(s[i]).powi(2)));
    r * d * r.transpose()
}

pub fn min_eigenvalue(m: Matrix3<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

/// Largest absolute entry difference over the largest absolute entry.
pub fn matrix_rel_dev<const R: usize, const C: usize>(
    a: &nalgebra::SMatrix<f64, R, C>,
    b: &nalgebra::SMatrix<f64, R, C>,
) -> f64 {
    let scale = a.amax().max(b.amax()).max(f64::MIN_POSITIVE);
    (a - b).amax() / scale
}

pub fn jacobian_matrix(j: &[[f32; 3]; 2]) -> Matrix2x3<f64> {
    Matrix2x3::from_fn(|i, k| f64::from(j[i][k]))
}

/// Random rotation camera with the world origin 30 units in front.
pub fn random_camera(rng: &mut ChaCha8Rng) -> CameraParams {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0f64));
    let angle = rng.gen_range(0.0..PI);
    let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
    let m: Mat3 = std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)] as f32));
    CameraParams::new(m, [0.0, 0.0, 30.0], [1000.0, 1000.0], [960.0, 540.0]).expect("rotation is orthonormal")
}

/// Real SH basis through degree 3 from the closed-form normalizations, with
/// the sign convention of the reference renderer.
pub fn sh_basis_oracle(d: [f64; 3]) -> [f64; 16] {
    let [x, y, z] = d;
    let k = |num: f64, den: f64| (num / (den * PI)).sqrt();
    let c0 = k(1.0, 4.0);
    let c1 = k(3.0, 4.0);
    let (c2a, c2b, c2c) = (k(15.0, 4.0), k(5.0, 16.0), k(15.0, 16.0));
    let (c3a, c3b, c3c, c3d, c3e) = (k(35.0, 32.0), k(105.0, 4.0), k(21.0, 32.0), k(7.0, 16.0), k(105.0, 16.0));
    let (xx, yy, zz) = (x * x, y * y, z * z);
    [
        c0,
        -c1 * y,
        c1 * z,
        -c1 * x,
        c2a * x * y,
        -c2a * y * z,
        c2b * (2.0 * zz - xx - yy),
        -c2a * x * z,
        c2c * (xx - yy),
        -c3a * y * (3.0 * xx - yy),
        c3b * x * y * z,
        -c3c * y * (4.0 * zz - xx - yy),
        c3d * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        -c3c * x * (4.0 * zz - xx - yy),
        c3e * z * (xx - yy),
        -c3a * x * (xx - 3.0 * yy),
    ]
}

/// All 48 terms summed per channel in f64, then offset and clamped.
pub fn sh_color_oracle(sh: &[f32; 48], d: [f64; 3]) -> [f64; 3] {
    let basis = sh_basis_oracle(d);
    std::array::from_fn(|ch| {
        let sum: f64 = (0..16).map(|i| f64::from(sh[3 * i + ch]) * basis[i]).sum();
        (sum + 0.5).max(0.0)
    })
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}
