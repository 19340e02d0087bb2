mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use splatflow::kernels::{
    compute_features, compute_k, cov2d, cov3d_naive, cov3d_vectorized, cov3d_vectorized_from, invert_cov2d,
    jacobian, project, quat_to_rotation, ray_dir, sh_basis, sh_color, CameraParams, Cov2D, GraphKind, KernelError,
    LaneVector, StagedPipeline,
};
use splatflow::workload::{generate, generate_gaussians};

use common::*;

#[test]
fn rotation_matches_nalgebra() {
    let file = generate(2000, 1);
    for rec in &file.records {
        let r = mat3(&quat_to_rotation(rec.rotation).unwrap());
        let oracle = rotation_oracle(rec.rotation);
        assert!(matrix_rel_dev(&r, &oracle) < 1e-6);
        assert!((r * r.transpose() - nalgebra::Matrix3::identity()).amax() < 1e-6);
    }
}

#[test]
fn cov3d_matches_dense_f64_product() {
    let file = generate(5000, 2);
    for rec in &file.records {
        let r = quat_to_rotation(rec.rotation).unwrap();
        let oracle = cov3d_oracle(rec.rotation, rec.scale);
        let naive = cov3d_matrix(&cov3d_naive(&r, rec.scale));
        let vector = cov3d_matrix(&cov3d_vectorized_from(&r, rec.scale));
        assert!(matrix_rel_dev(&naive, &oracle) < 1e-5);
        assert!(matrix_rel_dev(&vector, &oracle) < 1e-5);
    }
}

#[test]
fn cov3d_eigenvalues_are_squared_scales() {
    for rec in &generate(500, 3).records {
        let r = quat_to_rotation(rec.rotation).unwrap();
        let m = cov3d_matrix(&cov3d_naive(&r, rec.scale));
        let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        let mut expect: Vec<f64> = rec.scale.iter().map(|&s| f64::from(s).powi(2)).collect();
        eig.sort_by(f64::total_cmp);
        expect.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-5 * expect[2], "{eig:?} vs {expect:?}");
        }
    }
}

#[test]
fn cov2d_matches_dense_ewa_product() {
    let mut rng = rng(4);
    for g in generate_gaussians(2000, 4) {
        let cam = random_camera(&mut rng);
        let p = project(g.position(), &cam);
        let j = jacobian(p.p_c, cam.focal()).unwrap();
        let r = quat_to_rotation(g.rotation()).unwrap();
        let sigma = cov3d_naive(&r, g.scale());
        let got = cov2d(&compute_k(&j, cam.rotation_cw()), &sigma, 0.0);
        let jm = jacobian_matrix(&j);
        let w = mat3(cam.rotation_cw());
        let s = cov3d_oracle(g.rotation(), g.scale());
        let oracle = jm * w * s * w.transpose() * jm.transpose();
        let gm = nalgebra::Matrix2::new(f64::from(got.a), f64::from(got.b), f64::from(got.b), f64::from(got.c));
        assert!(matrix_rel_dev(&gm, &oracle) < 1e-4, "{gm} vs {oracle}");
    }
}

#[test]
fn determinant_matches_f64_recomputation() {
    let mut rng = rng(5);
    for g in generate_gaussians(5000, 5) {
        let cam = random_camera(&mut rng);
        let out = compute_features(&g, &cam);
        let c = out.cov2d;
        let exact = f64::from(c.a) * f64::from(c.c) - f64::from(c.b).powi(2);
        assert!((f64::from(c.det) - exact).abs() <= 1e-5 * exact.abs(), "{} vs {exact}", c.det);
    }
}

#[test]
fn conic_examples() {
    let c = invert_cov2d(Cov2D::new(4.0, 1.0, 2.0));
    assert_eq!(c.det, 7.0);
    assert_relative_eq!(c.conic[0], 2.0 / 7.0);
    assert_relative_eq!(c.conic[1], -1.0 / 7.0);
    assert_relative_eq!(c.conic[2], 4.0 / 7.0);
    let singular = invert_cov2d(Cov2D::new(1.0, 1.0, 1.0));
    assert!(singular.is_degenerate());
    assert_eq!(singular.conic, [0.0; 3]);
}

#[test]
fn sh_basis_matches_closed_form() {
    let mut rng = rng(6);
    for _ in 0..5000 {
        let d = random_unit(&mut rng).map(|v| v as f32);
        let got = sh_basis(d).unwrap();
        let oracle = sh_basis_oracle(d.map(f64::from));
        for (a, b) in got.0.iter().zip(oracle) {
            assert!((f64::from(*a) - b).abs() < 2e-6);
        }
    }
}

#[test]
fn sh_color_is_linear_in_coefficients() {
    let mut rng = rng(7);
    let file = generate(200, 7);
    for pair in file.records.chunks_exact(2) {
        let d = random_unit(&mut rng).map(|v| v as f32);
        let basis = sh_basis(d).unwrap();
        let sum: [f32; 48] = std::array::from_fn(|i| pair[0].sh[i] + pair[1].sh[i]);
        let (a, b, ab) = (
            sh_color(&pair[0].sh, &basis, false),
            sh_color(&pair[1].sh, &basis, false),
            sh_color(&sum, &basis, false),
        );
        for ch in 0..3 {
            assert!((ab[ch] - a[ch] - b[ch]).abs() < 1e-5);
        }
    }
}

#[test]
fn ray_dir_against_f64() {
    let cam = CameraParams::default_view();
    for g in generate_gaussians(1000, 8) {
        let (d, degenerate) = ray_dir(g.position(), cam.position_w());
        assert!(!degenerate);
        let p = g.position().map(f64::from);
        let c = cam.position_w().map(f64::from);
        let v = nalgebra::Vector3::new(p[0] - c[0], p[1] - c[1], p[2] - c[2]).normalize();
        for i in 0..3 {
            assert!((f64::from(d[i]) - v[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn staged_graphs_reproduce_reference_bitwise() {
    let mut rng = rng(9);
    let naive = StagedPipeline::new(GraphKind::Naive);
    let partitioned = StagedPipeline::new(GraphKind::Partitioned);
    for g in generate_gaussians(2000, 9) {
        let cam = random_camera(&mut rng);
        let reference = compute_features(&g, &cam);
        assert_eq!(naive.run(&g, &cam), reference);
        assert_eq!(partitioned.run(&g, &cam), reference);
    }
}

#[test]
fn vectorized_rejects_dirty_padding() {
    let r = [1.0, 0.0, 0.0];
    let clean = LaneVector::from_vec3(r);
    let dirty = clean.with_lane(5, 1.0);
    let s = LaneVector::from_vec3([1.0, 2.0, 3.0]);
    assert!(matches!(cov3d_vectorized(&dirty, &clean, &clean, &s), Err(KernelError::NonZeroPadding { lane: 5 })));
}

fn quat() -> impl Strategy<Value = [f32; 4]> {
    prop::array::uniform4(-1.0f32..1.0).prop_filter("non-zero", |q| q.iter().map(|v| v * v).sum::<f32>() > 1e-3)
}

fn scales() -> impl Strategy<Value = [f32; 3]> {
    prop::array::uniform3(0.01f32..1.0)
}

proptest! {
    #[test]
    fn prop_cov3d_forms_agree(q in quat(), s in scales()) {
        let r = quat_to_rotation(q).unwrap();
        let naive = cov3d_matrix(&cov3d_naive(&r, s));
        let vector = cov3d_matrix(&cov3d_vectorized_from(&r, s));
        prop_assert!(matrix_rel_dev(&naive, &vector) <= 1e-5);
        prop_assert!(min_eigenvalue(naive) >= -1e-6 * naive.trace());
    }

    #[test]
    fn prop_quaternion_scale_invariant(q in quat(), k in 0.1f32..10.0) {
        let a = quat_to_rotation(q).unwrap();
        let b = quat_to_rotation(q.map(|v| v * k)).unwrap();
        prop_assert!(matrix_rel_dev(&mat3(&a), &mat3(&b)) < 1e-5);
    }

    #[test]
    fn prop_projection_round_trip(x in -10.0f32..10.0, y in -10.0f32..10.0, z in -10.0f32..10.0) {
        let cam = CameraParams::default_view();
        let p = project([x, y, z], &cam);
        prop_assert!(!p.culled);
        let zc = p.p_c[2];
        let back_x = (p.u[0] - 960.0) * zc / 1000.0;
        prop_assert!((back_x - x).abs() < 1e-3);
    }

    #[test]
    fn prop_conic_is_inverse(a in 0.1f32..100.0, c in 0.1f32..100.0, t in -0.95f32..0.95) {
        let b = t * (a * c).sqrt();
        let out = invert_cov2d(Cov2D::new(a, b, c));
        prop_assume!(out.det > 1e-9);
        let m = nalgebra::Matrix2::new(f64::from(a), f64::from(b), f64::from(b), f64::from(c));
        let inv = nalgebra::Matrix2::new(
            f64::from(out.conic[0]), f64::from(out.conic[1]), f64::from(out.conic[1]), f64::from(out.conic[2]));
        prop_assert!((m * inv - nalgebra::Matrix2::identity()).amax() < 1e-4);
    }
}
