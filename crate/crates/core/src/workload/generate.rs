use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::file::{GaussianFile, GaussianRecord};
use crate::kernels::{Gaussian, SH_LEN};

pub const POSITION_RANGE: f32 = 10.0;
pub const SCALE_RANGE: (f32, f32) = (0.01, 1.0);
pub const SH_STD: f32 = 0.5;
pub const SH_DC_SHIFT: f32 = 0.5;

/// Random Gaussians, identical for identical `(count, seed)`.
///
/// Positions are uniform in `[-10, 10]^3`, rotations uniform on the unit
/// 3-sphere, scales log-uniform in `[0.01, 1]`, SH coefficients
/// `N(0, 0.5)` with the three DC terms shifted by `+0.5`, opacity uniform in
/// `(0, 1]`.
pub fn generate(count: usize, seed: u64) -> GaussianFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sh_dist = Normal::new(0.0f32, SH_STD).expect("positive std");
    let (lo, hi) = (SCALE_RANGE.0.ln(), SCALE_RANGE.1.ln());
    let records = (0..count)
        .map(|_| {
            let position = std::array::from_fn(|_| rng.gen_range(-POSITION_RANGE..=POSITION_RANGE));
            let rotation = random_unit_quaternion(&mut rng);
            let scale = std::array::from_fn(|_| rng.gen_range(lo..=hi).exp());
            let mut sh: [f32; SH_LEN] = std::array::from_fn(|_| sh_dist.sample(&mut rng));
            for dc in &mut sh[..3] {
                *dc += SH_DC_SHIFT;
            }
            let opacity = 1.0 - rng.gen::<f32>();
            GaussianRecord { position, rotation, scale, sh, opacity }
        })
        .collect();
    GaussianFile::new(records)
}

fn random_unit_quaternion(rng: &mut ChaCha8Rng) -> [f32; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return q.map(|v| (v / norm) as f32);
        }
    }
}

/// The valid Gaussians of a generated set.
pub fn generate_gaussians(count: usize, seed: u64) -> Vec<Gaussian> {
    generate(count, seed).records.iter().filter_map(|r| r.to_gaussian().ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CameraParams;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(100, 42).to_bytes(), generate(100, 42).to_bytes());
        assert_ne!(generate(100, 42).to_bytes(), generate(100, 43).to_bytes());
    }

    #[test]
    fn ranges() {
        let file = generate(2000, 1);
        for r in &file.records {
            let norm: f64 = r.rotation.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
            assert!(r.scale.iter().all(|&s| (0.01 - 1e-6..=1.0 + 1e-6).contains(&s)));
            assert!(r.position.iter().all(|p| p.abs() <= 10.0));
            assert!(r.opacity > 0.0 && r.opacity <= 1.0);
        }
        let dc_mean: f32 = file.records.iter().map(|r| r.sh[0]).sum::<f32>() / 2000.0;
        assert!((dc_mean - 0.5).abs() < 0.05);
        assert_eq!(generate_gaussians(2000, 1).len(), 2000);
    }

    #[test]
    fn all_in_front_of_default_camera() {
        let cam = CameraParams::default_view();
        for g in generate_gaussians(500, 9) {
            let out = crate::kernels::compute_features(&g, &cam);
            assert!(out.depth >= 20.0 - 1e-3 && out.flags.is_empty());
        }
    }
}
