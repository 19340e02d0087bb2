//! Kernel decomposition of the feature pipeline.
//!
//! The naive graph runs five scalar kernels. The partitioned graph splits the
//! view direction out of `color` and the Jacobian out of `cov2D`, and uses the
//! vector unit wherever the arithmetic allows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lanes::{LaneUnit, LaneVector, OpCounts};
use super::sh::{sh_basis_counted, sh_color_counted, sh_color_lanes};
use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "color")]
    Color,
    #[serde(rename = "dir_vec")]
    DirVec,
    #[serde(rename = "cov2D")]
    Cov2D,
    #[serde(rename = "Jacobian")]
    Jacobian,
    #[serde(rename = "cov2D_inv")]
    Cov2DInv,
    #[serde(rename = "projection")]
    Projection,
    #[serde(rename = "cov3D")]
    Cov3D,
}

impl KernelKind {
    /// Column order of the published per-kernel cycle table.
    pub const TABLE_ORDER: [KernelKind; 7] = [
        KernelKind::Color,
        KernelKind::DirVec,
        KernelKind::Cov2D,
        KernelKind::Jacobian,
        KernelKind::Cov2DInv,
        KernelKind::Projection,
        KernelKind::Cov3D,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Color => "color",
            KernelKind::DirVec => "dir_vec",
            KernelKind::Cov2D => "cov2D",
            KernelKind::Jacobian => "Jacobian",
            KernelKind::Cov2DInv => "cov2D_inv",
            KernelKind::Projection => "projection",
            KernelKind::Cov3D => "cov3D",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelKind::TABLE_ORDER
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown kernel `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// Five scalar kernels.
    Naive,
    /// Seven kernels after splitting out `dir_vec` and `Jacobian`.
    Partitioned,
}

impl GraphKind {
    /// Kernels in dataflow order, which is also their stacking order in a
    /// mesh column starting next to the PLIO row.
    pub fn kernels(self) -> &'static [KernelKind] {
        match self {
            GraphKind::Naive => &[
                KernelKind::Color,
                KernelKind::Projection,
                KernelKind::Cov3D,
                KernelKind::Cov2D,
                KernelKind::Cov2DInv,
            ],
            GraphKind::Partitioned => &[
                KernelKind::DirVec,
                KernelKind::Color,
                KernelKind::Projection,
                KernelKind::Jacobian,
                KernelKind::Cov3D,
                KernelKind::Cov2D,
                KernelKind::Cov2DInv,
            ],
        }
    }
}

/// Intermediate values handed from kernel to kernel.
#[derive(Debug, Clone)]
struct Token<'a> {
    g: &'a Gaussian,
    proj: Option<Projection>,
    jac: Option<Mat2x3>,
    cov3d: Cov3D,
    cov2d: Cov2D,
    dir: Vec3,
    dir_degenerate: bool,
    color: Vec3,
}

impl<'a> Token<'a> {
    fn new(g: &'a Gaussian) -> Self {
        Self {
            g,
            proj: None,
            jac: None,
            cov3d: Cov3D::default(),
            cov2d: Cov2D::default(),
            dir: [0.0, 0.0, 1.0],
            dir_degenerate: false,
            color: [0.0; 3],
        }
    }

    fn projection(&self) -> &Projection {
        self.proj.as_ref().expect("projection runs before its consumers")
    }

    fn finish(self) -> FeatureOutput {
        let proj = self.projection();
        let mut flags = FeatureFlags::empty();
        if proj.culled {
            flags |= FeatureFlags::CULLED;
        }
        if self.cov2d.is_degenerate() {
            flags |= FeatureFlags::DEGENERATE_CONIC;
        }
        if self.dir_degenerate {
            flags |= FeatureFlags::DEGENERATE_DIR;
        }
        FeatureOutput {
            u: proj.u,
            depth: proj.p_c[2],
            cov2d: self.cov2d,
            color: self.color,
            flags,
        }
    }
}

/// Runs one Gaussian through the kernels of a task graph in dataflow order.
#[derive(Debug, Clone, Copy)]
pub struct StagedPipeline {
    graph: GraphKind,
    options: FeatureOptions,
}

impl StagedPipeline {
    pub fn new(graph: GraphKind) -> Self {
        Self { graph, options: FeatureOptions::default() }
    }

    pub fn with_options(graph: GraphKind, options: FeatureOptions) -> Self {
        Self { graph, options }
    }

    pub fn graph(&self) -> GraphKind {
        self.graph
    }

    pub fn run(&self, g: &Gaussian, cam: &CameraParams) -> FeatureOutput {
        self.run_counted(g, cam).0
    }

    /// Output plus the operations each kernel executed.
    pub fn run_counted(&self, g: &Gaussian, cam: &CameraParams) -> (FeatureOutput, Vec<(KernelKind, OpCounts)>) {
        let mut token = Token::new(g);
        let mut counts = Vec::with_capacity(self.graph.kernels().len());
        for &kind in self.graph.kernels() {
            let mut ops = OpCounts::default();
            let mut unit = LaneUnit::new();
            match self.graph {
                GraphKind::Naive => self.naive_stage(kind, &mut token, cam, &mut ops),
                GraphKind::Partitioned => self.vector_stage(kind, &mut token, cam, &mut unit, &mut ops),
            }
            ops.merge(&unit.counts());
            counts.push((kind, ops));
        }
        (token.finish(), counts)
    }

    fn naive_stage(&self, kind: KernelKind, t: &mut Token, cam: &CameraParams, ops: &mut OpCounts) {
        match kind {
            KernelKind::Color => {
                let (dir, degenerate) = ray_dir_counted(t.g.position, cam.position_w, ops);
                t.dir = dir;
                t.dir_degenerate = degenerate;
                let basis = sh_basis_counted(dir, ops).expect("unit direction");
                t.color = sh_color_counted(&t.g.sh, &basis, self.options.color_offset_clamp, ops);
            }
            KernelKind::Projection => t.proj = Some(project_counted(t.g.position, cam, ops)),
            KernelKind::Cov3D => {
                let r = quat_to_rotation_counted(t.g.rotation, ops).expect("normalized quaternion");
                t.cov3d = cov3d_naive_counted(&r, t.g.scale, ops);
            }
            KernelKind::Cov2D => {
                let proj = *t.projection();
                t.jac = jacobian_counted(proj.p_c, cam.focal, ops);
                t.cov2d = match t.jac {
                    Some(j) if !proj.culled => {
                        let k = compute_k_counted(&j, &cam.rotation_cw, ops);
                        cov2d_counted(&k, &t.cov3d, self.options.dilation, ops)
                    }
                    _ => Cov2D::default(),
                };
            }
            KernelKind::Cov2DInv => t.cov2d = invert_cov2d_counted(t.cov2d, ops),
            KernelKind::DirVec | KernelKind::Jacobian => {
                unreachable!("{kind} is not part of the naive graph")
            }
        }
    }

    fn vector_stage(
        &self,
        kind: KernelKind,
        t: &mut Token,
        cam: &CameraParams,
        unit: &mut LaneUnit,
        ops: &mut OpCounts,
    ) {
        match kind {
            KernelKind::DirVec => {
                let (dir, degenerate) = ray_dir_counted(t.g.position, cam.position_w, ops);
                t.dir = dir;
                t.dir_degenerate = degenerate;
            }
            KernelKind::Color => {
                let basis = sh_basis_counted(t.dir, ops).expect("unit direction");
                t.color = sh_color_lanes(&t.g.sh, &basis, self.options.color_offset_clamp, unit, ops);
            }
            KernelKind::Projection => t.proj = Some(project_lanes(t.g.position, cam, unit, ops)),
            KernelKind::Jacobian => {
                let p_c = t.projection().p_c;
                t.jac = jacobian_counted(p_c, cam.focal, ops);
            }
            KernelKind::Cov3D => {
                let r = quat_to_rotation_counted(t.g.rotation, ops).expect("normalized quaternion");
                let rows = r.map(LaneVector::from_vec3);
                let s = LaneVector::from_vec3(t.g.scale);
                t.cov3d = cov3d_vectorized_counted(&rows[0], &rows[1], &rows[2], &s, unit)
                    .expect("rows built from 3-vectors have clean padding");
            }
            KernelKind::Cov2D => {
                let culled = t.projection().culled;
                t.cov2d = match t.jac {
                    Some(j) if !culled => {
                        let k = compute_k_lanes(&j, &cam.rotation_cw, unit);
                        cov2d_lanes(&k, &t.cov3d, self.options.dilation, unit, ops)
                    }
                    _ => Cov2D::default(),
                };
            }
            KernelKind::Cov2DInv => t.cov2d = invert_cov2d_counted(t.cov2d, ops),
        }
    }
}
