//! Gaussian splatting feature computation and a simulator for mapping it onto
//! a 2D mesh of VLIW/SIMD tiles.
//!
//! - [`kernels`]: the per-Gaussian math, scalar and lane-vectorized.
//! - [`arch`]: mesh, interface and kernel cost descriptions.
//! - [`mapper`]: task graphs and their column-aligned placement.
//! - [`sim`]: analytic and cycle-stepped throughput models.
//! - [`workload`]: Gaussian files, presets and experiment runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod kernels;
pub mod arch;
pub mod mapper;
pub mod sim;
pub mod workload;
