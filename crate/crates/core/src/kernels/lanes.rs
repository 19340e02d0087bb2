//! Fixed-width lane vectors and an instrumented vector unit.
//!
//! The vector unit counts every operation it executes so that kernels can be
//! costed analytically (see `arch::analytic_profile`). Scalar arithmetic done
//! around the vector unit is tallied by hand through [`OpCounts::scalar`].

use serde::{Deserialize, Serialize};

/// Number of 32-bit float lanes in a [`LaneVector`].
pub const LANES: usize = 8;

/// Per-kernel operation tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub scalar_mul: u64,
    pub scalar_add: u64,
    /// Divides, square roots, compares and clamps.
    pub scalar_other: u64,
    pub vector_mul: u64,
    pub vector_mac: u64,
    pub vector_add: u64,
    pub vector_reduce: u64,
    /// Populated lanes touched by elementwise vector instructions.
    pub lane_elements: u64,
}

impl OpCounts {
    pub fn scalar(&mut self, mul: u64, add: u64, other: u64) {
        self.scalar_mul += mul;
        self.scalar_add += add;
        self.scalar_other += other;
    }

    pub fn scalar_ops(&self) -> u64 {
        self.scalar_mul + self.scalar_add + self.scalar_other
    }

    /// Vector instructions issued.
    pub fn vector_ops(&self) -> u64 {
        self.vector_mul + self.vector_mac + self.vector_add + self.vector_reduce
    }

    pub fn total_multiplies(&self) -> u64 {
        self.scalar_mul + self.vector_mul + self.vector_mac
    }

    pub fn merge(&mut self, other: &OpCounts) {
        self.scalar_mul += other.scalar_mul;
        self.scalar_add += other.scalar_add;
        self.scalar_other += other.scalar_other;
        self.vector_mul += other.vector_mul;
        self.vector_mac += other.vector_mac;
        self.vector_add += other.vector_add;
        self.vector_reduce += other.vector_reduce;
        self.lane_elements += other.lane_elements;
    }
}

/// Eight f32 lanes of which the first `len` are populated.
///
/// Unpopulated lanes are expected to hold zero; [`LaneUnit::reduce`] sums all
/// eight lanes, so garbage in the padding would leak into the result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneVector {
    lanes: [f32; LANES],
    len: usize,
}

impl LaneVector {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= LANES, "lane count {len} exceeds {LANES}");
        Self { lanes: [0.0; LANES], len }
    }

    pub fn from_slice(values: &[f32]) -> Self {
        let mut v = Self::zeros(values.len());
        v.lanes[..values.len()].copy_from_slice(values);
        v
    }

    pub fn from_vec3(v: [f32; 3]) -> Self {
        Self::from_slice(&v)
    }

    /// Broadcast `x` into the first `len` lanes.
    pub fn splat(x: f32, len: usize) -> Self {
        let mut v = Self::zeros(len);
        v.lanes[..len].fill(x);
        v
    }

    /// Overwrite a single lane, populated or not.
    pub fn with_lane(mut self, lane: usize, x: f32) -> Self {
        self.lanes[lane] = x;
        self
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lanes(&self) -> &[f32; LANES] {
        &self.lanes
    }

    pub fn get(&self, lane: usize) -> f32 {
        self.lanes[lane]
    }

    /// First padding lane holding a nonzero value, if any.
    pub fn dirty_padding(&self) -> Option<usize> {
        (self.len..LANES).find(|&i| self.lanes[i] != 0.0)
    }

    pub fn to_vec3(&self) -> [f32; 3] {
        [self.lanes[0], self.lanes[1], self.lanes[2]]
    }
}

/// A counting vector unit.
#[derive(Debug, Default)]
pub struct LaneUnit {
    counts: OpCounts,
}

impl LaneUnit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counts(&self) -> OpCounts {
        self.counts
    }

    pub fn into_counts(self) -> OpCounts {
        self.counts
    }

    fn populated(a: &LaneVector, b: &LaneVector) -> usize {
        assert_eq!(a.len, b.len, "lane count mismatch");
        a.len
    }

    pub fn mul(&mut self, a: &LaneVector, b: &LaneVector) -> LaneVector {
        let n = Self::populated(a, b);
        let mut out = LaneVector::zeros(n);
        for i in 0..n {
            out.lanes[i] = a.lanes[i] * b.lanes[i];
        }
        self.counts.vector_mul += 1;
        self.counts.lane_elements += n as u64;
        out
    }

    /// `acc + a * b`, rounded after the multiply (not fused).
    pub fn mac(&mut self, acc: &LaneVector, a: &LaneVector, b: &LaneVector) -> LaneVector {
        let n = Self::populated(a, b);
        assert_eq!(acc.len, n, "lane count mismatch");
        let mut out = LaneVector::zeros(n);
        for i in 0..n {
            let p = a.lanes[i] * b.lanes[i];
            out.lanes[i] = acc.lanes[i] + p;
        }
        self.counts.vector_mac += 1;
        self.counts.lane_elements += n as u64;
        out
    }

    pub fn add(&mut self, a: &LaneVector, b: &LaneVector) -> LaneVector {
        let n = Self::populated(a, b);
        let mut out = LaneVector::zeros(n);
        for i in 0..n {
            out.lanes[i] = a.lanes[i] + b.lanes[i];
        }
        self.counts.vector_add += 1;
        self.counts.lane_elements += n as u64;
        out
    }

    /// Horizontal sum over all eight lanes in lane order.
    pub fn reduce(&mut self, v: &LaneVector) -> f32 {
        self.counts.vector_reduce += 1;
        let mut sum = v.lanes[0];
        for &x in &v.lanes[1..] {
            sum += x;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementwise_ops_touch_populated_lanes_only() {
        let mut unit = LaneUnit::new();
        let a = LaneVector::from_vec3([1.0, 2.0, 3.0]);
        let b = LaneVector::from_vec3([4.0, 5.0, 6.0]);
        let p = unit.mul(&a, &b);
        assert_eq!(p.to_vec3(), [4.0, 10.0, 18.0]);
        assert_eq!(p.dirty_padding(), None);
        let m = unit.mac(&p, &a, &b);
        assert_eq!(m.to_vec3(), [8.0, 20.0, 36.0]);
        assert_eq!(unit.reduce(&m), 64.0);
        let c = unit.counts();
        assert_eq!(c.vector_mul, 1);
        assert_eq!(c.vector_mac, 1);
        assert_eq!(c.vector_reduce, 1);
        assert_eq!(c.lane_elements, 6);
    }

    #[test]
    fn reduce_sees_dirty_padding() {
        let mut unit = LaneUnit::new();
        let v = LaneVector::from_vec3([1.0, 1.0, 1.0]).with_lane(5, 10.0);
        assert_eq!(v.dirty_padding(), Some(5));
        assert_eq!(unit.reduce(&v), 13.0);
    }

    #[test]
    fn counters_are_monotone() {
        let mut unit = LaneUnit::new();
        let a = LaneVector::splat(2.0, 4);
        let mut last = 0;
        for _ in 0..5 {
            unit.add(&a, &a);
            let now = unit.counts().vector_ops();
            assert!(now > last);
            last = now;
        }
    }
}
