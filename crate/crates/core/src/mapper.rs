//! Task graphs and column-aligned placement onto the tile mesh.
//!
//! Each feature-computation unit owns one mesh column. Its kernels are
//! stacked bottom-up in dataflow order, so every physical hop joins two
//! vertically adjacent tiles; values a kernel does not consume are forwarded
//! upward by the tiles in between. The Gaussian record enters the bottom tile
//! from PLIO and the assembled feature leaves the top tile.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::MeshConfig;
use crate::kernels::{Gaussian, GraphKind, KernelKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("at least one unit is required")]
    ZeroUnits,
    #[error("{requested} units do not fit in {available} columns")]
    Capacity { requested: usize, available: usize },
    #[error("{kernels} kernels exceed the {available} usable tiles per column")]
    Height { kernels: usize, available: usize },
}

/// A value carried on an edge, sized by its f32 layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Position,
    Rotation,
    Scale,
    Sh,
    CameraPoint,
    ScreenPos,
    Depth,
    Jacobian,
    Cov3D,
    Cov2D,
    /// Inverse plus determinant.
    Conic,
    Direction,
    Color,
}

impl Field {
    pub fn bytes(self) -> u64 {
        let floats = match self {
            Field::Position | Field::Scale | Field::CameraPoint | Field::Direction | Field::Color => 3,
            Field::Rotation | Field::Conic => 4,
            Field::Sh => 48,
            Field::ScreenPos => 2,
            Field::Depth => 1,
            Field::Jacobian | Field::Cov3D => 6,
            Field::Cov2D => 3,
        };
        floats * 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Source,
    Kernel(KernelKind),
    Sink,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Source => f.write_str("source"),
            Endpoint::Kernel(k) => write!(f, "{k}"),
            Endpoint::Sink => f.write_str("sink"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: Endpoint,
    pub to: Endpoint,
    pub fields: Vec<Field>,
    pub bytes_per_gaussian: u64,
}

impl Edge {
    fn new(from: Endpoint, to: Endpoint, fields: &[Field]) -> Self {
        Self {
            from,
            to,
            fields: fields.to_vec(),
            bytes_per_gaussian: fields.iter().map(|f| f.bytes()).sum(),
        }
    }

    pub fn crosses_plio(&self) -> bool {
        self.from == Endpoint::Source || self.to == Endpoint::Sink
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub kind: GraphKind,
    /// Kernels in dataflow order.
    pub nodes: Vec<KernelKind>,
    pub edges: Vec<Edge>,
}

/// Bytes moved on one physical link of a unit's column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    /// Receiving kernel; `None` for the egress link.
    pub into: Option<KernelKind>,
    pub bytes: u64,
}

pub fn build_task_graph(partitioned: bool) -> TaskGraph {
    use Endpoint::{Kernel as K, Sink, Source};
    use Field as F;
    use KernelKind as Kk;

    let kind = if partitioned { GraphKind::Partitioned } else { GraphKind::Naive };
    let mut edges = vec![
        Edge::new(Source, K(Kk::Projection), &[F::Position]),
        Edge::new(Source, K(Kk::Cov3D), &[F::Rotation, F::Scale]),
        Edge::new(Source, K(Kk::Color), &[F::Sh]),
        Edge::new(K(Kk::Cov3D), K(Kk::Cov2D), &[F::Cov3D]),
        Edge::new(K(Kk::Cov2D), K(Kk::Cov2DInv), &[F::Cov2D]),
        Edge::new(K(Kk::Color), Sink, &[F::Color]),
        Edge::new(K(Kk::Projection), Sink, &[F::ScreenPos, F::Depth]),
        Edge::new(K(Kk::Cov2DInv), Sink, &[F::Cov2D, F::Conic]),
    ];
    if partitioned {
        edges.extend([
            Edge::new(Source, K(Kk::DirVec), &[F::Position]),
            Edge::new(K(Kk::DirVec), K(Kk::Color), &[F::Direction]),
            Edge::new(K(Kk::Projection), K(Kk::Jacobian), &[F::CameraPoint]),
            Edge::new(K(Kk::Jacobian), K(Kk::Cov2D), &[F::Jacobian]),
        ]);
    } else {
        // color derives the view direction itself
        edges.extend([
            Edge::new(Source, K(Kk::Color), &[F::Position]),
            Edge::new(K(Kk::Projection), K(Kk::Cov2D), &[F::CameraPoint]),
        ]);
    }
    TaskGraph { kind, nodes: kind.kernels().to_vec(), edges }
}

impl TaskGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Bytes entering through PLIO per Gaussian: the full record.
    pub fn source_bytes(&self) -> u64 {
        Gaussian::RECORD_BYTES as u64
    }

    /// Bytes leaving through PLIO per Gaussian.
    pub fn sink_bytes(&self) -> u64 {
        self.edges.iter().filter(|e| e.to == Endpoint::Sink).map(|e| e.bytes_per_gaussian).sum()
    }

    /// Override the payload of the first edge from `from` to `to`.
    pub fn set_edge_bytes(&mut self, from: Endpoint, to: Endpoint, bytes: u64) -> bool {
        match self.edges.iter_mut().find(|e| e.from == from && e.to == to) {
            Some(e) => {
                e.bytes_per_gaussian = bytes;
                true
            }
            None => false,
        }
    }

    fn position(&self, end: Endpoint) -> Option<usize> {
        match end {
            Endpoint::Kernel(k) => self.nodes.iter().position(|&n| n == k),
            _ => None,
        }
    }

    /// Kahn's algorithm over kernel-to-kernel edges; `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<KernelKind>> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut succ = vec![Vec::new(); n];
        for e in &self.edges {
            if let (Some(a), Some(b)) = (self.position(e.from), self.position(e.to)) {
                indegree[b] += 1;
                succ[a].push(b);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(self.nodes[i]);
            for &j in &succ[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether every kernel can be reached from the PLIO source.
    pub fn all_reachable_from_source(&self) -> bool {
        let mut seen = BTreeSet::from([Endpoint::Source]);
        loop {
            let before = seen.len();
            for e in &self.edges {
                if seen.contains(&e.from) {
                    seen.insert(e.to);
                }
            }
            if seen.len() == before {
                break;
            }
        }
        self.nodes.iter().all(|&k| seen.contains(&Endpoint::Kernel(k)))
    }

    /// Positions an edge spans in the column, counting hop `k` as the link
    /// into node `k` and hop `len` as the egress link.
    fn hop_span(&self, e: &Edge) -> (usize, usize) {
        let last = self.nodes.len();
        let from = match e.from {
            Endpoint::Source => 0,
            other => self.position(other).expect("edge endpoint is a graph node") + 1,
        };
        let to = match e.to {
            Endpoint::Sink => last - 1,
            other => self.position(other).expect("edge endpoint is a graph node"),
        };
        (from, to)
    }

    /// Physical links of one column: ingress, one hop per adjacent kernel
    /// pair, egress. Edges leaving the same producer with the same fields
    /// share a single copy of the data.
    pub fn hops(&self) -> Vec<Hop> {
        let n = self.nodes.len();
        let mut hops: Vec<Hop> = Vec::with_capacity(n + 1);
        hops.push(Hop { into: Some(self.nodes[0]), bytes: self.source_bytes() });
        for k in 1..n {
            let mut seen: Vec<(&Endpoint, &Vec<Field>, u64)> = Vec::new();
            for e in &self.edges {
                let (a, b) = self.hop_span(e);
                if a <= k && k <= b {
                    match seen.iter_mut().find(|(f, fs, _)| **f == e.from && **fs == e.fields) {
                        Some(entry) => entry.2 = entry.2.max(e.bytes_per_gaussian),
                        None => seen.push((&e.from, &e.fields, e.bytes_per_gaussian)),
                    }
                }
            }
            hops.push(Hop { into: Some(self.nodes[k]), bytes: seen.iter().map(|s| s.2).sum() });
        }
        hops.push(Hop { into: None, bytes: self.sink_bytes() });
        hops
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileAssignment {
    pub kernel: KernelKind,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitPlacement {
    pub unit: usize,
    pub column: usize,
    pub tiles: Vec<TileAssignment>,
}

/// A physical link inside one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub column: usize,
    /// `None` when the link starts at PLIO.
    pub from_row: Option<usize>,
    /// `None` when the link ends at PLIO.
    pub to_row: Option<usize>,
    pub bytes: u64,
}

impl Link {
    pub fn is_plio(&self) -> bool {
        self.from_row.is_none() || self.to_row.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub graph: TaskGraph,
    pub mesh_rows: usize,
    pub mesh_cols: usize,
    pub units: Vec<UnitPlacement>,
    pub plio_in_per_unit: u32,
    pub plio_out_per_unit: u32,
}

/// Place `n_units` copies of `graph`, one per column from column 0, kernels
/// stacked upward from the PLIO-adjacent row. One tile per column is kept
/// free.
pub fn place(graph: &TaskGraph, n_units: usize, mesh: &MeshConfig) -> Result<Placement, MapError> {
    if n_units == 0 {
        return Err(MapError::ZeroUnits);
    }
    if n_units > mesh.cols {
        return Err(MapError::Capacity { requested: n_units, available: mesh.cols });
    }
    let usable = mesh.rows.saturating_sub(1);
    if graph.node_count() > usable {
        return Err(MapError::Height { kernels: graph.node_count(), available: usable });
    }
    let units = (0..n_units)
        .map(|unit| UnitPlacement {
            unit,
            column: unit,
            tiles: graph
                .nodes
                .iter()
                .enumerate()
                .map(|(row, &kernel)| TileAssignment { kernel, row })
                .collect(),
        })
        .collect();
    Ok(Placement {
        graph: graph.clone(),
        mesh_rows: mesh.rows,
        mesh_cols: mesh.cols,
        units,
        plio_in_per_unit: 1,
        plio_out_per_unit: 1,
    })
}

impl Placement {
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn tiles_used(&self) -> usize {
        self.units.iter().map(|u| u.tiles.len()).sum()
    }

    pub fn columns_used(&self) -> BTreeSet<usize> {
        self.units.iter().map(|u| u.column).collect()
    }

    /// Every physical link of every unit.
    pub fn links(&self) -> Vec<Link> {
        let hops = self.graph.hops();
        let mut out = Vec::new();
        for u in &self.units {
            let rows: Vec<usize> = u.tiles.iter().map(|t| t.row).collect();
            for (i, hop) in hops.iter().enumerate() {
                let from_row = if i == 0 { None } else { Some(rows[i - 1]) };
                let to_row = rows.get(i).copied();
                out.push(Link { column: u.column, from_row, to_row, bytes: hop.bytes });
            }
        }
        out
    }

    /// Text table: one line per mesh row, top row first, one cell per used
    /// column.
    pub fn report(&self) -> String {
        let cols: Vec<&UnitPlacement> = self.units.iter().collect();
        let width = 10;
        let mut s = String::new();
        let _ = write!(s, "{:>5} |", "row");
        for u in &cols {
            let _ = write!(s, " {:<width$}", format!("col {}", u.column));
        }
        s.push('\n');
        for row in (0..self.mesh_rows).rev() {
            let _ = write!(s, "{row:>5} |");
            for u in &cols {
                let cell = u
                    .tiles
                    .iter()
                    .find(|t| t.row == row)
                    .map_or("-".to_string(), |t| t.kernel.to_string());
                let _ = write!(s, " {cell:<width$}");
            }
            s.push('\n');
        }
        let _ = write!(s, "{:>5} |", "plio");
        for _ in &cols {
            let io = format!("{}in/{}out", self.plio_in_per_unit, self.plio_out_per_unit);
            let _ = write!(s, " {io:<width$}");
        }
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnUsage {
    pub column: usize,
    pub inputs: u32,
    pub outputs: u32,
}

impl ColumnUsage {
    pub fn total(&self) -> u32 {
        self.inputs + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlioReport {
    pub ports_per_column: u32,
    pub columns: Vec<ColumnUsage>,
    /// Columns whose stream count exceeds the budget.
    pub violations: Vec<usize>,
}

impl PlioReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn total_streams(&self) -> u32 {
        self.columns.iter().map(ColumnUsage::total).sum()
    }
}

pub fn validate_plio(placement: &Placement, ports_per_column: u32) -> PlioReport {
    let mut columns: Vec<ColumnUsage> = Vec::new();
    for u in &placement.units {
        match columns.iter_mut().find(|c| c.column == u.column) {
            Some(c) => {
                c.inputs += placement.plio_in_per_unit;
                c.outputs += placement.plio_out_per_unit;
            }
            None => columns.push(ColumnUsage {
                column: u.column,
                inputs: placement.plio_in_per_unit,
                outputs: placement.plio_out_per_unit,
            }),
        }
    }
    columns.sort_by_key(|c| c.column);
    let violations = columns.iter().filter(|c| c.total() > ports_per_column).map(|c| c.column).collect();
    PlioReport { ports_per_column, columns, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_shapes() {
        let naive = build_task_graph(false);
        assert_eq!(naive.node_count(), 5);
        let part = build_task_graph(true);
        assert_eq!(part.node_count(), 7);
        assert!(part.nodes.contains(&KernelKind::DirVec));
        assert!(part.nodes.contains(&KernelKind::Jacobian));
        for g in [&naive, &part] {
            assert!(g.all_reachable_from_source());
            assert_eq!(g.topological_order().as_deref(), Some(g.nodes.as_slice()));
        }
    }

    #[test]
    fn edge_sizes_follow_types() {
        let g = build_task_graph(true);
        let edge = |from, to| {
            g.edges
                .iter()
                .find(|e| e.from == Endpoint::Kernel(from) && e.to == Endpoint::Kernel(to))
                .unwrap()
                .bytes_per_gaussian
        };
        assert_eq!(edge(KernelKind::Cov3D, KernelKind::Cov2D), 24);
        assert_eq!(edge(KernelKind::Jacobian, KernelKind::Cov2D), 24);
        assert_eq!(edge(KernelKind::DirVec, KernelKind::Color), 12);
        assert_eq!(g.source_bytes(), 236);
        assert_eq!(g.sink_bytes(), 52);
    }

    #[test]
    fn hop_payloads() {
        let bytes = |g: &TaskGraph| g.hops().iter().map(|h| h.bytes).collect::<Vec<_>>();
        assert_eq!(bytes(&build_task_graph(true)), [236, 244, 52, 64, 76, 72, 36, 52]);
        assert_eq!(bytes(&build_task_graph(false)), [236, 52, 64, 60, 36, 52]);
    }

    #[test]
    fn edge_override_changes_hops() {
        let mut g = build_task_graph(true);
        assert!(g.set_edge_bytes(
            Endpoint::Kernel(KernelKind::Cov3D),
            Endpoint::Kernel(KernelKind::Cov2D),
            36
        ));
        assert_eq!(g.hops()[5].bytes, 72 + 12);
        assert!(!g.set_edge_bytes(Endpoint::Sink, Endpoint::Source, 1));
    }

    #[test]
    fn cycle_is_detected() {
        let mut g = build_task_graph(false);
        g.edges.push(Edge::new(
            Endpoint::Kernel(KernelKind::Cov2DInv),
            Endpoint::Kernel(KernelKind::Projection),
            &[Field::Conic],
        ));
        assert_eq!(g.topological_order(), None);
    }

    #[test]
    fn four_units() {
        let p = place(&build_task_graph(true), 4, &MeshConfig::default()).unwrap();
        assert_eq!(p.tiles_used(), 28);
        assert_eq!(p.columns_used(), BTreeSet::from([0, 1, 2, 3]));
        let report = p.report();
        assert!(report.contains("cov2D_inv"));
        assert_eq!(report.lines().count(), 8 + 2);
    }

    #[test]
    fn capacity_and_height_errors() {
        let mesh = MeshConfig::default();
        let g = build_task_graph(true);
        assert_eq!(place(&g, 50, &mesh).unwrap().tiles_used(), 350);
        assert_eq!(
            place(&g, 51, &mesh),
            Err(MapError::Capacity { requested: 51, available: 50 })
        );
        assert_eq!(place(&g, 0, &mesh), Err(MapError::ZeroUnits));
        let short = MeshConfig { rows: 7, ..mesh };
        assert_eq!(place(&g, 1, &short), Err(MapError::Height { kernels: 7, available: 6 }));
        assert!(place(&build_task_graph(false), 1, &short).is_ok());
    }

    #[test]
    fn window_links_are_vertical_neighbours() {
        let p = place(&build_task_graph(true), 50, &MeshConfig::default()).unwrap();
        let links = p.links();
        assert_eq!(links.len(), 50 * 8);
        for l in links.iter().filter(|l| !l.is_plio()) {
            assert_eq!(l.to_row.unwrap(), l.from_row.unwrap() + 1);
        }
        let mut seen = BTreeSet::new();
        for u in &p.units {
            for t in &u.tiles {
                assert!(t.row < p.mesh_rows && u.column < p.mesh_cols);
                assert!(seen.insert((u.column, t.row)), "tile assigned twice");
            }
            assert!(u.tiles.len() <= 7);
        }
    }

    #[test]
    fn plio_budget() {
        let p = place(&build_task_graph(true), 50, &MeshConfig::default()).unwrap();
        let ok = validate_plio(&p, 2);
        assert!(ok.passed());
        assert_eq!(ok.total_streams(), 100);
        let tight = validate_plio(&p, 1);
        assert!(!tight.passed());
        assert_eq!(tight.violations.len(), 50);
    }
}
