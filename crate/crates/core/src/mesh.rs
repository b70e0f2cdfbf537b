//! Conforming triangulations of the unit square.
//!
//! Two families are provided:
//! - Grid 1: the regular diagonal triangulation, every sub-square split from
//!   its lower-left to its upper-right corner (`h_0 = sqrt(2)`).
//! - Grid 2: an irregular coarse mesh with one interior vertex at
//!   `(0.55, 0.45)` joined to the corners and the bottom edge split at
//!   `(0.3, 0)` (`h_0 = 1`).
//!
//! Finer levels of both families come from red refinement, which keeps the
//! shape-regularity constants of the coarse mesh.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundarySide {
    Bottom,
    Right,
    Top,
    Left,
}

impl BoundarySide {
    pub fn marker(self) -> u8 {
        match self {
            BoundarySide::Bottom => 1,
            BoundarySide::Right => 2,
            BoundarySide::Top => 3,
            BoundarySide::Left => 4,
        }
    }

    fn classify(a: Point, b: Point) -> Option<Self> {
        const EPS: f64 = 1e-12;
        if a[1].abs() < EPS && b[1].abs() < EPS {
            Some(BoundarySide::Bottom)
        } else if (a[0] - 1.0).abs() < EPS && (b[0] - 1.0).abs() < EPS {
            Some(BoundarySide::Right)
        } else if (a[1] - 1.0).abs() < EPS && (b[1] - 1.0).abs() < EPS {
            Some(BoundarySide::Top)
        } else if a[0].abs() < EPS && b[0].abs() < EPS {
            Some(BoundarySide::Left)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub side: BoundarySide,
}

/// Grid family, used to pick the coarse mesh and the nominal level-0 size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GridKind {
    Regular,
    Irregular,
}

impl GridKind {
    pub fn from_index(index: u32) -> Option<Self> {
        match index {
            1 => Some(GridKind::Regular),
            2 => Some(GridKind::Irregular),
            _ => None,
        }
    }

    pub fn index(self) -> u32 {
        match self {
            GridKind::Regular => 1,
            GridKind::Irregular => 2,
        }
    }

    /// Diameter of the largest level-0 cell.
    pub fn coarse_diameter(self) -> f64 {
        match self {
            GridKind::Regular => std::f64::consts::SQRT_2,
            GridKind::Irregular => 1.0,
        }
    }

    /// Nominal mesh width `h_0 * 2^-level`.
    pub fn nominal_h(self, level: usize) -> f64 {
        self.coarse_diameter() * 0.5f64.powi(level as i32)
    }

    pub fn build(self, level: usize) -> Mesh {
        match self {
            GridKind::Regular => build_grid1(level),
            GridKind::Irregular => build_grid2(level),
        }
    }
}

/// Triangulation with counterclockwise cells.
///
/// Edges are stored once, keyed by their sorted endpoint pair, in ascending
/// order. `cell_edges[k][e]` is local edge `e` of cell `k`, which runs from
/// local vertex `e` to local vertex `(e + 1) % 3`.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    level: usize,
    cell_diameters: Vec<f64>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    edge_cells: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds the derived connectivity for a list of vertices and cells.
    pub fn from_parts(vertices: Vec<Point>, cells: Vec<[usize; 3]>, level: usize) -> Result<Self> {
        for (k, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Usage(format!("cell {k} references a missing vertex")));
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            if area <= 0.0 {
                return Err(Error::DegenerateCell { cell: k, det: 2.0 * area });
            }
        }

        let mut edge_index: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for cell in &cells {
            for e in 0..3 {
                edge_index.insert(sorted_pair(cell[e], cell[(e + 1) % 3]), 0);
            }
        }
        let edges: Vec<[usize; 2]> = edge_index.keys().copied().collect();
        for (i, idx) in edge_index.values_mut().enumerate() {
            *idx = i;
        }

        let mut edge_cells = vec![Vec::new(); edges.len()];
        let cell_edges: Vec<[usize; 3]> = cells
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                let mut ce = [0; 3];
                for e in 0..3 {
                    let idx = edge_index[&sorted_pair(cell[e], cell[(e + 1) % 3])];
                    edge_cells[idx].push(k);
                    ce[e] = idx;
                }
                ce
            })
            .collect();

        let mut boundary_edges = Vec::new();
        for (idx, owners) in edge_cells.iter().enumerate() {
            match owners.len() {
                1 => {
                    let [a, b] = edges[idx];
                    let side = BoundarySide::classify(vertices[a], vertices[b]).ok_or_else(|| {
                        Error::Usage(format!("edge ({a}, {b}) has one neighbour but is not on the boundary"))
                    })?;
                    boundary_edges.push(BoundaryEdge { vertices: [a, b], side });
                }
                2 => {}
                n => return Err(Error::Usage(format!("edge {idx} is shared by {n} cells"))),
            }
        }

        let cell_diameters = cells
            .iter()
            .map(|c| {
                let [a, b, d] = [vertices[c[0]], vertices[c[1]], vertices[c[2]]];
                distance(a, b).max(distance(b, d)).max(distance(d, a))
            })
            .collect();

        Ok(Mesh { vertices, cells, boundary_edges, level, cell_diameters, edges, cell_edges, edge_cells })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cell_diameters(&self) -> &[f64] {
        &self.cell_diameters
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    /// Cells adjacent to an edge, in ascending order.
    pub fn edge_cells(&self, edge: usize) -> &[usize] {
        &self.edge_cells[edge]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_points(cell);
        signed_area(a, b, c)
    }

    pub fn max_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks conformity, orientation and coverage of the unit square.
    pub fn check_invariants(&self) -> Result<()> {
        for k in 0..self.num_cells() {
            let area = self.cell_area(k);
            if area <= 0.0 {
                return Err(Error::DegenerateCell { cell: k, det: 2.0 * area });
            }
        }
        for (idx, owners) in self.edge_cells.iter().enumerate() {
            let [a, b] = self.edges[idx];
            let on_boundary = BoundarySide::classify(self.vertices[a], self.vertices[b]).is_some();
            let expected = if on_boundary { 1 } else { 2 };
            if owners.len() != expected {
                return Err(Error::Usage(format!(
                    "edge ({a}, {b}) has {} neighbours, expected {expected}",
                    owners.len()
                )));
            }
        }
        let total: f64 = (0..self.num_cells()).map(|k| self.cell_area(k)).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Usage(format!("cells cover an area of {total}, not 1")));
        }
        Ok(())
    }

    /// Plain-text dump: `v x y`, `c i j k` and `b i j` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?}", v[0], v[1]);
        }
        for c in &self.cells {
            let _ = writeln!(out, "c {} {} {}", c[0], c[1], c[2]);
        }
        for b in &self.boundary_edges {
            let _ = writeln!(out, "b {} {}", b.vertices[0], b.vertices[1]);
        }
        out
    }
}

fn sorted_pair(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Regular diagonal triangulation with `2^level` sub-squares per side.
pub fn build_grid1(level: usize) -> Mesh {
    assert!(level <= 10, "grid level {level} exceeds 10");
    let n = 1usize << level;
    let step = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * step, j as f64 * step]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (ll, lr, ur, ul) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push([ll, lr, ur]);
            cells.push([ll, ur, ul]);
        }
    }
    Mesh::from_parts(vertices, cells, level).expect("regular grid is valid")
}

/// The fixed irregular coarse mesh, red-refined `level` times.
pub fn build_grid2(level: usize) -> Mesh {
    assert!(level <= 10, "grid level {level} exceeds 10");
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.55, 0.45], [0.3, 0.0]];
    let cells = vec![[0, 5, 4], [5, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
    let mut mesh = Mesh::from_parts(vertices, cells, 0).expect("coarse irregular grid is valid");
    for _ in 0..level {
        mesh = refine_red(&mesh);
    }
    mesh
}

/// Splits every triangle into four similar children through its edge
/// midpoints. Midpoint vertices are appended in edge order.
pub fn refine_red(mesh: &Mesh) -> Mesh {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(mesh.edges.iter().map(|&[a, b]| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }));
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for (cell, edges) in mesh.cells.iter().zip(&mesh.cell_edges) {
        let [a, b, c] = *cell;
        let (mab, mbc, mca) = (nv + edges[0], nv + edges[1], nv + edges[2]);
        cells.push([a, mab, mca]);
        cells.push([mab, b, mbc]);
        cells.push([mca, mbc, c]);
        cells.push([mab, mbc, mca]);
    }
    Mesh::from_parts(vertices, cells, mesh.level + 1).expect("red refinement preserves validity")
}
