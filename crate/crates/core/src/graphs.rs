//! Coupled-mode graphs: 1D chains, glued-trees graphs and their column
//! reduction, plus generic construction from an edge list.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{SparseMatrix, C64};

/// Tolerance on |C - C†| accepted by every constructor.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Glued-trees edge weight for which the column chain has unit couplings in
/// the trees and sqrt(2) across the glue.
pub const UNIT_CHAIN_EDGE_WEIGHT: f64 = core::f64::consts::FRAC_1_SQRT_2;

pub const ENTRANCE_LABEL: &str = "entrance";
pub const EXIT_LABEL: &str = "exit";

/// Hermitian coupling matrix of a walk, with optional per-mode coordinates and
/// column multiplicities. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingGraph {
    coupling: SparseMatrix,
    positions: Option<Vec<f64>>,
    labels: Vec<String>,
    multiplicity: Option<Vec<u32>>,
}

impl CouplingGraph {
    /// Wraps a coupling matrix after checking it is Hermitian. Labels default
    /// to the mode indices.
    pub fn new(coupling: SparseMatrix) -> Result<Self> {
        let n = coupling.dim();
        if n == 0 {
            return Err(invalid("a graph needs at least one mode"));
        }
        if let Some((dev, row, col)) = coupling.hermitian_deviation() {
            if dev > HERMITIAN_TOL {
                let (row, col) = (row.min(col), row.max(col));
                return Err(Error::NotHermitian { row, col, deviation: dev });
            }
        }
        Ok(Self {
            coupling,
            positions: None,
            labels: (0..n).map(|k| k.to_string()).collect(),
            multiplicity: None,
        })
    }

    /// Builds from on-site terms and an edge list where each undirected edge
    /// `(i, j, c)` sets `C_ij = c` and `C_ji = conj(c)`. An edge may be given in
    /// both orientations only if the two values are conjugate.
    pub fn from_edges(onsite: &[C64], edges: &[(usize, usize, C64)]) -> Result<Self> {
        let n = onsite.len();
        if n == 0 {
            return Err(invalid("a graph needs at least one mode"));
        }
        let mut triplets = Vec::with_capacity(n + 2 * edges.len());
        for (k, w) in onsite.iter().enumerate() {
            if w.im.abs() > HERMITIAN_TOL {
                return Err(Error::NotHermitian { row: k, col: k, deviation: 2.0 * w.im.abs() });
            }
            triplets.push((k, k, C64::new(w.re, 0.0)));
        }

        let mut seen: Vec<(usize, usize, C64)> = Vec::with_capacity(edges.len());
        for &(i, j, c) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i},{j}) out of range for {n} modes")));
            }
            if i == j {
                return Err(invalid(format!("edge ({i},{i}) is a self-loop; use the on-site term")));
            }
            // canonical orientation lo < hi
            let (lo, hi, val) = if i < j { (i, j, c) } else { (j, i, c.conj()) };
            if let Some(prev) = seen.iter().find(|e| e.0 == lo && e.1 == hi) {
                let dev = (prev.2 - val).norm();
                if dev > HERMITIAN_TOL {
                    return Err(Error::NotHermitian { row: lo, col: hi, deviation: dev });
                }
                continue;
            }
            seen.push((lo, hi, val));
        }
        for (lo, hi, val) in seen {
            triplets.push((lo, hi, val));
            triplets.push((hi, lo, val.conj()));
        }
        Self::new(SparseMatrix::from_triplets(n, triplets))
    }

    pub fn with_positions(mut self, positions: Vec<f64>) -> Result<Self> {
        if positions.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: positions.len() });
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: labels.len() });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_multiplicity(mut self, multiplicity: Vec<u32>) -> Result<Self> {
        if multiplicity.len() != self.n_modes() {
            return Err(Error::DimensionMismatch { expected: self.n_modes(), found: multiplicity.len() });
        }
        if let Some(k) = multiplicity.iter().position(|&m| m == 0) {
            return Err(invalid(format!("multiplicity of mode {k} must be at least 1")));
        }
        self.multiplicity = Some(multiplicity);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.coupling.dim()
    }

    pub fn coupling(&self) -> &SparseMatrix {
        &self.coupling
    }

    pub fn positions(&self) -> Option<&[f64]> {
        self.positions.as_deref()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn multiplicity(&self) -> Option<&[u32]> {
        self.multiplicity.as_deref()
    }

    /// Diagonal of the coupling matrix.
    pub fn onsite(&self) -> Vec<C64> {
        (0..self.n_modes()).map(|k| self.coupling.get(k, k)).collect()
    }

    /// Each undirected edge once, as `(i, j, C_ij)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.coupling.iter().filter(|&(r, c, _)| r < c)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Number of neighbours of each mode (off-diagonal non-zeros).
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n_modes())
            .map(|r| self.coupling.row(r).filter(|&(c, _)| c != r).count())
            .collect()
    }
}

/// Tridiagonal chain with uniform on-site frequency and nearest-neighbour
/// coupling. Positions are centred integers.
pub fn build_chain(n_modes: usize, onsite: f64, coupling: f64) -> Result<CouplingGraph> {
    if n_modes == 0 {
        return Err(invalid("chain needs n_modes >= 1"));
    }
    let diag: Vec<C64> = (0..n_modes).map(|_| C64::new(onsite, 0.0)).collect();
    let edges: Vec<_> = (0..n_modes.saturating_sub(1))
        .map(|k| (k, k + 1, C64::new(coupling, 0.0)))
        .collect();
    let centre = (n_modes as f64 - 1.0) / 2.0;
    let positions = (0..n_modes).map(|k| k as f64 - centre).collect();
    CouplingGraph::from_edges(&diag, &edges)?.with_positions(positions)
}

/// Vertex bookkeeping for a glued-trees graph of a given depth.
///
/// Columns run `0..=2*depth+1`. Column `m <= depth` holds `2^m` vertices of the
/// left tree, column `2*depth+1-m` the mirrored right tree. Vertices are
/// numbered column by column, so the entrance is vertex 0 and the exit the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GluedTreesLayout {
    pub depth: usize,
}

impl GluedTreesLayout {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(invalid("glued trees need depth >= 1"));
        }
        if depth > 40 {
            return Err(invalid("glued-trees depth above 40 is not addressable"));
        }
        Ok(Self { depth })
    }

    pub fn n_vertices(&self) -> usize {
        (1usize << (self.depth + 2)) - 2
    }

    pub fn n_columns(&self) -> usize {
        2 * self.depth + 2
    }

    pub fn column_size(&self, col: usize) -> usize {
        let level = if col <= self.depth { col } else { self.n_columns() - 1 - col };
        1usize << level
    }

    /// Index of the first vertex in a column.
    pub fn column_start(&self, col: usize) -> usize {
        (0..col).map(|c| self.column_size(c)).sum()
    }

    pub fn vertex(&self, col: usize, i: usize) -> usize {
        self.column_start(col) + i
    }

    pub fn entrance(&self) -> usize {
        0
    }

    pub fn exit(&self) -> usize {
        self.n_vertices() - 1
    }

    pub fn edge_count(&self) -> usize {
        2 * ((1usize << (self.depth + 1)) - 2) + (1usize << (self.depth + 1))
    }

    fn label(&self, col: usize, i: usize) -> String {
        if col == 0 {
            ENTRANCE_LABEL.to_string()
        } else if col == self.n_columns() - 1 {
            EXIT_LABEL.to_string()
        } else {
            format!("c{col}.{i}")
        }
    }

    fn column_of_label(&self, label: &str) -> Option<usize> {
        match label {
            ENTRANCE_LABEL => Some(0),
            EXIT_LABEL => Some(self.n_columns() - 1),
            _ => {
                let rest = label.strip_prefix('c')?;
                let (col, _) = rest.split_once('.')?;
                col.parse().ok()
            }
        }
    }

    /// Column multiplicities `2^m`, mirrored.
    pub fn multiplicities(&self) -> Vec<u32> {
        (0..self.n_columns()).map(|c| self.column_size(c) as u32).collect()
    }
}

/// Glued-trees graph with unit edge weight.
pub fn build_glued_trees(depth: usize) -> Result<CouplingGraph> {
    build_glued_trees_weighted(depth, 1.0)
}

/// Two complete binary trees of the given depth whose leaves are glued by a
/// cycle: left leaf `i` couples to right leaves `i` and `i+1 mod 2^depth`.
pub fn build_glued_trees_weighted(depth: usize, edge_weight: f64) -> Result<CouplingGraph> {
    let layout = GluedTreesLayout::new(depth)?;
    let n = layout.n_vertices();
    if n > (1usize << 24) {
        return Err(invalid("glued-trees graph too large"));
    }
    let w = C64::new(edge_weight, 0.0);
    let last = layout.n_columns() - 1;
    let mut edges = Vec::with_capacity(layout.edge_count());
    for level in 0..depth {
        for i in 0..(1usize << level) {
            for child in [2 * i, 2 * i + 1] {
                edges.push((layout.vertex(level, i), layout.vertex(level + 1, child), w));
                edges.push((layout.vertex(last - level, i), layout.vertex(last - level - 1, child), w));
            }
        }
    }
    let leaves = 1usize << depth;
    for i in 0..leaves {
        let left = layout.vertex(depth, i);
        let right_col = depth + 1;
        edges.push((left, layout.vertex(right_col, i), w));
        let next = (i + 1) % leaves;
        if next != i {
            edges.push((left, layout.vertex(right_col, next), w));
        }
    }

    let labels = (0..layout.n_columns())
        .flat_map(|c| (0..layout.column_size(c)).map(move |i| (c, i)))
        .map(|(c, i)| layout.label(c, i))
        .collect();
    let onsite = alloc::vec![C64::new(0.0, 0.0); n];
    CouplingGraph::from_edges(&onsite, &edges)?.with_labels(labels)
}

/// Projects a glued-trees graph onto its column-symmetric subspace: mode `m`
/// is the normalised uniform superposition of column `m`, so
/// `C'_{m,m'} = sum_{i in m, j in m'} C_ij / sqrt(|m| |m'|)`.
pub fn column_reduce_glued_trees(graph: &CouplingGraph) -> Result<CouplingGraph> {
    let n = graph.n_modes();
    let depth = (1..=40)
        .find(|&d| (1usize << (d + 2)) - 2 == n)
        .ok_or_else(|| invalid(format!("{n} vertices is not a glued-trees size 2^(d+2)-2")))?;
    let layout = GluedTreesLayout::new(depth)?;

    let mut column = Vec::with_capacity(n);
    for (k, label) in graph.labels().iter().enumerate() {
        let col = layout
            .column_of_label(label)
            .filter(|&c| c < layout.n_columns())
            .ok_or_else(|| invalid(format!("vertex {k} has no column label (found {label:?})")))?;
        column.push(col);
    }
    let mut sizes = alloc::vec![0usize; layout.n_columns()];
    for &c in &column {
        sizes[c] += 1;
    }
    if (0..layout.n_columns()).any(|c| sizes[c] != layout.column_size(c)) {
        return Err(invalid("column labels do not match the glued-trees column sizes"));
    }

    let triplets = graph.coupling().iter().map(|(r, c, v)| {
        let (a, b) = (column[r], column[c]);
        let norm = ((sizes[a] * sizes[b]) as f64).sqrt();
        (a, b, v / norm)
    });
    let reduced = SparseMatrix::from_triplets(layout.n_columns(), triplets);
    let labels = (0..layout.n_columns())
        .map(|c| match c {
            0 => ENTRANCE_LABEL.to_string(),
            c if c == layout.n_columns() - 1 => EXIT_LABEL.to_string(),
            c => format!("c{c}"),
        })
        .collect();
    CouplingGraph::new(reduced)?
        .with_labels(labels)?
        .with_multiplicity(layout.multiplicities())
}

/// Column chain of a glued-trees graph built directly, without the
/// exponentially large parent graph: couplings `sqrt(2) w` inside the trees
/// and `2 w` across the glue.
pub fn glued_trees_column_chain(depth: usize, edge_weight: f64) -> Result<CouplingGraph> {
    let layout = GluedTreesLayout::new(depth)?;
    let cols = layout.n_columns();
    let edges: Vec<_> = (0..cols - 1)
        .map(|m| {
            let c = if m == depth { 2.0 * edge_weight } else { core::f64::consts::SQRT_2 * edge_weight };
            (m, m + 1, C64::new(c, 0.0))
        })
        .collect();
    let onsite = alloc::vec![C64::new(0.0, 0.0); cols];
    let labels = (0..cols)
        .map(|c| match c {
            0 => ENTRANCE_LABEL.to_string(),
            c if c == cols - 1 => EXIT_LABEL.to_string(),
            c => format!("c{c}"),
        })
        .collect();
    CouplingGraph::from_edges(&onsite, &edges)?
        .with_labels(labels)?
        .with_multiplicity(layout.multiplicities())
}
