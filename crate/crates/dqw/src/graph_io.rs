//! JSON graph files.
//!
//! ```json
//! {
//!   "n_modes": 2,
//!   "onsite": [1.0, [1.0, 0.0]],
//!   "edges": [{"i": 0, "j": 1, "re": 0.5, "im": 0.0}],
//!   "positions": [-0.5, 0.5]
//! }
//! ```
//!
//! Each undirected edge is stored once. Reading back a written graph gives
//! the same graph bit for bit.

use std::path::Path;

use dqw_core::{CouplingGraph, C64};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Real(f64),
    Complex([f64; 2]),
}

impl Number {
    pub fn to_c64(self) -> C64 {
        match self {
            Self::Real(x) => C64::new(x, 0.0),
            Self::Complex([re, im]) => C64::new(re, im),
        }
    }

    pub fn from_c64(z: C64) -> Self {
        if z.im == 0.0 {
            Self::Real(z.re)
        } else {
            Self::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub n_modes: usize,
    pub onsite: Vec<Number>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<u32>>,
}

impl GraphDocument {
    pub fn from_graph(g: &CouplingGraph) -> Self {
        Self {
            n_modes: g.n_modes(),
            onsite: g.onsite().into_iter().map(Number::from_c64).collect(),
            edges: g.edges().map(|(i, j, c)| EdgeRecord { i, j, re: c.re, im: c.im }).collect(),
            positions: g.positions().map(<[f64]>::to_vec),
            labels: Some(g.labels().to_vec()),
            multiplicities: g.multiplicity().map(<[u32]>::to_vec),
        }
    }

    pub fn to_graph(&self) -> AppResult<CouplingGraph> {
        if self.onsite.len() != self.n_modes {
            return Err(AppError::config(format!(
                "onsite has {} entries but n_modes is {}",
                self.onsite.len(),
                self.n_modes
            )));
        }
        let onsite: Vec<C64> = self.onsite.iter().map(|x| x.to_c64()).collect();
        let edges: Vec<_> = self.edges.iter().map(|e| (e.i, e.j, C64::new(e.re, e.im))).collect();
        let mut g = CouplingGraph::from_edges(&onsite, &edges)?;
        if let Some(p) = &self.positions {
            g = g.with_positions(p.clone())?;
        }
        if let Some(l) = &self.labels {
            g = g.with_labels(l.clone())?;
        }
        if let Some(m) = &self.multiplicities {
            g = g.with_multiplicity(m.clone())?;
        }
        Ok(g)
    }
}

pub fn read_graph(text: &str) -> AppResult<CouplingGraph> {
    let doc: GraphDocument = serde_json::from_str(text)
        .map_err(|e| AppError::config(format!("graph document, line {} column {}: {e}", e.line(), e.column())))?;
    doc.to_graph()
}

pub fn write_graph(g: &CouplingGraph) -> String {
    serde_json::to_string_pretty(&GraphDocument::from_graph(g)).expect("graph documents always serialise")
}

pub fn load_graph(path: &Path) -> AppResult<CouplingGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path.display(), e))?;
    read_graph(&text)
}

pub fn save_graph(g: &CouplingGraph, path: &Path) -> AppResult<()> {
    std::fs::write(path, write_graph(g)).map_err(|e| AppError::io(path.display(), e))
}
