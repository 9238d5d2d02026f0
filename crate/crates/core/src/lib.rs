//! Continuous-time quantum walks of bosonic modes under classical pumping.
//!
//! Coupling graphs, their eigenmodes, Gaussian moment dynamics under lasing and
//! squeezing drives, the resonant-eigenmode decomposition of driven walks, and
//! spatial search on glued trees.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod decomposition;
pub mod dynamics;
pub mod error;
pub mod graphs;
pub mod linalg;
pub mod observables;
pub mod search;
pub mod spectral;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, LinearFit, RMatrix, SparseMatrix, C64};
pub use graphs::{build_chain, build_glued_trees, column_reduce_glued_trees, CouplingGraph};
pub use spectral::{diagonalize, pump_to_eigenbasis, EigenPump, EigenSystem};
pub use dynamics::{evolve_driven, evolve_passive, Basis, DriveType, GaussianState, GaussianTrajectory, PumpConfig, PumpProfile};
pub use decomposition::{decompose_run, integrated_pump, effective_input_state, IntegratedPump};
pub use observables::{growth_exponent, photon_numbers, ObservableKind, ObservableSeries};
pub use search::{run_driven_search, weight_scaling_study, SearchResult, SearchSpec, ScalingStudy};
