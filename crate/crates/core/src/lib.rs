//! Ground states of the discrete nonlinear Schrödinger equation
//! `−Δu + Vu − λu = κ f(x, u)` on finite weighted graphs, found as minimax
//! points over the generalized Nehari manifold.
//!
//! The crate is organized bottom-up:
//! [`graph`] (weighted graphs, validation, path metric),
//! [`spectral`] (operator assembly and the generalized eigenproblem),
//! [`nonlinearity`], [`solver`] (the energy functional and ground states),
//! [`experiments`] (bifurcation sweeps, inequality audits) and [`io`].

// `!(x > 0.0)` style comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod function;
pub mod graph;
pub mod io;
pub mod nonlinearity;
pub mod solver;
pub mod spectral;

pub use error::{ExperimentError, GraphError, IoError, NonlinearityError, SolverError, SpectralError};
pub use function::GraphFunction;
pub use graph::{GraphBuilder, VertexId, WeightedGraph};
pub use nonlinearity::{power_nonlinearity, Nonlinearity};
pub use solver::{ground_state, GroundStateResult, Kappa, SolverConfig};
pub use spectral::{assemble, eigensolve, split, EigenMethod, EigenOptions, SpectralData};
