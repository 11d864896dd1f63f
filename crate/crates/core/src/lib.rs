//! Graph Laplacian inference from graph signals.
//!
//! Spectral templates (approximate Laplacian eigenvectors) are estimated from
//! the covariance of filtered signals, and a convex program recovers a valid
//! Laplacian that is nearly diagonalized by them. The program's spectrum is
//! shrunk toward the degree function of a graphon, either known in closed
//! form or estimated from an observed subgraph.
//!
//! Modules, bottom-up:
//!
//! - [`graphon`]: graphon kernels, graph sampling, degree functions.
//! - [`graphs`]: adjacency/Laplacian types, spectra, subgraphs, the error metric.
//! - [`signals`]: consensus filters, signal simulation, template estimation.
//! - [`solver`]: the recovery program and its operator-splitting solver.
//! - [`harness`]: experiment orchestration, grid search, persistence.

pub mod error;
pub mod graphon;
pub mod graphs;
pub mod harness;
pub mod matrix_io;
pub mod signals;
pub mod solver;

mod linalg;

pub use error::{Error, Result};
pub use graphon::{degree_function, sample_graph, DegreePrior, Graphon, LatentDraw};
pub use graphs::{
    empirical_degree_function, induced_subgraph, laplacian, perturb_adjacency, recovery_error, spectrum, Graph,
    LaplacianMatrix, Spectrum,
};
pub use signals::{
    apply_filter, estimate_templates, exact_covariance, generate_signals, templates_from_noisy_adjacency,
    ConsensusFilter, SpectralTemplates, TemplateSource,
};
pub use solver::{build_problem, solve, verify_kkt, RecoveryProblem, RecoverySolution, SolverConfig};
