//! Adaptive vertex selection and bandlimited signal recovery on weighted graphs.
//!
//! Given a graph and a budget of `m` vertex measurements, [`selector`] decides
//! which vertex to measure next from spectral leverage values, and
//! [`recovery`] estimates the full multivariate signal by a sparse fit in the
//! graph Fourier domain.

pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod recovery;
pub mod selector;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, LaplacianMatrix, VertexMeta};
pub use recovery::{complete, lasso_solve, recover, Completion, LassoConfig, LassoSolution, Projection};
pub use selector::{
    run_sr, GroundTruthOracle, IterationRecord, Oracle, SelectionState, SrConfig, SrEngine, SrOutcome,
};
pub use spectral::{Kernel, SignalMatrix, Spectrum};
