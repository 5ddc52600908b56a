//! The deterministic limit on the graph: motion along `dz/dt = b_bar(z)`
//! inside edges, instantaneous random branching at essential vertices.

mod distribution;
mod flow;
mod quad;

use thiserror::Error;

use crate::coeffs::CoeffError;
use crate::reeb::{EdgeId, VertexId};

pub use distribution::{expected_observable, limit_distribution, settling_time, LimitDistribution, ObservableEstimate, SHELL_HALF_WIDTH};
pub use flow::{simulate_limit, simulate_limit_with, BranchEvent, LimitPath, LimitSegment, LimitSettings, LimitStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("averaged drift vanishes on edge {edge} at z = {z:.6} away from any classified zero")]
    StuckAtZero { edge: EdgeId, z: f64 },
    #[error("vertex {vertex} has no usable exit edge")]
    NoExit { vertex: VertexId },
    #[error("vertex {vertex} has two exit edges but is not essential")]
    AmbiguousBranch { vertex: VertexId },
    #[error("no shell samples for target on edge {edge} at z = {z:.6}")]
    EmptyShell { edge: EdgeId, z: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
