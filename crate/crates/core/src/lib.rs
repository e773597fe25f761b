//! Joint beamforming and fronthaul compression design for cooperative relay
//! networks, solved globally by a pair of fixed point iterations: one on the
//! dual multipliers, one on the beam powers.

pub mod diagnostics;
pub mod dual;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod primal;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
pub use model::{DualSolution, PrimalSolution, ProblemInstance, SolveReport, SolveStatus};
