//! Point-based planning for inspection and maintenance POMDPs with decomposed
//! maintenance/observation actions, plus value-of-information metrics.

pub mod belief;
pub mod cases;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod simulation;
pub mod solvers;

pub use belief::{AlphaVector, Belief, SparseBelief};
pub use error::{Error, Result};
pub use model::{FactoredLayout, JointAction, JointObservation, ModelBuilder, ObservationAction, PomdpModel};
