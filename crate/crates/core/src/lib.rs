//! Resilient clustered multi-task diffusion LMS.
//!
//! Nodes of a clustered network cooperatively estimate per-cluster
//! parameter vectors. Each node screens the intermediate estimates it
//! receives with a weighted support vector data description, retrains it
//! only when enough outliers accumulate, and polls a reputation-ranked
//! subset of its neighbors.

pub mod analysis;
pub mod attacks;
pub mod config;
pub mod detector;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod reputation;
pub mod rng;
pub mod scenario;
pub mod wsvdd;

pub type Vector = nalgebra::DVector<f64>;

pub use error::{Error, Result};
pub use config::{Experiment, SimConfig};
pub use diffusion::{AlgoParams, Algorithm, Network};
pub use harness::{run_monte_carlo, MonteCarloResult};
pub use scenario::Scenario;
