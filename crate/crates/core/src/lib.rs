//! Leader-based distributed optimization in a deterministic simulated cluster.
//!
//! Workers run (stochastic) gradient descent and are pulled toward the best
//! worker of their group and the best worker overall. Elastic averaging and
//! DOWNPOUR run on the same simulator as baselines.

pub mod bench;
pub mod leader;
pub mod linalg;
pub mod objectives;
pub mod rng;
pub mod sim;
pub mod steps;
pub mod theory;
