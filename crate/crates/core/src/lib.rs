//! Simulation and payoff inference for entropic, spatially inhomogeneous
//! evolutionary games.
//!
//! Agents move in `R^d` and carry mixed strategies over a finite set of pure
//! strategies `U`. The crate provides
//!
//! * the elementary strategy operators (softmax steady state, replicator and
//!   entropy drifts, KL divergence, Hellinger tangent metric) in [`strategy`];
//! * finite-element payoff grids and closed-form reference payoffs in [`payoff`];
//! * explicit Euler integrators for the full entropic, undisclosed,
//!   fast-reaction, Newtonian and pedestrian models in [`sim`];
//! * the variational inference functionals, their gradients and an L-BFGS
//!   driver in [`inference`];
//! * particle-cloud distances in [`metrics`].

pub mod cloud;
pub mod dataset;
mod error;
pub mod inference;
pub mod jsonfmt;
pub mod metrics;
mod par;
pub mod payoff;
pub mod sim;
pub mod strategy;
pub mod validation;

pub use cloud::Cloud;
pub use dataset::{DatasetMeta, Snapshot, TrajectoryDataset};
pub use error::{Error, Result};
pub use payoff::{Payoff, PayoffModel};
pub use strategy::{MixedStrategy, StrategySpace, VelocityMap};
