//! Pricing and information analysis for an unobservable single-server queue whose customers
//! do not know the arrival rate.

pub mod analytics;
pub mod decision;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
pub use model::{BeliefDistribution, BeliefSpec, InfoCase, SystemParams};
