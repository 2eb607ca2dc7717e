//! Simulator and learning agents for controller synchronization in
//! distributed SDN.
//!
//! Each domain controller holds a view of the whole network that goes stale
//! between synchronizations. At every step a policy picks which `SR`
//! controllers to sync; decisions (server offloading, shortest paths) are
//! then made on the stale view and graded against the true network.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod routing;
pub mod topology;
pub mod view_sync;

pub use error::{Error, Result};
