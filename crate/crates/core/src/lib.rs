//! Incremental sampling-based feedback motion planning.
//!
//! A sample set is grown one state at a time; each sample's one-hop
//! neighbors under an Euler discretization of the dynamics form a graph on
//! which time-to-go is estimated by asynchronous, staleness-gated value
//! iteration in Kruzhkov-transformed form. A greedy policy over the
//! estimate drives closed-loop rollouts.

pub mod dynamics;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod multigrid;
pub mod planner;
pub mod rollout;
pub mod schedule;
pub mod spatial;
pub mod value_iteration;

pub use error::{Error, Result};
