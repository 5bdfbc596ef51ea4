//! QAOA MaxCut landscape benchmarking on simulated quantum backends.
//!
//! The pipeline: pick a [`problem::WeightedGraph`], build QAOA circuits
//! ([`circuit`]), compile them for a device ([`compiler`]), execute through a
//! backend adapter ([`backends`]) backed by the statevector [`simulator`],
//! sample parameter [`landscape`]s, compare them with [`metrics`] and render
//! them with [`heatmap`].

pub mod backends;
pub mod circuit;
pub mod compiler;
pub mod config;
pub mod error;
pub mod heatmap;
pub mod landscape;
pub mod metrics;
pub mod problem;
pub mod seeding;
pub mod simulator;

pub use error::{Error, Result};
