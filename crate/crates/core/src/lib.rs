//! Complete EFX allocations of indivisible goods on multigraphs.
//!
//! Agents sit on the vertices of a multigraph and every edge is a good that
//! only its two endpoints care about. [`pipeline::solve`] builds a complete
//! allocation that is envy-free up to any good whenever the graph is
//! bipartite, has few neighbors per vertex, or has simple girth at least 6.
//! The [`verify`] module re-checks results without sharing code with the
//! solver.

pub mod cli;
pub mod cuts;
pub mod error;
pub mod exec;
pub mod instance;
pub mod pipeline;
pub mod state;
pub mod valuation;
pub mod verify;

pub use error::{Error, Result};
