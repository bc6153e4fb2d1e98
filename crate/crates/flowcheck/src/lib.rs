//! File formats, typing cache and pipeline orchestration around
//! `flowcheck-core`.
//!
//! The library side of the `flowcheck` binary: everything here is also
//! used directly by the integration and acceptance test suites.

pub mod cache;
pub mod explain;
pub mod formats;
pub mod pipeline;
