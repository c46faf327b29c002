//! Differentially private online classification in the realizable setting.
//!
//! The [`forest`] module runs a forest of SOA tournaments whose per-tree
//! outputs are published through a sparse-vector histogram ([`sparse`]),
//! so that the whole hypothesis sequence is (ε, δ)-differentially private.
//! [`adaptive`] re-instantiates the learner every round to handle adaptive
//! adversaries, and [`harness`] drives experiments and privacy audits.

pub mod adaptive;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod forest;
pub mod mech;
pub mod record;
pub mod sparse;

pub use error::{Error, Result};
