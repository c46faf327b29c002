//! Finite hypothesis classes, exact Littlestone dimension, and the Standard
//! Optimal Algorithm.

mod class;
pub mod generators;
mod labels;
mod soa;

pub use class::{HypothesisClass, VersionSpace};
pub use labels::{Labels, Predictor};
pub use soa::{
    ensure_realizable, first_inconsistency, run_on_sequence, LabeledExample, OnlineLearner, Soa,
    SoaState,
};
