//! Modeling of human reach and gaze behavior for legible robot actions:
//! trial datasets, multi-rate stream alignment, GMM/GMR trajectory models,
//! minimum-jerk references, a gaze behavior state machine and gated intent
//! classification.

// Negated comparisons below reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anticipate;
pub mod dataset;
pub mod gaze;
pub mod minjerk;
pub mod streamsync;
pub mod trajgmm;
pub mod trajgmr;
