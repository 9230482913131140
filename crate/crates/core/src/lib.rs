//! Formal safety analysis of feed-forward ReLU networks.
//!
//! The crate checks input-output safety properties by propagating symbolic
//! linear-relaxation bounds through the network and iteratively refining
//! overestimated ReLU nodes with a linear-programming solver, returning
//! either a proof of safety or a concretely validated counterexample.
//!
//! # Layers
//!
//! - [`interval`]: affine expressions, concrete intervals with outward
//!   rounding, dense matrices.
//! - [`network`] / [`nnet`]: the network model, NNet text parsing, and the
//!   JSON fixture format.
//! - [`propagate`]: naive interval, symbolic interval, and symbolic
//!   linear-relaxation forward passes plus interval gradients.
//! - [`lp`]: a self-contained dense two-phase simplex over bounded
//!   variables.
//! - [`oracle`]: exact output ranges by activation-pattern enumeration
//!   (desk-scale ground truth).
//! - [`property`]: input regions, output constraints, and their LP
//!   encodings.
//! - [`engine`]: the refinement search, counterexample validation, and the
//!   parallel work queue.

// Index-based loops are clearer than iterator chains for the matrix and
// tableau arithmetic in this crate.
#![allow(clippy::needless_range_loop)]

pub mod engine;
pub mod error;
pub mod interval;
pub mod lp;
pub mod network;
pub mod nnet;
pub mod oracle;
pub mod propagate;
pub mod property;

pub use engine::{
    refine_output_range, refine_output_range_recorded, validate_counterexample, verify,
    EngineConfig, RunStats, SplitRecord, Verdict, VerdictReport,
};
pub use error::{Error, LpFailure, Result};
pub use interval::{
    linear_map, outward_round, BoundPair, ConcreteInterval, InputBox, LinearExpression, Matrix,
};
pub use lp::{Constraint, LinearProgram, LpOutcome, Relation, Sense};
pub use network::{ConvLayer, Layer, Network, NodeId, Normalization};
pub use nnet::{parse_nnet, serialize_nnet};
pub use oracle::{exact_output_range, exact_output_range_with_limit, ActivationPattern};
pub use propagate::{
    bisect_region, conv_map, interval_gradient, nia_forward, relax_relu, sia_forward, slr_forward,
    ForcedMap, GradientInterval, NodeStatus, PropagationTrace,
};
pub use property::{
    build_violation_systems, parse_property, region_to_box, InputRegion, LpRow, OutputProperty,
    RegionEncoding, SafeRow, ViolationSystem,
};
