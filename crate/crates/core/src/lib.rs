//! Prox-affine networks viewed as averaged operators: activation catalog,
//! averagedness certificates, relaxed fixed-point iteration and the
//! associated variational inequality.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod certify;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod network;
pub mod operator;
pub mod vi;

pub use activation::{ActivationKind, Interval, ScalarActivation};
pub use certify::{Certificate, ConditionUsed, LayerwiseOutcome, NormEstimate};
pub use config::ExperimentConfig;
pub use engine::{
    BoundSequences, IterationTrace, PerturbationSchedule, RelaxationFamily, RelaxationSchedule, Status, Stop,
};
pub use error::{Error, Result};
pub use network::{Layer, Network};
pub use operator::{ActivationOperator, FirmReport, Structure};
pub use vi::{BlockOperators, BlockPoint, ExistenceFlags, MonotonicityReport, ViResidual};
