//! Desk-scale laboratory for data-parallel SGD.
//!
//! A parameter server applies worker gradients under one of three
//! aggregation policies: synchronous (barrier over all workers),
//! asynchronous (apply on arrival) and hybrid, where gradients collect in a
//! buffer that is flushed once it holds `K` of them and `K` grows with the
//! number of applied updates. Workers are simulated by a deterministic
//! discrete-event engine on a virtual clock so that policy comparisons are
//! reproducible bit for bit.
//!
//! The model math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the `f64` instantiation used by the simulator and the CLI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod model;
pub mod scalar;
pub mod seed;
pub mod server;
pub mod sim;
pub mod threshold;

pub use error::{Error, Result};
pub use model::ModelSpec;
pub use scalar::Scalar;
pub use server::AggregationPolicy;
pub use threshold::ThresholdSchedule;

/// Parameters in the default 64-bit precision.
pub type ParameterVector = model::ParameterVector<f64>;
/// Gradients in the default 64-bit precision.
pub type GradientVector = model::GradientVector<f64>;
/// A borrowed minibatch in the default 64-bit precision.
pub type Batch<'a> = model::Batch<'a, f64>;
/// Dataset in the default 64-bit precision.
pub type Dataset = data::Dataset<f64>;
/// Train/test split in the default 64-bit precision.
pub type DatasetSplit = data::DatasetSplit<f64>;
/// Parameter-server state in the default 64-bit precision.
pub type ServerState = server::ServerState<f64>;
/// Gradient message in the default 64-bit precision.
pub type GradientMessage = server::GradientMessage<f64>;

/// Single-precision aliases, for callers that trade accuracy for memory.
pub mod f32 {
    pub type ParameterVector = crate::model::ParameterVector<f32>;
    pub type GradientVector = crate::model::GradientVector<f32>;
    pub type Batch<'a> = crate::model::Batch<'a, f32>;
    pub type Dataset = crate::data::Dataset<f32>;
    pub type ServerState = crate::server::ServerState<f32>;
}
