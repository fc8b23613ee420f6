//! Gain-scheduled model-reference adaptive control.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI and the bundled fixtures use.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod lpv_model;
pub mod lyapunov;
pub mod mrac;
pub mod numerics;
pub mod projection;
pub mod saturation;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = numerics::DenseMatrix<f64>;
pub type Matrix32 = numerics::DenseMatrix<f32>;
pub type Table = numerics::MatrixTable<f64>;
pub type Bound = projection::ConvexBound<f64>;
pub type Bounds = projection::ColumnBounds<f64>;
pub type Gamma = projection::LearningRate<f64>;
pub type Limits = saturation::SatLimits<f64>;
