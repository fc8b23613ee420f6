//! Adaptive controllers: basic, input-constrained and decentralized, plus
//! the closed-form bounds used to check their trajectories.

mod basic;
pub mod bounds;
mod constrained;
mod decentralized;

pub use basic::{adapt_basic, adapt_with_pb, control_basic, AdaptiveState};
pub use bounds::{
    gain_rate_bound, theorem2_bounds, theorem3_bounds, theorem4_bounds, theorem5_bounds, ubb_from_parts,
    Theorem2Bounds, Theorem4Bounds, Theorem4Inputs, Theorem5Bounds, Theorem5Subsystem,
};
pub use constrained::{step_constrained, ConstrainedAdaptiveState, ConstrainedStep};
pub use decentralized::{adapt_decentralized, control_decentralized};
