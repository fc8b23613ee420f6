//! Fixed-step simulation of the closed loops, traces and bound reports.

mod engine;
mod integrate;
mod report;
mod scenario;
mod trace;

pub use engine::{prepare, run, run_file, DecentralizedSetup, LoopSetup, MimoSetup, Prepared, Setup, CLAMP_LEVEL, DIVERGENCE_NORM};
pub use integrate::rk4_step;
pub use report::{bounds_report, BoundCheck, BoundsReport, Observed, BOUND_SLACK, CONTAINMENT_SLACK, UBB_FACTOR};
pub use scenario::{command_profile, BoundSpec, CommandProfile, ControllerConfig, Degradation, Knot, MatrixSpec, Scenario, Variant};
pub use trace::{SimTrace, TraceLayout};
