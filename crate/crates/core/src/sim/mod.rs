// SPDX-License-Identifier: Apache-2.0

//! Event-driven, gate-level simulation with integer time.

mod delay;
mod engine;
mod trace;

/// Simulation time in abstract gate-delay units.
pub type Time = u64;

pub use delay::DelayModel;
pub use engine::{
    run_pipeline, CompiledNetlist, Injection, Operands, PipelineRun, Progress, RunOptions, RunStatus,
    Simulator, Token, UpsetModel,
};
pub use trace::{Marker, MarkerKind, Offer, Trace, TraceRecord};
