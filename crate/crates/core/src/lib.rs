// SPDX-License-Identifier: Apache-2.0

//! Gate-level simulation and fault evaluation of NULL Convention Logic
//! carry-lookahead pipelines with selective redundancy.

pub mod error;
pub mod ncl;
pub mod netlist;
pub mod sim;
pub mod fault;
pub mod metrics;

pub use error::{Error, Result};
pub use ncl::{decode, decode_word, encode_bit, encode_word, DualRail, GateSpec};
pub use netlist::{Architecture, Netlist, PartitionSpec, Replica, Role};
pub use sim::{CompiledNetlist, DelayModel, Operands, RunOptions, RunStatus, Simulator, Time};
