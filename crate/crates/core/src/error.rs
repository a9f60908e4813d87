// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed gate: {0}")]
    MalformedGate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("illegal netlist: {0}")]
    IllegalNetlist(String),

    #[error("missing cost entry for gate kind {0}")]
    MissingCost(String),

    #[error("unknown net {0}")]
    UnknownNet(usize),

    #[error("unknown gate {0}")]
    UnknownGate(usize),

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("experiment skipped: {0}")]
    Skipped(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
