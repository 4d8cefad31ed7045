//! Oblivious boolean backend.
//!
//! Every computation on encrypted data is expressed as a sequence of gates
//! (XOR, AND, NOT, CONST) on opaque bit handles. A [`Circuit`] drives an
//! [`Engine`] (the simulation engine or a native FHE adapter) and records a
//! [`Transcript`] of the wiring, which is the witness for both cost and
//! data-obliviousness: two runs with the same shape must produce the same
//! transcript digest no matter what the plaintexts were.

mod circuit;
mod cost;
pub mod fhe;
mod sim;
mod word;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use circuit::{Bit, Circuit, GateCounts, Op, OpKind, TraceLevel, Transcript};
pub use cost::{CostModel, CostModelError};
pub use sim::SimEngine;
pub use word::Word;

/// Backend-assigned handle of one ciphertext bit.
pub type Handle = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Sim,
    Fhe,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Sim => "sim",
            BackendKind::Fhe => "fhe",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BackendKind::Sim => 0,
            BackendKind::Fhe => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BackendKind::Sim),
            1 => Some(BackendKind::Fhe),
            _ => None,
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = BackendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(BackendKind::Sim),
            "fhe" => Ok(BackendKind::Fhe),
            other => Err(BackendError::UnknownKind(other.to_string())),
        }
    }
}

/// Binary gates understood by every engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryGate {
    Xor,
    And,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("unknown backend kind `{0}` (expected `sim` or `fhe`)")]
    UnknownKind(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("operation requires the secret key, which this party does not hold")]
    MissingSecretKey,
    #[error("invalid ciphertext handle {0}")]
    InvalidHandle(Handle),
    #[error("malformed ciphertext blob: {0}")]
    MalformedCiphertext(String),
    #[error("native adapter call `{call}` failed with code {code}: {message}")]
    Native {
        call: &'static str,
        code: i32,
        message: String,
    },
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("bit belongs to circuit #{found}, but was used in circuit #{expected}")]
    ForeignBit { expected: u32, found: u32 },
    #[error("word width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("value {value} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: usize },
    #[error("gate budget of {0} gates exceeded")]
    BudgetExceeded(u64),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Evaluation engine behind a [`Circuit`].
///
/// Engines only evaluate; wiring, counting and obliviousness bookkeeping live
/// in the circuit so the recorded transcript is the same for every engine.
pub trait Engine {
    fn kind(&self) -> BackendKind;

    fn constant(&mut self, value: bool) -> Result<Handle, BackendError>;

    fn binary(&mut self, gate: BinaryGate, a: Handle, b: Handle) -> Result<Handle, BackendError>;

    fn not(&mut self, a: Handle) -> Result<Handle, BackendError>;

    /// Owner side only.
    fn encrypt(&mut self, value: bool) -> Result<Handle, BackendError>;

    /// Owner side only.
    fn decrypt(&mut self, h: Handle) -> Result<bool, BackendError>;

    fn export(&self, h: Handle) -> Result<Vec<u8>, BackendError>;

    fn import(&mut self, blob: &[u8]) -> Result<Handle, BackendError>;

    /// Serialized size of one ciphertext in bytes.
    fn ciphertext_size(&self) -> usize;
}
