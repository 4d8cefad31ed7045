use std::sync::atomic::{AtomicU32, Ordering};

use sha2::{Digest, Sha256};

use super::{BinaryGate, CircuitError, Engine, Handle};

static NEXT_CIRCUIT_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to one encrypted bit inside a specific [`Circuit`].
///
/// The handle carries no plaintext; it can only be combined through the
/// circuit that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bit {
    circuit: u32,
    index: u32,
}

impl Bit {
    /// Position of the bit in its circuit's wire list.
    pub fn wire(self) -> u32 {
        self.index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Xor,
    And,
    Not,
    Const,
    /// Ciphertext entering the circuit (encrypted or imported); not a gate.
    Input,
}

impl OpKind {
    fn tag(self) -> u8 {
        match self {
            OpKind::Xor => 1,
            OpKind::And => 2,
            OpKind::Not => 3,
            OpKind::Const => 4,
            OpKind::Input => 5,
        }
    }
}

/// One transcript entry. Operands are wire indices; for `Const` the first
/// operand holds the public constant value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Op {
    pub kind: OpKind,
    pub a: u32,
    pub b: u32,
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize,
)]
pub struct GateCounts {
    pub xor: u64,
    pub and: u64,
    pub not: u64,
    #[serde(rename = "const")]
    pub constant: u64,
}

impl GateCounts {
    pub fn total(&self) -> u64 {
        self.xor + self.and + self.not + self.constant
    }
}

impl std::ops::Sub for GateCounts {
    type Output = GateCounts;

    fn sub(self, rhs: GateCounts) -> GateCounts {
        GateCounts {
            xor: self.xor - rhs.xor,
            and: self.and - rhs.and,
            not: self.not - rhs.not,
            constant: self.constant - rhs.constant,
        }
    }
}

/// How much of the transcript to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceLevel {
    /// Gate counts only.
    Counts,
    /// Counts plus the running structural digest.
    #[default]
    Digest,
    /// Counts, digest and the full op list.
    Full,
}

/// Append-only record of the gates a circuit executed.
#[derive(Debug, Clone)]
pub struct Transcript {
    level: TraceLevel,
    counts: GateCounts,
    inputs: u64,
    hasher: Sha256,
    ops: Vec<Op>,
}

impl Transcript {
    fn new(level: TraceLevel) -> Self {
        Transcript {
            level,
            counts: GateCounts::default(),
            inputs: 0,
            hasher: Sha256::new(),
            ops: Vec::new(),
        }
    }

    fn record(&mut self, op: Op) {
        match op.kind {
            OpKind::Xor => self.counts.xor += 1,
            OpKind::And => self.counts.and += 1,
            OpKind::Not => self.counts.not += 1,
            OpKind::Const => self.counts.constant += 1,
            OpKind::Input => self.inputs += 1,
        }
        if self.level == TraceLevel::Counts {
            return;
        }
        let mut rec = [0u8; 9];
        rec[0] = op.kind.tag();
        rec[1..5].copy_from_slice(&op.a.to_le_bytes());
        rec[5..9].copy_from_slice(&op.b.to_le_bytes());
        self.hasher.update(rec);
        if self.level == TraceLevel::Full {
            self.ops.push(op);
        }
    }

    pub fn level(&self) -> TraceLevel {
        self.level
    }

    pub fn counts(&self) -> GateCounts {
        self.counts
    }

    pub fn inputs(&self) -> u64 {
        self.inputs
    }

    /// Recorded ops; empty unless the circuit was built with [`TraceLevel::Full`].
    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    /// Hex SHA-256 over gate kinds and wiring, in execution order.
    ///
    /// Returns `None` at [`TraceLevel::Counts`], where no digest is kept.
    pub fn digest(&self) -> Option<String> {
        if self.level == TraceLevel::Counts {
            return None;
        }
        let out = self.hasher.clone().finalize();
        Some(out.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Gate-level circuit builder and evaluator over an [`Engine`].
pub struct Circuit<E> {
    id: u32,
    engine: E,
    wires: Vec<Handle>,
    transcript: Transcript,
    gate_limit: Option<u64>,
    decrypt_calls: u64,
}

impl<E: Engine> Circuit<E> {
    pub fn new(engine: E) -> Self {
        Self::with_trace(engine, TraceLevel::default())
    }

    pub fn with_trace(engine: E, level: TraceLevel) -> Self {
        Circuit {
            id: NEXT_CIRCUIT_ID.fetch_add(1, Ordering::Relaxed),
            engine,
            wires: Vec::new(),
            transcript: Transcript::new(level),
            gate_limit: None,
            decrypt_calls: 0,
        }
    }

    /// Abort with [`CircuitError::BudgetExceeded`] once more than `limit`
    /// gates have been issued.
    pub fn set_gate_limit(&mut self, limit: Option<u64>) {
        self.gate_limit = limit;
    }

    pub fn engine(&self) -> &E {
        &self.engine
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn counts(&self) -> GateCounts {
        self.transcript.counts()
    }

    /// Number of decryptions attempted through this circuit.
    pub fn decrypt_calls(&self) -> u64 {
        self.decrypt_calls
    }

    fn wire(&self, bit: Bit) -> Result<Handle, CircuitError> {
        if bit.circuit != self.id {
            return Err(CircuitError::ForeignBit {
                expected: self.id,
                found: bit.circuit,
            });
        }
        Ok(self.wires[bit.index as usize])
    }

    fn push(&mut self, handle: Handle, kind: OpKind, a: u32, b: u32) -> Result<Bit, CircuitError> {
        if kind != OpKind::Input {
            if let Some(limit) = self.gate_limit {
                if self.transcript.counts.total() >= limit {
                    return Err(CircuitError::BudgetExceeded(limit));
                }
            }
        }
        let index = self.wires.len() as u32;
        self.wires.push(handle);
        self.transcript.record(Op { kind, a, b });
        Ok(Bit {
            circuit: self.id,
            index,
        })
    }

    pub fn constant(&mut self, value: bool) -> Result<Bit, CircuitError> {
        let h = self.engine.constant(value)?;
        self.push(h, OpKind::Const, value as u32, 0)
    }

    pub fn xor(&mut self, a: Bit, b: Bit) -> Result<Bit, CircuitError> {
        let (ha, hb) = (self.wire(a)?, self.wire(b)?);
        let h = self.engine.binary(BinaryGate::Xor, ha, hb)?;
        self.push(h, OpKind::Xor, a.index, b.index)
    }

    pub fn and(&mut self, a: Bit, b: Bit) -> Result<Bit, CircuitError> {
        let (ha, hb) = (self.wire(a)?, self.wire(b)?);
        let h = self.engine.binary(BinaryGate::And, ha, hb)?;
        self.push(h, OpKind::And, a.index, b.index)
    }

    pub fn not(&mut self, a: Bit) -> Result<Bit, CircuitError> {
        let ha = self.wire(a)?;
        let h = self.engine.not(ha)?;
        self.push(h, OpKind::Not, a.index, 0)
    }

    /// `a ∨ b` as `a ⊕ b ⊕ a·b`.
    pub fn or(&mut self, a: Bit, b: Bit) -> Result<Bit, CircuitError> {
        let x = self.xor(a, b)?;
        let y = self.and(a, b)?;
        self.xor(x, y)
    }

    pub fn encrypt(&mut self, value: bool) -> Result<Bit, CircuitError> {
        let h = self.engine.encrypt(value)?;
        self.push(h, OpKind::Input, 0, 0)
    }

    pub fn import(&mut self, blob: &[u8]) -> Result<Bit, CircuitError> {
        let h = self.engine.import(blob)?;
        self.push(h, OpKind::Input, 0, 0)
    }

    pub fn export(&self, bit: Bit) -> Result<Vec<u8>, CircuitError> {
        let h = self.wire(bit)?;
        Ok(self.engine.export(h)?)
    }

    pub fn decrypt(&mut self, bit: Bit) -> Result<bool, CircuitError> {
        self.decrypt_calls += 1;
        let h = self.wire(bit)?;
        Ok(self.engine.decrypt(h)?)
    }
}
