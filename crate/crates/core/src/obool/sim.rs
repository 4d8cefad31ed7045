use super::{BackendError, BackendKind, BinaryGate, Engine, Handle};

/// Plaintext simulation engine.
///
/// Each "ciphertext" is the plaintext bit itself, so it offers no
/// confidentiality; it exists to run, count and audit circuits. The
/// evaluator flavour refuses encryption and decryption so the party split of
/// the protocol can still be checked.
#[derive(Debug, Clone)]
pub struct SimEngine {
    bits: Vec<bool>,
    secret: bool,
}

impl SimEngine {
    /// Data-owner engine: may encrypt and decrypt.
    pub fn owner() -> Self {
        SimEngine {
            bits: Vec::new(),
            secret: true,
        }
    }

    /// Analyst engine: evaluation only.
    pub fn evaluator() -> Self {
        SimEngine {
            bits: Vec::new(),
            secret: false,
        }
    }

    fn get(&self, h: Handle) -> Result<bool, BackendError> {
        self.bits
            .get(h as usize)
            .copied()
            .ok_or(BackendError::InvalidHandle(h))
    }

    fn put(&mut self, v: bool) -> Handle {
        self.bits.push(v);
        (self.bits.len() - 1) as Handle
    }
}

impl Engine for SimEngine {
    fn kind(&self) -> BackendKind {
        BackendKind::Sim
    }

    fn constant(&mut self, value: bool) -> Result<Handle, BackendError> {
        Ok(self.put(value))
    }

    fn binary(&mut self, gate: BinaryGate, a: Handle, b: Handle) -> Result<Handle, BackendError> {
        let (a, b) = (self.get(a)?, self.get(b)?);
        Ok(self.put(match gate {
            BinaryGate::Xor => a ^ b,
            BinaryGate::And => a & b,
        }))
    }

    fn not(&mut self, a: Handle) -> Result<Handle, BackendError> {
        let a = self.get(a)?;
        Ok(self.put(!a))
    }

    fn encrypt(&mut self, value: bool) -> Result<Handle, BackendError> {
        if !self.secret {
            return Err(BackendError::MissingSecretKey);
        }
        Ok(self.put(value))
    }

    fn decrypt(&mut self, h: Handle) -> Result<bool, BackendError> {
        if !self.secret {
            return Err(BackendError::MissingSecretKey);
        }
        self.get(h)
    }

    fn export(&self, h: Handle) -> Result<Vec<u8>, BackendError> {
        Ok(vec![self.get(h)? as u8])
    }

    fn import(&mut self, blob: &[u8]) -> Result<Handle, BackendError> {
        match blob {
            [0] => Ok(self.put(false)),
            [1] => Ok(self.put(true)),
            _ => Err(BackendError::MalformedCiphertext(format!(
                "sim ciphertext must be a single 0/1 byte, got {blob:?}"
            ))),
        }
    }

    fn ciphertext_size(&self) -> usize {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluator_cannot_decrypt() {
        let mut e = SimEngine::evaluator();
        let h = e.import(&[1]).unwrap();
        assert!(matches!(e.decrypt(h), Err(BackendError::MissingSecretKey)));
        assert!(matches!(
            e.encrypt(true),
            Err(BackendError::MissingSecretKey)
        ));
    }

    #[test]
    fn import_rejects_garbage() {
        let mut e = SimEngine::owner();
        assert!(e.import(&[2]).is_err());
        assert!(e.import(&[]).is_err());
    }

    #[test]
    fn unknown_handle() {
        let mut e = SimEngine::owner();
        assert!(matches!(e.not(7), Err(BackendError::InvalidHandle(7))));
    }
}
