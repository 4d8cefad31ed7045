use super::{Bit, Circuit, CircuitError, Engine};

/// Fixed-width vector of encrypted bits, least-significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    bits: Vec<Bit>,
}

impl Word {
    pub fn from_bits(bits: Vec<Bit>) -> Self {
        Word { bits }
    }

    pub fn empty() -> Self {
        Word { bits: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[Bit] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<Bit> {
        self.bits
    }

    pub fn bit(&self, i: usize) -> Bit {
        self.bits[i]
    }

    /// Concatenates fields given most-significant first.
    pub fn concat_msb_first<'a>(fields: impl IntoIterator<Item = &'a Word>) -> Word {
        let fields: Vec<&Word> = fields.into_iter().collect();
        let mut bits = Vec::with_capacity(fields.iter().map(|w| w.width()).sum());
        for w in fields.iter().rev() {
            bits.extend_from_slice(&w.bits);
        }
        Word { bits }
    }

    /// Bits `[lo, lo + width)` as a new word.
    pub fn slice(&self, lo: usize, width: usize) -> Word {
        Word {
            bits: self.bits[lo..lo + width].to_vec(),
        }
    }
}

impl From<Bit> for Word {
    fn from(b: Bit) -> Self {
        Word { bits: vec![b] }
    }
}

fn same_width(x: &Word, y: &Word) -> Result<usize, CircuitError> {
    if x.width() != y.width() {
        return Err(CircuitError::WidthMismatch {
            left: x.width(),
            right: y.width(),
        });
    }
    Ok(x.width())
}

fn check_fits(value: u64, width: usize) -> Result<(), CircuitError> {
    if width < 64 && value >> width != 0 {
        return Err(CircuitError::ValueTooWide { value, width });
    }
    Ok(())
}

impl<E: Engine> Circuit<E> {
    pub fn encrypt_word(&mut self, value: u64, width: usize) -> Result<Word, CircuitError> {
        check_fits(value, width)?;
        let bits = (0..width)
            .map(|i| self.encrypt(value >> i & 1 == 1))
            .collect::<Result<_, _>>()?;
        Ok(Word { bits })
    }

    /// Public constant entered through CONST gates.
    pub fn constant_word(&mut self, value: u64, width: usize) -> Result<Word, CircuitError> {
        check_fits(value, width)?;
        let bits = (0..width)
            .map(|i| self.constant(value >> i & 1 == 1))
            .collect::<Result<_, _>>()?;
        Ok(Word { bits })
    }

    pub fn decrypt_word(&mut self, w: &Word) -> Result<u64, CircuitError> {
        let mut v = 0u64;
        for (i, &b) in w.bits.iter().enumerate() {
            if self.decrypt(b)? {
                v |= 1 << i;
            }
        }
        Ok(v)
    }

    /// Ripple-carry sum modulo `2^width` using
    /// `s_i = x_i ⊕ y_i ⊕ c_i`, `c_{i+1} = (x_i ⊕ c_i)(y_i ⊕ c_i) ⊕ c_i`, `c_0 = 0`.
    ///
    /// Costs `4ℓ-2` XOR, `ℓ-1` AND and one CONST for `ℓ ≥ 1`; the final carry
    /// is never formed.
    pub fn add(&mut self, x: &Word, y: &Word) -> Result<Word, CircuitError> {
        let width = same_width(x, y)?;
        if width == 0 {
            return Ok(Word::empty());
        }
        let mut carry = self.constant(false)?;
        let mut out = Vec::with_capacity(width);
        for i in 0..width {
            let (xi, yi) = (x.bits[i], y.bits[i]);
            let xc = self.xor(xi, carry)?;
            out.push(self.xor(xc, yi)?);
            if i + 1 < width {
                let yc = self.xor(yi, carry)?;
                let m = self.and(xc, yc)?;
                carry = self.xor(m, carry)?;
            }
        }
        Ok(Word { bits: out })
    }

    /// `x + b` for a single bit `b` (half-adder chain), modulo `2^width`.
    pub fn add_bit(&mut self, x: &Word, b: Bit) -> Result<Word, CircuitError> {
        let width = x.width();
        let mut carry = b;
        let mut out = Vec::with_capacity(width);
        for i in 0..width {
            out.push(self.xor(x.bits[i], carry)?);
            if i + 1 < width {
                carry = self.and(x.bits[i], carry)?;
            }
        }
        Ok(Word { bits: out })
    }

    /// Encrypted `x > y` on unsigned operands.
    ///
    /// Both operands are zero-extended by one bit and the sign bit of the
    /// `(ℓ+1)`-bit difference `y - x = y + ¬x + 1` is returned. Only the carry
    /// chain and the top sum bit are formed.
    pub fn cmp_gt(&mut self, x: &Word, y: &Word) -> Result<Bit, CircuitError> {
        let width = same_width(x, y)?;
        let zx = self.constant(false)?;
        let zy = self.constant(false)?;
        let mut nx = Vec::with_capacity(width + 1);
        for &b in x.bits.iter().chain(std::iter::once(&zx)) {
            nx.push(self.not(b)?);
        }
        let ys: Vec<Bit> = y.bits.iter().copied().chain(std::iter::once(zy)).collect();
        let mut carry = self.constant(true)?;
        for i in 0..width {
            let xc = self.xor(nx[i], carry)?;
            let yc = self.xor(ys[i], carry)?;
            let m = self.and(xc, yc)?;
            carry = self.xor(m, carry)?;
        }
        let t = self.xor(nx[width], ys[width])?;
        self.xor(t, carry)
    }

    /// Encrypted `x == y`: AND over `¬(x_i ⊕ y_i)`. Width 0 compares equal.
    pub fn eq(&mut self, x: &Word, y: &Word) -> Result<Bit, CircuitError> {
        let width = same_width(x, y)?;
        if width == 0 {
            return self.constant(true);
        }
        let mut acc: Option<Bit> = None;
        for i in 0..width {
            let d = self.xor(x.bits[i], y.bits[i])?;
            let e = self.not(d)?;
            acc = Some(match acc {
                None => e,
                Some(a) => self.and(a, e)?,
            });
        }
        Ok(acc.expect("width > 0"))
    }

    /// `a` if `s` else `b`, bitwise `s·a_i ⊕ ¬s·b_i`.
    pub fn mux(&mut self, s: Bit, a: &Word, b: &Word) -> Result<Word, CircuitError> {
        let width = same_width(a, b)?;
        let ns = self.not(s)?;
        let mut out = Vec::with_capacity(width);
        for i in 0..width {
            let l = self.and(s, a.bits[i])?;
            let r = self.and(ns, b.bits[i])?;
            out.push(self.xor(l, r)?);
        }
        Ok(Word { bits: out })
    }

    /// Swaps `a` and `b` when `s` decrypts to 1: `d = s·(a ⊕ b)`, `a ⊕= d`, `b ⊕= d`.
    pub fn cswap(&mut self, s: Bit, a: &mut Word, b: &mut Word) -> Result<(), CircuitError> {
        let width = same_width(a, b)?;
        for i in 0..width {
            let diff = self.xor(a.bits[i], b.bits[i])?;
            let d = self.and(s, diff)?;
            a.bits[i] = self.xor(a.bits[i], d)?;
            b.bits[i] = self.xor(b.bits[i], d)?;
        }
        Ok(())
    }

    /// Every bit of `w` ANDed with `b`.
    pub fn and_word(&mut self, w: &Word, b: Bit) -> Result<Word, CircuitError> {
        let bits = w
            .bits
            .iter()
            .map(|&x| self.and(x, b))
            .collect::<Result<_, _>>()?;
        Ok(Word { bits })
    }
}
