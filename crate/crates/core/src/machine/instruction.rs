use std::fmt;

use thiserror::Error;

use super::Geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Opcode {
    Wr0,
    Wr1,
    Cnd,
    Jmp,
}

impl Opcode {
    fn from_bits(bits: u64) -> Self {
        match bits & 0b11 {
            0 => Opcode::Wr0,
            1 => Opcode::Wr1,
            2 => Opcode::Cnd,
            _ => Opcode::Jmp,
        }
    }

    fn bits(self) -> u64 {
        match self {
            Opcode::Wr0 => 0,
            Opcode::Wr1 => 1,
            Opcode::Cnd => 2,
            Opcode::Jmp => 3,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Wr0 => "wr0",
            Opcode::Wr1 => "wr1",
            Opcode::Cnd => "cnd",
            Opcode::Jmp => "jmp",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        match s {
            "wr0" => Some(Opcode::Wr0),
            "wr1" => Some(Opcode::Wr1),
            "cnd" => Some(Opcode::Cnd),
            "jmp" => Some(Opcode::Jmp),
            _ => None,
        }
    }
}

/// One decoded machine instruction.
///
/// For `wr0`/`wr1`/`cnd`, `a` is a register index and `b` a bit index.
/// For `jmp`, `a` is the first register to activate and `b` the number of
/// further consecutive registers activated with it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub opcode: Opcode,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("register operand {0} out of range")]
    Register(usize),
    #[error("bit operand {0} out of range")]
    Bit(usize),
    #[error("jump range {target}..={end} runs past the last register", end = target + offset)]
    JumpRange { target: usize, offset: usize },
}

impl Instruction {
    pub fn wr0(reg: usize, bit: usize) -> Self {
        Self { opcode: Opcode::Wr0, a: reg, b: bit }
    }

    pub fn wr1(reg: usize, bit: usize) -> Self {
        Self { opcode: Opcode::Wr1, a: reg, b: bit }
    }

    pub fn cnd(reg: usize, bit: usize) -> Self {
        Self { opcode: Opcode::Cnd, a: reg, b: bit }
    }

    pub fn jmp(target: usize, offset: usize) -> Self {
        Self { opcode: Opcode::Jmp, a: target, b: offset }
    }

    /// `jmp 0 0`: the sink absorbs the activation and the thread ends.
    pub fn halt() -> Self {
        Self::jmp(0, 0)
    }

    /// Total field extraction: every word decodes. High bits past the
    /// operand fields are ignored.
    pub fn decode(word: u64, geometry: Geometry) -> Self {
        let addr_bits = geometry.addr_bits();
        let opcode = Opcode::from_bits(word);
        let a = field(word, 2, addr_bits);
        let b_bits = match opcode {
            Opcode::Jmp => addr_bits,
            _ => geometry.bit_index_bits(),
        };
        let b = field(word, 2 + addr_bits, b_bits);
        Self { opcode, a, b }
    }

    pub fn check(&self, geometry: Geometry) -> Result<(), EncodeError> {
        let n = geometry.n_registers();
        if self.a >= n {
            return Err(EncodeError::Register(self.a));
        }
        match self.opcode {
            Opcode::Jmp => {
                if self.a + self.b >= n {
                    return Err(EncodeError::JumpRange {
                        target: self.a,
                        offset: self.b,
                    });
                }
            }
            _ => {
                if self.b >= geometry.word_width() as usize {
                    return Err(EncodeError::Bit(self.b));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, geometry: Geometry) -> Result<u64, EncodeError> {
        self.check(geometry)?;
        let addr_bits = geometry.addr_bits();
        Ok(self.opcode.bits() | (self.a as u64) << 2 | (self.b as u64) << (2 + addr_bits))
    }
}

fn field(word: u64, lo: u32, width: u32) -> usize {
    if width == 0 {
        return 0;
    }
    ((word >> lo) & ((1u64 << width) - 1)) as usize
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.opcode {
            Opcode::Jmp => write!(f, "jmp {} {}", self.a, self.b),
            op => write!(f, "{} {}.{}", op.mnemonic(), self.a, self.b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g16() -> Geometry {
        Geometry::new(16, 16).unwrap()
    }

    #[test]
    fn decodes_documented_layout() {
        assert_eq!(Instruction::decode(333, g16()), Instruction::wr1(3, 5));
        assert_eq!(Instruction::decode(0, g16()), Instruction::wr0(0, 0));
        assert_eq!(Instruction::decode(163, g16()), Instruction::jmp(8, 2));
    }

    #[test]
    fn high_bits_are_ignored() {
        // wr/cnd use 4+4 bits of operand, so bit 10 and up are unused.
        assert_eq!(Instruction::decode(333 | 0xfc00, g16()), Instruction::wr1(3, 5));
    }

    #[test]
    fn encode_rejects_out_of_range_operands() {
        let g = g16();
        assert_eq!(Instruction::wr0(16, 0).encode(g), Err(EncodeError::Register(16)));
        assert_eq!(Instruction::cnd(1, 16).encode(g), Err(EncodeError::Bit(16)));
        assert!(matches!(
            Instruction::jmp(14, 2).encode(g),
            Err(EncodeError::JumpRange { .. })
        ));
        assert_eq!(Instruction::jmp(14, 1).encode(g), Ok(3 | 14 << 2 | 1 << 6));
    }

    #[test]
    fn display_matches_image_syntax() {
        assert_eq!(Instruction::wr1(3, 0).to_string(), "wr1 3.0");
        assert_eq!(Instruction::halt().to_string(), "jmp 0 0");
    }

    proptest::proptest! {
        #[test]
        fn decode_encode_is_identity_on_canonical_words(op in 0u64..4, a in 0usize..16, b in 0usize..16) {
            let g = g16();
            let word = op | (a as u64) << 2 | (b as u64) << 6;
            let ins = Instruction::decode(word, g);
            if ins.check(g).is_ok() {
                proptest::prop_assert_eq!(ins.encode(g).unwrap(), word);
            }
        }
    }
}
