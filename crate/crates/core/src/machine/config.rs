use thiserror::Error;

/// Register-array geometry shared by images, the assembler and the compiler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Geometry {
    n_registers: usize,
    word_width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n_registers={0} is not a power of two")]
    RegistersNotPowerOfTwo(usize),
    #[error("word_width={0} is not a power of two")]
    WidthNotPowerOfTwo(u32),
    #[error("machine too small: need n_registers >= 4 and word_width >= 8 (got n={n}, w={w})")]
    TooSmall { n: usize, w: u32 },
    #[error("word_width={0} exceeds the 64-bit register storage")]
    WidthTooLarge(u32),
    #[error("an instruction needs {needed} bits but words are {w} bits wide")]
    InstructionDoesNotFit { needed: u32, w: u32 },
}

impl Geometry {
    pub fn new(n_registers: usize, word_width: u32) -> Result<Self, ConfigError> {
        if !n_registers.is_power_of_two() {
            return Err(ConfigError::RegistersNotPowerOfTwo(n_registers));
        }
        if !word_width.is_power_of_two() {
            return Err(ConfigError::WidthNotPowerOfTwo(word_width));
        }
        if n_registers < 4 || word_width < 8 {
            return Err(ConfigError::TooSmall {
                n: n_registers,
                w: word_width,
            });
        }
        if word_width > 64 {
            return Err(ConfigError::WidthTooLarge(word_width));
        }
        let addr = n_registers.trailing_zeros();
        let bit = word_width.trailing_zeros();
        let needed = 2 + addr + addr.max(bit);
        if needed > word_width {
            return Err(ConfigError::InstructionDoesNotFit {
                needed,
                w: word_width,
            });
        }
        Ok(Self {
            n_registers,
            word_width,
        })
    }

    pub fn n_registers(&self) -> usize {
        self.n_registers
    }

    pub fn word_width(&self) -> u32 {
        self.word_width
    }

    /// Width of a register-index field.
    pub fn addr_bits(&self) -> u32 {
        self.n_registers.trailing_zeros()
    }

    /// Width of a bit-index field.
    pub fn bit_index_bits(&self) -> u32 {
        self.word_width.trailing_zeros()
    }

    pub fn word_mask(&self) -> u64 {
        if self.word_width == 64 {
            u64::MAX
        } else {
            (1u64 << self.word_width) - 1
        }
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            n_registers: 65536,
            word_width: 64,
        }
    }
}

/// Execution parameters for one machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MachineConfig {
    pub geometry: Geometry,
    pub max_cycles: u64,
    /// Report activation of registers declared as data.
    pub guard_checks: bool,
}

impl MachineConfig {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            ..Self::default()
        }
    }

    pub fn with_max_cycles(mut self, max_cycles: u64) -> Self {
        self.max_cycles = max_cycles;
        self
    }

    pub fn with_guard_checks(mut self, on: bool) -> Self {
        self.guard_checks = on;
        self
    }
}

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            max_cycles: 1_000_000,
            guard_checks: false,
        }
    }
}
