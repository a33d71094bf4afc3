use std::fmt;

use thiserror::Error;

use super::trace::{BitWrite, TraceRecord};
use super::{Image, ImageErrorKind, Instruction, MachineConfig, Opcode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MachineErrorKind {
    WriteContention { reg: usize, bit: usize },
    ActivationContention(usize),
    AddressOverflow(usize),
    DataExecution(usize),
    CycleLimitExceeded,
}

impl fmt::Display for MachineErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WriteContention { reg, bit } => write!(f, "WriteContention({reg},{bit})"),
            Self::ActivationContention(r) => write!(f, "ActivationContention({r})"),
            Self::AddressOverflow(r) => write!(f, "AddressOverflow({r})"),
            Self::DataExecution(r) => write!(f, "DataExecution({r})"),
            Self::CycleLimitExceeded => f.write_str("CycleLimitExceeded"),
        }
    }
}

/// A machine error pinned to the cycle in which it occurred. `cycle` counts
/// completed cycles, so an error in the very first cycle has `cycle == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Error)]
#[error("{kind} at cycle {cycle}")]
pub struct MachineError {
    pub kind: MachineErrorKind,
    pub cycle: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
    Errored(MachineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("image geometry n={image_n} w={image_w} does not match machine n={n} w={w}")]
    GeometryMismatch {
        image_n: usize,
        image_w: u32,
        n: usize,
        w: u32,
    },
    #[error("invalid image: {0}")]
    Invalid(#[from] ImageErrorKind),
}

/// Summary of a finished run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunStats {
    pub cycles: u64,
    pub peak_activation: usize,
    /// Sum of |active| over all executed cycles.
    pub activation_sum: u64,
}

impl RunStats {
    pub fn mean_activation(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.activation_sum as f64 / self.cycles as f64
        }
    }
}

/// The Synchronic A-Ram register array together with its activation set.
///
/// Each [`Machine::step`] is one global clock cycle: every active register
/// decodes its own start-of-cycle word, all reads see start-of-cycle values,
/// and writes and successor activations are committed together afterwards.
#[derive(Clone, Debug)]
pub struct Machine {
    config: MachineConfig,
    registers: Vec<u64>,
    guard: Vec<bool>,
    active: Vec<usize>,
    cycle: u64,
    status: Status,
    peak: usize,
    activation_sum: u64,
    trace: Option<Vec<TraceRecord>>,
    // scratch, reused across cycles
    writes: Vec<BitWrite>,
    next: Vec<usize>,
    dirty: Vec<usize>,
    dirty_mark: Vec<bool>,
}

impl Machine {
    pub fn new(config: MachineConfig) -> Self {
        let n = config.geometry.n_registers();
        Self {
            config,
            registers: vec![0; n],
            guard: vec![false; n],
            active: Vec::new(),
            cycle: 0,
            status: Status::Halted,
            peak: 0,
            activation_sum: 0,
            trace: None,
            writes: Vec::new(),
            next: Vec::new(),
            dirty: Vec::new(),
            dirty_mark: vec![false; n],
        }
    }

    /// Builds a machine and loads `image` into it.
    pub fn with_image(config: MachineConfig, image: &Image) -> Result<Self, LoadError> {
        let mut m = Self::new(config);
        m.load(image)?;
        Ok(m)
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    /// Clears every register and loads `image`, activating its entry set.
    pub fn load(&mut self, image: &Image) -> Result<(), LoadError> {
        let g = self.config.geometry;
        if image.geometry != g {
            return Err(LoadError::GeometryMismatch {
                image_n: image.geometry.n_registers(),
                image_w: image.geometry.word_width(),
                n: g.n_registers(),
                w: g.word_width(),
            });
        }
        image.validate()?;
        self.registers.iter_mut().for_each(|r| *r = 0);
        self.guard.iter_mut().for_each(|r| *r = false);
        for (&idx, &word) in &image.words {
            self.registers[idx] = word;
        }
        for &d in &image.data {
            self.guard[d] = true;
        }
        self.clear_dirty();
        self.restart(&image.entry);
        Ok(())
    }

    /// Restores only the registers touched since the last load or reset.
    /// `image` must be the one previously passed to [`Machine::load`].
    pub fn reset(&mut self, image: &Image) {
        for &r in &self.dirty {
            self.registers[r] = image.word(r);
            self.dirty_mark[r] = false;
        }
        self.dirty.clear();
        self.restart(&image.entry);
    }

    /// Re-activates `entry` without touching register contents.
    pub fn restart(&mut self, entry: &[usize]) {
        self.active.clear();
        self.active.extend_from_slice(entry);
        self.active.sort_unstable();
        self.cycle = 0;
        self.peak = 0;
        self.activation_sum = 0;
        self.status = if self.active.is_empty() {
            Status::Halted
        } else {
            Status::Running
        };
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
    }

    /// Starts (or stops) recording one [`TraceRecord`] per committed cycle.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRecord>> {
        self.trace.as_mut().map(std::mem::take)
    }

    pub fn registers(&self) -> &[u64] {
        &self.registers
    }

    pub fn register(&self, idx: usize) -> u64 {
        self.registers[idx]
    }

    pub fn bit(&self, reg: usize, bit: usize) -> bool {
        self.registers[reg] >> bit & 1 == 1
    }

    /// Overwrites a register from outside the machine (input loading).
    pub fn set_register(&mut self, idx: usize, value: u64) {
        self.registers[idx] = value & self.config.geometry.word_mask();
        self.mark_dirty(idx);
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_guarded(&self, idx: usize) -> bool {
        self.guard[idx]
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            cycles: self.cycle,
            peak_activation: self.peak,
            activation_sum: self.activation_sum,
        }
    }

    fn clear_dirty(&mut self) {
        for &r in &self.dirty {
            self.dirty_mark[r] = false;
        }
        self.dirty.clear();
    }

    fn mark_dirty(&mut self, idx: usize) {
        if !self.dirty_mark[idx] {
            self.dirty_mark[idx] = true;
            self.dirty.push(idx);
        }
    }

    fn fail(&mut self, kind: MachineErrorKind) -> MachineError {
        let err = MachineError {
            kind,
            cycle: self.cycle,
        };
        self.status = Status::Errored(err);
        err
    }

    /// Executes one clock cycle.
    ///
    /// Errors are checked in a fixed order so the reported error is
    /// deterministic: per-register faults (guard, address overflow) in
    /// ascending register order, then write contention on the lowest
    /// `(register, bit)`, then activation contention on the lowest register.
    /// A failing cycle commits nothing.
    pub fn step(&mut self) -> Result<(), MachineError> {
        match self.status {
            Status::Running => {}
            Status::Halted => return Ok(()),
            Status::Errored(e) => return Err(e),
        }
        let g = self.config.geometry;
        let n = g.n_registers();
        let w = g.word_width() as usize;
        self.writes.clear();
        self.next.clear();

        let active = std::mem::take(&mut self.active);
        let mut fault = None;
        for &r in &active {
            if self.config.guard_checks && self.guard[r] {
                fault = Some(MachineErrorKind::DataExecution(r));
                break;
            }
            let ins = Instruction::decode(self.registers[r], g);
            let ok = match ins.opcode {
                Opcode::Wr0 | Opcode::Wr1 => {
                    if ins.a < n && ins.b < w && r + 1 < n {
                        self.writes.push(BitWrite {
                            reg: ins.a,
                            bit: ins.b,
                            value: ins.opcode == Opcode::Wr1,
                        });
                        self.next.push(r + 1);
                        true
                    } else {
                        false
                    }
                }
                Opcode::Cnd => {
                    if ins.a < n && ins.b < w {
                        let succ = if self.registers[ins.a] >> ins.b & 1 == 1 { r + 2 } else { r + 1 };
                        self.next.push(succ);
                        succ < n
                    } else {
                        false
                    }
                }
                Opcode::Jmp => {
                    if ins.a + ins.b < n {
                        self.next.extend(ins.a..=ins.a + ins.b);
                        true
                    } else {
                        false
                    }
                }
            };
            if !ok {
                fault = Some(MachineErrorKind::AddressOverflow(r));
                break;
            }
        }
        self.active = active;
        if let Some(kind) = fault {
            return Err(self.fail(kind));
        }

        self.writes.sort_unstable();
        if let Some(pair) = self
            .writes
            .windows(2)
            .find(|p| p[0].reg == p[1].reg && p[0].bit == p[1].bit)
        {
            let (reg, bit) = (pair[0].reg, pair[0].bit);
            return Err(self.fail(MachineErrorKind::WriteContention { reg, bit }));
        }

        // Register 0 is the sink: any number of activations vanish there.
        self.next.retain(|&s| s != 0);
        self.next.sort_unstable();
        if let Some(pair) = self.next.windows(2).find(|p| p[0] == p[1]) {
            let reg = pair[0];
            return Err(self.fail(MachineErrorKind::ActivationContention(reg)));
        }

        for i in 0..self.writes.len() {
            let BitWrite { reg, bit, value } = self.writes[i];
            if value {
                self.registers[reg] |= 1 << bit;
            } else {
                self.registers[reg] &= !(1 << bit);
            }
            self.mark_dirty(reg);
        }

        self.peak = self.peak.max(self.active.len());
        self.activation_sum += self.active.len() as u64;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRecord {
                cycle: self.cycle,
                active: self.active.clone(),
                writes: self.writes.clone(),
                next: self.next.clone(),
            });
        }
        std::mem::swap(&mut self.active, &mut self.next);
        self.cycle += 1;
        if self.active.is_empty() {
            self.status = Status::Halted;
        }
        Ok(())
    }

    /// Steps until the machine halts, errors, or reaches `max_cycles`.
    pub fn run(&mut self) -> Result<RunStats, MachineError> {
        loop {
            match self.status {
                Status::Halted => return Ok(self.stats()),
                Status::Errored(e) => return Err(e),
                Status::Running => {}
            }
            if self.cycle >= self.config.max_cycles {
                return Err(self.fail(MachineErrorKind::CycleLimitExceeded));
            }
            self.step()?;
        }
    }
}

/// Outcome of [`run`]: the final machine plus its statistics.
#[derive(Debug)]
pub struct RunResult {
    pub machine: Machine,
    pub stats: RunStats,
    pub error: Option<MachineError>,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Loads `image` into a fresh machine and runs it to completion.
pub fn run(image: &Image, config: MachineConfig, trace: bool) -> Result<RunResult, LoadError> {
    let mut machine = Machine::with_image(config, image)?;
    machine.set_tracing(trace);
    let error = machine.run().err();
    let trace = machine.take_trace();
    Ok(RunResult {
        stats: machine.stats(),
        machine,
        error,
        trace,
    })
}

/// Renders a machine state in image syntax: non-zero registers, guard
/// marks, and the current activation set as the entry line. A halted
/// machine has no entry line.
pub fn dump_state(machine: &Machine) -> String {
    use std::fmt::Write as _;
    let g = machine.config.geometry;
    let mut image = Image::new(g);
    image.entry = machine.active.clone();
    for (idx, &word) in machine.registers.iter().enumerate() {
        if word != 0 || machine.guard[idx] {
            image.words.insert(idx, word);
        }
        if machine.guard[idx] {
            image.data.insert(idx);
        }
    }
    let mut out = String::new();
    let status = match machine.status {
        Status::Running => "running".to_string(),
        Status::Halted => "halted".to_string(),
        Status::Errored(e) => format!("errored {e}"),
    };
    writeln!(out, "# cycle={} status={status}", machine.cycle).unwrap();
    let text = image.to_text();
    for line in text.lines() {
        if line == "entry" {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

/// Replays recorded cycles against an image without decoding any
/// instruction, returning the final register array.
pub fn replay(image: &Image, records: &[TraceRecord]) -> Result<Vec<u64>, String> {
    let n = image.geometry.n_registers();
    let mut regs = vec![0u64; n];
    for (&i, &w) in &image.words {
        regs[i] = w;
    }
    let mut active = image.entry.clone();
    for (k, rec) in records.iter().enumerate() {
        if rec.cycle != k as u64 {
            return Err(format!("record {k} has cycle {}", rec.cycle));
        }
        if rec.active != active {
            return Err(format!("cycle {k}: activation set does not match the replay"));
        }
        for w in &rec.writes {
            if w.reg >= n {
                return Err(format!("cycle {k}: write to register {} out of range", w.reg));
            }
            if w.value {
                regs[w.reg] |= 1 << w.bit;
            } else {
                regs[w.reg] &= !(1 << w.bit);
            }
        }
        active = rec.next.clone();
    }
    Ok(regs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::Geometry;

    fn cfg() -> MachineConfig {
        MachineConfig::new(Geometry::new(16, 16).unwrap()).with_max_cycles(100)
    }

    fn image(entry: &[usize], regs: &[(usize, Instruction)]) -> Image {
        let g = cfg().geometry;
        let mut img = Image::new(g);
        img.entry = entry.to_vec();
        for &(i, ins) in regs {
            img.words.insert(i, ins.encode(g).unwrap());
        }
        img
    }

    fn machine(img: &Image) -> Machine {
        Machine::with_image(cfg(), img).unwrap()
    }

    #[test]
    fn single_write_then_successor() {
        let mut m = machine(&image(&[5], &[(5, Instruction::wr1(2, 0))]));
        m.step().unwrap();
        assert_eq!(m.register(2), 1);
        assert_eq!(m.active(), &[6]);
        assert_eq!(m.cycle(), 1);
    }

    #[test]
    fn conflicting_writes_error() {
        let mut m = machine(&image(&[5, 9], &[(5, Instruction::wr1(2, 0)), (9, Instruction::wr0(2, 0))]));
        let err = m.step().unwrap_err();
        assert_eq!(err.kind, MachineErrorKind::WriteContention { reg: 2, bit: 0 });
        assert_eq!(err.cycle, 0);
        assert_eq!(m.register(2), 0, "failing cycle commits nothing");
        assert_eq!(m.status(), Status::Errored(err));
    }

    #[test]
    fn equal_value_writes_still_error() {
        let mut m = machine(&image(&[5, 9], &[(5, Instruction::wr1(2, 0)), (9, Instruction::wr1(2, 0))]));
        assert_eq!(m.step().unwrap_err().kind, MachineErrorKind::WriteContention { reg: 2, bit: 0 });
    }

    #[test]
    fn jump_fans_out_inclusively() {
        let mut m = machine(&image(&[4], &[(4, Instruction::jmp(8, 2))]));
        m.step().unwrap();
        assert_eq!(m.active(), &[8, 9, 10]);
    }

    #[test]
    fn duplicate_activation_errors() {
        let mut m = machine(&image(&[4, 7], &[(4, Instruction::jmp(8, 0)), (7, Instruction::jmp(8, 0))]));
        assert_eq!(m.step().unwrap_err().kind, MachineErrorKind::ActivationContention(8));
    }

    #[test]
    fn sink_absorbs_simultaneous_halts() {
        let regs: Vec<_> = (1..12).map(|r| (r, Instruction::halt())).collect();
        let entry: Vec<_> = (1..12).collect();
        let mut m = machine(&image(&entry, &regs));
        m.step().unwrap();
        assert_eq!(m.status(), Status::Halted);
    }

    #[test]
    fn two_cycle_program_halts() {
        let img = image(&[2], &[(2, Instruction::wr1(1, 0)), (3, Instruction::halt())]);
        let res = run(&img, cfg(), false).unwrap();
        assert_eq!(res.error, None);
        assert_eq!(res.stats.cycles, 2);
        assert_eq!(res.machine.register(1) & 1, 1);
    }

    #[test]
    fn self_loop_hits_cycle_limit() {
        let img = image(&[2], &[(2, Instruction::jmp(2, 0))]);
        let res = run(&img, cfg(), false).unwrap();
        let err = res.error.unwrap();
        assert_eq!(err.kind, MachineErrorKind::CycleLimitExceeded);
        assert_eq!(err.cycle, 100);
    }

    #[test]
    fn conditional_takes_false_arm() {
        let img = image(
            &[2],
            &[
                (2, Instruction::cnd(1, 0)),
                (3, Instruction::halt()),
                (4, Instruction::wr1(1, 1)),
                (5, Instruction::halt()),
            ],
        );
        let res = run(&img, cfg(), false).unwrap();
        assert_eq!(res.error, None);
        assert_eq!(res.stats.cycles, 2);
        assert_eq!(res.machine.register(1), 0);
    }

    #[test]
    fn reads_see_start_of_cycle_values() {
        // Register 5 sets 1.0 while register 9 tests it in the same cycle:
        // the test must see the old 0 and fall through to 10.
        let img = image(
            &[5, 9],
            &[
                (5, Instruction::wr1(1, 0)),
                (6, Instruction::halt()),
                (9, Instruction::cnd(1, 0)),
                (10, Instruction::wr1(1, 1)),
                (11, Instruction::halt()),
                (12, Instruction::halt()),
            ],
        );
        let mut m = machine(&img);
        m.step().unwrap();
        assert_eq!(m.active(), &[6, 10]);
        m.run().unwrap();
        assert_eq!(m.register(1), 0b11);
    }

    #[test]
    fn self_modification_changes_later_activation() {
        // Register 2 flips bit 0 of register 4 (the opcode's low bit), turning
        // `wr0 1.0` into `wr1 1.0` before register 4 runs.
        let img = image(
            &[2],
            &[
                (2, Instruction::wr1(4, 0)),
                (3, Instruction::jmp(4, 0)),
                (4, Instruction::wr0(1, 0)),
                (5, Instruction::halt()),
            ],
        );
        let res = run(&img, cfg(), false).unwrap();
        assert_eq!(res.error, None);
        assert_eq!(res.machine.register(1), 1);
    }

    #[test]
    fn address_overflow_on_fall_off() {
        let img = image(&[15], &[(15, Instruction::wr1(1, 0))]);
        let res = run(&img, cfg(), false).unwrap();
        assert_eq!(res.error.unwrap().kind, MachineErrorKind::AddressOverflow(15));
        let img = image(&[14], &[(14, Instruction::cnd(1, 0))]);
        let mut m = machine(&img);
        m.set_register(1, 1);
        assert_eq!(m.run().unwrap_err().kind, MachineErrorKind::AddressOverflow(14));
    }

    #[test]
    fn guard_reports_data_execution() {
        let mut img = image(&[2], &[(2, Instruction::jmp(3, 0))]);
        img.words.insert(3, 0);
        img.data.insert(3);
        let guarded = cfg().with_guard_checks(true);
        let res = run(&img, guarded, false).unwrap();
        let err = res.error.unwrap();
        assert_eq!(err.kind, MachineErrorKind::DataExecution(3));
        assert_eq!(err.cycle, 1);
        // Off by default: the zero word runs as `wr0 0.0`.
        assert!(run(&img, cfg(), false).unwrap().error.is_some_and(|e| e.kind != MachineErrorKind::DataExecution(3)));
    }

    #[test]
    fn reset_restores_touched_registers() {
        let img = image(&[2], &[(2, Instruction::wr1(1, 0)), (3, Instruction::halt())]);
        let mut m = machine(&img);
        m.set_register(7, 99);
        m.run().unwrap();
        m.reset(&img);
        assert_eq!(m.register(1), 0);
        assert_eq!(m.register(7), 0);
        assert_eq!(m.active(), &[2]);
    }

    #[test]
    fn trace_replay_matches_final_state() {
        let img = image(
            &[2],
            &[
                (2, Instruction::jmp(3, 1)),
                (3, Instruction::jmp(5, 0)),
                (4, Instruction::jmp(7, 0)),
                (5, Instruction::wr1(1, 0)),
                (6, Instruction::halt()),
                (7, Instruction::wr1(1, 1)),
                (8, Instruction::halt()),
            ],
        );
        let res = run(&img, cfg(), true).unwrap();
        assert_eq!(res.error, None);
        let regs = replay(&img, res.trace.as_ref().unwrap()).unwrap();
        assert_eq!(regs, res.machine.registers());
        assert_eq!(res.stats.peak_activation, 2);
    }

    #[test]
    fn dump_state_is_loadable_while_running() {
        let img = image(&[2], &[(2, Instruction::wr1(1, 0)), (3, Instruction::halt())]);
        let mut m = machine(&img);
        m.step().unwrap();
        let text = dump_state(&m);
        let again = Image::parse(&text, cfg().geometry).unwrap();
        assert_eq!(again.entry, vec![3]);
        assert_eq!(again.word(1), 1);
    }
}
