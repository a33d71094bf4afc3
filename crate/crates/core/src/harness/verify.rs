use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::machine::{Image, Machine, MachineConfig, MachineError};
use crate::spacec::Interface;

pub const DEFAULT_BIT_BUDGET: u32 = 16;
pub const DEFAULT_SAMPLES: u64 = 10_000;

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exhaustive,
    Sampled { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Enumerate every input when the inputs total at most this many bits.
    pub bit_budget: u32,
    /// Case count when sampling.
    pub samples: u64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            bit_budget: DEFAULT_BIT_BUDGET,
            samples: DEFAULT_SAMPLES,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaseFailure {
    pub inputs: Vec<u64>,
    pub expected: Vec<u64>,
    pub got: Result<Vec<u64>, MachineError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub module: String,
    pub mode: Mode,
    pub cases: u64,
    pub passed: u64,
    /// Failures in input order.
    pub failures: Vec<CaseFailure>,
    pub machine_errors: u64,
    pub cycles_min: u64,
    pub cycles_max: u64,
    pub cycles_mean: f64,
    pub peak_activation: usize,
    input_names: Vec<String>,
    output_names: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn describe(&self, f: &CaseFailure) -> String {
        let ins = join(&self.input_names, &f.inputs);
        match &f.got {
            Ok(got) => format!(
                "mismatch {ins}: expected {} got {}",
                join(&self.output_names, &f.expected),
                join(&self.output_names, got)
            ),
            Err(e) => format!("machine error {e} with {ins}"),
        }
    }
}

fn join(names: &[String], values: &[u64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.is_ok() { "ok" } else { "FAILED" };
        writeln!(f, "{}/{} {status}", self.passed, self.cases)?;
        match self.mode {
            Mode::Exhaustive => writeln!(f, "mode exhaustive")?,
            Mode::Sampled { seed } => writeln!(f, "mode sampled samples={} seed={seed}", self.cases)?,
        }
        writeln!(
            f,
            "cycles min={} max={} mean={:.2} peak_activation={}",
            self.cycles_min, self.cycles_max, self.cycles_mean, self.peak_activation
        )?;
        if self.machine_errors > 0 {
            writeln!(f, "machine errors {}", self.machine_errors)?;
        }
        for fail in self.failures.iter().take(10) {
            writeln!(f, "{}", self.describe(fail))?;
        }
        if self.failures.len() > 10 {
            writeln!(f, "... {} more", self.failures.len() - 10)?;
        }
        Ok(())
    }
}

struct CaseResult {
    failure: Option<CaseFailure>,
    cycles: u64,
    peak: usize,
}

fn run_case(
    m: &mut Machine,
    image: &Image,
    iface: &Interface,
    inputs: Vec<u64>,
    oracle: &(impl Fn(&[u64]) -> Vec<u64> + Sync),
) -> CaseResult {
    m.reset(image);
    for (p, v) in iface.inputs.iter().zip(&inputs) {
        m.set_register(p.reg, *v);
    }
    let expected = oracle(&inputs);
    match m.run() {
        Ok(stats) => {
            let got: Vec<u64> = iface.outputs.iter().map(|p| m.register(p.reg)).collect();
            CaseResult {
                failure: (got != expected).then(|| CaseFailure {
                    inputs,
                    expected,
                    got: Ok(got),
                }),
                cycles: stats.cycles,
                peak: stats.peak_activation,
            }
        }
        Err(e) => CaseResult {
            failure: Some(CaseFailure {
                inputs,
                expected,
                got: Err(e),
            }),
            cycles: m.cycle(),
            peak: m.stats().peak_activation,
        },
    }
}

/// Splits case index `c` into per-input values, first input lowest.
fn unpack(c: u64, widths: &[u32]) -> Vec<u64> {
    let mut shift = 0;
    widths
        .iter()
        .map(|&w| {
            let v = if shift >= 64 { 0 } else { (c >> shift) & crate::spacec::mask_bits(w) };
            shift += w;
            v
        })
        .collect()
}

/// Runs `image` on every input assignment (or on `opts.samples` seeded
/// random ones when the inputs exceed `opts.bit_budget` bits) and compares
/// the outputs with `oracle`. Cases run on parallel machines; results are
/// aggregated in input order.
pub fn verify(
    image: &Image,
    iface: &Interface,
    oracle: impl Fn(&[u64]) -> Vec<u64> + Sync,
    config: MachineConfig,
    opts: VerifyOptions,
) -> VerifyReport {
    let widths: Vec<u32> = iface.inputs.iter().map(|p| p.width).collect();
    let bits = iface.input_bits();
    let (mode, cases): (Mode, Vec<Vec<u64>>) = if bits <= opts.bit_budget {
        (Mode::Exhaustive, (0..1u64 << bits).map(|c| unpack(c, &widths)).collect())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let cases = (0..opts.samples)
            .map(|_| widths.iter().map(|&w| rng.gen::<u64>() & crate::spacec::mask_bits(w)).collect())
            .collect();
        (Mode::Sampled { seed: opts.seed }, cases)
    };
    let results: Vec<CaseResult> = cases
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut m = Machine::with_image(config, image).expect("image matches config");
            chunk
                .iter()
                .map(|ins| run_case(&mut m, image, iface, ins.clone(), &oracle))
                .collect::<Vec<_>>()
        })
        .collect();

    let n = results.len() as u64;
    let cycles_min = results.iter().map(|r| r.cycles).min().unwrap_or(0);
    let cycles_max = results.iter().map(|r| r.cycles).max().unwrap_or(0);
    let cycles_sum: u64 = results.iter().map(|r| r.cycles).sum();
    let peak_activation = results.iter().map(|r| r.peak).max().unwrap_or(0);
    let failures: Vec<CaseFailure> = results.into_iter().filter_map(|r| r.failure).collect();
    VerifyReport {
        module: iface.module.clone(),
        mode,
        cases: n,
        passed: n - failures.len() as u64,
        machine_errors: failures.iter().filter(|f| f.got.is_err()).count() as u64,
        failures,
        cycles_min,
        cycles_max,
        cycles_mean: if n == 0 { 0.0 } else { cycles_sum as f64 / n as f64 },
        peak_activation,
        input_names: iface.inputs.iter().map(|p| p.name.clone()).collect(),
        output_names: iface.outputs.iter().map(|p| p.name.clone()).collect(),
    }
}

/// [`verify`] with the default sample count and seed.
pub fn verify_exhaustive(
    image: &Image,
    iface: &Interface,
    oracle: impl Fn(&[u64]) -> Vec<u64> + Sync,
    config: MachineConfig,
    bit_budget: u32,
) -> VerifyReport {
    verify(
        image,
        iface,
        oracle,
        config,
        VerifyOptions {
            bit_budget,
            ..VerifyOptions::default()
        },
    )
}
