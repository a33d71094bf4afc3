//! Command-line interface. Exit codes: 0 success, 1 user error, 2 machine
//! error. Every diagnostic names the failing stage.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::earth::{self, AsmOptions, SymbolMap};
use crate::harness::{self, VerifyOptions, DEFAULT_BIT_BUDGET, DEFAULT_SAMPLES};
use crate::interstring::{self, Algebra, DEFAULT_MAX_CELL_LEN};
use crate::machine::{self, Geometry, Image, MachineConfig, Trace};
use crate::spacec::{self, interpret};

#[derive(Parser, Debug)]
#[command(name = "synchronic", version, about = "Synchronic A-Ram toolchain")]
struct Cli {
    #[command(flatten)]
    machine: MachineArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct MachineArgs {
    /// Number of registers
    #[arg(long = "n", global = true, env = "SYNCHRONIC_N")]
    n_registers: Option<usize>,
    /// Word width in bits
    #[arg(long = "w", global = true, env = "SYNCHRONIC_W")]
    word_width: Option<u32>,
    /// Cycle limit for runs
    #[arg(long, global = true, env = "SYNCHRONIC_MAXCYCLES")]
    max_cycles: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble Earth source into an image
    Asm {
        file: PathBuf,
        /// Image output (default: stdout)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Symbol map output
        #[arg(long)]
        sym: Option<PathBuf>,
        /// Reject fan-out jumps that leave their macro region
        #[arg(long)]
        strict: bool,
    },
    /// Print an image as Earth source
    Disasm {
        image: PathBuf,
        #[arg(long)]
        sym: Option<PathBuf>,
    },
    /// Run an image
    Run {
        image: PathBuf,
        /// Write the cycle trace here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the final machine state here
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Report activation of data registers
        #[arg(long)]
        guard: bool,
    },
    /// Evaluate an interstring
    Eval {
        file: PathBuf,
        /// Input binding NAME=VALUE
        #[arg(long = "env", value_name = "NAME=VALUE")]
        env: Vec<String>,
    },
    /// Validate an interstring and report its dataflow DAG metrics
    Isdag {
        file: PathBuf,
        /// Names defined before the first layer
        #[arg(long = "input", value_name = "NAME")]
        inputs: Vec<String>,
    },
    /// Compile mini-Space to an image, symbol map and schedule report
    Spacec {
        file: PathBuf,
        /// Module to compile (default: the last one)
        #[arg(long)]
        module: Option<String>,
        /// Image output (default: the source path with extension .img)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a compiled module against the reference interpreter
    Verify {
        file: PathBuf,
        #[arg(long)]
        module: String,
        /// Enumerate all inputs up to this many input bits
        #[arg(long, conflicts_with = "samples")]
        exhaustive_bits: Option<u32>,
        /// Check this many seeded random cases instead
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Summarise a trace file
    Metrics { trace: PathBuf },
}

/// A failed command: exit code and one-line diagnostic.
struct Failure {
    code: i32,
    message: String,
}

fn user(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn machine_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read(path: &Path, stage: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| user(format!("{stage} error: cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| user(format!("codegen error: cannot write {}: {e}", path.display())))
}

impl MachineArgs {
    fn config(&self) -> Result<MachineConfig, Failure> {
        let d = Geometry::default();
        let g = Geometry::new(
            self.n_registers.unwrap_or(d.n_registers()),
            self.word_width.unwrap_or(d.word_width()),
        )
        .map_err(|e| user(format!("parse error: bad machine configuration: {e}")))?;
        let mut c = MachineConfig::new(g);
        if let Some(m) = self.max_cycles {
            c = c.with_max_cycles(m);
        }
        Ok(c)
    }
}

/// Runs the CLI on `args` (including the program name), writing results to
/// `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let summary: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage"))
                .filter(|l| !l.is_empty())
                .collect();
            let _ = writeln!(err, "parse error: {}", summary.join(" ").trim_start_matches("error: "));
            return 1;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let config = cli.machine.config()?;
    let emit = |out: &mut dyn Write, s: &str| -> Result<(), Failure> {
        out.write_all(s.as_bytes())
            .map_err(|e| user(format!("codegen error: cannot write output: {e}")))
    };
    match &cli.command {
        Command::Asm {
            file,
            output,
            sym,
            strict,
        } => {
            let src = read(file, "parse")?;
            let asm = earth::assemble(&src, config.geometry, AsmOptions { strict_regions: *strict })
                .map_err(|e| user(format!("{} error at line {}: {}", asm_stage(&e.kind), e.line, e.kind)))?;
            match output {
                Some(p) => write(p, &asm.image.to_text())?,
                None => emit(out, &asm.image.to_text())?,
            }
            if let Some(p) = sym {
                write(p, &asm.symbols.to_text())?;
            }
        }
        Command::Disasm { image, sym } => {
            let img = load_image(image, config)?;
            let symbols = match sym {
                Some(p) => Some(SymbolMap::parse(&read(p, "parse")?).map_err(|e| user(format!("parse error: {e}")))?),
                None => None,
            };
            emit(out, &earth::disassemble(&img, symbols.as_ref()))?;
        }
        Command::Run {
            image,
            trace,
            dump,
            guard,
        } => {
            let img = load_image(image, config)?;
            let mc = MachineConfig {
                geometry: img.geometry,
                guard_checks: *guard,
                ..config
            };
            let r = machine::run(&img, mc, trace.is_some()).map_err(|e| user(format!("parse error: {e}")))?;
            if let Some(p) = trace {
                let t = Trace {
                    records: r.trace.clone().unwrap_or_default(),
                    error: r.error.map(|e| (e.kind.to_string(), e.cycle)),
                };
                write(p, &t.to_text())?;
            }
            if let Some(p) = dump {
                write(p, &machine::dump_state(&r.machine))?;
            }
            if let Some(e) = r.error {
                return Err(machine_failure(format!("machine error: {e}")));
            }
            emit(
                out,
                &format!(
                    "halted cycles={} peak_activation={} mean_activation={:.3}\n",
                    r.stats.cycles,
                    r.stats.peak_activation,
                    r.stats.mean_activation()
                ),
            )?;
        }
        Command::Eval { file, env } => {
            let is = parse_is(file)?;
            let mut bindings = BTreeMap::new();
            for kv in env {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| user(format!("parse error: --env expects NAME=VALUE, got `{kv}`")))?;
                let v = machine::parse_uint(v.trim())
                    .map_err(|_| user(format!("parse error: bad value in `{kv}`")))?;
                bindings.insert(k.trim().to_string(), v);
            }
            let algebra = Algebra::standard(config.geometry.word_width());
            let result = interstring::evaluate(&is, &algebra, &bindings)
                .map_err(|e| user(format!("type error: {e}")))?;
            let written: BTreeSet<&str> = is.cells().filter_map(|(_, _, c)| c.dst()).collect();
            let line: Vec<String> = written.iter().map(|n| format!("{n}={}", result[*n])).collect();
            emit(out, &format!("{}\n", line.join(" ")))?;
        }
        Command::Isdag { file, inputs } => {
            let is = parse_is(file)?;
            let env: BTreeSet<String> = if inputs.is_empty() {
                free_names(&is)
            } else {
                inputs.iter().cloned().collect()
            };
            let report = interstring::validate(&is, None, &env);
            if let Some(f) = report.findings.first() {
                return Err(user(format!("type error: {f}")));
            }
            emit(out, &interstring::to_dag(&is).metrics.to_text())?;
        }
        Command::Spacec { file, module, output } => {
            let src = read(file, "parse")?;
            let c = spacec::compile(&src, module.as_deref(), &config).map_err(|e| user(e.to_string()))?;
            let img_path = output.clone().unwrap_or_else(|| file.with_extension("img"));
            write(&img_path, &c.image.to_text())?;
            write(&img_path.with_extension("sym"), &c.symbols.to_text())?;
            write(&img_path.with_extension("sched"), &c.schedule.to_text())?;
            let used: usize = c.alloc.instances.iter().map(|i| i.region.len()).sum::<usize>()
                + c.alloc.io.map_or(0, |r| r.len());
            emit(
                out,
                &format!(
                    "compiled {} -> {} ({} registers, {} instances, cycles={})\n",
                    c.interface.module,
                    img_path.display(),
                    used,
                    c.alloc.instances.len(),
                    c.schedule.latency
                ),
            )?;
        }
        Command::Verify {
            file,
            module,
            exhaustive_bits,
            samples,
            seed,
        } => {
            let src = read(file, "parse")?;
            let ast = spacec::parse_space(&src).map_err(|e| user(e.to_string()))?;
            let typed = spacec::typecheck(&ast, config.geometry.word_width()).map_err(|e| user(e.to_string()))?;
            let c = spacec::compile_typed(&typed, module, &config).map_err(|e| user(e.to_string()))?;
            let callee = typed.resolve(module).expect("compiled module resolves");
            let opts = VerifyOptions {
                bit_budget: match samples {
                    Some(_) => 0,
                    None => exhaustive_bits.unwrap_or(DEFAULT_BIT_BUDGET),
                },
                samples: samples.unwrap_or(DEFAULT_SAMPLES),
                seed: *seed,
            };
            let report = harness::verify(
                &c.image,
                &c.interface,
                |ins| interpret(&typed, callee, ins),
                config.with_guard_checks(true),
                opts,
            );
            emit(out, &report.to_string())?;
            if report.machine_errors > 0 {
                return Err(machine_failure(format!(
                    "machine error: {}",
                    report.describe(report.failures.iter().find(|f| f.got.is_err()).expect("counted"))
                )));
            }
            if let Some(f) = report.failures.first() {
                return Err(user(format!("codegen error: verification failed, {}", report.describe(f))));
            }
        }
        Command::Metrics { trace } => {
            let text = read(trace, "parse")?;
            let t = Trace::parse(&text).map_err(|e| user(format!("parse error at line {}: {}", e.line, e.message)))?;
            let m = harness::metrics(&t).map_err(|e| user(format!("parse error: {e}")))?;
            emit(out, &m.to_string())?;
        }
    }
    Ok(())
}

fn asm_stage(kind: &earth::AsmErrorKind) -> &'static str {
    use earth::AsmErrorKind as K;
    match kind {
        K::Syntax(_) | K::Config(_) => "parse",
        K::OutOfRegisters(_) => "alloc",
        _ => "codegen",
    }
}

fn load_image(path: &Path, config: MachineConfig) -> Result<Image, Failure> {
    let text = read(path, "parse")?;
    machine::load_image(&text, config.geometry).map_err(|e| user(format!("parse error: {e}")))
}

fn parse_is(path: &Path) -> Result<interstring::Interstring, Failure> {
    let text = read(path, "parse")?;
    interstring::parse_interstring(&text, DEFAULT_MAX_CELL_LEN).map_err(|e| user(format!("parse error: {e}")))
}

/// Names read before any layer writes them.
fn free_names(is: &interstring::Interstring) -> BTreeSet<String> {
    let mut defined = BTreeSet::new();
    let mut free = BTreeSet::new();
    for layer in &is.layers {
        for cell in layer {
            for s in cell.sources() {
                if let Some(n) = s.name() {
                    if !defined.contains(n) {
                        free.insert(n.to_string());
                    }
                }
            }
        }
        defined.extend(layer.iter().filter_map(|c| c.dst().map(str::to_string)));
    }
    free
}
