//! The line-oriented image text format.
//!
//! ```text
//! config n=16 w=16      # optional header, must precede everything else
//! entry 2
//! reg 2 = wr1 1.0
//! reg 3 = jmp 0 0
//! reg 1 = data 0
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{ConfigError, EncodeError, Geometry, Instruction, Opcode};

/// Initial register contents, entry activation set and guard overlay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub geometry: Geometry,
    /// Explicitly defined registers. Everything else starts at zero.
    pub words: BTreeMap<usize, u64>,
    /// Registers activated in the first cycle, ascending.
    pub entry: Vec<usize>,
    /// Registers declared as data; activating one is a guard violation.
    pub data: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ImageError {
    pub line: usize,
    pub kind: ImageErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageErrorKind {
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("register index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("register {0} defined twice")]
    DuplicateRegister(usize),
    #[error("no entry directive")]
    NoEntry,
    #[error("register {0} listed twice in the entry set")]
    DuplicateEntry(usize),
    #[error("register 0 is the activation sink and cannot be an entry")]
    SinkEntry,
    #[error("config header must come before any other directive")]
    LateConfig,
    #[error("data value {0} does not fit in a word")]
    ValueTooWide(u64),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Operand(#[from] EncodeError),
}

impl ImageError {
    fn new(line: usize, kind: ImageErrorKind) -> Self {
        Self { line, kind }
    }
}

/// A register definition as it appears on the right of `reg <idx> =`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegisterDef {
    Instruction(Instruction),
    Data(u64),
}

impl Image {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            words: BTreeMap::new(),
            entry: Vec::new(),
            data: BTreeSet::new(),
        }
    }

    pub fn word(&self, idx: usize) -> u64 {
        self.words.get(&idx).copied().unwrap_or(0)
    }

    /// Checks entry-set and index invariants. Parsing already enforces these;
    /// images assembled in memory go through here too.
    pub fn validate(&self) -> Result<(), ImageErrorKind> {
        let n = self.geometry.n_registers();
        if self.entry.is_empty() {
            return Err(ImageErrorKind::NoEntry);
        }
        let mut seen = BTreeSet::new();
        for &e in &self.entry {
            if e == 0 {
                return Err(ImageErrorKind::SinkEntry);
            }
            if e >= n {
                return Err(ImageErrorKind::IndexOutOfRange(e));
            }
            if !seen.insert(e) {
                return Err(ImageErrorKind::DuplicateEntry(e));
            }
        }
        for (&idx, &word) in &self.words {
            if idx >= n {
                return Err(ImageErrorKind::IndexOutOfRange(idx));
            }
            if word & !self.geometry.word_mask() != 0 {
                return Err(ImageErrorKind::ValueTooWide(word));
            }
        }
        if let Some(&d) = self.data.iter().find(|&&d| d >= n) {
            return Err(ImageErrorKind::IndexOutOfRange(d));
        }
        Ok(())
    }

    /// How a defined register is rendered: data-marked registers and words
    /// that do not round-trip through decode are emitted as `data`.
    pub fn register_def(&self, idx: usize) -> RegisterDef {
        let word = self.word(idx);
        if self.data.contains(&idx) {
            return RegisterDef::Data(word);
        }
        let ins = Instruction::decode(word, self.geometry);
        match ins.encode(self.geometry) {
            Ok(w) if w == word => RegisterDef::Instruction(ins),
            _ => RegisterDef::Data(word),
        }
    }

    /// Parses image text. A `config` header overrides `default_geometry`.
    pub fn parse(text: &str, default_geometry: Geometry) -> Result<Self, ImageError> {
        let mut image = Image::new(default_geometry);
        let mut entry_seen = false;
        let mut anything = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |kind| ImageError::new(line_no, kind);
            let mut words = line.split_whitespace();
            match words.next() {
                Some("config") => {
                    if anything {
                        return Err(err(ImageErrorKind::LateConfig));
                    }
                    image.geometry = parse_config(words).map_err(err)?;
                }
                Some("entry") => {
                    let mut any = false;
                    for tok in words {
                        let idx = parse_uint(tok).map_err(err)? as usize;
                        image.entry.push(idx);
                        any = true;
                    }
                    if !any {
                        return Err(err(ImageErrorKind::Malformed("entry needs at least one index".into())));
                    }
                    entry_seen = true;
                }
                Some("reg") => {
                    let (idx, def) = parse_reg_line(line).map_err(err)?;
                    if idx >= image.geometry.n_registers() {
                        return Err(err(ImageErrorKind::IndexOutOfRange(idx)));
                    }
                    if image.words.contains_key(&idx) {
                        return Err(err(ImageErrorKind::DuplicateRegister(idx)));
                    }
                    let word = encode_def(def, image.geometry).map_err(err)?;
                    image.words.insert(idx, word);
                    if matches!(def, RegisterDef::Data(_)) {
                        image.data.insert(idx);
                    }
                }
                Some(other) => {
                    return Err(err(ImageErrorKind::Malformed(format!("unknown directive `{other}`"))));
                }
                None => unreachable!(),
            }
            anything = true;
        }
        if !entry_seen {
            return Err(ImageError::new(text.lines().count().max(1), ImageErrorKind::NoEntry));
        }
        // Entry problems are reported against the last line; the set is
        // only complete once every directive has been read.
        let last = text.lines().count().max(1);
        let mut sorted = image.entry.clone();
        sorted.sort_unstable();
        image.entry = sorted;
        image.validate().map_err(|k| ImageError::new(last, k))?;
        Ok(image)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "config n={} w={}",
            self.geometry.n_registers(),
            self.geometry.word_width()
        )
        .unwrap();
        write!(out, "entry").unwrap();
        for e in &self.entry {
            write!(out, " {e}").unwrap();
        }
        out.push('\n');
        for &idx in self.words.keys() {
            writeln!(out, "reg {idx} = {}", format_def(self.register_def(idx))).unwrap();
        }
        out
    }
}

pub fn format_def(def: RegisterDef) -> String {
    match def {
        RegisterDef::Instruction(ins) => ins.to_string(),
        RegisterDef::Data(v) => format!("data {v}"),
    }
}

pub fn encode_def(def: RegisterDef, geometry: Geometry) -> Result<u64, ImageErrorKind> {
    match def {
        RegisterDef::Instruction(ins) => Ok(ins.encode(geometry)?),
        RegisterDef::Data(v) => {
            if v & !geometry.word_mask() != 0 {
                Err(ImageErrorKind::ValueTooWide(v))
            } else {
                Ok(v)
            }
        }
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(p) => &line[..p],
        None => line,
    }
}

pub(crate) fn parse_uint(tok: &str) -> Result<u64, ImageErrorKind> {
    tok.parse::<u64>()
        .map_err(|_| ImageErrorKind::Malformed(format!("expected an unsigned integer, got `{tok}`")))
}

fn parse_config<'a>(words: impl Iterator<Item = &'a str>) -> Result<Geometry, ImageErrorKind> {
    let mut n = None;
    let mut w = None;
    for tok in words {
        match tok.split_once('=') {
            Some(("n", v)) => n = Some(parse_uint(v)? as usize),
            Some(("w", v)) => w = Some(parse_uint(v)? as u32),
            _ => return Err(ImageErrorKind::Malformed(format!("bad config field `{tok}`"))),
        }
    }
    match (n, w) {
        (Some(n), Some(w)) => Ok(Geometry::new(n, w)?),
        _ => Err(ImageErrorKind::Malformed("config needs n=<int> w=<int>".into())),
    }
}

/// Parses `reg <idx> = <def>`.
pub(crate) fn parse_reg_line(line: &str) -> Result<(usize, RegisterDef), ImageErrorKind> {
    let rest = line.strip_prefix("reg").unwrap_or(line);
    let (idx, def) = rest
        .split_once('=')
        .ok_or_else(|| ImageErrorKind::Malformed("expected `reg <idx> = ...`".into()))?;
    let idx = parse_uint(idx.trim())? as usize;
    Ok((idx, parse_def(def.trim())?))
}

/// Parses `wr0 a.b | wr1 a.b | cnd a.b | jmp t o | data v`.
pub(crate) fn parse_def(text: &str) -> Result<RegisterDef, ImageErrorKind> {
    let mut words = text.split_whitespace();
    let head = words.next().unwrap_or("");
    let rest: Vec<&str> = words.collect();
    let malformed = || ImageErrorKind::Malformed(format!("bad register definition `{text}`"));
    if head == "data" {
        return match rest.as_slice() {
            [v] => Ok(RegisterDef::Data(parse_uint(v)?)),
            _ => Err(malformed()),
        };
    }
    let opcode = Opcode::from_mnemonic(head).ok_or_else(malformed)?;
    let (a, b) = match (opcode, rest.as_slice()) {
        (Opcode::Jmp, [t, o]) => (parse_uint(t)?, parse_uint(o)?),
        (Opcode::Jmp, _) => return Err(malformed()),
        (_, [ab]) => {
            let (a, b) = ab.split_once('.').ok_or_else(malformed)?;
            (parse_uint(a)?, parse_uint(b)?)
        }
        _ => return Err(malformed()),
    };
    Ok(RegisterDef::Instruction(Instruction {
        opcode,
        a: a as usize,
        b: b as usize,
    }))
}
