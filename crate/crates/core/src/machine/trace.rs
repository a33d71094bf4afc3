//! Per-cycle trace records and their text form:
//!
//! `cycle=<n> active=[i,j] writes=[(r,b,v),...] next=[...]`
//!
//! A run that ends in a machine error appends `error=<kind> cycle=<n>`.

use std::fmt;

use thiserror::Error;

/// One committed bit write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitWrite {
    pub reg: usize,
    pub bit: usize,
    pub value: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: u64,
    pub active: Vec<usize>,
    pub writes: Vec<BitWrite>,
    pub next: Vec<usize>,
}

/// A parsed trace file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// `(kind, cycle)` of the terminating machine error, if any.
    pub error: Option<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[usize]) -> fmt::Result {
    f.write_str("[")?;
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    f.write_str("]")
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle={} active=", self.cycle)?;
        write_list(f, &self.active)?;
        f.write_str(" writes=[")?;
        for (i, w) in self.writes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "({},{},{})", w.reg, w.bit, u8::from(w.value))?;
        }
        f.write_str("] next=")?;
        write_list(f, &self.next)
    }
}

impl Trace {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        if let Some((kind, cycle)) = &self.error {
            out.push_str(&format!("error={kind} cycle={cycle}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut trace = Trace::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| TraceError {
                line: i + 1,
                message: message.to_string(),
            };
            if trace.error.is_some() {
                return Err(err("records after the error line"));
            }
            if let Some(rest) = line.strip_prefix("error=") {
                let (kind, cycle) = rest.rsplit_once(" cycle=").ok_or_else(|| err("bad error line"))?;
                let cycle = cycle.parse().map_err(|_| err("bad error cycle"))?;
                trace.error = Some((kind.to_string(), cycle));
                continue;
            }
            trace.records.push(parse_record(line).map_err(|m| err(&m))?);
        }
        Ok(trace)
    }
}

fn parse_record(line: &str) -> Result<TraceRecord, String> {
    let rest = line.strip_prefix("cycle=").ok_or("expected `cycle=`")?;
    let (cycle, rest) = rest.split_once(" active=").ok_or("expected ` active=`")?;
    let (active, rest) = rest.split_once(" writes=").ok_or("expected ` writes=`")?;
    let (writes, next) = rest.split_once(" next=").ok_or("expected ` next=`")?;
    Ok(TraceRecord {
        cycle: cycle.parse().map_err(|_| format!("bad cycle `{cycle}`"))?,
        active: parse_list(active)?,
        writes: parse_writes(writes)?,
        next: parse_list(next)?,
    })
}

fn brackets(s: &str) -> Result<&str, String> {
    s.trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list, got `{s}`"))
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    let inner = brackets(s)?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad index `{x}`")))
        .collect()
}

fn parse_writes(s: &str) -> Result<Vec<BitWrite>, String> {
    let inner = brackets(s)?;
    let mut out = Vec::new();
    let mut rest = inner.trim();
    while !rest.is_empty() {
        let body = rest.strip_prefix('(').ok_or("expected `(`")?;
        let (tuple, tail) = body.split_once(')').ok_or("expected `)`")?;
        let parts: Vec<&str> = tuple.split(',').map(str::trim).collect();
        let [r, b, v] = parts.as_slice() else {
            return Err(format!("bad write `({tuple})`"));
        };
        let value = match *v {
            "0" => false,
            "1" => true,
            _ => return Err(format!("bad write value `{v}`")),
        };
        out.push(BitWrite {
            reg: r.parse().map_err(|_| format!("bad register `{r}`"))?,
            bit: b.parse().map_err(|_| format!("bad bit `{b}`"))?,
            value,
        });
        rest = tail.trim_start().trim_start_matches(',').trim_start();
    }
    Ok(out)
}
