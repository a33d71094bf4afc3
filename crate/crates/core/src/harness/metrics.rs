use std::fmt;

use thiserror::Error;

use crate::machine::Trace;

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub cycles: u64,
    pub peak_activation: usize,
    pub mean_activation: f64,
    /// Highest register index activated or written.
    pub footprint: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no cycles")]
    NoCycles,
}

pub fn metrics(trace: &Trace) -> Result<Metrics, MetricsError> {
    if trace.records.is_empty() {
        return Err(MetricsError::NoCycles);
    }
    let cycles = trace.records.len() as u64;
    let peak_activation = trace.records.iter().map(|r| r.active.len()).max().unwrap_or(0);
    let sum: usize = trace.records.iter().map(|r| r.active.len()).sum();
    let footprint = trace
        .records
        .iter()
        .flat_map(|r| r.active.iter().chain(&r.next).copied().chain(r.writes.iter().map(|w| w.reg)))
        .max()
        .unwrap_or(0);
    Ok(Metrics {
        cycles,
        peak_activation,
        mean_activation: sum as f64 / cycles as f64,
        footprint,
        error: trace.error.as_ref().map(|(kind, cycle)| format!("{kind} at cycle {cycle}")),
    })
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycles={}", self.cycles)?;
        writeln!(f, "peak_activation={}", self.peak_activation)?;
        writeln!(f, "mean_activation={:.3}", self.mean_activation)?;
        writeln!(f, "footprint={}", self.footprint)?;
        writeln!(f, "error={}", self.error.as_deref().unwrap_or("none"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_thread_two_cycles() {
        let t = Trace::parse("cycle=0 active=[1] writes=[(5,0,1)] next=[2]\ncycle=1 active=[2] writes=[] next=[]\n").unwrap();
        let m = metrics(&t).unwrap();
        assert_eq!((m.cycles, m.peak_activation, m.mean_activation, m.footprint), (2, 1, 1.0, 5));
        assert_eq!(m.error, None);
    }

    #[test]
    fn empty_trace_has_no_cycles() {
        assert_eq!(metrics(&Trace::default()), Err(MetricsError::NoCycles));
    }
}
