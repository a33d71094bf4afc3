//! Oracle verification of compiled modules and run metrics.

mod metrics;
mod verify;

pub use metrics::{metrics, Metrics, MetricsError};
pub use verify::{
    verify, verify_exhaustive, CaseFailure, Mode, VerifyOptions, VerifyReport, DEFAULT_BIT_BUDGET, DEFAULT_SAMPLES,
};
