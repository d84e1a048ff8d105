//! Latency benchmarking over a synthetic corpus.
//!
//! Two headline metrics are kept deliberately separate:
//! [`savings_fraction`] is `1 - t_new / t_baseline` (reduction against a slower
//! process) and [`time_ratio`] is `t_new / t_baseline`. Published comparisons
//! call both of them "time savings".

mod corpus;
mod harness;
mod table;

pub use corpus::{generate_corpus, Layout, SyntheticDoc};
pub use harness::{run_benchmark, BenchConfig, BenchReport, StageStats, TimingSample, STAGE_NAMES};
pub use table::{load_external_rows, render_comparison, render_comparison_with, ExternalRow};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("baseline time must be positive, got {0}")]
    NonpositiveBaseline(f64),
    #[error("measured time must be non-negative and finite, got {0}")]
    InvalidTime(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("runs must be >= 1")]
    NoRuns,
    #[error("benchmark run {run} failed on {document}: {status}")]
    PipelineFailure {
        run: usize,
        document: String,
        status: String,
    },
    #[error(transparent)]
    Pipeline(#[from] crate::orchestrator::PipelineError),
    #[error("I/O error: {0}")]
    Io(String),
}

fn check_times(t_baseline: f64, t_new: f64) -> Result<(), BenchError> {
    if !(t_baseline > 0.0 && t_baseline.is_finite()) {
        return Err(BenchError::NonpositiveBaseline(t_baseline));
    }
    if !(t_new >= 0.0 && t_new.is_finite()) {
        return Err(BenchError::InvalidTime(t_new));
    }
    Ok(())
}

/// `1 - t_new / t_baseline`.
pub fn savings_fraction(t_baseline: f64, t_new: f64) -> Result<f64, BenchError> {
    check_times(t_baseline, t_new)?;
    Ok(1.0 - t_new / t_baseline)
}

/// `t_new / t_baseline`.
pub fn time_ratio(t_new: f64, t_baseline: f64) -> Result<f64, BenchError> {
    check_times(t_baseline, t_new)?;
    Ok(t_new / t_baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn against_itself() {
        for x in [0.001, 1.0, 160.0, 1e9] {
            assert_eq!(savings_fraction(x, x).unwrap(), 0.0);
            assert_eq!(time_ratio(x, x).unwrap(), 1.0);
        }
    }

    #[test]
    fn bad_baselines() {
        assert!(matches!(
            savings_fraction(0.0, 1.0),
            Err(BenchError::NonpositiveBaseline(_))
        ));
        assert!(matches!(
            time_ratio(1.0, -2.0),
            Err(BenchError::NonpositiveBaseline(_))
        ));
        assert!(matches!(
            time_ratio(-1.0, 2.0),
            Err(BenchError::InvalidTime(_))
        ));
        assert!(savings_fraction(f64::NAN, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn complementary(b in 1e-6f64..1e6, n in 0.0f64..1e6) {
            let s = savings_fraction(b, n).unwrap();
            let r = time_ratio(n, b).unwrap();
            prop_assert!((s + r - 1.0).abs() <= 1e-12 * r.max(1.0));
        }
    }
}
