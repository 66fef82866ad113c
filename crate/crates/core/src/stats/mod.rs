//! Statistical tests and the Monte Carlo suites that check the sampled and
//! composed objects against their exact laws.

mod gof;
mod suites;

pub use gof::{
    binomial_test, chi_square_homogeneity, chi_square_test, dispersion_test, exponential_cdf,
    independence_test, kolmogorov_sf, ks_test, mean_test, normal_cdf, rank_correlation_test,
    z_test, GofResult, MIN_EXPECTED, MIN_INDEPENDENCE_PAIRS, MIN_KS_SAMPLES,
};
pub use suites::{
    composed_envelope_mismatches, exact_routes, never_returning, run_suite, suite_info, SuiteInfo,
    SUITES, SUITE_IDS,
};

use std::fmt;
use std::io::Write;

use thiserror::Error;

use crate::compose::ComposeError;
use crate::decompose::DecomposeError;
use crate::exact::ExactError;
use crate::forest::{format_f64, ForestError};
use crate::samplers::SampleError;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, have {have}")]
    TooFewSamples { needed: usize, have: usize },
    #[error("only one class left after merging")]
    SingleClass,
    #[error("{0}")]
    InvalidPmf(String),
    #[error("non-finite sample")]
    NonFinite,
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("{0}")]
    BadParams(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// What a test is meant to do: accept the law it checks, or (for negative
/// controls) reject it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    Accept,
    Reject,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    /// `None` for exact checks, which pass when `statistic <= threshold`.
    pub p_value: Option<f64>,
    /// For accepting tests the p-value must exceed it; for negative
    /// controls it must fall below it.
    pub threshold: f64,
    pub n: usize,
    pub seed: u64,
    pub expectation: Expectation,
    pub note: String,
}

/// Significance level of the accepting tests.
pub const ALPHA: f64 = 0.01;
/// Two-sided p-value of a 3 sigma deviation.
pub const THREE_SIGMA: f64 = 0.002_699_796_063_260_2;

impl TestReport {
    pub fn accept(name: impl Into<String>, r: GofResult, threshold: f64, seed: u64) -> Self {
        TestReport {
            name: name.into(),
            statistic: r.statistic,
            p_value: Some(r.p_value),
            threshold,
            n: r.n,
            seed,
            expectation: Expectation::Accept,
            note: String::new(),
        }
    }

    pub fn reject(name: impl Into<String>, r: GofResult, threshold: f64, seed: u64) -> Self {
        TestReport {
            expectation: Expectation::Reject,
            ..Self::accept(name, r, threshold, seed)
        }
    }

    /// A deterministic check counting `mismatches` out of `n` cases.
    pub fn exact(name: impl Into<String>, mismatches: usize, n: usize, seed: u64) -> Self {
        TestReport {
            name: name.into(),
            statistic: mismatches as f64,
            p_value: None,
            threshold: 0.0,
            n,
            seed,
            expectation: Expectation::Accept,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn verdict(&self) -> Verdict {
        let ok = match (self.p_value, self.expectation) {
            (None, _) => self.statistic <= self.threshold,
            (Some(p), Expectation::Accept) => p > self.threshold,
            (Some(p), Expectation::Reject) => p < self.threshold,
        };
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    pub fn line(&self) -> String {
        let p = match self.p_value {
            Some(p) => format!("p={p:.4e}"),
            None => "exact".to_string(),
        };
        let expect = match self.expectation {
            Expectation::Accept => "",
            Expectation::Reject => " (expected rejection)",
        };
        let note = if self.note.is_empty() {
            String::new()
        } else {
            format!(" [{}]", self.note)
        };
        format!(
            "{:<4} {}  stat={:.6}  {}  threshold={}  n={}  seed={}{}{}",
            self.verdict(),
            self.name,
            self.statistic,
            p,
            self.threshold,
            self.n,
            self.seed,
            expect,
            note
        )
    }
}

pub fn write_reports_csv<W: Write>(reports: &[TestReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "name,statistic,p,verdict,seed,n")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            format_f64(r.statistic),
            r.p_value.map(format_f64).unwrap_or_default(),
            r.verdict(),
            r.seed,
            r.n
        )?;
    }
    Ok(())
}
