//! Acceptance run: one PASS/FAIL line per criterion, details indented
//! underneath. Failed criteria are reported, not fatal, so the workspace
//! tests stay green on a statistical miss; set `ACCEPTANCE_STRICT=1` to exit
//! non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

use bforest_core::exact::{colored_tree_prob, enumerate_colored_shapes};
use bforest_core::samplers::RngStream;
use bforest_core::stats::{
    binomial_test, composed_envelope_mismatches, exact_routes, never_returning, run_suite,
    Expectation, StatsError, TestReport,
};

const SEED: u64 = 0;

struct Outcome {
    passed: bool,
    details: Vec<String>,
}

impl Outcome {
    fn from_reports(reports: &[TestReport]) -> Self {
        Outcome {
            passed: reports.iter().all(TestReport::passed),
            details: reports.iter().map(detail).collect(),
        }
    }

    fn and(mut self, other: Outcome) -> Self {
        self.passed &= other.passed;
        self.details.extend(other.details);
        self
    }
}

/// A report line without the verdict word, so only criterion lines carry one.
fn detail(r: &TestReport) -> String {
    let p = r
        .p_value
        .map_or("exact".to_string(), |p| format!("p={p:.3e}"));
    let ok = if r.passed() { "ok" } else { "not ok" };
    let mut s = format!(
        "{ok}: {} stat={:.6} {p} threshold={} n={}",
        r.name, r.statistic, r.threshold, r.n
    );
    if r.expectation == Expectation::Reject {
        s.push_str(" (rejection expected)");
    }
    if !r.note.is_empty() {
        s.push_str(&format!(" [{}]", r.note));
    }
    s
}

fn suite(id: &str, params: &[f64], n: usize) -> Result<Outcome, StatsError> {
    Ok(Outcome::from_reports(&run_suite(id, params, n, SEED)?))
}

fn coding_round_trip() -> Result<Outcome, StatsError> {
    suite("prop2", &[], 10_000)
}

/// Both colouring formulas over every coloured shape with up to six leaves,
/// at 100 random parameter triples on a grid of sixteenths: exactly in
/// rational arithmetic and to 1e-12 relative in floating point.
fn colouring_routes() -> Result<Outcome, StatsError> {
    let mut rng = RngStream::new(SEED, 1000).rng();
    let shapes = enumerate_colored_shapes(6)?;
    let mut exact_bad = 0;
    let mut float_bad = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        // sixteenths keep the rationals small and the floats exact
        let l = rng.random_range(0..32) as f64 / 16.0;
        let m = l + rng.random_range(1..48) as f64 / 16.0;
        let t = m + rng.random_range(1..48) as f64 / 16.0;
        exact_bad += exact_routes(l, m, t, 6, SEED)?.statistic as usize;
        for s in &shapes {
            let p = colored_tree_prob(s, l, m, t)?;
            let rel = (p.composite - p.colored).abs() / p.colored.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            if rel > 1e-12 {
                float_bad += 1;
            }
        }
    }
    let cases = 100 * shapes.len();
    Ok(Outcome {
        passed: exact_bad == 0 && float_bad == 0,
        details: vec![
            format!("{} shapes x 100 triples", shapes.len()),
            format!("rational mismatches {exact_bad} of {cases}"),
            format!(
                "float mismatches above 1e-12 relative {float_bad} of {cases}, worst {worst:.2e}"
            ),
        ],
    })
}

fn never_returning_mass() -> Result<Outcome, StatsError> {
    let n = 100_000;
    let r = never_returning(1.0, 2.0, 3.0, n, SEED)?;
    let mass = 0.5;
    let frac = mass + r.statistic * (mass * (1.0 - mass) / n as f64).sqrt();
    let escaped = (frac * n as f64).round() as u64;
    let quarter = binomial_test(escaped, n as u64, 0.25)?;
    let mut out = Outcome::from_reports(&[r]);
    out.details.push(format!(
        "observed fraction {frac:.4}; 2 lambda / (theta + lambda) = 1/2 at (1, 3); the value 1/4 is rejected, p={:.3e}",
        quarter.p_value
    ));
    Ok(out)
}

fn envelope_exactness() -> Result<Outcome, StatsError> {
    let mut details = Vec::new();
    let mut passed = true;
    for (l, m) in [(1.0, 2.0), (0.5, 3.0)] {
        let bad = composed_envelope_mismatches(l, m, 10_000, SEED)?;
        passed &= bad == 0;
        details.push(format!(
            "(lambda, mu) = ({l}, {m}): {bad} mismatches in 10000 constructions"
        ));
    }
    Ok(Outcome { passed, details })
}

/// Reduced sizes for the repeated null runs.
const CALIBRATION: &[(&str, usize)] = &[
    ("thm1", 4_000),
    ("prop1", 4_000),
    ("lemma1", 4_000),
    ("lemma2", 4_000),
    ("lemma3", 4_000),
    ("cor2", 4_000),
    ("lemma7", 4_000),
    ("thm2", 10_000),
    ("prop4", 10_000),
    ("lemma5", 10_000),
    ("thm3", 10_000),
    ("lemma6", 10_000),
    ("lemma9", 10_000),
    ("thm4", 10_000),
    ("donsker", 2_000),
];
const CALIBRATION_SEEDS: u64 = 50;

/// Every accepting test over 50 seeds at the suite defaults. The pooled
/// pass rate must reach 0.98, and no single test may fail more often than
/// its level makes plausible (binomial upper tail below 1e-3).
fn calibration() -> Result<Outcome, StatsError> {
    let mut tally: BTreeMap<String, (u64, u64, f64)> = BTreeMap::new();
    for &(id, n) in CALIBRATION {
        for seed in 1..=CALIBRATION_SEEDS {
            for r in run_suite(id, &[], n, seed)? {
                if r.expectation == Expectation::Reject || r.p_value.is_none() {
                    continue;
                }
                let e = tally.entry(r.name.clone()).or_insert((0, 0, r.threshold));
                e.0 += u64::from(!r.passed());
                e.1 += 1;
            }
        }
    }
    let (fails, runs) = tally.values().fold((0, 0), |(f, r), v| (f + v.0, r + v.1));
    let rate = 1.0 - fails as f64 / runs as f64;
    let mut suspicious = Vec::new();
    for (name, &(f, r, alpha)) in &tally {
        if f == 0 {
            continue;
        }
        let tail = Binomial::new(alpha, r).map(|b| b.sf(f - 1)).unwrap_or(0.0);
        if tail < 1e-3 {
            suspicious.push(format!("{name} failed {f} of {r} (tail p={tail:.2e})"));
        }
    }
    let mut details = vec![format!(
        "{} tests x {CALIBRATION_SEEDS} seeds: pooled pass rate {rate:.4} ({fails} failures in {runs} runs)",
        tally.len()
    )];
    let mut by_rate: Vec<_> = tally.iter().filter(|(_, v)| v.0 > 0).collect();
    by_rate.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(b.0)));
    for (name, v) in by_rate.iter().take(5) {
        details.push(format!("{name}: {} of {} failed", v.0, v.1));
    }
    details.extend(suspicious.iter().cloned());
    Ok(Outcome {
        passed: rate >= 0.98 && suspicious.is_empty(),
        details,
    })
}

type Check = fn() -> Result<Outcome, StatsError>;

fn criteria() -> Vec<(&'static str, Check)> {
    vec![
        (
            "walk/forest coding round trip on 10^4 forests",
            coding_round_trip,
        ),
        (
            "colouring formulas agree on shapes up to 6 leaves",
            colouring_routes,
        ),
        ("composed first tree is binary(lambda, theta)", || {
            Ok(suite("thm1", &[0.0, 1.0, 2.0], 100_000)?.and(suite(
                "thm1",
                &[1.0, 2.0, 4.0],
                100_000,
            )?))
        }),
        ("coloured first-tree frequencies", || {
            suite("prop1", &[0.0, 1.0, 2.0], 100_000)
        }),
        ("offspring tables and trunk colours", || {
            Ok(suite("cor2", &[0.0, 1.0, 2.0], 100_000)?.and(suite(
                "lemma3",
                &[0.0, 1.0, 2.0],
                100_000,
            )?))
        }),
        ("walk split at the minimum before a geometric time", || {
            suite("thm2", &[0.0, 1.0, 0.19], 100_000)
        }),
        ("mismatched red rate gives non-exponential trunks", || {
            suite("cor1", &[0.0, 1.0, 3.0, 4.0], 1_000_000)
        }),
        ("ladder levels form a Poisson process", || {
            suite("lemma5", &[], 100_000)
        }),
        ("Brownian split and sampled walk at (3, 4)", || {
            Ok(suite("thm3", &[3.0, 4.0], 100_000)?.and(suite("lemma9", &[3.0, 4.0], 100_000)?))
        }),
        ("Brownian forest growth and leaf thinning", || {
            Ok(suite("thm4", &[], 100_000)?
                .and(suite("lemma6", &[], 100_000)?)
                .and(suite("lemma7", &[], 100_000)?))
        }),
        (
            "reflected envelope recovers the red forest",
            envelope_exactness,
        ),
        ("walk at time theta^2 is Gaussian", || {
            Ok(
                suite("donsker", &[50.0, 0.0], 10_000)?.and(suite(
                    "donsker",
                    &[50.0, 1.0],
                    10_000,
                )?),
            )
        }),
        ("never-returning excursion mass", never_returning_mass),
        ("null calibration over 50 seeds", calibration),
    ]
}

fn main() -> ExitCode {
    let mut failed = 0;
    let all = criteria();
    for (i, (title, check)) in all.iter().enumerate() {
        let start = Instant::now();
        let (passed, details) = match check() {
            Ok(o) => (o.passed, o.details),
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}  {title} ({:.1}s)",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for d in details {
            println!("      {d}");
        }
    }
    println!("{} of {} criteria passed", all.len() - failed, all.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
