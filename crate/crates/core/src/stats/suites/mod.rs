//! Monte Carlo suites, one per distributional identity. Each suite takes a
//! parameter vector (empty for its defaults), a sample size and a seed, and
//! is deterministic in those.

mod brownian;
mod forests;
mod walks;

pub use brownian::composed_envelope_mismatches;
pub use forests::exact_routes;
pub use walks::never_returning;

use rand::Rng;

use super::{GofResult, StatsError, TestReport, ALPHA};
use crate::compose::{compose, CompositeForest};
use crate::forest::{ForestEntry, PlaneForest, PlaneTree, Truncation};
use crate::samplers::{sample_forest, sample_gw_tree_bounded, Bounded, Params};

type SuiteFn = fn(&[f64], usize, u64) -> Result<Vec<TestReport>, StatsError>;

pub struct SuiteInfo {
    pub id: &'static str,
    pub params: &'static [(&'static str, f64)],
    pub samples: usize,
    pub about: &'static str,
    run: SuiteFn,
}

const LMT: &[(&str, f64)] = &[("lambda", 0.0), ("mu", 1.0), ("theta", 2.0)];

pub const SUITES: &[SuiteInfo] = &[
    SuiteInfo {
        id: "thm1",
        params: LMT,
        samples: 100_000,
        about: "first composite tree is binary(lambda, theta)",
        run: forests::thm1,
    },
    SuiteInfo {
        id: "prop1",
        params: LMT,
        samples: 100_000,
        about: "coloured shapes of the first composite tree",
        run: forests::prop1,
    },
    SuiteInfo {
        id: "prop2",
        params: &[],
        samples: 10_000,
        about: "forest/walk coding round trips",
        run: forests::prop2,
    },
    SuiteInfo {
        id: "thm2",
        params: &[("lambda", 0.0), ("theta", 1.0), ("q", 0.19)],
        samples: 100_000,
        about: "splitting a walk at its minimum before a geometric time",
        run: walks::thm2,
    },
    SuiteInfo {
        id: "prop4",
        params: &[("lambda", 1.0), ("theta", 3.0), ("q", 0.5)],
        samples: 100_000,
        about: "marking rises and splitting at the stretch minima",
        run: walks::prop4,
    },
    SuiteInfo {
        id: "lemma5",
        params: &[("lambda", 1.0), ("theta", 2.0)],
        samples: 100_000,
        about: "ladder levels of a walk form a Poisson process",
        run: walks::lemma5,
    },
    SuiteInfo {
        id: "thm3",
        params: &[("lambda", 3.0), ("kappa", 4.0)],
        samples: 100_000,
        about: "Brownian path split at its minimum before an exponential time",
        run: brownian::thm3,
    },
    SuiteInfo {
        id: "thm4",
        params: &[("lambda", 1.0), ("mu", 2.0)],
        samples: 100_000,
        about: "growth increments of the Poisson-sampled Brownian forest",
        run: brownian::thm4,
    },
    SuiteInfo {
        id: "lemma6",
        params: &[("theta", 1.0)],
        samples: 100_000,
        about: "driftless Brownian motion sampled at rate theta^2/2",
        run: brownian::lemma6,
    },
    SuiteInfo {
        id: "lemma7",
        params: &[("lambda", 0.5), ("mu", 1.0)],
        samples: 100_000,
        about: "thinning the leaves of a binary(0, mu) forest",
        run: forests::lemma7,
    },
    SuiteInfo {
        id: "lemma9",
        params: &[("lambda", 3.0), ("kappa", 4.0)],
        samples: 100_000,
        about: "walk of a drifting Brownian path sampled at Poisson times",
        run: brownian::lemma9,
    },
    SuiteInfo {
        id: "cor1",
        params: &[("lambda", 0.0), ("mu", 1.0), ("kappa", 3.0), ("theta", 4.0)],
        samples: 1_000_000,
        about: "negative control: red forest with the wrong lower rate",
        run: forests::cor1,
    },
    SuiteInfo {
        id: "cor2",
        params: LMT,
        samples: 100_000,
        about: "offspring frequencies of composite branches by colour",
        run: forests::cor2,
    },
    SuiteInfo {
        id: "lemma1",
        params: LMT,
        samples: 100_000,
        about: "first root gap of a composite forest",
        run: forests::lemma1,
    },
    SuiteInfo {
        id: "lemma2",
        params: LMT,
        samples: 100_000,
        about: "composite branch lengths by colour",
        run: forests::lemma2,
    },
    SuiteInfo {
        id: "lemma3",
        params: LMT,
        samples: 100_000,
        about: "colour of the first composite trunk",
        run: forests::lemma3,
    },
    SuiteInfo {
        id: "donsker",
        params: &[("theta", 50.0), ("lambda", 0.0)],
        samples: 10_000,
        about: "walk at time theta^2 against a Gaussian",
        run: walks::donsker,
    },
];

pub const SUITE_IDS: [&str; 17] = [
    "thm1", "prop1", "prop2", "thm2", "prop4", "lemma5", "thm3", "thm4", "lemma6", "lemma7",
    "lemma9", "cor1", "cor2", "lemma1", "lemma2", "lemma3", "donsker",
];

pub fn suite_info(id: &str) -> Option<&'static SuiteInfo> {
    SUITES.iter().find(|s| s.id == id)
}

/// Runs suite `id`. An empty `params` selects the suite's defaults; `n = 0`
/// its default sample size.
pub fn run_suite(
    id: &str,
    params: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<TestReport>, StatsError> {
    let info = suite_info(id).ok_or_else(|| StatsError::UnknownSuite(id.to_string()))?;
    let defaults: Vec<f64> = info.params.iter().map(|p| p.1).collect();
    let params = if params.is_empty() {
        &defaults[..]
    } else {
        params
    };
    if params.len() != info.params.len() {
        let names: Vec<&str> = info.params.iter().map(|p| p.0).collect();
        return Err(StatsError::BadParams(format!(
            "{id} takes {} parameters ({}), got {}",
            names.len(),
            names.join(", "),
            params.len()
        )));
    }
    if params.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::BadParams("parameters must be finite".into()));
    }
    let n = if n == 0 { info.samples } else { n };
    (info.run)(params, n, seed)
}

fn accept(
    name: &str,
    r: Result<GofResult, StatsError>,
    seed: u64,
) -> Result<TestReport, StatsError> {
    Ok(TestReport::accept(name, r?, ALPHA, seed))
}

fn three_sigma(
    name: &str,
    r: Result<GofResult, StatsError>,
    seed: u64,
) -> Result<TestReport, StatsError> {
    Ok(TestReport::accept(name, r?, super::THREE_SIGMA, seed))
}

fn collect<T>(xs: Vec<Result<T, StatsError>>) -> Result<Vec<T>, StatsError> {
    xs.into_iter().collect()
}

/// Draws above this many leaves are abandoned; see the note attached to the
/// reports that exclude them.
pub(crate) const LEAF_CAP: usize = 1 << 14;

pub(crate) fn exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(rand_distr::Exp1);
    e / rate
}

/// The first tree of `compose(black, red)` and the gap in front of it.
/// `tree` is `None` when the first composite tree contains a black tree that
/// was abandoned at [`LEAF_CAP`] leaves; the gap is always exact, since it
/// only depends on the first black gap and the red roots before it.
pub(crate) struct FirstComposite {
    pub gap: f64,
    pub tree: Option<PlaneTree>,
}

pub(crate) fn first_composite<R: Rng + ?Sized>(
    black: &Params,
    red: &Params,
    rng: &mut R,
) -> Result<FirstComposite, StatsError> {
    let gap = exp(rng, black.mu - black.lambda);
    let (b, cover) = match sample_gw_tree_bounded(black, LEAF_CAP, rng) {
        Bounded::Done(tree) => {
            let tail = exp(rng, black.mu - black.lambda);
            let b = PlaneForest::new(
                vec![ForestEntry { gap, tree }],
                Some(tail),
                Truncation::Trees(1),
            )?;
            let cover = b.dfs_time() - tail;
            (b, cover)
        }
        // only red trees rooted before the black one can come first
        Bounded::Capped => (
            PlaneForest::new(Vec::new(), Some(gap), Truncation::FloorLength(gap))?,
            gap,
        ),
    };
    let r = sample_forest(red, Truncation::FloorLength(cover), rng)?;
    let c: CompositeForest = compose(&b, &r)?;
    match c.forest.entries().first() {
        Some(e) => Ok(FirstComposite {
            gap: e.gap,
            tree: Some(e.tree.clone()),
        }),
        None => Ok(FirstComposite { gap, tree: None }),
    }
}

fn params(lambda: f64, mu: f64) -> Result<Params, StatsError> {
    Ok(Params::new(lambda, mu)?)
}

fn cap_note(capped: usize, n: usize) -> String {
    format!("{capped} of {n} draws abandoned above {LEAF_CAP} leaves")
}
