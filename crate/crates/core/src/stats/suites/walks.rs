use rand::Rng;

use super::{accept, collect, exp, params, three_sigma};
use crate::decompose::{
    extract_excursions, mark_and_split, reverse_walk, sample_geometric, williams_split,
};
use crate::exact::{mu_of_q, rates};
use crate::forest::{AlternatingWalk, WalkTail};
use crate::samplers::{monte_carlo, sample_walk, Params, RngStream};
use crate::stats::{
    binomial_test, chi_square_homogeneity, dispersion_test, exponential_cdf, independence_test,
    ks_test, mean_test, normal_cdf, z_test, StatsError, TestReport,
};

const BINS: usize = 10;
/// Classes of the vertex index of the minimum: 1, 3, .., 2 * M_CLASSES - 1
/// and the rest.
const M_CLASSES: usize = 20;

fn checked_q(l: f64, t: f64, q: f64) -> Result<f64, StatsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::BadParams(format!("need 0 < q < 1, got {q}")));
    }
    Ok(mu_of_q(l, t, q)?)
}

fn m_class(m: usize) -> usize {
    ((m - 1) / 2).min(M_CLASSES)
}

fn m_counts(ms: impl Iterator<Item = usize>) -> Vec<u64> {
    let mut c = vec![0u64; M_CLASSES + 1];
    for m in ms {
        c[m_class(m)] += 1;
    }
    c
}

struct SplitDraw {
    fall: f64,
    rise: f64,
    min_index: usize,
    post_min_index: usize,
    /// First fall and rise of the part before the minimum, when it has them.
    pre_steps: Option<(f64, f64)>,
}

/// Williams splitting at a geometric time: the depth of the minimum and the
/// final rise above it are independent exponentials, and the part before
/// the minimum is a walk with steps exponential(theta -+ mu) run until it
/// first passes below an independent exponential(mu - lambda) level.
pub(super) fn thm2(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, t, q) = (p[0], p[1], p[2]);
    let mu = checked_q(l, t, q)?;
    let walk = params(l, t)?;
    let draws = collect(monte_carlo(n, RngStream::new(seed, 11), |rng| {
        let k = sample_geometric(1.0 - q, rng)?;
        let s = williams_split(&sample_walk(&walk, k, rng), k)?;
        let pre = &s.pre_path;
        Ok(SplitDraw {
            fall: s.fall,
            rise: s.rise,
            min_index: s.min_index,
            post_min_index: 2 * k - s.min_index,
            pre_steps: (pre.len() > 3).then(|| (-pre[1], pre[2] - pre[1])),
        })
    }))?;

    // the same first passage, simulated directly
    let oracle = monte_carlo(n, RngStream::new(seed, 12), |rng| {
        let level = exp(rng, mu - l);
        let (mut h, mut m) = (0.0, 0usize);
        loop {
            h -= exp(rng, t - mu);
            m += 1;
            if h < -level {
                return m;
            }
            h += exp(rng, t + mu);
            m += 1;
        }
    });

    let falls: Vec<f64> = draws.iter().map(|d| d.fall).collect();
    let rises: Vec<f64> = draws.iter().map(|d| d.rise).collect();
    let pairs: Vec<(f64, f64)> = draws.iter().map(|d| (d.fall, d.rise)).collect();
    let pre: Vec<(f64, f64)> = draws.iter().filter_map(|d| d.pre_steps).collect();
    let pre_falls: Vec<f64> = pre.iter().map(|s| s.0).collect();
    let pre_rises: Vec<f64> = pre.iter().map(|s| s.1).collect();
    let at_one = |f: fn(&SplitDraw) -> usize| draws.iter().filter(|d| f(d) == 1).count() as u64;
    Ok(vec![
        accept("thm2/fall", ks_test(&falls, exponential_cdf(mu - l)), seed)?,
        accept("thm2/rise", ks_test(&rises, exponential_cdf(mu + l)), seed)?,
        accept("thm2/independence", independence_test(&pairs, BINS), seed)?,
        three_sigma(
            "thm2/min-at-first-vertex",
            binomial_test(at_one(|d| d.min_index), n as u64, (mu - l) / (t - l)),
            seed,
        )?,
        three_sigma(
            "thm2/reversed-min-at-first-vertex",
            binomial_test(at_one(|d| d.post_min_index), n as u64, (mu + l) / (t + l)),
            seed,
        )?,
        // given that the walk gets past its first fall, that fall is the
        // minimum of two independent exponentials
        accept(
            "thm2/pre-first-fall",
            ks_test(&pre_falls, exponential_cdf(t - l)),
            seed,
        )?,
        accept(
            "thm2/pre-first-rise",
            ks_test(&pre_rises, exponential_cdf(t + mu)),
            seed,
        )?,
        accept(
            "thm2/pre-length",
            chi_square_homogeneity(
                &m_counts(draws.iter().map(|d| d.min_index)),
                &m_counts(oracle.into_iter()),
            ),
            seed,
        )?,
    ])
}

const MARK_PAIRS: usize = 1000;

/// Marking each rise with probability 1 - q and splitting at the minima
/// between marks: the skeleton steps are independent exponential(mu -+
/// lambda), and the unmarked excursions before each stretch minimum arrive
/// at rate theta - mu along the depth.
pub(super) fn prop4(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, t, q) = (p[0], p[1], p[2]);
    let mu = checked_q(l, t, q)?;
    let walk = params(l, t)?;
    // about (1 - q) * MARK_PAIRS stretches per walk; draw a few spare
    let walks = (1.05 * n as f64 / (MARK_PAIRS as f64 * (1.0 - q))).ceil() as usize + 1;
    let parts = collect(monte_carlo(walks, RngStream::new(seed, 13), |rng| {
        let s = mark_and_split(&sample_walk(&walk, MARK_PAIRS, rng), 1.0 - q, rng)?;
        Ok(s.stretches
            .iter()
            .map(|x| (x.fall, x.rise, x.excursions.len()))
            .collect::<Vec<_>>())
    }))?;
    let stretches: Vec<(f64, f64, usize)> = parts.into_iter().flatten().take(n).collect();
    let falls: Vec<f64> = stretches.iter().map(|s| s.0).collect();
    let rises: Vec<f64> = stretches.iter().map(|s| s.1).collect();
    let pairs: Vec<(f64, f64)> = stretches.iter().map(|s| (s.0, s.1)).collect();
    let count = stretches.iter().map(|s| s.2).sum::<usize>() as f64;
    let expected = (t - mu) * falls.iter().sum::<f64>();
    let mut out = vec![
        accept("prop4/fall", ks_test(&falls, exponential_cdf(mu - l)), seed)?,
        accept("prop4/rise", ks_test(&rises, exponential_cdf(mu + l)), seed)?,
        accept("prop4/independence", independence_test(&pairs, BINS), seed)?,
        three_sigma(
            "prop4/unmarked-excursions",
            z_test(count, expected, expected.sqrt(), stretches.len()),
            seed,
        )?,
    ];
    if l > 0.0 {
        out.push(never_returning(l, mu, t, n, seed)?);
    }
    Ok(out)
}

/// Fraction of reversed walks whose first excursion never comes back down,
/// against the mass `2 lambda / (theta + lambda)` of such excursions. The
/// walks are long enough that a return after their end has probability
/// below `e^-30`.
pub fn never_returning(
    l: f64,
    mu: f64,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<TestReport, StatsError> {
    if !(l > 0.0) {
        return Err(StatsError::BadParams(
            "the reversed walk needs lambda > 0 to escape".into(),
        ));
    }
    let mass = rates(l, mu, t)?.nu_inf_mass;
    let drift = 1.0 / (t - l) - 1.0 / (t + l);
    let var = (t - l).powi(-2) + (t + l).powi(-2);
    let pairs = ((60.0 * var / (drift * drift)).ceil() as usize).clamp(100, 1_000_000);
    let walk = params(l, t)?;
    let escaped = monte_carlo(n, RngStream::new(seed, 14), |rng| {
        let w = reverse_walk(&sample_walk(&walk, pairs, rng)).expect("at least one pair");
        !extract_excursions(&w)[0].crossed
    })
    .into_iter()
    .filter(|&e| e)
    .count();
    Ok(three_sigma(
        "prop4/never-returning",
        binomial_test(escaped as u64, n as u64, mass),
        seed,
    )?
    .with_note(format!("expected fraction {mass}, walks of {pairs} pairs")))
}

/// Ladder increments per replicate, and ladder points counted in that many
/// unit-mean depth windows.
const LADDER_BLOCK: usize = 16;

/// Extends `w` with fresh steps until it has more than `points` ladder
/// points and has gone below `-depth`. Stopping on depth and ladder count
/// (never on elapsed time) keeps the windows and increments unbiased.
fn ladder_walk<R: Rng + ?Sized>(
    p: &Params,
    points: usize,
    depth: f64,
    rng: &mut R,
) -> AlternatingWalk {
    let mut w = sample_walk(p, 64, rng);
    loop {
        let low = w.heights().into_iter().fold(f64::INFINITY, f64::min);
        if low < -depth && extract_excursions(&w).len() > points {
            return w;
        }
        let more = sample_walk(p, w.pairs().max(64), rng);
        let mut steps = w.steps().to_vec();
        steps.extend_from_slice(more.steps());
        w = AlternatingWalk::new(w.initial_fall(), steps, WalkTail::Complete)
            .expect("positive steps");
    }
}

/// Ladder levels of a walk: increments exponential(theta - lambda) and
/// Poisson counts over depth windows.
pub(super) fn lemma5(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, t) = (p[0], p[1]);
    if !(l > 0.0) {
        return Err(StatsError::BadParams(
            "without drift the ladder depth grows like the square root of time; use lambda > 0"
                .into(),
        ));
    }
    let walk = params(l, t)?;
    let width = 1.0 / (t - l);
    let depth = LADDER_BLOCK as f64 * width;
    let blocks = n.div_ceil(LADDER_BLOCK);
    let parts = monte_carlo(blocks, RngStream::new(seed, 15), |rng| {
        let w = ladder_walk(&walk, LADDER_BLOCK, depth, rng);
        let levels: Vec<f64> = extract_excursions(&w)
            .iter()
            .map(|e| e.local_time)
            .collect();
        let mut incs = Vec::with_capacity(LADDER_BLOCK);
        let mut prev = 0.0;
        for &v in levels.iter().take(LADDER_BLOCK) {
            incs.push(v - prev);
            prev = v;
        }
        let mut windows = vec![0u64; LADDER_BLOCK];
        for v in levels.into_iter().take_while(|&v| v < depth) {
            windows[(v / width) as usize] += 1;
        }
        (incs, windows)
    });
    let incs: Vec<f64> = parts
        .iter()
        .flat_map(|x| x.0.iter().copied())
        .take(n)
        .collect();
    let windows: Vec<u64> = parts
        .iter()
        .flat_map(|x| x.1.iter().copied())
        .take(n)
        .collect();
    let as_f64: Vec<f64> = windows.iter().map(|&c| c as f64).collect();
    Ok(vec![
        accept(
            "lemma5/ladder-increment",
            ks_test(&incs, exponential_cdf(t - l)),
            seed,
        )?,
        three_sigma(
            "lemma5/window-mean",
            mean_test(&as_f64, 1.0, Some(1.0)),
            seed,
        )?,
        accept("lemma5/window-dispersion", dispersion_test(&windows), seed)?,
    ])
}

/// `H` at vertex `floor(theta^2)` is close to Gaussian(-lambda, 1).
pub(super) fn donsker(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (t, l) = (p[0], p[1]);
    let walk = params(l, t)?;
    let index = (t * t).floor() as usize;
    let xs = monte_carlo(n, RngStream::new(seed, 16), |rng| {
        sample_walk(&walk, index.div_ceil(2), rng).heights()[index]
    });
    Ok(vec![accept(
        "donsker/unit-time",
        ks_test(&xs, normal_cdf(-l, 1.0)),
        seed,
    )?
    .with_note(format!("vertex {index}"))])
}
