use super::{accept, collect, params, three_sigma, LEAF_CAP};
use crate::compose::{color_by_leaf_marks, compose, span_leaves, split, CompositeForest};
use crate::decompose::{alternating_envelope, brownian_williams_split, red_innovation_walk};
use crate::forest::{
    forest_to_walk, walk_to_forest, Color, ForestEntry, PlaneForest, PlaneTree, Truncation,
};
use crate::samplers::{
    monte_carlo, sample_brownian_at_times, sample_brownian_poisson, sample_forest,
    sample_forest_bounded, sample_poisson_field, Bounded, Horizon, RngStream,
};
use crate::stats::{
    binomial_test, exponential_cdf, independence_test, ks_test, mean_test, StatsError, TestReport,
};

const BINS: usize = 10;

fn lambda_kappa(p: &[f64]) -> Result<(f64, f64), StatsError> {
    let (l, k) = (p[0], p[1]);
    if !(l >= 0.0 && k > 0.0) {
        return Err(StatsError::BadParams(format!(
            "need lambda >= 0 and kappa > 0, got {l}, {k}"
        )));
    }
    Ok((l, k))
}

/// Depth of the minimum before the first sample time and the rise from it
/// to the sample, for a path with drift `-l` sampled at rate `k^2 / 2`.
fn first_splits(
    l: f64,
    k: f64,
    n: usize,
    stream: RngStream,
) -> Result<Vec<(f64, f64)>, StatsError> {
    collect(monte_carlo(n, stream, |rng| {
        let path = sample_brownian_poisson(l, k, Horizon::Samples(1), rng)?;
        let s = brownian_williams_split(&path, 1)?;
        Ok((s.fall, s.rise))
    }))
}

fn split_reports(
    tag: &str,
    pairs: &[(f64, f64)],
    down: f64,
    up: f64,
    seed: u64,
) -> Result<Vec<TestReport>, StatsError> {
    let falls: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rises: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(vec![
        three_sigma(
            &format!("{tag}/fall-mean"),
            mean_test(&falls, 1.0 / down, Some(1.0 / down)),
            seed,
        )?,
        three_sigma(
            &format!("{tag}/rise-mean"),
            mean_test(&rises, 1.0 / up, Some(1.0 / up)),
            seed,
        )?,
        accept(
            &format!("{tag}/fall"),
            ks_test(&falls, exponential_cdf(down)),
            seed,
        )?,
        accept(
            &format!("{tag}/rise"),
            ks_test(&rises, exponential_cdf(up)),
            seed,
        )?,
        accept(
            &format!("{tag}/independence"),
            independence_test(pairs, BINS),
            seed,
        )?,
    ])
}

/// Williams splitting of a drifting Brownian path at an exponential time:
/// with `mu^2 = lambda^2 + kappa^2`, the depth of the minimum and the rise
/// after it are independent exponential(mu -+ lambda).
pub(super) fn thm3(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, k) = lambda_kappa(p)?;
    let mu = l.hypot(k);
    split_reports(
        "thm3",
        &first_splits(l, k, n, RngStream::new(seed, 21))?,
        mu - l,
        mu + l,
        seed,
    )
}

/// Without drift, both parts are exponential(theta), and so is every step
/// of the sampled walk.
pub(super) fn lemma6(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let t = p[0];
    let (_, k) = lambda_kappa(&[0.0, t])?;
    let mut out = split_reports(
        "lemma6",
        &first_splits(0.0, k, n, RngStream::new(seed, 22))?,
        t,
        t,
        seed,
    )?;
    let path = sample_brownian_poisson(
        0.0,
        t,
        Horizon::Samples(n + 1),
        &mut RngStream::new(seed, 23).rng(),
    )?;
    let walk = path.to_walk()?;
    let steps: Vec<f64> = walk
        .steps()
        .iter()
        .flat_map(|s| [s.rise, s.fall])
        .take(n)
        .collect();
    out.push(accept(
        "lemma6/walk-steps",
        ks_test(&steps, exponential_cdf(t)),
        seed,
    )?);
    Ok(out)
}

/// The walk of a drifting path sampled at Poisson times has independent
/// steps: falls exponential(mu - lambda), rises exponential(mu + lambda).
pub(super) fn lemma9(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, k) = lambda_kappa(p)?;
    let mu = l.hypot(k);
    let path = sample_brownian_poisson(
        l,
        k,
        Horizon::Samples(n + 1),
        &mut RngStream::new(seed, 24).rng(),
    )?;
    let walk = path.to_walk()?;
    // (fall into a minimum, rise out of it)
    let mut pairs = Vec::with_capacity(n);
    let mut fall = walk.initial_fall();
    for s in walk.steps() {
        pairs.push((fall, s.rise));
        fall = s.fall;
    }
    let mut times = Vec::with_capacity(n);
    let mut prev = 0.0;
    for r in &path.records {
        times.push(r.time - prev);
        prev = r.time;
    }
    let mut out = split_reports("lemma9", &pairs, mu - l, mu + l, seed)?;
    out.push(accept(
        "lemma9/sample-gaps",
        ks_test(&times, exponential_cdf(0.5 * k * k)),
        seed,
    )?);
    Ok(out)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn same_tree(a: &PlaneTree, b: &PlaneTree, tol: f64) -> bool {
    a.shape_of() == b.shape_of()
        && a.nodes()
            .iter()
            .zip(b.nodes())
            .all(|(x, y)| close(x.length, y.length, tol))
}

/// Trees `0 .. min(len) - 1` of two forests agree in shape, gaps and lengths
/// up to `tol`; the last common tree may be cut differently by the two
/// truncations and is not compared.
fn same_prefix(a: &PlaneForest, b: &PlaneForest, tol: f64) -> bool {
    let k = a.len().min(b.len()).saturating_sub(1);
    a.entries()[..k]
        .iter()
        .zip(&b.entries()[..k])
        .all(|(x, y)| close(x.gap, y.gap, tol) && same_tree(&x.tree, &y.tree, tol))
}

struct Growth {
    lengths: Vec<f64>,
    red_split: u64,
    red_branches: u64,
    coupling_ok: bool,
    envelope_ok: bool,
}

/// One Poisson-sampled driftless path observed at levels `l < m`: the
/// forest at level `m`, its growth increments over level `l`, and two
/// exact checks of the coupling.
fn grow_once(
    l: f64,
    m: f64,
    horizon: f64,
    rng: &mut crate::samplers::Rng,
) -> Result<Growth, StatsError> {
    let levels: Vec<f64> = if l > 0.0 { vec![l, m] } else { vec![m] };
    let field = sample_poisson_field(&levels, horizon, rng)?;
    let path = sample_brownian_at_times(0.0, &field.times, rng)?;
    let scale = 1.0
        + path
            .records
            .iter()
            .fold(0.0f64, |s, r| s.max(r.level.abs()).max(r.min.abs()));
    let tol = 1e-9 * scale;
    if path.len() < 2 {
        return Ok(Growth {
            lengths: Vec::new(),
            red_split: 0,
            red_branches: 0,
            coupling_ok: true,
            envelope_ok: true,
        });
    }
    let walk = path.to_walk()?;
    let fine = walk_to_forest(&walk)?.forest;
    let mask = field.mask(l);
    let leaves: usize = fine.trees().map(PlaneTree::leaf_count).sum();
    let marks = &mask[..leaves];

    // complete trees of the finest forest, coloured by the coarser level
    let mut used = 0;
    let mut entries = Vec::with_capacity(fine.len());
    for e in fine.entries() {
        let k = e.tree.leaf_count();
        let colors: Vec<Color> = marks[used..used + k]
            .iter()
            .map(|&b| if b { Color::Black } else { Color::Red })
            .collect();
        used += k;
        entries.push(ForestEntry {
            gap: e.gap,
            tree: color_by_leaf_marks(&e.tree, &colors),
        });
    }
    let colored = CompositeForest::from_colored(PlaneForest::new(
        entries,
        fine.tail_gap(),
        fine.truncation(),
    )?)?;
    let (_, red) = split(&colored)?;
    let mut red_split = 0;
    let mut red_branches = 0;
    for t in red.trees() {
        red_branches += t.node_count() as u64;
        red_split += (0..t.node_count()).filter(|&i| !t.is_leaf(i)).count() as u64;
    }

    // the coarse forest is the one spanned by the coarse leaves
    let coarse_path = path.subsample(&mask);
    let coupling_ok = if coarse_path.len() < 2 {
        true
    } else {
        let coarse = walk_to_forest(&coarse_path.to_walk()?)?.forest;
        same_prefix(&span_leaves(&fine, marks)?, &coarse, tol)
    };

    // the reflected envelope recovers the increments from the fine walk
    let h = walk.heights();
    let env = alternating_envelope(&h, &mask[..walk.pairs()])?;
    let decoded = walk_to_forest(&red_innovation_walk(&env, walk.tail())?)?.forest;
    let envelope_ok = same_prefix(&decoded, &red, tol);

    Ok(Growth {
        lengths: fine
            .trees()
            .flat_map(|t| t.nodes().iter().map(|x| x.length))
            .collect(),
        red_split,
        red_branches,
        coupling_ok,
        envelope_ok,
    })
}

/// Samples per path in the growth checks.
const GROWTH_SAMPLES: f64 = 400.0;

/// Growth of the Poisson-sampled Brownian forest from level `lambda` to
/// level `mu`: the forest at level `mu` has exponential(2 mu) branches, the
/// growth increments branch with probability (mu - lambda) / 2 mu, the
/// level-`lambda` forest is spanned by the level-`lambda` leaves, and the
/// envelope construction recovers the increments. A last check composes
/// sampled forests with the same laws and decodes the red part from the
/// composite walk.
pub(super) fn thm4(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, m) = (p[0], p[1]);
    if !(l >= 0.0 && l < m) {
        return Err(StatsError::BadParams(format!(
            "need 0 <= lambda < mu, got {l}, {m}"
        )));
    }
    let horizon = GROWTH_SAMPLES / (0.5 * m * m);
    // the last, incomplete tree of each path holds a good share of its leaves
    let paths = (1.25 * n as f64 / GROWTH_SAMPLES).ceil() as usize;
    let runs = collect(monte_carlo(paths, RngStream::new(seed, 25), |rng| {
        grow_once(l, m, horizon, rng)
    }))?;
    let lengths: Vec<f64> = runs
        .iter()
        .flat_map(|g| g.lengths.iter().copied())
        .take(n)
        .collect();
    let (splits, branches) = runs
        .iter()
        .fold((0, 0), |(s, b), g| (s + g.red_split, b + g.red_branches));
    let coupling_bad = runs.iter().filter(|g| !g.coupling_ok).count();
    let envelope_bad = runs.iter().filter(|g| !g.envelope_ok).count();

    let checks = (n / 10).max(1);
    let composed_bad = composed_envelope_mismatches(l, m, checks, seed)?;
    Ok(vec![
        accept(
            "thm4/branch-length",
            ks_test(&lengths, exponential_cdf(2.0 * m)),
            seed,
        )?,
        three_sigma(
            "thm4/increment-branching",
            binomial_test(splits, branches, (m - l) / (2.0 * m)),
            seed,
        )?,
        TestReport::exact("thm4/coarse-forest-is-spanned", coupling_bad, paths, seed),
        TestReport::exact("thm4/envelope-increments", envelope_bad, paths, seed),
        TestReport::exact("thm4/envelope-red-forest", composed_bad, checks, seed),
    ])
}

/// Composes a binary(0, l) forest with a binary(l, m) forest, marks the
/// black leaves in the composite walk and decodes `Z - J`; counts the cases
/// where that differs from the red forest returned by `split`.
pub fn composed_envelope_mismatches(
    l: f64,
    m: f64,
    cases: usize,
    seed: u64,
) -> Result<usize, StatsError> {
    let black_p = params(0.0, l.max(f64::MIN_POSITIVE))?;
    let red_p = params(l, m)?;
    let bad = collect(monte_carlo(cases, RngStream::new(seed, 26), |rng| {
        let black = if l > 0.0 {
            loop {
                if let Bounded::Done(f) =
                    sample_forest_bounded(&black_p, Truncation::Trees(3), LEAF_CAP, rng)?
                {
                    break f;
                }
            }
        } else {
            PlaneForest::new(Vec::new(), Some(1.0), Truncation::FloorLength(1.0))?
        };
        let cover = Truncation::FloorLength(black.dfs_time() + 2.0 / (m - l));
        let red = sample_forest(&red_p, cover, rng)?;
        let c = compose(&black, &red)?;
        if c.forest.is_empty() {
            return Ok(false);
        }
        let walk = forest_to_walk(&c.forest)?;
        let peaks: Vec<bool> = c
            .forest
            .trees()
            .flat_map(|t| {
                t.leaves()
                    .map(|i| t.node(i).color == Some(Color::Black))
                    .collect::<Vec<_>>()
            })
            .collect();
        let env = alternating_envelope(&walk.heights(), &peaks)?;
        let decoded = walk_to_forest(&red_innovation_walk(&env, walk.tail())?)?;
        let (_, r) = split(&c)?;
        let tol = 1e-12 * (1.0 + c.forest.dfs_time());
        let same = decoded.partial.is_none()
            && decoded.forest.len() == r.len()
            && decoded
                .forest
                .entries()
                .iter()
                .zip(r.entries())
                .all(|(x, y)| close(x.gap, y.gap, tol) && same_tree(&x.tree, &y.tree, tol));
        Ok::<_, StatsError>(!same)
    }))?;
    Ok(bad.into_iter().filter(|b| *b).count())
}
