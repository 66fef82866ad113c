use std::collections::HashMap;

use num_rational::BigRational;
use rand::Rng;

use super::{
    accept, cap_note, collect, first_composite, params, three_sigma, FirstComposite, LEAF_CAP,
};
use crate::compose::{
    branching_statistics_prefix, color_by_leaves, thin_and_span, BranchingCounts, CompositeForest,
};
use crate::exact::{
    branching_table, colored_tree_prob, enumerate_colored_shapes, leaf_count_pmf, q_of, trunk_law,
};
use crate::forest::{
    forest_to_walk, walk_to_forest, ForestEntry, PlaneForest, PlaneTree, Truncation,
};
use crate::samplers::{
    monte_carlo, sample_forest_bounded, sample_gw_tree_bounded, Bounded, Params, RngStream,
};
use crate::stats::{
    binomial_test, chi_square_homogeneity, chi_square_test, exponential_cdf, ks_test,
    rank_correlation_test, StatsError, TestReport,
};

/// Leaf counts `1 .. LEAF_CLASSES - 1` get a class each; the rest share one.
const LEAF_CLASSES: usize = 64;
/// Branches per tree, in preorder, that enter pooled per-branch statistics.
const PREFIX: usize = 16;

fn triple(p: &[f64]) -> Result<(Params, Params), StatsError> {
    let (l, m, t) = (p[0], p[1], p[2]);
    q_of(l, m, t)?;
    Ok((params(l, m)?, params(m, t)?))
}

fn composites(
    black: &Params,
    red: &Params,
    n: usize,
    stream: RngStream,
) -> Result<Vec<FirstComposite>, StatsError> {
    collect(monte_carlo(n, stream, |rng| {
        first_composite(black, red, rng)
    }))
}

fn leaf_class(leaves: Option<usize>) -> usize {
    leaves.map_or(LEAF_CLASSES - 1, |l| l.min(LEAF_CLASSES) - 1)
}

fn leaf_count_law(branch: f64) -> Result<Vec<f64>, StatsError> {
    let mut pmf: Vec<f64> = (1..LEAF_CLASSES)
        .map(|k| leaf_count_pmf(k, branch))
        .collect::<Result<_, _>>()?;
    pmf.push((1.0 - pmf.iter().sum::<f64>()).max(0.0));
    Ok(pmf)
}

fn counts(classes: impl Iterator<Item = usize>, k: usize) -> Vec<u64> {
    let mut c = vec![0u64; k];
    for i in classes {
        c[i] += 1;
    }
    c
}

fn capped(draws: &[FirstComposite]) -> usize {
    draws.iter().filter(|d| d.tree.is_none()).count()
}

fn trees(draws: &[FirstComposite]) -> impl Iterator<Item = &PlaneTree> {
    draws.iter().filter_map(|d| d.tree.as_ref())
}

/// The first composite tree is binary(lambda, theta): leaf counts, first
/// gap and branch lengths. Abandoned draws have more than [`LEAF_CAP`]
/// leaves, so they fall in the leaf-count tail class; leaving them out of
/// the length test only conditions on the coloured shape, which branch
/// lengths do not depend on.
pub(super) fn thm1(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let (l, t) = (p[0], p[2]);
    let draws = composites(&black, &red, n, RngStream::new(seed, 1))?;
    let skipped = capped(&draws);
    let classes = counts(
        draws
            .iter()
            .map(|d| leaf_class(d.tree.as_ref().map(PlaneTree::leaf_count))),
        LEAF_CLASSES,
    );
    let gaps: Vec<f64> = draws.iter().map(|d| d.gap).collect();
    let lengths: Vec<f64> = trees(&draws)
        .flat_map(|t| t.nodes().iter().take(PREFIX).map(|x| x.length))
        .take(n)
        .collect();
    Ok(vec![
        accept(
            "thm1/leaf-count",
            chi_square_test(&classes, &leaf_count_law((t - l) / (2.0 * t))?),
            seed,
        )?
        .with_note(cap_note(skipped, n)),
        accept(
            "thm1/first-gap",
            ks_test(&gaps, exponential_cdf(t - l)),
            seed,
        )?,
        accept(
            "thm1/branch-length",
            ks_test(&lengths, exponential_cdf(2.0 * t)),
            seed,
        )?
        .with_note(cap_note(skipped, n)),
    ])
}

pub(super) fn lemma1(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let draws = composites(&black, &red, n, RngStream::new(seed, 2))?;
    let gaps: Vec<f64> = draws.iter().map(|d| d.gap).collect();
    Ok(vec![accept(
        "lemma1/first-gap",
        ks_test(&gaps, exponential_cdf(p[2] - p[0])),
        seed,
    )?])
}

/// Branch lengths of both colours are exponential(2 theta), and lengths of
/// neighbouring branches are uncorrelated.
pub(super) fn lemma2(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let draws = composites(&black, &red, n, RngStream::new(seed, 3))?;
    let skipped = capped(&draws);
    let (mut reds, mut blacks, mut pairs) = (Vec::new(), Vec::new(), Vec::new());
    for t in trees(&draws) {
        for x in t.nodes().iter().take(PREFIX) {
            match x.color {
                Some(crate::forest::Color::Red) => reds.push(x.length),
                _ => blacks.push(x.length),
            }
        }
        if let Some((left, _)) = t.children(0) {
            pairs.push((t.node(0).length, t.node(left).length));
        }
    }
    reds.truncate(n);
    blacks.truncate(n);
    let rate = 2.0 * p[2];
    let note = cap_note(skipped, n);
    Ok(vec![
        accept(
            "lemma2/red-length",
            ks_test(&reds, exponential_cdf(rate)),
            seed,
        )?
        .with_note(note.clone()),
        accept(
            "lemma2/black-length",
            ks_test(&blacks, exponential_cdf(rate)),
            seed,
        )?
        .with_note(note.clone()),
        accept(
            "lemma2/trunk-child-correlation",
            rank_correlation_test(&pairs),
            seed,
        )?
        .with_note(note),
    ])
}

fn prefix_counts(tree: &PlaneTree, branches: usize) -> Result<BranchingCounts, StatsError> {
    let f = PlaneForest::from_entries(vec![ForestEntry {
        gap: 1.0,
        tree: tree.clone(),
    }])?;
    Ok(branching_statistics_prefix(
        &CompositeForest::from_colored(f)?,
        branches,
    ))
}

/// Colour of the first composite trunk. An abandoned draw has a black
/// trunk that branches, so it counts towards the unconditional colour; it
/// is left out of the split-conditional frequencies.
pub(super) fn lemma3(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let law = trunk_law(p[0], p[1], p[2])?;
    let draws = composites(&black, &red, n, RngStream::new(seed, 4))?;
    let skipped = capped(&draws);
    let mut c = BranchingCounts {
        trunk_black: skipped as u64,
        ..Default::default()
    };
    for t in trees(&draws) {
        c.add(&prefix_counts(t, 1)?);
    }
    let note = cap_note(skipped, n);
    Ok(vec![
        three_sigma(
            "lemma3/trunk-red",
            binomial_test(c.trunk_red, n as u64, law.red),
            seed,
        )?,
        three_sigma(
            "lemma3/left-red-given-split",
            binomial_test(
                c.trunk_split_left_red,
                c.trunk_split,
                law.sub_red_given_split,
            ),
            seed,
        )?
        .with_note(note.clone()),
        three_sigma(
            "lemma3/both-red-given-split",
            binomial_test(
                c.trunk_split_both_red,
                c.trunk_split,
                law.both_red_given_split,
            ),
            seed,
        )?
        .with_note(note),
        three_sigma(
            "lemma3/red-given-leaf",
            binomial_test(c.trunk_leaf_red, c.trunk_leaf, law.red_given_leaf),
            seed,
        )?,
    ])
}

/// Offspring events of the first [`PREFIX`] branches (in DFS order) of the
/// first composite tree, against the colour-dependent offspring table.
pub(super) fn cor2(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let table = branching_table(p[0], p[1], p[2])?;
    let draws = composites(&black, &red, n, RngStream::new(seed, 5))?;
    let skipped = capped(&draws);
    let mut c = BranchingCounts::default();
    for t in trees(&draws) {
        c.add(&prefix_counts(t, PREFIX)?);
    }
    let black_total: u64 = c.black_row().iter().sum();
    let note = cap_note(skipped, n);
    Ok(vec![
        accept(
            "cor2/red-row",
            chi_square_test(&c.red_row(), &table.red_row()),
            seed,
        )?
        .with_note(note.clone()),
        accept(
            "cor2/black-row",
            chi_square_test(&c.black_row(), &table.black_row()),
            seed,
        )?
        .with_note(note.clone()),
        three_sigma(
            "cor2/black-black",
            binomial_test(c.black_black_black, black_total, table.black_black_black),
            seed,
        )?
        .with_note(note),
    ])
}

/// Negative control: the red forest has lower rate `kappa != mu`, so the
/// composite trunk is not exponential(2 theta). The test must reject.
pub(super) fn cor1(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, m, k, t) = (p[0], p[1], p[2], p[3]);
    let black = params(l, m)?;
    let red = params(k, t)?;
    let draws = collect(monte_carlo(n, RngStream::new(seed, 6), |rng| {
        Ok(first_composite(&black, &red, rng)?
            .tree
            .map(|t| t.trunk_length()))
    }))?;
    let trunks: Vec<f64> = draws.iter().flatten().copied().collect();
    let r = ks_test(&trunks, exponential_cdf(2.0 * t))?;
    let capped = n - trunks.len();
    Ok(vec![
        TestReport::reject("cor1/trunk-length", r, 1e-6, seed).with_note(cap_note(capped, n))
    ])
}

/// Coloured shapes of the first composite tree against the exact law and
/// against colouring the leaves of a binary(lambda, theta) tree.
pub(super) fn prop1(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (black, red) = triple(p)?;
    let (l, m, t) = (p[0], p[1], p[2]);
    let shapes = enumerate_colored_shapes(4)?;
    let index: HashMap<String, usize> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.key(), i))
        .collect();
    let other = shapes.len();
    let mut pmf: Vec<f64> = shapes
        .iter()
        .map(|s| colored_tree_prob(s, l, m, t).map(|x| x.colored))
        .collect::<Result<_, _>>()?;
    pmf.push((1.0 - pmf.iter().sum::<f64>()).max(0.0));
    let class = |tree: Option<&PlaneTree>| {
        tree.filter(|t| t.leaf_count() <= 4)
            .and_then(|t| index.get(&t.shape_key()).copied())
            .unwrap_or(other)
    };

    let draws = composites(&black, &red, n, RngStream::new(seed, 7))?;
    let a = counts(draws.iter().map(|d| class(d.tree.as_ref())), other + 1);

    let outer = params(l, t)?;
    let q = q_of(l, m, t)?;
    let colored = collect(monte_carlo(n, RngStream::new(seed, 8), |rng| {
        Ok(match sample_gw_tree_bounded(&outer, LEAF_CAP, rng) {
            Bounded::Done(tree) => Some(color_by_leaves(&tree, q, rng)?),
            Bounded::Capped => None,
        })
    }))?;
    let b = counts(colored.iter().map(|t| class(t.as_ref())), other + 1);

    Ok(vec![
        accept("prop1/compose-vs-exact", chi_square_test(&a, &pmf), seed)?,
        accept("prop1/colored-vs-exact", chi_square_test(&b, &pmf), seed)?,
        accept(
            "prop1/compose-vs-colored",
            chi_square_homogeneity(&a, &b),
            seed,
        )?,
        exact_routes(l, m, t, 6, seed)?,
    ])
}

/// Both routes to the coloured-shape probabilities, compared in exact
/// rational arithmetic on the binary expansions of the parameters.
pub fn exact_routes(
    l: f64,
    m: f64,
    t: f64,
    max_leaves: usize,
    seed: u64,
) -> Result<TestReport, StatsError> {
    let exact = |x: f64| {
        BigRational::from_float(x)
            .ok_or_else(|| StatsError::BadParams(format!("{x} is not finite")))
    };
    let (el, em, et) = (exact(l)?, exact(m)?, exact(t)?);
    let shapes = enumerate_colored_shapes(max_leaves)?;
    let mut mismatches = 0;
    for s in &shapes {
        let r = colored_tree_prob(s, el.clone(), em.clone(), et.clone())?;
        if r.composite != r.colored {
            mismatches += 1;
        }
    }
    Ok(TestReport::exact(
        "prop1/exact-routes",
        mismatches,
        shapes.len(),
        seed,
    ))
}

const CODING_SETTINGS: [(f64, f64); 10] = [
    (0.0, 1.0),
    (0.5, 1.0),
    (1.0, 2.0),
    (0.0, 3.0),
    (2.0, 3.0),
    (0.1, 0.2),
    (1.0, 1.5),
    (0.0, 0.5),
    (3.0, 10.0),
    (0.9, 1.0),
];

/// Forest -> walk -> forest and walk -> forest -> walk on random forests.
pub(super) fn prop2(_: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let outcomes = collect(monte_carlo(n, RngStream::new(seed, 9), |rng| {
        let (l, m) = CODING_SETTINGS[rng.random_range(0..CODING_SETTINGS.len())];
        let p = Params::new(l, m)?;
        let trees = rng.random_range(1..=4);
        let forest = loop {
            if let Bounded::Done(f) =
                sample_forest_bounded(&p, Truncation::Trees(trees), 2000, rng)?
            {
                break f;
            }
        };
        let walk = forest_to_walk(&forest)?;
        let back = walk_to_forest(&walk)?;
        let again = forest_to_walk(&back.forest)?;
        let same_shapes = back.forest.len() == forest.len()
            && back
                .forest
                .trees()
                .zip(forest.trees())
                .all(|(a, b)| a.shape_of() == b.shape_of());
        Ok(same_shapes
            && back.partial.is_none()
            && back.forest.approx_eq(&forest, 1e-12)
            && again.approx_eq(&walk, 1e-12))
    }))?;
    let bad = outcomes.iter().filter(|ok| !**ok).count();
    Ok(vec![TestReport::exact("prop2/round-trip", bad, n, seed)])
}

/// The first tree of a binary(0, mu) forest thinned to leaves kept with
/// probability (lambda/mu)^2 is a binary(0, lambda) tree.
///
/// Originals above [`LEAF_CAP`] leaves are abandoned and counted in the
/// leaf-count tail: with retention r they keep fewer than 64 leaves with
/// negligible probability when `r * LEAF_CAP` is large. The length test
/// leaves them out, which conditions on the original's size rather than
/// the thinned shape; the note reports how many draws that affects.
pub(super) fn lemma7(p: &[f64], n: usize, seed: u64) -> Result<Vec<TestReport>, StatsError> {
    let (l, m) = (p[0], p[1]);
    if !(l > 0.0 && l < m) {
        return Err(StatsError::BadParams(format!(
            "need 0 < lambda < mu, got {l}, {m}"
        )));
    }
    let fine = params(0.0, m)?;
    let keep = (l / m).powi(2);
    let draws = collect(monte_carlo(n, RngStream::new(seed, 10), |rng| loop {
        let tree = match sample_gw_tree_bounded(&fine, LEAF_CAP, rng) {
            Bounded::Done(t) => t,
            Bounded::Capped => return Ok(None),
        };
        let f = PlaneForest::from_entries(vec![ForestEntry { gap: 1.0, tree }])?;
        let thinned = thin_and_span(&f, keep, rng)?;
        if let Some(e) = thinned.into_entries().into_iter().next() {
            return Ok::<_, StatsError>(Some(e.tree));
        }
    }))?;
    let skipped = draws.iter().filter(|d| d.is_none()).count();
    let classes = counts(
        draws
            .iter()
            .map(|d| leaf_class(d.as_ref().map(PlaneTree::leaf_count))),
        LEAF_CLASSES,
    );
    let lengths: Vec<f64> = draws
        .iter()
        .flatten()
        .flat_map(|t| t.nodes().iter().take(PREFIX).map(|x| x.length))
        .take(n)
        .collect();
    let note = cap_note(skipped, n);
    Ok(vec![
        accept(
            "lemma7/leaf-count",
            chi_square_test(&classes, &leaf_count_law(0.5)?),
            seed,
        )?
        .with_note(note.clone()),
        accept(
            "lemma7/branch-length",
            ks_test(&lengths, exponential_cdf(2.0 * l)),
            seed,
        )?
        .with_note(note),
    ])
}
