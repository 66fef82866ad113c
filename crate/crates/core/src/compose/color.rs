use rand::Rng;

use super::ComposeError;
use crate::forest::{Color, ForestEntry, PlaneForest, PlaneTree, TreeBuilder, Truncation};

fn check_prob(p: f64) -> Result<(), ComposeError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ComposeError::InvalidProbability(p))
    }
}

/// Colours a tree from given leaf colours (in preorder): a branch is black
/// iff some leaf above it is black.
pub fn color_by_leaf_marks(tree: &PlaneTree, leaf_colors: &[Color]) -> PlaneTree {
    assert_eq!(leaf_colors.len(), tree.leaf_count(), "one colour per leaf");
    let mut out = tree.clone();
    let mut colors = vec![Color::Red; tree.node_count()];
    let mut leaf = 0;
    for i in 0..tree.node_count() {
        if tree.is_leaf(i) {
            colors[i] = leaf_colors[leaf];
            leaf += 1;
        }
    }
    for v in tree.postorder() {
        if let Some((l, r)) = tree.children(v) {
            if colors[l] == Color::Black || colors[r] == Color::Black {
                colors[v] = Color::Black;
            }
        }
        out.set_color(v, Some(colors[v]));
    }
    out
}

/// Colours each leaf red with probability `red_prob`, independently, then
/// blackens the subtree spanned by the root and the black leaves.
pub fn color_by_leaves<R: Rng + ?Sized>(
    tree: &PlaneTree,
    red_prob: f64,
    rng: &mut R,
) -> Result<PlaneTree, ComposeError> {
    check_prob(red_prob)?;
    let marks: Vec<Color> = (0..tree.leaf_count())
        .map(|_| {
            if rng.random::<f64>() < red_prob {
                Color::Red
            } else {
                Color::Black
            }
        })
        .collect();
    Ok(color_by_leaf_marks(tree, &marks))
}

/// Keeps each leaf with probability `keep_prob` and replaces every tree by
/// the subtree spanned by its root and kept leaves, merging branches that
/// are left with a single child. Trees losing all leaves are removed; their
/// gaps are added to the next surviving gap (or the tail), so surviving
/// roots keep their floor positions.
pub fn thin_and_span<R: Rng + ?Sized>(
    forest: &PlaneForest,
    keep_prob: f64,
    rng: &mut R,
) -> Result<PlaneForest, ComposeError> {
    check_prob(keep_prob)?;
    let leaves: usize = forest.trees().map(PlaneTree::leaf_count).sum();
    let keep: Vec<bool> = (0..leaves)
        .map(|_| rng.random::<f64>() < keep_prob)
        .collect();
    span_leaves(forest, &keep)
}

/// The subforest spanned by the leaves flagged in `keep` (one flag per leaf,
/// in DFS order over the whole forest), as in [`thin_and_span`].
pub fn span_leaves(forest: &PlaneForest, keep: &[bool]) -> Result<PlaneForest, ComposeError> {
    let leaves: usize = forest.trees().map(PlaneTree::leaf_count).sum();
    if keep.len() != leaves {
        return Err(ComposeError::MarkCount {
            expected: leaves,
            got: keep.len(),
        });
    }
    let mut marks = keep.iter();
    let mut entries = Vec::new();
    let mut pending_gap = 0.0;
    let mut b = TreeBuilder::new();
    for e in forest.entries() {
        pending_gap += e.gap;
        let t = &e.tree;
        let mut kept = vec![false; t.node_count()];
        for i in 0..t.node_count() {
            if t.is_leaf(i) {
                kept[i] = *marks.next().unwrap();
            }
        }
        b.clear();
        let mut built = vec![u32::MAX; t.node_count()];
        for v in t.postorder() {
            let n = t.node(v);
            built[v] = match t.children(v) {
                None if kept[v] => b.leaf(n.length, n.color),
                None => u32::MAX,
                Some((l, r)) => match (built[l], built[r]) {
                    (u32::MAX, u32::MAX) => u32::MAX,
                    (u32::MAX, c) | (c, u32::MAX) => {
                        let len = b.length(c) + n.length;
                        b.set_length(c, len);
                        c
                    }
                    (hl, hr) => b.join(n.length, n.color, hl, hr),
                },
            };
        }
        if built[0] != u32::MAX {
            entries.push(ForestEntry {
                gap: pending_gap,
                tree: b.finish(built[0]),
            });
            pending_gap = 0.0;
        }
    }
    let n = entries.len();
    let tail = match forest.tail_gap() {
        Some(g) => Some(g + pending_gap),
        None => Some(pending_gap).filter(|g| *g > 0.0),
    };
    let truncation = match forest.truncation() {
        Truncation::Trees(_) => Truncation::Trees(n),
        t => t,
    };
    Ok(PlaneForest::from_parts_unchecked(entries, tail, truncation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{sample_forest, sample_gw_tree, Params, RngStream};

    fn tree() -> PlaneTree {
        let l = |x| PlaneTree::leaf(x, None);
        PlaneTree::join(
            1.0,
            None,
            PlaneTree::join(0.5, None, l(1.0), l(2.0)),
            l(3.0),
        )
    }

    #[test]
    fn extreme_probabilities() {
        let mut r = RngStream::new(1, 0).rng();
        let t = tree();
        let black = color_by_leaves(&t, 0.0, &mut r).unwrap();
        assert!(black.nodes().iter().all(|n| n.color == Some(Color::Black)));
        let red = color_by_leaves(&t, 1.0, &mut r).unwrap();
        assert!(red.nodes().iter().all(|n| n.color == Some(Color::Red)));
        assert!(color_by_leaves(&t, 1.5, &mut r).is_err());
    }

    #[test]
    fn span_of_black_leaves() {
        let t = color_by_leaf_marks(&tree(), &[Color::Red, Color::Black, Color::Red]);
        assert_eq!(t.shape_key(), "b(b(r,b),r)");
        t.validate().unwrap();
    }

    #[test]
    fn single_leaf_red_frequency() {
        let mut r = RngStream::new(1, 1).rng();
        let t = PlaneTree::leaf(1.0, None);
        let n = 100_000;
        let red = (0..n)
            .filter(|_| {
                color_by_leaves(&t, 0.75, &mut r).unwrap().trunk_color() == Some(Color::Red)
            })
            .count() as f64;
        let sd = (0.75 * 0.25 / n as f64).sqrt();
        assert!((red / n as f64 - 0.75).abs() < 3.0 * sd);
    }

    #[test]
    fn thinning_extremes() {
        let p = Params::new(0.5, 1.0).unwrap();
        let mut r = RngStream::new(1, 2).rng();
        let f = sample_forest(&p, Truncation::Trees(50), &mut r).unwrap();
        assert_eq!(thin_and_span(&f, 1.0, &mut r).unwrap(), f);
        let empty = thin_and_span(&f, 0.0, &mut r).unwrap();
        assert!(empty.is_empty());
        assert!((empty.tail_gap().unwrap() - f.extent()).abs() < 1e-9);
    }

    #[test]
    fn thinning_keeps_root_positions_and_merges_chains() {
        let p = Params::new(0.0, 1.0).unwrap();
        let mut r = RngStream::new(1, 3).rng();
        for _ in 0..200 {
            let t = sample_gw_tree(&p, &mut r).unwrap();
            let f = PlaneForest::new(
                vec![ForestEntry {
                    gap: 1.0,
                    tree: t.clone(),
                }],
                Some(1.0),
                Truncation::Trees(1),
            )
            .unwrap();
            let g = thin_and_span(&f, 0.5, &mut r).unwrap();
            if let Some(e) = g.entries().first() {
                assert_eq!(e.gap, 1.0);
                e.tree.validate().unwrap();
                assert!(e.tree.height() <= t.height() + 1e-12);
                assert!(e.tree.total_length() <= t.total_length() + 1e-12);
            }
            assert!((g.extent() - f.extent()).abs() < 1e-12);
        }
    }
}
