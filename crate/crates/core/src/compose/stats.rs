use super::CompositeForest;
use crate::forest::{Color, PlaneForest};

/// Branching events of a coloured forest, counted over branches in DFS
/// order, plus per-tree trunk tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BranchingCounts {
    pub red_split: u64,
    pub red_leaf: u64,
    /// Black branch with a red left and black right child.
    pub black_red_black: u64,
    pub black_black_red: u64,
    pub black_black_black: u64,
    pub black_leaf: u64,
    pub trunk_red: u64,
    pub trunk_black: u64,
    /// Trees whose trunk branches, and among those, how many have a red left
    /// subtree and how many have both subtrees red.
    pub trunk_split: u64,
    pub trunk_split_left_red: u64,
    pub trunk_split_both_red: u64,
    /// Trees whose trunk is a leaf, and how many of those are red.
    pub trunk_leaf: u64,
    pub trunk_leaf_red: u64,
}

impl BranchingCounts {
    pub fn red_row(&self) -> [u64; 2] {
        [self.red_split, self.red_leaf]
    }

    pub fn black_row(&self) -> [u64; 4] {
        [
            self.black_red_black,
            self.black_black_red,
            self.black_black_black,
            self.black_leaf,
        ]
    }

    pub fn branches(&self) -> u64 {
        self.red_row().iter().sum::<u64>() + self.black_row().iter().sum::<u64>()
    }

    pub fn add(&mut self, o: &BranchingCounts) {
        self.red_split += o.red_split;
        self.red_leaf += o.red_leaf;
        self.black_red_black += o.black_red_black;
        self.black_black_red += o.black_black_red;
        self.black_black_black += o.black_black_black;
        self.black_leaf += o.black_leaf;
        self.trunk_red += o.trunk_red;
        self.trunk_black += o.trunk_black;
        self.trunk_split += o.trunk_split;
        self.trunk_split_left_red += o.trunk_split_left_red;
        self.trunk_split_both_red += o.trunk_split_both_red;
        self.trunk_leaf += o.trunk_leaf;
        self.trunk_leaf_red += o.trunk_leaf_red;
    }
}

fn count(forest: &PlaneForest, limit: usize) -> BranchingCounts {
    let mut c = BranchingCounts::default();
    let mut seen = 0usize;
    for t in forest.trees() {
        if seen >= limit {
            break;
        }
        let red = |i: usize| t.node(i).color == Some(Color::Red);
        if red(0) {
            c.trunk_red += 1;
        } else {
            c.trunk_black += 1;
        }
        match t.children(0) {
            Some((l, r)) => {
                c.trunk_split += 1;
                c.trunk_split_left_red += red(l) as u64;
                c.trunk_split_both_red += (red(l) && red(r)) as u64;
            }
            None => {
                c.trunk_leaf += 1;
                c.trunk_leaf_red += red(0) as u64;
            }
        }
        for i in 0..t.node_count() {
            if seen >= limit {
                break;
            }
            seen += 1;
            match (red(i), t.children(i)) {
                (true, Some(_)) => c.red_split += 1,
                (true, None) => c.red_leaf += 1,
                (false, None) => c.black_leaf += 1,
                (false, Some((l, r))) => match (red(l), red(r)) {
                    (true, false) => c.black_red_black += 1,
                    (false, true) => c.black_black_red += 1,
                    (false, false) => c.black_black_black += 1,
                    // excluded by the colour invariants
                    (true, true) => {}
                },
            }
        }
    }
    c
}

pub fn branching_statistics(composite: &CompositeForest) -> BranchingCounts {
    count(&composite.forest, usize::MAX)
}

/// Counts only the first `branches` branches in DFS order. Trunk tallies
/// cover the trees whose trunk falls inside that prefix.
pub fn branching_statistics_prefix(
    composite: &CompositeForest,
    branches: usize,
) -> BranchingCounts {
    count(&composite.forest, branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::compose;
    use crate::forest::{PlaneTree, Truncation};
    use crate::samplers::{monte_carlo, sample_forest, Params, RngStream};

    #[test]
    fn all_black_has_no_red_counts() {
        let b = |l| PlaneTree::leaf(l, Some(Color::Black));
        let t = PlaneTree::join(1.0, Some(Color::Black), b(1.0), b(1.0));
        let f = PlaneForest::new(
            vec![crate::forest::ForestEntry { gap: 1.0, tree: t }],
            None,
            Truncation::Trees(1),
        )
        .unwrap();
        let c = branching_statistics(&CompositeForest::from_colored(f).unwrap());
        assert_eq!(c.red_row(), [0, 0]);
        assert_eq!(c.black_row(), [0, 0, 1, 2]);
        assert_eq!(c.trunk_black, 1);
        assert_eq!(
            branching_statistics_prefix(
                &CompositeForest::from_colored(PlaneForest::empty()).unwrap(),
                5
            ),
            BranchingCounts::default()
        );
    }

    #[test]
    fn trunk_frequencies_match_tables() {
        // λ=0.5, µ=1, θ=2: P(trunk red) = (θ−µ)/(θ−λ) = 2/3 and, given a black
        // trunk, black→black/black has probability (µ−λ)/2θ = 1/8.
        let black = Params::new(0.5, 1.0).unwrap();
        let red = Params::new(1.0, 2.0).unwrap();
        let runs = monte_carlo(100_000, RngStream::new(5, 0), |rng| {
            let b = sample_forest(&black, Truncation::Trees(1), rng).unwrap();
            let cover = Truncation::FloorLength(b.dfs_time() + 1.0);
            let r = sample_forest(&red, cover, rng).unwrap();
            branching_statistics_prefix(&compose(&b, &r).unwrap(), 1)
        });
        let mut total = BranchingCounts::default();
        runs.iter().for_each(|k| total.add(k));
        let check = |hit: u64, n: u64, p: f64| {
            let f = hit as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 3.0 * sd, "{f} vs {p} (n = {n})");
        };
        check(
            total.trunk_red,
            total.trunk_red + total.trunk_black,
            2.0 / 3.0,
        );
        check(total.black_black_black, total.trunk_black, 0.125);
    }
}
