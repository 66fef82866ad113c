//! Plane forests, depth-first traversal, the forest/Harris-walk bijection
//! and the text formats used on disk.

mod ftf;
mod tree;
mod walk;

pub use ftf::{deserialize_forest, format_f64, serialize_forest};
pub use tree::{Color, Node, PlaneTree, TreeBuilder};
pub use walk::{
    forest_to_walk, read_walk_csv, tree_excursion, walk_to_forest, write_walk_csv, AlternatingWalk,
    PartialTree, Step, TreeExcursion, WalkDecoding, WalkTail,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("tree has no branches")]
    EmptyTree,
    #[error("branch length must be positive and finite, got {0}")]
    NonPositiveLength(f64),
    #[error("gap must be positive and finite, got {0}")]
    NonPositiveGap(f64),
    #[error("colour invariant violated at node {node}")]
    ColorInvariant { node: usize },
    #[error("tree mixes coloured and uncoloured branches")]
    MixedColoring,
    #[error("forest is empty")]
    EmptyForest,
    #[error("malformed walk: {0}")]
    MalformedWalk(String),
    #[error("rise equals fall at step {step}")]
    Tie { step: usize },
    #[error("segment is not a one-tree excursion: {0}")]
    InvalidSegment(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// How an infinite forest was cut down to a finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    Trees(usize),
    FloorLength(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestEntry {
    /// Floor distance from the previous root (or from the origin).
    pub gap: f64,
    pub tree: PlaneTree,
}

/// Finite prefix of a forest planted on the floor `[0, ∞)`.
///
/// `tail_gap` is the floor distance past the last root that is known to be
/// free of roots: the gap to the next root for `Trees(n)` prefixes, the
/// censored stretch up to `L` for `FloorLength(L)` prefixes.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneForest {
    entries: Vec<ForestEntry>,
    tail_gap: Option<f64>,
    truncation: Truncation,
}

impl Default for PlaneForest {
    fn default() -> Self {
        PlaneForest::empty()
    }
}

impl PlaneForest {
    pub fn empty() -> Self {
        PlaneForest {
            entries: Vec::new(),
            tail_gap: None,
            truncation: Truncation::Trees(0),
        }
    }

    pub fn new(
        entries: Vec<ForestEntry>,
        tail_gap: Option<f64>,
        truncation: Truncation,
    ) -> Result<Self, ForestError> {
        for e in &entries {
            if !(e.gap > 0.0 && e.gap.is_finite()) {
                return Err(ForestError::NonPositiveGap(e.gap));
            }
            e.tree.validate()?;
        }
        if let Some(g) = tail_gap {
            if !(g > 0.0 && g.is_finite()) {
                return Err(ForestError::NonPositiveGap(g));
            }
        }
        Ok(PlaneForest {
            entries,
            tail_gap,
            truncation,
        })
    }

    /// Forest of the given trees truncated by count, without a tail gap.
    pub fn from_entries(entries: Vec<ForestEntry>) -> Result<Self, ForestError> {
        let n = entries.len();
        Self::new(entries, None, Truncation::Trees(n))
    }

    pub(crate) fn from_parts_unchecked(
        entries: Vec<ForestEntry>,
        tail_gap: Option<f64>,
        truncation: Truncation,
    ) -> Self {
        PlaneForest {
            entries,
            tail_gap,
            truncation,
        }
    }

    pub fn entries(&self) -> &[ForestEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<ForestEntry> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tail_gap(&self) -> Option<f64> {
        self.tail_gap
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn trees(&self) -> impl Iterator<Item = &PlaneTree> {
        self.entries.iter().map(|e| &e.tree)
    }

    pub fn root_positions(&self) -> Vec<f64> {
        let mut x = 0.0;
        self.entries
            .iter()
            .map(|e| {
                x += e.gap;
                x
            })
            .collect()
    }

    /// Floor length covered by the prefix (last root plus tail).
    pub fn extent(&self) -> f64 {
        self.entries.iter().map(|e| e.gap).sum::<f64>() + self.tail_gap.unwrap_or(0.0)
    }

    pub fn total_length(&self) -> f64 {
        self.trees().map(PlaneTree::total_length).sum()
    }

    /// Total DFS time: floor extent plus twice the branch length.
    pub fn dfs_time(&self) -> f64 {
        self.extent() + 2.0 * self.total_length()
    }

    pub fn approx_eq(&self, other: &PlaneForest, rel_tol: f64) -> bool {
        if self.entries.len() != other.entries.len() {
            return false;
        }
        let close = |a: f64, b: f64| (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1e-300);
        let tails = match (self.tail_gap, other.tail_gap) {
            (None, None) => true,
            (Some(a), Some(b)) => close(a, b) || (a - b).abs() <= rel_tol * self.extent(),
            _ => false,
        };
        tails
            && self.entries.iter().zip(&other.entries).all(|(a, b)| {
                (close(a.gap, b.gap) || (a.gap - b.gap).abs() <= rel_tol * self.extent())
                    && a.tree.approx_eq(&b.tree, rel_tol)
            })
    }
}

/// Which side of a branch the traversal is on: the upward pass runs along
/// the left side, the downward pass along the right side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    /// Floor stretch ending at root `entry` (or the tail when `entry == len`).
    Floor { entry: usize },
    Branch {
        entry: usize,
        node: usize,
        side: Side,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DfsEvent {
    pub segment: Segment,
    pub start_height: f64,
    pub end_height: f64,
    pub start_time: f64,
    pub duration: f64,
}

impl DfsEvent {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }
}

/// Visits one tree's branches in DFS order as `(node, side, base height)`.
pub(crate) fn visit_tree(tree: &PlaneTree, mut f: impl FnMut(usize, Side, f64)) {
    let mut stack = vec![(0usize, Side::Up, 0.0f64)];
    while let Some((i, side, base)) = stack.pop() {
        f(i, side, base);
        if side == Side::Up {
            stack.push((i, Side::Down, base));
            if let Some((l, r)) = tree.children(i) {
                let top = base + tree.node(i).length;
                stack.push((r, Side::Up, top));
                stack.push((l, Side::Up, top));
            }
        }
    }
}

pub(crate) fn for_each_dfs_event(forest: &PlaneForest, mut f: impl FnMut(DfsEvent)) {
    let mut t = 0.0;
    for (entry, e) in forest.entries.iter().enumerate() {
        f(DfsEvent {
            segment: Segment::Floor { entry },
            start_height: 0.0,
            end_height: 0.0,
            start_time: t,
            duration: e.gap,
        });
        t += e.gap;
        visit_tree(&e.tree, |node, side, base| {
            let len = e.tree.node(node).length;
            let (start_height, end_height) = match side {
                Side::Up => (base, base + len),
                Side::Down => (base + len, base),
            };
            f(DfsEvent {
                segment: Segment::Branch { entry, node, side },
                start_height,
                end_height,
                start_time: t,
                duration: len,
            });
            t += len;
        });
    }
    if let Some(g) = forest.tail_gap {
        f(DfsEvent {
            segment: Segment::Floor {
                entry: forest.entries.len(),
            },
            start_height: 0.0,
            end_height: 0.0,
            start_time: t,
            duration: g,
        });
    }
}

/// The DFS of a forest as a flat event list: two events per branch, one
/// per floor stretch.
pub fn dfs_events(forest: &PlaneForest) -> Vec<DfsEvent> {
    let mut out = Vec::new();
    for_each_dfs_event(forest, |e| out.push(e));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_leaf_forest(tail: Option<f64>) -> PlaneForest {
        let tree = PlaneTree::join(
            2.0,
            None,
            PlaneTree::leaf(1.0, None),
            PlaneTree::leaf(2.0, None),
        );
        PlaneForest::new(
            vec![ForestEntry { gap: 1.0, tree }],
            tail,
            Truncation::Trees(1),
        )
        .unwrap()
    }

    #[test]
    fn empty_forest_has_no_events() {
        assert!(dfs_events(&PlaneForest::empty()).is_empty());
    }

    #[test]
    fn single_branch_events() {
        let f = PlaneForest::from_entries(vec![ForestEntry {
            gap: 1.0,
            tree: PlaneTree::leaf(2.0, None),
        }])
        .unwrap();
        let ev = dfs_events(&f);
        let kinds: Vec<_> = ev.iter().map(|e| (e.segment, e.duration)).collect();
        assert_eq!(
            kinds,
            vec![
                (Segment::Floor { entry: 0 }, 1.0),
                (
                    Segment::Branch {
                        entry: 0,
                        node: 0,
                        side: Side::Up
                    },
                    2.0
                ),
                (
                    Segment::Branch {
                        entry: 0,
                        node: 0,
                        side: Side::Down
                    },
                    2.0
                ),
            ]
        );
        assert_eq!(ev[2].start_height, 2.0);
        assert_eq!(ev[2].end_height, 0.0);
    }

    #[test]
    fn two_leaf_event_order() {
        let ev = dfs_events(&two_leaf_forest(None));
        let durations: Vec<f64> = ev[1..].iter().map(|e| e.duration).collect();
        assert_eq!(durations, vec![2.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(durations.iter().sum::<f64>(), 10.0);
        let nodes: Vec<_> = ev[1..]
            .iter()
            .map(|e| match e.segment {
                Segment::Branch { node, side, .. } => (node, side),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(
            nodes,
            vec![
                (0, Side::Up),
                (1, Side::Up),
                (1, Side::Down),
                (2, Side::Up),
                (2, Side::Down),
                (0, Side::Down)
            ]
        );
        assert_eq!(ev.last().unwrap().end_time(), 11.0);
    }

    #[test]
    fn rejects_bad_gaps() {
        let e = ForestEntry {
            gap: 0.0,
            tree: PlaneTree::leaf(1.0, None),
        };
        assert!(matches!(
            PlaneForest::from_entries(vec![e]),
            Err(ForestError::NonPositiveGap(_))
        ));
    }

    #[test]
    fn extent_and_dfs_time() {
        let f = two_leaf_forest(Some(0.5));
        assert_eq!(f.extent(), 1.5);
        assert_eq!(f.dfs_time(), 11.5);
        assert_eq!(f.root_positions(), vec![1.0]);
    }
}
