//! Forest composition: wrapping a finer (red) forest around the DFS of a
//! coarser (black) one, its exact inverse, leaf colouring, leaf thinning,
//! and branching-event statistics of coloured forests.

mod color;
mod stats;

pub use color::{color_by_leaf_marks, color_by_leaves, span_leaves, thin_and_span};
pub use stats::{branching_statistics, branching_statistics_prefix, BranchingCounts};

use std::io::Write;

use thiserror::Error;

use crate::forest::{
    for_each_dfs_event, Color, ForestEntry, ForestError, PlaneForest, PlaneTree, Segment, Side,
    TreeBuilder, Truncation,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("red root {red_tree} lands exactly on a vertex or root of the black forest")]
    Tie { red_tree: usize },
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("composite forest is not fully coloured")]
    Uncolored,
    #[error("{got} leaf marks for {expected} leaves")]
    MarkCount { expected: usize, got: usize },
}

/// Where a red tree sits in the composite forest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attachment {
    /// On the left side of a black branch (reached on the way up).
    Left,
    /// On the right side of a black branch (reached on the way down).
    Right,
    Floor,
}

impl Attachment {
    pub fn name(self) -> &'static str {
        match self {
            Attachment::Left => "left",
            Attachment::Right => "right",
            Attachment::Floor => "floor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Piece `fragment` (counted from the base) of black branch `node` of
    /// black tree `tree`.
    Black {
        tree: usize,
        node: usize,
        fragment: usize,
    },
    Red {
        tree: usize,
        node: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BranchRecord {
    pub origin: Origin,
    /// Set on red roots only.
    pub attachment: Option<Attachment>,
}

#[derive(Clone, Debug, PartialEq)]
struct Inputs {
    black_tail: Option<f64>,
    black_truncation: Truncation,
    red_tail: Option<f64>,
    red_truncation: Truncation,
}

/// A red/black coloured forest with the origin of every branch.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeForest {
    pub forest: PlaneForest,
    /// Per composite tree, one record per branch in preorder.
    pub provenance: Vec<Vec<BranchRecord>>,
    /// The red forest did not reach the end of the black DFS.
    pub partial: bool,
    inputs: Option<Inputs>,
}

impl CompositeForest {
    /// Wraps a coloured forest read from elsewhere. Provenance is rebuilt
    /// from colours; split then cannot restore the original tails.
    pub fn from_colored(forest: PlaneForest) -> Result<Self, ComposeError> {
        let mut provenance = Vec::with_capacity(forest.len());
        let (mut black_trees, mut red_trees) = (0usize, 0usize);
        for e in forest.entries() {
            let t = &e.tree;
            if !t.is_colored() {
                return Err(ComposeError::Uncolored);
            }
            t.validate()?;
            let black_tree = black_trees;
            if t.trunk_color() == Some(Color::Black) {
                black_trees += 1;
            }
            let mut recs = vec![
                BranchRecord {
                    origin: Origin::Red { tree: 0, node: 0 },
                    attachment: None
                };
                t.node_count()
            ];
            let parents = t.parents();
            let mut red_root = 0usize;
            for i in 0..t.node_count() {
                let c = t.node(i).color.unwrap();
                let p = parents[i];
                let parent_black = p != usize::MAX && t.node(p).color == Some(Color::Black);
                recs[i] = match c {
                    Color::Black => BranchRecord {
                        origin: Origin::Black {
                            tree: black_tree,
                            node: i,
                            fragment: 0,
                        },
                        attachment: None,
                    },
                    Color::Red if p == usize::MAX || parent_black => {
                        red_root = i;
                        red_trees += 1;
                        BranchRecord {
                            origin: Origin::Red {
                                tree: red_trees - 1,
                                node: 0,
                            },
                            attachment: Some(if p == usize::MAX {
                                Attachment::Floor
                            } else if p + 1 == i {
                                Attachment::Left
                            } else {
                                Attachment::Right
                            }),
                        }
                    }
                    Color::Red => BranchRecord {
                        origin: Origin::Red {
                            tree: red_trees - 1,
                            node: i - red_root,
                        },
                        attachment: None,
                    },
                };
            }
            provenance.push(recs);
        }
        Ok(CompositeForest {
            forest,
            provenance,
            partial: false,
            inputs: None,
        })
    }

    /// Rows `branch,origin,side`; `branch` is the DFS index across the
    /// whole forest.
    pub fn write_provenance_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "branch,origin,side")?;
        let mut k = 0usize;
        for recs in &self.provenance {
            for r in recs {
                let origin = match r.origin {
                    Origin::Black {
                        tree,
                        node,
                        fragment,
                    } => {
                        format!("black:{tree}.{node}.{fragment}")
                    }
                    Origin::Red { tree, node } => format!("red:{tree}.{node}"),
                };
                let side = r.attachment.map_or("", Attachment::name);
                writeln!(out, "{k},{origin},{side}")?;
                k += 1;
            }
        }
        Ok(())
    }
}

struct Attach {
    node: usize,
    height: f64,
    side: Attachment,
    red: usize,
}

/// Composes a black forest with a red one. Each red root at floor position
/// `x` is carried to the point the black DFS reaches at time `x`: onto the
/// left side of a branch on its upward pass, the right side on the
/// downward pass, or onto the floor between black trees.
pub fn compose(black: &PlaneForest, red: &PlaneForest) -> Result<CompositeForest, ComposeError> {
    let red_pos = red.root_positions();
    let red_trees: Vec<&PlaneTree> = red.trees().collect();
    let black_len: Vec<f64> = black.trees().map(PlaneTree::total_length).collect();
    let total_black: f64 = black_len.iter().sum();
    let black_pos = black.root_positions();

    let mut attach: Vec<Vec<Attach>> = (0..black.len()).map(|_| Vec::new()).collect();
    let mut floor: Vec<(f64, usize)> = Vec::new();
    let mut j = 0usize;
    // black length before each black tree
    let mut before = Vec::with_capacity(black_len.len() + 1);
    before.push(0.0);
    for l in &black_len {
        before.push(before.last().unwrap() + l);
    }
    let mut tie = None;
    for_each_dfs_event(black, |e| {
        if tie.is_some() {
            return;
        }
        let end = e.end_time();
        while j < red_pos.len() && red_pos[j] < end {
            let x = red_pos[j];
            if x == e.start_time {
                tie = Some(j);
                return;
            }
            match e.segment {
                Segment::Floor { entry } => floor.push((x - 2.0 * before[entry], j)),
                Segment::Branch { entry, node, side } => {
                    let len = e.duration;
                    let (height, side) = match side {
                        Side::Up => (x - e.start_time, Attachment::Left),
                        Side::Down => (len - (x - e.start_time), Attachment::Right),
                    };
                    if !(height > 0.0 && height < len) {
                        tie = Some(j);
                        return;
                    }
                    attach[entry].push(Attach {
                        node,
                        height,
                        side,
                        red: j,
                    });
                }
            }
            j += 1;
        }
    });
    if let Some(red_tree) = tie {
        return Err(ComposeError::Tie { red_tree });
    }
    let dfs_total = black.dfs_time();
    for (k, &x) in red_pos.iter().enumerate().skip(j) {
        if x == dfs_total && black.tail_gap().is_none() && !black.is_empty() {
            return Err(ComposeError::Tie { red_tree: k });
        }
        floor.push((x - 2.0 * total_black, k));
    }

    let mut b = TreeBuilder::new();
    let mut prov: Vec<BranchRecord> = Vec::new();

    // (floor position, composite tree, provenance)
    let mut items: Vec<(f64, PlaneTree, Vec<BranchRecord>)> = Vec::new();
    // Reverse preorder puts children before parents, and node `i` of the
    // red tree lands at handle `base + last - i`.
    let graft_red = |b: &mut TreeBuilder, prov: &mut Vec<BranchRecord>, j: usize, side| -> u32 {
        let t = red_trees[j];
        let last = t.node_count() - 1;
        let base = prov.len() as u32;
        let handle = |i: usize| base + (last - i) as u32;
        for i in (0..=last).rev() {
            let n = t.node(i);
            let h = match t.children(i) {
                None => b.leaf(n.length, Some(Color::Red)),
                Some((l, r)) => b.join(n.length, Some(Color::Red), handle(l), handle(r)),
            };
            debug_assert_eq!(h, handle(i));
            prov.push(BranchRecord {
                origin: Origin::Red { tree: j, node: i },
                attachment: if i == 0 { Some(side) } else { None },
            });
        }
        handle(0)
    };

    for (t, tree) in black.trees().enumerate() {
        b.clear();
        prov.clear();
        // children before parents, with each node's attachments bottom up
        let ats = &mut attach[t];
        ats.sort_by(|a, c| c.node.cmp(&a.node).then(a.height.total_cmp(&c.height)));
        let mut next = 0;
        let mut built = vec![0u32; tree.node_count()];
        for v in (0..tree.node_count()).rev() {
            let from = next;
            while next < ats.len() && ats[next].node == v {
                next += 1;
            }
            let list = &ats[from..next];
            if list.windows(2).any(|w| w[0].height == w[1].height) {
                return Err(ComposeError::Tie {
                    red_tree: list[0].red,
                });
            }
            let len = tree.node(v).length;
            let k = list.len();
            let top_base = list.last().map_or(0.0, |a| a.height);
            let black_rec = |fragment| BranchRecord {
                origin: Origin::Black {
                    tree: t,
                    node: v,
                    fragment,
                },
                attachment: None,
            };
            let mut cur = match tree.children(v) {
                None => b.leaf(len - top_base, Some(Color::Black)),
                Some((l, r)) => b.join(len - top_base, Some(Color::Black), built[l], built[r]),
            };
            debug_assert_eq!(cur as usize, prov.len());
            prov.push(black_rec(k));
            for i in (0..k).rev() {
                let a = &list[i];
                let red_root = graft_red(&mut b, &mut prov, a.red, a.side);
                let below = if i == 0 { 0.0 } else { list[i - 1].height };
                let (l, r) = match a.side {
                    Attachment::Left => (red_root, cur),
                    _ => (cur, red_root),
                };
                cur = b.join(a.height - below, Some(Color::Black), l, r);
                prov.push(black_rec(i));
            }
            built[v] = cur;
        }
        let (composite, order) = b.finish_with_order(built[0]);
        let recs = order.iter().map(|&h| prov[h as usize]).collect();
        items.push((black_pos[t], composite, recs));
    }
    for &(pos, j) in &floor {
        b.clear();
        prov.clear();
        let root = graft_red(&mut b, &mut prov, j, Attachment::Floor);
        let (tree, order) = b.finish_with_order(root);
        let recs = order.iter().map(|&h| prov[h as usize]).collect();
        items.push((pos, tree, recs));
    }
    items.sort_by(|a, c| a.0.total_cmp(&c.0));
    if items.windows(2).any(|w| w[0].0 >= w[1].0) || items.first().is_some_and(|i| i.0 <= 0.0) {
        return Err(ComposeError::Tie { red_tree: 0 });
    }

    let red_extent = red.extent();
    let partial = red_extent < dfs_total;
    let mut entries = Vec::with_capacity(items.len());
    let mut provenance = Vec::with_capacity(items.len());
    let mut prev = 0.0;
    for (pos, tree, recs) in items {
        entries.push(ForestEntry {
            gap: pos - prev,
            tree,
        });
        provenance.push(recs);
        prev = pos;
    }
    let n = entries.len();
    let (tail, truncation) = if black.is_empty() {
        (red.tail_gap(), red.truncation())
    } else if partial {
        (None, Truncation::Trees(n))
    } else {
        let extent = red_extent - 2.0 * total_black;
        (
            Some(extent - prev).filter(|g| *g > 0.0),
            Truncation::FloorLength(extent),
        )
    };
    Ok(CompositeForest {
        forest: PlaneForest::from_parts_unchecked(entries, tail, truncation),
        provenance,
        partial,
        inputs: Some(Inputs {
            black_tail: black.tail_gap(),
            black_truncation: black.truncation(),
            red_tail: red.tail_gap(),
            red_truncation: red.truncation(),
        }),
    })
}

/// Separates a composite forest into its black forest and the red forest
/// that was wrapped around it. Red floor positions are read off as black
/// DFS times. Trees come back uncoloured.
pub fn split(composite: &CompositeForest) -> Result<(PlaneForest, PlaneForest), ComposeError> {
    let forest = &composite.forest;
    let mut black_entries = Vec::new();
    let mut red_entries: Vec<ForestEntry> = Vec::new();
    let mut black_time = 0.0;
    let mut last_black_root = 0.0;
    let mut last_red = 0.0;
    let mut floor_pos = 0.0;
    let mut b = TreeBuilder::new();
    for e in forest.entries() {
        let t = &e.tree;
        if !t.is_colored() {
            return Err(ComposeError::Uncolored);
        }
        t.validate()?;
        black_time += e.gap;
        floor_pos += e.gap;
        let mut red_at = |time: f64, tree: PlaneTree| {
            red_entries.push(ForestEntry {
                gap: time - last_red,
                tree,
            });
            last_red = time;
        };
        if t.trunk_color() == Some(Color::Red) {
            red_at(black_time, t.uncolored());
            continue;
        }
        let mut stack = vec![(0usize, Side::Up)];
        while let Some((i, side)) = stack.pop() {
            let n = t.node(i);
            if n.color == Some(Color::Red) {
                red_at(black_time, t.subtree(i).uncolored());
                continue;
            }
            black_time += n.length;
            if side == Side::Up {
                stack.push((i, Side::Down));
                if let Some((l, r)) = t.children(i) {
                    stack.push((r, Side::Up));
                    stack.push((l, Side::Up));
                }
            }
        }
        b.clear();
        let mut built = vec![u32::MAX; t.node_count()];
        for v in t.postorder() {
            let n = t.node(v);
            if n.color == Some(Color::Red) {
                continue;
            }
            built[v] = match t.children(v) {
                None => b.leaf(n.length, None),
                Some((l, r)) => match (built[l], built[r]) {
                    (u32::MAX, c) | (c, u32::MAX) => {
                        let len = b.length(c) + n.length;
                        b.set_length(c, len);
                        c
                    }
                    (hl, hr) => b.join(n.length, None, hl, hr),
                },
            };
        }
        black_entries.push(ForestEntry {
            gap: floor_pos - last_black_root,
            tree: b.finish(built[0]),
        });
        last_black_root = floor_pos;
    }
    let (nb, nr) = (black_entries.len(), red_entries.len());
    let (black, red) = match &composite.inputs {
        Some(i) => (
            PlaneForest::from_parts_unchecked(black_entries, i.black_tail, i.black_truncation),
            PlaneForest::from_parts_unchecked(red_entries, i.red_tail, i.red_truncation),
        ),
        // The composite floor ends where the red floor, less the black
        // depth-first time, ends; the black floor end is lost.
        None => {
            let red_tail = forest.tail_gap().map(|g| black_time + g - last_red);
            (
                PlaneForest::from_parts_unchecked(black_entries, None, Truncation::Trees(nb)),
                PlaneForest::from_parts_unchecked(red_entries, red_tail, Truncation::Trees(nr)),
            )
        }
    };
    Ok((black, red))
}
