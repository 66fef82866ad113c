use std::io::{BufRead, Write};

use super::{
    for_each_dfs_event, format_f64, visit_tree, ForestEntry, ForestError, PlaneForest, PlaneTree,
    Segment, Side, TreeBuilder, Truncation,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub rise: f64,
    pub fall: f64,
}

/// Whether the last fall of a walk is a true value or only a lower bound
/// (the walk was cut somewhere inside that fall).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkTail {
    Complete,
    Censored,
}

/// Harris walk: `H_0 = 0`, `H_1 = -initial_fall`, then alternating rises and
/// falls. Local maxima sit at even indices, minima at odd ones.
#[derive(Clone, Debug, PartialEq)]
pub struct AlternatingWalk {
    initial_fall: f64,
    steps: Vec<Step>,
    tail: WalkTail,
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

impl AlternatingWalk {
    pub fn new(initial_fall: f64, steps: Vec<Step>, tail: WalkTail) -> Result<Self, ForestError> {
        if !positive(initial_fall) {
            return Err(ForestError::MalformedWalk(format!(
                "initial fall {initial_fall} is not positive"
            )));
        }
        if let Some((k, s)) = steps
            .iter()
            .enumerate()
            .find(|(_, s)| !positive(s.rise) || !positive(s.fall))
        {
            return Err(ForestError::MalformedWalk(format!(
                "step {} has rise {} and fall {}",
                k + 1,
                s.rise,
                s.fall
            )));
        }
        Ok(AlternatingWalk {
            initial_fall,
            steps,
            tail,
        })
    }

    pub(crate) fn new_unchecked(initial_fall: f64, steps: Vec<Step>, tail: WalkTail) -> Self {
        AlternatingWalk {
            initial_fall,
            steps,
            tail,
        }
    }

    /// Rebuilds a walk from its vertex heights `H_0 .. H_{2N+1}`.
    pub fn from_heights(h: &[f64]) -> Result<Self, ForestError> {
        if h.len() < 2 || h.len() % 2 != 0 {
            return Err(ForestError::MalformedWalk(format!(
                "expected an even number (>= 2) of vertices, got {}",
                h.len()
            )));
        }
        if h[0] != 0.0 {
            return Err(ForestError::MalformedWalk("H_0 must be 0".into()));
        }
        let steps = h[1..]
            .windows(3)
            .step_by(2)
            .map(|w| Step {
                rise: w[1] - w[0],
                fall: w[1] - w[2],
            })
            .collect();
        Self::new(-h[1], steps, WalkTail::Complete)
    }

    pub fn initial_fall(&self) -> f64 {
        self.initial_fall
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn tail(&self) -> WalkTail {
        self.tail
    }

    pub fn pairs(&self) -> usize {
        self.steps.len()
    }

    pub fn with_tail(mut self, tail: WalkTail) -> Self {
        self.tail = tail;
        self
    }

    /// Vertex heights `H_0 .. H_{2N+1}`.
    pub fn heights(&self) -> Vec<f64> {
        let mut h = Vec::with_capacity(2 * self.steps.len() + 2);
        h.push(0.0);
        let mut x = -self.initial_fall;
        h.push(x);
        for s in &self.steps {
            x += s.rise;
            h.push(x);
            x -= s.fall;
            h.push(x);
        }
        h
    }

    /// Increments of the walk in order: `-F_0, +R_1, -F_1, ...`.
    pub fn increments(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.steps.len() + 1);
        out.push(-self.initial_fall);
        for s in &self.steps {
            out.push(s.rise);
            out.push(-s.fall);
        }
        out
    }

    /// First `n` pairs (a complete walk: the cut falls are exact values).
    pub fn prefix(&self, n: usize) -> AlternatingWalk {
        let tail = if n < self.steps.len() {
            WalkTail::Complete
        } else {
            self.tail
        };
        AlternatingWalk {
            initial_fall: self.initial_fall,
            steps: self.steps[..n.min(self.steps.len())].to_vec(),
            tail,
        }
    }

    pub fn approx_eq(&self, other: &AlternatingWalk, rel_tol: f64) -> bool {
        let scale = self
            .increments()
            .iter()
            .chain(other.increments().iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        self.tail == other.tail
            && self.steps.len() == other.steps.len()
            && self
                .increments()
                .iter()
                .zip(other.increments())
                .all(|(a, b)| (a - b).abs() <= rel_tol * scale)
    }
}

/// Harris walk of a forest. A forest without a tail gap gives a censored
/// walk whose last fall ends at the last root; so does a floor-length
/// truncation, whose tail is itself censored.
pub fn forest_to_walk(forest: &PlaneForest) -> Result<AlternatingWalk, ForestError> {
    if forest.is_empty() {
        return Err(ForestError::EmptyForest);
    }
    let mut runs: Vec<f64> = Vec::with_capacity(4 * forest.len());
    let mut rising = false;
    let mut current = 0.0;
    for_each_dfs_event(forest, |e| {
        let up = matches!(e.segment, Segment::Branch { side: Side::Up, .. });
        if up != rising && current > 0.0 {
            runs.push(current);
            current = 0.0;
        }
        rising = up;
        current += e.duration;
    });
    runs.push(current);
    let steps = runs[1..]
        .chunks_exact(2)
        .map(|c| Step {
            rise: c[0],
            fall: c[1],
        })
        .collect();
    let tail = match (forest.tail_gap(), forest.truncation()) {
        (Some(_), Truncation::Trees(_)) => WalkTail::Complete,
        _ => WalkTail::Censored,
    };
    Ok(AlternatingWalk::new_unchecked(runs[0], steps, tail))
}

/// A tree that the walk started but did not finish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialTree {
    pub gap: f64,
    pub leaves_seen: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkDecoding {
    pub forest: PlaneForest,
    pub partial: Option<PartialTree>,
}

const CENSOR_TOL: f64 = 1e-10;

enum Cmp {
    Less,
    Equal,
    Greater,
}

/// Comparison of an overshoot against a pending length. Strict for exact
/// values; for the censored last fall, near-equality means "reached that
/// level exactly" and "less" means the true fall is unknown.
fn compare(a: f64, b: f64, tol: f64) -> Cmp {
    if (a - b).abs() <= tol {
        Cmp::Equal
    } else if a < b {
        Cmp::Less
    } else {
        Cmp::Greater
    }
}

/// Decodes one complete-tree-at-a-time stream of (rise, fall) pairs with
/// the LIFO stack of pending left subtrees.
pub(crate) fn decode_steps(
    initial_fall: f64,
    steps: &[Step],
    tail: WalkTail,
) -> Result<WalkDecoding, ForestError> {
    let mut b = TreeBuilder::new();
    let mut entries = Vec::new();
    let mut stack: Vec<(f64, u32)> = Vec::new();
    let mut gap = initial_fall;
    let mut leaves = 0usize;
    let mut over_end: Option<f64> = None;
    let last = steps.len().saturating_sub(1);
    for (k, s) in steps.iter().enumerate() {
        let censored = tail == WalkTail::Censored && k == last;
        let tol = if censored { CENSOR_TOL * s.fall } else { 0.0 };
        leaves += 1;
        over_end = None;
        let (mut over, mut cur) = match compare(s.fall, s.rise, tol) {
            Cmp::Less if censored => break,
            Cmp::Less => {
                let leaf = b.leaf(s.fall, None);
                stack.push((s.rise - s.fall, leaf));
                continue;
            }
            Cmp::Equal if !censored => return Err(ForestError::Tie { step: k + 1 }),
            Cmp::Equal => (0.0, b.leaf(s.rise, None)),
            Cmp::Greater => (s.fall - s.rise, b.leaf(s.rise, None)),
        };
        loop {
            let Some(&(r, left)) = stack.last() else {
                let tree = b.finish(cur);
                b.clear();
                entries.push(ForestEntry { gap, tree });
                gap = over;
                leaves = 0;
                over_end = Some(over);
                break;
            };
            match compare(over, r, tol) {
                Cmp::Less if censored => break,
                Cmp::Less => {
                    stack.pop();
                    let node = b.join(over, None, left, cur);
                    stack.push((r - over, node));
                    break;
                }
                Cmp::Equal if !censored => return Err(ForestError::Tie { step: k + 1 }),
                Cmp::Equal => {
                    stack.pop();
                    cur = b.join(r, None, left, cur);
                    over = 0.0;
                }
                Cmp::Greater => {
                    stack.pop();
                    cur = b.join(r, None, left, cur);
                    over -= r;
                }
            }
        }
    }
    let n = entries.len();
    let root_pos: f64 = entries.iter().map(|e| e.gap).sum();
    let (forest, partial) = match (over_end, tail) {
        (Some(o), WalkTail::Complete) => (
            PlaneForest::from_parts_unchecked(entries, Some(o), Truncation::Trees(n)),
            None,
        ),
        (Some(o), WalkTail::Censored) if o > 0.0 => (
            PlaneForest::from_parts_unchecked(
                entries,
                Some(o),
                Truncation::FloorLength(root_pos + o),
            ),
            None,
        ),
        (Some(_), WalkTail::Censored) => (
            PlaneForest::from_parts_unchecked(entries, None, Truncation::Trees(n)),
            None,
        ),
        (None, _) if steps.is_empty() => {
            let forest = match tail {
                WalkTail::Complete => {
                    PlaneForest::from_parts_unchecked(entries, Some(gap), Truncation::Trees(0))
                }
                WalkTail::Censored => PlaneForest::from_parts_unchecked(
                    entries,
                    Some(gap),
                    Truncation::FloorLength(gap),
                ),
            };
            (forest, None)
        }
        (None, _) => (
            PlaneForest::from_parts_unchecked(entries, Some(gap), Truncation::Trees(n)),
            Some(PartialTree {
                gap,
                leaves_seen: leaves,
            }),
        ),
    };
    Ok(WalkDecoding { forest, partial })
}

/// Inverse of [`forest_to_walk`]. Trees still open when the walk ends are
/// reported through `partial`; the gap to such a tree becomes the tail gap.
pub fn walk_to_forest(walk: &AlternatingWalk) -> Result<WalkDecoding, ForestError> {
    decode_steps(walk.initial_fall, &walk.steps, walk.tail)
}

/// The walk segment of a single tree: starts at the root level with a rise,
/// stays strictly above it, and ends back on it with a fall.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeExcursion {
    steps: Vec<Step>,
}

impl TreeExcursion {
    pub fn from_steps(steps: Vec<Step>) -> Result<Self, ForestError> {
        if steps.is_empty() {
            return Err(ForestError::InvalidSegment("no steps".into()));
        }
        let mut h = 0.0;
        let mut scale = 0.0f64;
        for (k, s) in steps.iter().enumerate() {
            if !positive(s.rise) || !positive(s.fall) {
                return Err(ForestError::InvalidSegment(format!(
                    "step {} is not a positive rise/fall pair",
                    k + 1
                )));
            }
            h += s.rise;
            scale = scale.max(h);
            h -= s.fall;
            if k + 1 < steps.len() && h <= CENSOR_TOL * scale {
                return Err(ForestError::InvalidSegment(format!(
                    "returns to the root level after step {}",
                    k + 1
                )));
            }
        }
        if h.abs() > CENSOR_TOL * scale {
            return Err(ForestError::InvalidSegment(format!(
                "ends at level {h} instead of 0"
            )));
        }
        Ok(TreeExcursion { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn leaves(&self) -> usize {
        self.steps.len()
    }

    /// Time reversal: the excursion of the mirror-image tree.
    pub fn reverse(&self) -> TreeExcursion {
        TreeExcursion {
            steps: self
                .steps
                .iter()
                .rev()
                .map(|s| Step {
                    rise: s.fall,
                    fall: s.rise,
                })
                .collect(),
        }
    }

    pub fn to_tree(&self) -> Result<PlaneTree, ForestError> {
        let d = decode_steps(1.0, &self.steps, WalkTail::Censored)?;
        let mut entries = d.forest.into_entries();
        if entries.len() != 1 || d.partial.is_some() {
            return Err(ForestError::InvalidSegment(
                "does not decode to exactly one tree".into(),
            ));
        }
        Ok(entries.pop().unwrap().tree)
    }

    /// Total time spent, i.e. twice the tree length.
    pub fn duration(&self) -> f64 {
        self.steps.iter().map(|s| s.rise + s.fall).sum()
    }
}

pub fn tree_excursion(tree: &PlaneTree) -> TreeExcursion {
    let mut steps = Vec::with_capacity(tree.leaf_count());
    let mut rise = 0.0;
    let mut fall = 0.0;
    visit_tree(tree, |i, side, _| {
        let len = tree.node(i).length;
        match side {
            Side::Up => {
                if fall > 0.0 {
                    steps.push(Step { rise, fall });
                    rise = 0.0;
                    fall = 0.0;
                }
                rise += len;
            }
            Side::Down => fall += len,
        }
    });
    steps.push(Step { rise, fall });
    TreeExcursion { steps }
}

pub fn write_walk_csv<W: Write>(walk: &AlternatingWalk, mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,H")?;
    for (n, h) in walk.heights().iter().enumerate() {
        writeln!(out, "{},{}", n, format_f64(*h))?;
    }
    Ok(())
}

pub fn read_walk_csv<R: BufRead>(input: R) -> Result<AlternatingWalk, ForestError> {
    let mut heights = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| parse_err(i + 1, 1, e.to_string()))?;
        let line = line.trim();
        if i == 0 {
            if line != "n,H" {
                return Err(parse_err(1, 1, "expected header `n,H`".into()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (n, h) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, 1, "expected `n,H`".into()))?;
        let n: usize = n
            .parse()
            .map_err(|_| parse_err(i + 1, 1, format!("bad index `{n}`")))?;
        if n != heights.len() {
            return Err(parse_err(i + 1, 1, format!("index {n} out of sequence")));
        }
        let h: f64 = h.parse().map_err(|_| {
            parse_err(
                i + 1,
                line.find(',').unwrap() + 2,
                format!("bad value `{h}`"),
            )
        })?;
        heights.push(h);
    }
    AlternatingWalk::from_heights(&heights)
}

fn parse_err(line: usize, column: usize, message: String) -> ForestError {
    ForestError::Parse {
        line,
        column,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_leaf_tree() -> PlaneTree {
        PlaneTree::join(
            2.0,
            None,
            PlaneTree::leaf(1.0, None),
            PlaneTree::leaf(2.0, None),
        )
    }

    fn forest(trees: Vec<(f64, PlaneTree)>, tail: Option<f64>) -> PlaneForest {
        let n = trees.len();
        PlaneForest::new(
            trees
                .into_iter()
                .map(|(gap, tree)| ForestEntry { gap, tree })
                .collect(),
            tail,
            Truncation::Trees(n),
        )
        .unwrap()
    }

    fn step(rise: f64, fall: f64) -> Step {
        Step { rise, fall }
    }

    #[test]
    fn single_branch_walk() {
        let f = forest(vec![(1.0, PlaneTree::leaf(2.0, None))], Some(0.5));
        let w = forest_to_walk(&f).unwrap();
        assert_eq!(w.initial_fall(), 1.0);
        assert_eq!(w.steps(), &[step(2.0, 2.5)]);
        assert_eq!(w.tail(), WalkTail::Complete);
        let d = walk_to_forest(&w).unwrap();
        assert_eq!(d.forest, f);
        assert!(d.partial.is_none());
    }

    #[test]
    fn two_leaf_walk() {
        let f = forest(vec![(1.0, two_leaf_tree())], Some(0.5));
        let w = forest_to_walk(&f).unwrap();
        assert_eq!(w.initial_fall(), 1.0);
        assert_eq!(w.steps(), &[step(3.0, 1.0), step(2.0, 4.5)]);
        assert_eq!(walk_to_forest(&w).unwrap().forest, f);
        assert_eq!(w.heights(), vec![0.0, -1.0, 2.0, 1.0, 3.0, -1.5]);
    }

    #[test]
    fn two_single_branch_trees() {
        let f = forest(
            vec![
                (1.0, PlaneTree::leaf(1.0, None)),
                (1.0, PlaneTree::leaf(1.0, None)),
            ],
            None,
        );
        let w = forest_to_walk(&f).unwrap();
        assert_eq!(w.steps(), &[step(1.0, 2.0), step(1.0, 1.0)]);
        assert_eq!(w.tail(), WalkTail::Censored);
        let d = walk_to_forest(&w).unwrap();
        assert_eq!(d.forest, f);
    }

    #[test]
    fn floor_length_prefix_round_trips() {
        let f = PlaneForest::new(
            vec![ForestEntry {
                gap: 1.0,
                tree: two_leaf_tree(),
            }],
            Some(0.25),
            Truncation::FloorLength(1.25),
        )
        .unwrap();
        let w = forest_to_walk(&f).unwrap();
        assert_eq!(w.tail(), WalkTail::Censored);
        assert_eq!(walk_to_forest(&w).unwrap().forest, f);
    }

    #[test]
    fn empty_forest_is_rejected() {
        assert_eq!(
            forest_to_walk(&PlaneForest::empty()),
            Err(ForestError::EmptyForest)
        );
    }

    #[test]
    fn walk_ending_mid_tree_is_partial() {
        let w = AlternatingWalk::new(
            1.0,
            vec![step(1.0, 2.0), step(3.0, 1.0)],
            WalkTail::Complete,
        )
        .unwrap();
        let d = walk_to_forest(&w).unwrap();
        assert_eq!(d.forest.len(), 1);
        assert_eq!(
            d.partial,
            Some(PartialTree {
                gap: 1.0,
                leaves_seen: 1
            })
        );
        assert_eq!(d.forest.tail_gap(), Some(1.0));
    }

    #[test]
    fn ties_are_errors() {
        let w = AlternatingWalk::new(1.0, vec![step(2.0, 2.0)], WalkTail::Complete).unwrap();
        assert_eq!(walk_to_forest(&w), Err(ForestError::Tie { step: 1 }));
        let w = AlternatingWalk::new(
            1.0,
            vec![step(3.0, 1.0), step(1.0, 3.0)],
            WalkTail::Complete,
        )
        .unwrap();
        assert_eq!(walk_to_forest(&w), Err(ForestError::Tie { step: 2 }));
    }

    #[test]
    fn malformed_walks() {
        assert!(AlternatingWalk::new(0.0, vec![], WalkTail::Complete).is_err());
        assert!(AlternatingWalk::new(1.0, vec![step(-1.0, 1.0)], WalkTail::Complete).is_err());
        assert!(AlternatingWalk::from_heights(&[0.0, -1.0, -2.0, -3.0]).is_err());
        assert!(AlternatingWalk::from_heights(&[0.0, -1.0, 2.0]).is_err());
    }

    #[test]
    fn heights_round_trip() {
        let w = AlternatingWalk::new(
            0.5,
            vec![step(3.0, 1.0), step(2.0, 4.5)],
            WalkTail::Complete,
        )
        .unwrap();
        let back = AlternatingWalk::from_heights(&w.heights()).unwrap();
        assert!(back.approx_eq(&w, 1e-15));
    }

    #[test]
    fn excursion_reversal_is_mirror() {
        let t = two_leaf_tree();
        let e = tree_excursion(&t);
        assert_eq!(e.steps(), &[step(3.0, 1.0), step(2.0, 4.0)]);
        let r = e.reverse();
        assert_eq!(r.steps(), &[step(4.0, 2.0), step(1.0, 3.0)]);
        assert_eq!(r.to_tree().unwrap(), t.mirror());
        assert_eq!(r.reverse(), e);
        let single = tree_excursion(&PlaneTree::leaf(1.5, None));
        assert_eq!(single.reverse(), single);
    }

    #[test]
    fn invalid_excursions() {
        assert!(TreeExcursion::from_steps(vec![step(1.0, 2.0)]).is_err());
        assert!(TreeExcursion::from_steps(vec![step(1.0, 1.0), step(1.0, 1.0)]).is_err());
        assert!(TreeExcursion::from_steps(vec![step(3.0, 1.0), step(2.0, 4.0)]).is_ok());
    }

    #[test]
    fn walk_csv_round_trip() {
        let f = forest(vec![(1.0, two_leaf_tree())], Some(0.5));
        let w = forest_to_walk(&f).unwrap();
        let mut buf = Vec::new();
        write_walk_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,H\n0,0.0\n1,-1.0\n"));
        assert_eq!(read_walk_csv(&buf[..]).unwrap(), w);
        assert!(read_walk_csv("x,y\n".as_bytes()).is_err());
    }
}
