use rand::Rng;
use rand_distr::Exp1;

use super::{Params, SampleError};
use crate::forest::{
    AlternatingWalk, ForestEntry, Node, PlaneForest, PlaneTree, Step, Truncation, WalkTail,
};

/// Hard cap on the size of a single sampled tree.
pub const MAX_TREE_NODES: usize = 10_000_000;

/// Result of a sampler that gives up once a size bound is exceeded.
#[derive(Clone, Debug, PartialEq)]
pub enum Bounded<T> {
    Done(T),
    Capped,
}

impl<T> Bounded<T> {
    pub fn done(self) -> Option<T> {
        match self {
            Bounded::Done(t) => Some(t),
            Bounded::Capped => None,
        }
    }
}

pub(crate) fn exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

#[cfg_attr(not(test), allow(dead_code))]
struct Grown {
    tree: Option<PlaneTree>,
    decisions: usize,
    branched: usize,
}

/// Grows a tree in preorder, giving up (tree `None`) once more than
/// `max_leaves` leaves or `max_nodes` nodes have been generated.
fn grow_counted<R: Rng + ?Sized>(
    params: &Params,
    max_leaves: usize,
    max_nodes: usize,
    rng: &mut R,
) -> Grown {
    let branch = params.branching_prob();
    let rate = 2.0 * params.mu;
    let mut nodes: Vec<Node> = Vec::new();
    // Internal nodes whose right child has not been started yet.
    let mut pending: Vec<usize> = Vec::new();
    let mut leaves = 0usize;
    let mut branched = 0usize;
    let give_up = |nodes: &Vec<Node>, branched| Grown {
        tree: None,
        decisions: nodes.len(),
        branched,
    };
    loop {
        if nodes.len() >= max_nodes {
            return give_up(&nodes, branched);
        }
        let length = exp(rng, rate);
        let idx = nodes.len();
        nodes.push(Node::raw(length, None, 0));
        if rng.random::<f64>() < branch {
            branched += 1;
            pending.push(idx);
            continue;
        }
        leaves += 1;
        if leaves > max_leaves {
            return give_up(&nodes, branched);
        }
        match pending.pop() {
            Some(p) => {
                let next = nodes.len() as u32;
                nodes[p].set_right(next);
            }
            None => {
                return Grown {
                    decisions: nodes.len(),
                    branched,
                    tree: Some(PlaneTree::from_preorder_unchecked(nodes)),
                }
            }
        }
    }
}

fn grow<R: Rng + ?Sized>(
    params: &Params,
    max_leaves: usize,
    max_nodes: usize,
    rng: &mut R,
) -> Option<PlaneTree> {
    grow_counted(params, max_leaves, max_nodes, rng).tree
}

/// One binary Galton–Watson tree: branches exponential(2µ) in length, each
/// branching with probability (µ−λ)/2µ.
pub fn sample_gw_tree<R: Rng + ?Sized>(
    params: &Params,
    rng: &mut R,
) -> Result<PlaneTree, SampleError> {
    grow(params, usize::MAX, MAX_TREE_NODES, rng).ok_or(SampleError::Runaway(MAX_TREE_NODES))
}

/// Like [`sample_gw_tree`], but gives up on trees with more than
/// `max_leaves` leaves. Critical trees have infinite mean size, so Monte
/// Carlo code uses this and counts capped draws explicitly.
pub fn sample_gw_tree_bounded<R: Rng + ?Sized>(
    params: &Params,
    max_leaves: usize,
    rng: &mut R,
) -> Bounded<PlaneTree> {
    match grow(params, max_leaves, MAX_TREE_NODES, rng) {
        Some(t) => Bounded::Done(t),
        None => Bounded::Capped,
    }
}

fn forest_with<R: Rng + ?Sized>(
    params: &Params,
    truncation: Truncation,
    rng: &mut R,
    mut tree: impl FnMut(&mut R) -> Option<PlaneTree>,
) -> Result<Option<PlaneForest>, SampleError> {
    let rate = params.mu - params.lambda;
    let mut entries = Vec::new();
    let tail = match truncation {
        Truncation::Trees(n) => {
            for _ in 0..n {
                let gap = exp(rng, rate);
                let Some(t) = tree(rng) else { return Ok(None) };
                entries.push(ForestEntry { gap, tree: t });
            }
            if n == 0 {
                None
            } else {
                Some(exp(rng, rate))
            }
        }
        Truncation::FloorLength(len) => {
            if !(len >= 0.0 && len.is_finite()) {
                return Err(SampleError::InvalidParams(format!(
                    "floor length must be finite and >= 0, got {len}"
                )));
            }
            let mut x = 0.0;
            loop {
                let gap = exp(rng, rate);
                if x + gap > len {
                    break;
                }
                x += gap;
                let Some(t) = tree(rng) else { return Ok(None) };
                entries.push(ForestEntry { gap, tree: t });
            }
            Some(len - x).filter(|g| *g > 0.0)
        }
    };
    Ok(Some(PlaneForest::from_parts_unchecked(
        entries, tail, truncation,
    )))
}

/// Trees at exponential(µ−λ) gaps. `Trees(n)` also draws the gap to the
/// next root as the tail; `FloorLength(L)` keeps roots in `[0, L]`.
pub fn sample_forest<R: Rng + ?Sized>(
    params: &Params,
    truncation: Truncation,
    rng: &mut R,
) -> Result<PlaneForest, SampleError> {
    let f = forest_with(params, truncation, rng, |r| {
        grow(params, usize::MAX, MAX_TREE_NODES, r)
    })?;
    f.ok_or(SampleError::Runaway(MAX_TREE_NODES))
}

pub fn sample_forest_bounded<R: Rng + ?Sized>(
    params: &Params,
    truncation: Truncation,
    max_leaves: usize,
    rng: &mut R,
) -> Result<Bounded<PlaneForest>, SampleError> {
    let f = forest_with(params, truncation, rng, |r| {
        grow(params, max_leaves, MAX_TREE_NODES, r)
    })?;
    Ok(f.map_or(Bounded::Capped, Bounded::Done))
}

/// Alternating walk with falls exponential(θ−λ) and rises exponential(θ+λ),
/// where `params = (λ, θ)`.
pub fn sample_walk<R: Rng + ?Sized>(
    params: &Params,
    n_pairs: usize,
    rng: &mut R,
) -> AlternatingWalk {
    let down = params.mu - params.lambda;
    let up = params.mu + params.lambda;
    let initial_fall = exp(rng, down);
    let steps = (0..n_pairs)
        .map(|_| {
            let rise = exp(rng, up);
            let fall = exp(rng, down);
            Step { rise, fall }
        })
        .collect();
    AlternatingWalk::new_unchecked(initial_fall, steps, WalkTail::Complete)
}
