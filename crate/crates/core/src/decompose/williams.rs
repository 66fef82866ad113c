use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::excursions::{ladder_excursions, ExcursionRecord};
use super::DecomposeError;
use crate::forest::AlternatingWalk;
use crate::samplers::BrownianSamplePath;

/// A walk cut at the minimum of `H_0 .. H_{2N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WilliamsSplit {
    pub n: usize,
    /// Vertex index of the minimum.
    pub min_index: usize,
    /// Depth of the minimum below the start.
    pub fall: f64,
    /// Height of `H_{2N}` above the minimum.
    pub rise: f64,
    /// `H_0 .. H_M`.
    pub pre_path: Vec<f64>,
    /// `H_M .. H_{2N}`, as stored in the walk.
    pub post_path: Vec<f64>,
}

impl WilliamsSplit {
    /// `H_{2N-n} - H_{2N}` for `n = 0 .. 2N-M`: the post-minimum part seen
    /// backwards from its end, a first passage down to `-rise`.
    pub fn post_path_reversed(&self) -> Vec<f64> {
        let end = *self.post_path.last().unwrap();
        self.post_path.iter().rev().map(|h| h - end).collect()
    }

    /// `H_0 .. H_{2N}` reassembled from the stored parts.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut h = self.pre_path.clone();
        h.extend_from_slice(&self.post_path[1..]);
        h
    }

    pub fn pre_walk(&self) -> Result<AlternatingWalk, DecomposeError> {
        Ok(AlternatingWalk::from_heights(&self.pre_path)?)
    }

    pub fn post_walk_reversed(&self) -> Result<AlternatingWalk, DecomposeError> {
        Ok(AlternatingWalk::from_heights(&self.post_path_reversed())?)
    }
}

pub(crate) fn unique_argmin(h: &[f64], offset: usize) -> Result<usize, DecomposeError> {
    let mut best = 0;
    for i in 1..h.len() {
        if h[i] < h[best] {
            best = i;
        }
    }
    if h.iter()
        .enumerate()
        .any(|(i, &x)| i != best && x == h[best])
    {
        return Err(DecomposeError::Tie {
            index: offset + best,
        });
    }
    Ok(best)
}

fn split_heights(h: &[f64], n: usize) -> Result<WilliamsSplit, DecomposeError> {
    let m = unique_argmin(h, 0)?;
    Ok(WilliamsSplit {
        n,
        min_index: m,
        fall: -h[m],
        rise: h[h.len() - 1] - h[m],
        pre_path: h[..=m].to_vec(),
        post_path: h[m..].to_vec(),
    })
}

/// Splits `H_0 .. H_{2N}` at its minimum.
pub fn williams_split(walk: &AlternatingWalk, n: usize) -> Result<WilliamsSplit, DecomposeError> {
    if n == 0 {
        return Err(DecomposeError::ZeroSplit);
    }
    // H_{2N} needs the initial fall and rises 1..N
    if walk.pairs() < n {
        return Err(DecomposeError::NotEnoughPairs {
            needed: n,
            have: walk.pairs(),
        });
    }
    let h = walk.heights();
    split_heights(&h[..=2 * n], n)
}

/// The same split for a sampled Brownian path over its first `n` sample
/// times, using the exact minima between samples. With `n = 1` the parts
/// are `(0, m_1)` and `(0, m_1 - B_T)`.
pub fn brownian_williams_split(
    path: &BrownianSamplePath,
    n: usize,
) -> Result<WilliamsSplit, DecomposeError> {
    if n == 0 {
        return Err(DecomposeError::ZeroSplit);
    }
    if path.len() < n {
        return Err(DecomposeError::NotEnoughPairs {
            needed: n,
            have: path.len(),
        });
    }
    let v = path.vertices();
    split_heights(&v[..=2 * n], n)
}

/// `N` on `{1, 2, ...}` with `P(N = n) = (1 - p)^(n-1) p`.
pub fn sample_geometric<R: Rng + ?Sized>(
    success: f64,
    rng: &mut R,
) -> Result<usize, DecomposeError> {
    if !(success > 0.0 && success <= 1.0) {
        return Err(DecomposeError::InvalidProbability(success));
    }
    let g = Geometric::new(success).map_err(|_| DecomposeError::InvalidProbability(success))?;
    Ok(g.sample(rng) as usize + 1)
}

/// One stretch between consecutive marked rises.
#[derive(Clone, Debug, PartialEq)]
pub struct Stretch {
    /// Vertex where the stretch starts (`2 N_{k-1}`).
    pub start: usize,
    pub min_index: usize,
    /// Vertex after the marked rise (`2 N_k`).
    pub end: usize,
    pub fall: f64,
    pub rise: f64,
    /// Excursions above the running minimum before the stretch minimum.
    pub excursions: Vec<ExcursionRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkedSplit {
    /// Indices `N_1 < N_2 < ...` of the marked rises (1-based).
    pub marks: Vec<usize>,
    pub stretches: Vec<Stretch>,
}

impl MarkedSplit {
    /// The walk through the successive stretch minima: falls `F_1, F_2, ..`
    /// and rises `R_1, R_2, ..`, ending on the last complete fall.
    pub fn skeleton(&self) -> Option<AlternatingWalk> {
        let first = self.stretches.first()?;
        let mut h = vec![0.0, -first.fall];
        for w in self.stretches.windows(2) {
            let top = h[h.len() - 1] + w[0].rise;
            h.push(top);
            h.push(top - w[1].fall);
        }
        AlternatingWalk::from_heights(&h).ok()
    }
}

/// Marks each rise independently with probability `mark_prob` and splits
/// the walk at the minimum between consecutive marks.
pub fn mark_and_split<R: Rng + ?Sized>(
    walk: &AlternatingWalk,
    mark_prob: f64,
    rng: &mut R,
) -> Result<MarkedSplit, DecomposeError> {
    if !(mark_prob > 0.0 && mark_prob <= 1.0) {
        return Err(DecomposeError::InvalidProbability(mark_prob));
    }
    let marks: Vec<usize> = (1..=walk.pairs())
        .filter(|_| rng.random::<f64>() < mark_prob)
        .collect();
    split_at_marks(walk, marks)
}

/// Splits at the minimum between consecutive given marked rises
/// (1-based, strictly increasing, at most `walk.pairs()`).
pub fn split_at_marks(
    walk: &AlternatingWalk,
    marks: Vec<usize>,
) -> Result<MarkedSplit, DecomposeError> {
    if marks.first() == Some(&0) || marks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DecomposeError::BadMarks(
            "marks must be strictly increasing and start at 1 or later".into(),
        ));
    }
    if let Some(&last) = marks.last() {
        if last > walk.pairs() {
            return Err(DecomposeError::NotEnoughPairs {
                needed: last,
                have: walk.pairs(),
            });
        }
    }
    let h = walk.heights();
    let mut stretches = Vec::with_capacity(marks.len());
    let mut start = 0;
    for &n in &marks {
        let end = 2 * n;
        let seg = &h[start..=end];
        let m = unique_argmin(seg, start)?;
        let base = seg[0];
        let rel: Vec<f64> = seg[..=m].iter().map(|x| x - base).collect();
        stretches.push(Stretch {
            start,
            min_index: start + m,
            end,
            fall: seg[0] - seg[m],
            rise: seg[seg.len() - 1] - seg[m],
            excursions: ladder_excursions(&rel, start),
        });
        start = end;
    }
    Ok(MarkedSplit { marks, stretches })
}
