use crate::forest::{AlternatingWalk, Step, TreeExcursion, WalkTail};

/// An excursion of a walk above one of its ladder levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcursionRecord {
    /// Depth `V_m` of the ladder level the excursion starts from.
    pub local_time: f64,
    /// Vertex index where it starts.
    pub start: usize,
    /// Heights relative to the ladder level, up to and including the fall
    /// that crosses below it (when `crossed`).
    pub path: Vec<f64>,
    /// How far the crossing fall ends below the level; 0 if not crossed.
    pub undershoot: f64,
    pub crossed: bool,
}

impl ExcursionRecord {
    /// The excursion cut off exactly at its ladder level, as the walk of a
    /// tree. `None` unless it crossed.
    pub fn tree_excursion(&self) -> Option<TreeExcursion> {
        if !self.crossed {
            return None;
        }
        let p = &self.path;
        let mut steps: Vec<Step> = p
            .windows(3)
            .step_by(2)
            .map(|w| Step {
                rise: w[1] - w[0],
                fall: w[1] - w[2],
            })
            .collect();
        let last = steps.last_mut()?;
        last.fall -= self.undershoot;
        TreeExcursion::from_steps(steps).ok()
    }
}

/// Excursions above the running minimum of `h` (which starts at 0 with a
/// fall). `h` alternates minima at odd and maxima at even indices.
pub(crate) fn ladder_excursions(h: &[f64], offset: usize) -> Vec<ExcursionRecord> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < h.len() {
        let level = h[i];
        let mut j = i + 2;
        while j < h.len() && h[j] >= level {
            j += 2;
        }
        let crossed = j < h.len();
        let end = if crossed { j } else { h.len() - 1 };
        out.push(ExcursionRecord {
            local_time: -level,
            start: offset + i,
            path: h[i..=end].iter().map(|x| x - level).collect(),
            undershoot: if crossed { level - h[j] } else { 0.0 },
            crossed,
        });
        i = j;
    }
    out
}

/// Ladder excursions of a walk: `T_{m+1}` is the first vertex below
/// `-V_m`, and the excursion at level `V_m` runs from `T_m` to `T_{m+1}`.
/// The last one may be unfinished (`crossed == false`).
pub fn extract_excursions(walk: &AlternatingWalk) -> Vec<ExcursionRecord> {
    ladder_excursions(&walk.heights(), 0)
}

/// The walk read backwards from `H_{2N}` (the last maximum), dropping the
/// final rise into `H_0`: initial fall `R_N`, then pairs `(F_{k}, R_{k})`
/// for `k = N-1 .. 1`.
pub fn reverse_walk(walk: &AlternatingWalk) -> Option<AlternatingWalk> {
    let s = walk.steps();
    let last = s.last()?;
    let steps = s[..s.len() - 1]
        .iter()
        .rev()
        .map(|x| Step {
            rise: x.fall,
            fall: x.rise,
        })
        .collect();
    Some(AlternatingWalk::new(last.rise, steps, WalkTail::Complete).expect("positive steps"))
}
