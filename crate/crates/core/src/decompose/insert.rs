use super::excursions::ladder_excursions;
use super::williams::unique_argmin;
use super::DecomposeError;
use crate::forest::{AlternatingWalk, Step, TreeExcursion};

/// A tree excursion hung on a coarse walk: on increment `increment` (in the
/// order of [`AlternatingWalk::increments`]), `offset` along it from its
/// start. On a fall the excursion rises from the fall; on a rise it ends
/// back on the rise.
#[derive(Clone, Debug, PartialEq)]
pub struct LocatedExcursion {
    pub increment: usize,
    pub offset: f64,
    pub excursion: TreeExcursion,
}

/// A fine walk together with the colour of each of its maxima: `true` when
/// the maximum belongs to the coarse walk.
#[derive(Clone, Debug, PartialEq)]
pub struct InsertedWalk {
    pub walk: AlternatingWalk,
    pub black_peaks: Vec<bool>,
}

/// Splices the excursions into the coarse walk. Each one adds its full
/// duration to the walk and leaves the coarse path unchanged around it.
pub fn insert_excursions(
    coarse: &AlternatingWalk,
    excursions: &[LocatedExcursion],
) -> Result<InsertedWalk, DecomposeError> {
    let incs = coarse.increments();
    let mut order: Vec<&LocatedExcursion> = excursions.iter().collect();
    order.sort_by(|a, b| {
        (a.increment, a.offset)
            .partial_cmp(&(b.increment, b.offset))
            .unwrap()
    });
    for (k, e) in order.iter().enumerate() {
        let Some(inc) = incs.get(e.increment) else {
            return Err(DecomposeError::OutOfRange(format!(
                "increment {} of a walk with {}",
                e.increment,
                incs.len()
            )));
        };
        if !(e.offset > 0.0 && e.offset < inc.abs()) {
            return Err(DecomposeError::OutOfRange(format!(
                "offset {} outside (0, {}) on increment {}",
                e.offset,
                inc.abs(),
                e.increment
            )));
        }
        if k > 0 && order[k - 1].increment == e.increment && order[k - 1].offset == e.offset {
            return Err(DecomposeError::OutOfRange(format!(
                "two excursions at offset {} on increment {}",
                e.offset, e.increment
            )));
        }
    }

    // (signed length, from an excursion)
    let mut pieces: Vec<(f64, bool)> = Vec::with_capacity(incs.len() + 2 * excursions.len());
    let mut next = order.iter().peekable();
    for (i, &inc) in incs.iter().enumerate() {
        let sign = inc.signum();
        let mut done = 0.0;
        while let Some(e) = next.next_if(|e| e.increment == i) {
            pieces.push((sign * (e.offset - done), false));
            for s in e.excursion.steps() {
                pieces.push((s.rise, true));
                pieces.push((-s.fall, true));
            }
            done = e.offset;
        }
        pieces.push((sign * (inc.abs() - done), false));
    }

    // merge runs of one sign; a maximum is red when the rise into it is
    let mut merged: Vec<(f64, bool)> = Vec::new();
    for (x, red) in pieces {
        match merged.last_mut() {
            Some((y, r)) if y.signum() == x.signum() => {
                *y += x;
                *r = red;
            }
            _ => merged.push((x, red)),
        }
    }
    let initial_fall = -merged[0].0;
    let mut steps = Vec::with_capacity(merged.len() / 2);
    let mut black_peaks = Vec::with_capacity(merged.len() / 2);
    for w in merged[1..].chunks(2) {
        steps.push(Step {
            rise: w[0].0,
            fall: -w[1].0,
        });
        black_peaks.push(!w[0].1);
    }
    let walk = AlternatingWalk::new(initial_fall, steps, coarse.tail())?;
    Ok(InsertedWalk { walk, black_peaks })
}

/// Recovers the coarse walk and the excursions hung on it, given which
/// maxima are coarse. The coarse path is the alternating lower envelope;
/// everything strictly above it is excursion.
pub fn extract_insertions(
    fine: &InsertedWalk,
) -> Result<(AlternatingWalk, Vec<LocatedExcursion>), DecomposeError> {
    let h = fine.walk.heights();
    if fine.black_peaks.len() != fine.walk.pairs() {
        return Err(DecomposeError::BadMarks(format!(
            "{} peak colours for {} maxima",
            fine.black_peaks.len(),
            fine.walk.pairs()
        )));
    }
    let mut tops: Vec<usize> = vec![0];
    tops.extend(
        fine.black_peaks
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| 2 * (k + 1)),
    );
    let last = h.len() - 1;
    let mut coarse_h = vec![0.0];
    let mut located = Vec::new();
    let mut increment = 0usize;
    let down = |a: usize, m: usize, increment: usize, located: &mut Vec<LocatedExcursion>| {
        let rel: Vec<f64> = h[a..=m].iter().map(|x| x - h[a]).collect();
        for r in ladder_excursions(&rel, a) {
            let excursion = r
                .tree_excursion()
                .expect("crossed before the stretch minimum");
            located.push(LocatedExcursion {
                increment,
                offset: r.local_time,
                excursion,
            });
        }
    };
    for w in tops.windows(2) {
        let (a, t) = (w[0], w[1]);
        let m = a + unique_argmin(&h[a..=t], a)?;
        down(a, m, increment, &mut located);
        let rel: Vec<f64> = (m..=t).rev().map(|k| h[k] - h[t]).collect();
        let span = h[t] - h[m];
        let mut up: Vec<LocatedExcursion> = ladder_excursions(&rel, 0)
            .into_iter()
            .map(|r| LocatedExcursion {
                increment: increment + 1,
                offset: span - r.local_time,
                excursion: r
                    .tree_excursion()
                    .expect("crossed before the stretch minimum")
                    .reverse(),
            })
            .collect();
        up.reverse();
        located.extend(up);
        coarse_h.push(h[m]);
        coarse_h.push(h[t]);
        increment += 2;
    }
    let a = *tops.last().unwrap();
    let m = a + unique_argmin(&h[a..], a)?;
    if m != last {
        return Err(DecomposeError::BadMarks(
            "walk ends inside an excursion above the envelope".into(),
        ));
    }
    down(a, m, increment, &mut located);
    coarse_h.push(h[m]);
    let coarse = AlternatingWalk::from_heights(&coarse_h)?.with_tail(fine.walk.tail());
    Ok((coarse, located))
}
