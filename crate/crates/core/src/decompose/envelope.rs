use std::io::Write;

use super::williams::unique_argmin;
use super::DecomposeError;
use crate::forest::{format_f64, AlternatingWalk, WalkTail};
use crate::samplers::BrownianSamplePath;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakpoint {
    pub index: usize,
    /// Known for the start and for sampled points; the times of minima of
    /// a sampled path are not tracked.
    pub time: Option<f64>,
    pub b: f64,
    pub a: f64,
    pub z: f64,
    pub j: f64,
    /// -1 on stretches where the envelope follows the running minimum
    /// forward, +1 where it follows the minimum ahead.
    pub sigma: i8,
}

/// Path values at its vertices with the lower envelope `A`, the reflected
/// part `Z = B - A`, and the accumulated envelope variation `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeDecomposition {
    pub points: Vec<Breakpoint>,
    /// Colour of each maximum (vertex `2k`), `true` for marked.
    pub black_peaks: Vec<bool>,
}

impl EnvelopeDecomposition {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,time,B,A,Z,J,sigma")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.index,
                p.time.map(format_f64).unwrap_or_default(),
                format_f64(p.b),
                format_f64(p.a),
                format_f64(p.z),
                format_f64(p.j),
                p.sigma
            )?;
        }
        Ok(())
    }
}

/// Envelope of an alternating path `v_0 = 0, v_1 (min), v_2 (max), ...`
/// relative to the marked maxima. Between consecutive marked times `T_n`,
/// `T_{n+1}` with minimum at `M`, the envelope is the running minimum from
/// `T_n` up to `M` and the minimum over `[t, T_{n+1}]` after it; past the
/// last marked time it is the running minimum.
pub fn alternating_envelope(
    vertices: &[f64],
    black_peaks: &[bool],
) -> Result<EnvelopeDecomposition, DecomposeError> {
    envelope(vertices, black_peaks, |i| (i == 0).then_some(0.0))
}

/// The envelope of a sampled Brownian path; `black[k]` marks sample `k`.
pub fn brownian_envelope(
    path: &BrownianSamplePath,
    black: &[bool],
) -> Result<EnvelopeDecomposition, DecomposeError> {
    envelope(&path.vertices(), black, |i| match i {
        0 => Some(0.0),
        i if i % 2 == 0 => Some(path.records[i / 2 - 1].time),
        _ => None,
    })
}

fn envelope(
    v: &[f64],
    black_peaks: &[bool],
    time: impl Fn(usize) -> Option<f64>,
) -> Result<EnvelopeDecomposition, DecomposeError> {
    if v.first() != Some(&0.0) {
        return Err(DecomposeError::BadMarks("path must start at 0".into()));
    }
    let maxima = (v.len() - 1) / 2;
    if black_peaks.len() != maxima {
        return Err(DecomposeError::BadMarks(format!(
            "{} marks for {maxima} maxima",
            black_peaks.len()
        )));
    }
    let n = v.len();
    let mut a = vec![0.0; n];
    let mut sigma = vec![-1i8; n];
    let mut tops: Vec<usize> = vec![0];
    tops.extend((0..maxima).filter(|&k| black_peaks[k]).map(|k| 2 * (k + 1)));

    let forward = |a: &mut [f64], sigma: &mut [i8], from: usize, to: usize| {
        let mut run = v[from];
        for k in from + 1..=to {
            run = run.min(v[k]);
            a[k] = run;
            sigma[k] = -1;
        }
    };
    a[0] = v[0];
    for w in tops.windows(2) {
        let (s, t) = (w[0], w[1]);
        let m = s + unique_argmin(&v[s..=t], s)?;
        forward(&mut a, &mut sigma, s, m);
        let mut run = v[t];
        for k in (m + 1..=t).rev() {
            run = run.min(v[k]);
            a[k] = run;
            sigma[k] = 1;
        }
    }
    forward(&mut a, &mut sigma, *tops.last().unwrap(), n - 1);

    let mut j = 0.0;
    let points = (0..n)
        .map(|k| {
            if k > 0 {
                j += (a[k] - a[k - 1]).abs();
            }
            Breakpoint {
                index: k,
                time: time(k),
                b: v[k],
                a: a[k],
                z: v[k] - a[k],
                j,
                sigma: sigma[k],
            }
        })
        .collect();
    Ok(EnvelopeDecomposition {
        points,
        black_peaks: black_peaks.to_vec(),
    })
}

/// The walk traced by `Z - J` through the unmarked maxima and the minima
/// between them (the lowest point of `Z - J`, which can sit inside a
/// segment where the envelope rises with the path). For the Harris walk of a composite forest with its black
/// leaves marked, this is the walk of the red forest that was composed.
/// A final unmarked maximum with nothing after it is dropped.
pub fn red_innovation_walk(
    env: &EnvelopeDecomposition,
    tail: WalkTail,
) -> Result<AlternatingWalk, DecomposeError> {
    let pts = &env.points;
    let mut h = vec![0.0];
    let mut low = f64::INFINITY;
    for k in 1..pts.len() {
        let (p, q) = (&pts[k - 1], &pts[k]);
        // Where the envelope climbs with the path, Z - J keeps falling until
        // the path leaves the envelope, inside the segment.
        if k % 2 == 0 && q.sigma == 1 && q.a > p.a {
            low = low.min(-q.j);
        }
        let x = q.z - q.j;
        let red_peak = k % 2 == 0 && !env.black_peaks[k / 2 - 1];
        if red_peak && k + 1 < pts.len() {
            h.push(low);
            h.push(x);
            low = f64::INFINITY;
        } else {
            low = low.min(x);
        }
    }
    if low.is_finite() {
        h.push(low);
    }
    Ok(AlternatingWalk::from_heights(&h)?.with_tail(tail))
}
