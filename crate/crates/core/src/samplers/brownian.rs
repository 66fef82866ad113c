use rand::Rng;
use rand_distr::StandardNormal;

use super::gw::exp;
use super::SampleError;
use crate::forest::{AlternatingWalk, Step, WalkTail};

/// Minimum of a Brownian bridge from `a` to `b` over time `dt`, drawn by
/// inverting `P(min <= x) = exp(-2(a-x)(b-x)/dt)`. Bridge laws do not
/// depend on drift, so this serves every drift.
pub fn conditional_bridge_min<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64, SampleError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SampleError::NonPositiveDuration(dt));
    }
    let u = loop {
        let u = 1.0 - rng.random::<f64>();
        if u < 1.0 {
            break u;
        }
    };
    let c = -0.5 * dt * u.ln();
    let d = (a - b).abs();
    // positive root of y(y + d) = c, written without cancellation
    let y = 2.0 * c / (d + (d * d + 4.0 * c).sqrt());
    let lo = a.min(b);
    let m = lo - y;
    Ok(if m < lo { m } else { lo.next_down() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRecord {
    pub time: f64,
    pub level: f64,
    /// Minimum of the path since the previous sample time.
    pub min: f64,
}

/// Brownian motion with drift observed at increasing times, together with
/// the exact minimum between consecutive observations. The origin
/// `(0, 0)` is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianSamplePath {
    pub drift: f64,
    pub sample_rate: f64,
    pub records: Vec<SampleRecord>,
}

impl BrownianSamplePath {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Alternating vertex levels `0, m_1, B_1, m_2, B_2, ..., m_n, B_n`.
    pub fn vertices(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.records.len() + 1);
        v.push(0.0);
        for r in &self.records {
            v.push(r.min);
            v.push(r.level);
        }
        v
    }

    /// The induced walk: falls `B_{n-1} - m_n`, rises `B_n - m_n`. The last
    /// sample contributes only a rise, so `n` samples give `n - 1` pairs.
    pub fn to_walk(&self) -> Result<AlternatingWalk, SampleError> {
        let first = self.records.first().ok_or(SampleError::EmptyPath)?;
        let steps = self
            .records
            .windows(2)
            .map(|w| Step {
                rise: w[0].level - w[0].min,
                fall: w[0].level - w[1].min,
            })
            .collect();
        Ok(AlternatingWalk::new_unchecked(
            -first.min,
            steps,
            WalkTail::Complete,
        ))
    }

    /// Keeps the samples flagged in `keep`; minima of merged intervals are
    /// the minima of their parts, so the result is exact.
    pub fn subsample(&self, keep: &[bool]) -> BrownianSamplePath {
        let mut records = Vec::new();
        let mut running = f64::INFINITY;
        for (r, &k) in self.records.iter().zip(keep) {
            running = running.min(r.min);
            if k {
                records.push(SampleRecord {
                    time: r.time,
                    level: r.level,
                    min: running,
                });
                running = f64::INFINITY;
            }
        }
        BrownianSamplePath {
            drift: self.drift,
            sample_rate: f64::NAN,
            records,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Samples(usize),
    Time(f64),
}

/// Brownian motion with the given drift observed at `times`.
pub fn sample_brownian_at_times<R: Rng + ?Sized>(
    drift: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<BrownianSamplePath, SampleError> {
    let mut records = Vec::with_capacity(times.len());
    let (mut t, mut b) = (0.0, 0.0);
    for &next in times {
        let dt = next - t;
        let z: f64 = rng.sample(StandardNormal);
        let level = b + drift * dt + dt.sqrt() * z;
        let min = conditional_bridge_min(b, level, dt, rng)?;
        records.push(SampleRecord {
            time: next,
            level,
            min,
        });
        t = next;
        b = level;
    }
    Ok(BrownianSamplePath {
        drift,
        sample_rate: f64::NAN,
        records,
    })
}

/// Brownian motion with drift `-lambda` observed at the points of a Poisson
/// process of rate `kappa^2 / 2`.
pub fn sample_brownian_poisson<R: Rng + ?Sized>(
    lambda: f64,
    kappa: f64,
    horizon: Horizon,
    rng: &mut R,
) -> Result<BrownianSamplePath, SampleError> {
    if !(lambda >= 0.0 && lambda.is_finite() && kappa > 0.0 && kappa.is_finite()) {
        return Err(SampleError::InvalidParams(format!(
            "need lambda >= 0 and kappa > 0, got lambda={lambda}, kappa={kappa}"
        )));
    }
    let rate = 0.5 * kappa * kappa;
    let drift = -lambda;
    let mut records = Vec::new();
    let (mut t, mut b) = (0.0, 0.0);
    loop {
        if let Horizon::Samples(n) = horizon {
            if records.len() >= n {
                break;
            }
        }
        let dt = exp(rng, rate);
        if let Horizon::Time(tmax) = horizon {
            if t + dt > tmax {
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        let level = b + drift * dt + dt.sqrt() * z;
        let min = conditional_bridge_min(b, level, dt, rng)?;
        t += dt;
        records.push(SampleRecord {
            time: t,
            level,
            min,
        });
        b = level;
    }
    Ok(BrownianSamplePath {
        drift,
        sample_rate: rate,
        records,
    })
}

/// Points of a Poisson field on `[0, T] x (0, theta_max^2 / 2]`. The sample
/// times at level `theta` are the points with height at most `theta^2 / 2`,
/// so lower levels are independent thinnings of higher ones.
#[derive(Clone, Debug, PartialEq)]
pub struct PoissonField {
    pub times: Vec<f64>,
    pub heights: Vec<f64>,
    pub levels: Vec<f64>,
}

impl PoissonField {
    pub fn mask(&self, theta: f64) -> Vec<bool> {
        let cut = 0.5 * theta * theta;
        self.heights.iter().map(|h| *h <= cut).collect()
    }

    pub fn times_at(&self, theta: f64) -> Vec<f64> {
        let cut = 0.5 * theta * theta;
        self.times
            .iter()
            .zip(&self.heights)
            .filter(|(_, h)| **h <= cut)
            .map(|(t, _)| *t)
            .collect()
    }
}

/// Samples the field up to time `horizon` for the finest of `levels` and
/// derives the coarser levels by thinning.
pub fn sample_poisson_field<R: Rng + ?Sized>(
    levels: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<PoissonField, SampleError> {
    if levels.windows(2).any(|w| w[1] <= w[0]) || levels.iter().any(|l| !(*l >= 0.0)) {
        return Err(SampleError::DecreasingRates);
    }
    let top = levels.last().copied().unwrap_or(0.0);
    let rate = 0.5 * top * top;
    let mut times = Vec::new();
    let mut heights = Vec::new();
    if rate > 0.0 {
        let mut t = 0.0;
        loop {
            t += exp(rng, rate);
            if t > horizon {
                break;
            }
            times.push(t);
            heights.push(rate * (1.0 - rng.random::<f64>()));
        }
    }
    Ok(PoissonField {
        times,
        heights,
        levels: levels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::RngStream;

    fn rng(id: u64) -> crate::samplers::Rng {
        RngStream::new(21, id).rng()
    }

    #[test]
    fn bridge_min_median() {
        let mut r = rng(1);
        let mut m: Vec<f64> = (0..100_001)
            .map(|_| conditional_bridge_min(0.0, 0.0, 1.0, &mut r).unwrap())
            .collect();
        m.sort_by(f64::total_cmp);
        let median = m[50_000];
        let expected = -(std::f64::consts::LN_2 / 2.0).sqrt();
        assert!((median - expected).abs() < 0.01, "{median}");
        assert!(m.iter().all(|x| *x < 0.0));
    }

    #[test]
    fn bridge_min_matches_euler_paths() {
        // Fine-grid random-walk minima, corrected by the usual half-step
        // continuity shift, against the inversion sampler.
        let mut r = rng(2);
        let steps = 2000;
        let h = (1.0 / steps as f64).sqrt();
        let shift = 0.5826 * h;
        let mut euler: Vec<f64> = (0..10_000)
            .map(|_| {
                let mut x = 0.0f64;
                let mut path = Vec::with_capacity(steps + 1);
                path.push(0.0);
                for _ in 0..steps {
                    let z: f64 = r.sample(StandardNormal);
                    x += h * z;
                    path.push(x);
                }
                // pin to a bridge from 0 to 0
                let end = x;
                path.iter()
                    .enumerate()
                    .map(|(k, p)| p - end * k as f64 / steps as f64)
                    .fold(0.0, f64::min)
                    - shift
            })
            .collect();
        euler.sort_by(f64::total_cmp);
        let cdf = |x: f64| if x >= 0.0 { 1.0 } else { (-2.0 * x * x).exp() };
        let n = euler.len() as f64;
        let d = euler
            .iter()
            .enumerate()
            .map(|(i, x)| {
                (cdf(*x) - i as f64 / n)
                    .abs()
                    .max((cdf(*x) - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 0.02, "sup distance {d}");
    }

    #[test]
    fn degenerate_bridge_stays_below() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let m = conditional_bridge_min(5.0, 5.0, 1e-40, &mut r).unwrap();
            assert!(m < 5.0 && m > 4.999);
        }
        assert!(conditional_bridge_min(0.0, 1.0, 0.0, &mut r).is_err());
    }

    #[test]
    fn zero_samples_is_origin_only() {
        let p = sample_brownian_poisson(0.0, 1.0, Horizon::Samples(0), &mut rng(4)).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.vertices(), vec![0.0]);
        assert!(p.to_walk().is_err());
    }

    #[test]
    fn walk_rates_lemma_nine() {
        let p = sample_brownian_poisson(3.0, 4.0, Horizon::Samples(200_001), &mut rng(5)).unwrap();
        let w = p.to_walk().unwrap();
        let n = w.pairs() as f64;
        let mf = w.steps().iter().map(|s| s.fall).sum::<f64>() / n;
        let mr = w.steps().iter().map(|s| s.rise).sum::<f64>() / n;
        assert!((mf - 0.5).abs() < 3.0 * 0.5 / n.sqrt(), "{mf}");
        assert!((mr - 0.125).abs() < 3.0 * 0.125 / n.sqrt(), "{mr}");
    }

    #[test]
    fn minima_below_endpoints() {
        let p = sample_brownian_poisson(1.0, 2.0, Horizon::Time(50.0), &mut rng(6)).unwrap();
        let mut prev = 0.0;
        for r in &p.records {
            assert!(r.min < prev && r.min < r.level);
            prev = r.level;
        }
        assert!(p.records.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn field_thinning_fraction() {
        let f = sample_poisson_field(&[1.0, 2.0], 20_000.0, &mut rng(7)).unwrap();
        let fine = f.times_at(2.0).len() as f64;
        let coarse = f.times_at(1.0).len() as f64;
        let p = 0.25;
        let frac = coarse / fine;
        assert!(
            (frac - p).abs() < 3.0 * (p * (1.0 - p) / fine).sqrt(),
            "{frac}"
        );
        // counts are Poisson(theta^2 t / 2)
        assert!((fine - 40_000.0).abs() < 3.0 * 200.0, "{fine}");
        assert!(sample_poisson_field(&[0.0], 10.0, &mut rng(8))
            .unwrap()
            .times
            .is_empty());
        assert_eq!(
            sample_poisson_field(&[2.0, 1.0], 10.0, &mut rng(9)),
            Err(SampleError::DecreasingRates)
        );
    }

    #[test]
    fn subsample_minima_are_exact() {
        let p = sample_brownian_poisson(0.0, 3.0, Horizon::Samples(50), &mut rng(10)).unwrap();
        let keep: Vec<bool> = (0..50).map(|i| i % 3 == 2).collect();
        let s = p.subsample(&keep);
        assert_eq!(s.len(), 16);
        let expected = p.records[..3]
            .iter()
            .map(|r| r.min)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(s.records[0].min, expected);
    }
}
