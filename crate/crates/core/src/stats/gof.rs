use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::StatsError;

/// Smallest sample accepted by [`ks_test`].
pub const MIN_KS_SAMPLES: usize = 100;
/// Smallest sample accepted by [`independence_test`].
pub const MIN_INDEPENDENCE_PAIRS: usize = 10_000;
/// Classes with fewer expected counts are merged with their neighbours.
pub const MIN_EXPECTED: f64 = 5.0;

/// Outcome of a single statistical test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub dof: Option<usize>,
}

/// Asymptotic survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // small-x form converges quickly where the alternating series does not
        let c = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let s: f64 = (1..=20)
            .map(|k| ((2 * k - 1) as f64).powi(2))
            .map(|m| (m * c).exp())
            .sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0);
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-300 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous cdf, with the
/// usual small-sample correction of the asymptotic p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<GofResult, StatsError> {
    let n = samples.len();
    if n < MIN_KS_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            have: n,
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    let en = nf.sqrt();
    Ok(GofResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
        n,
        dof: None,
    })
}

pub fn exponential_cdf(rate: f64) -> impl Fn(f64) -> f64 {
    move |x| if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() }
}

pub fn normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let n = Normal::new(mean, sd).expect("positive sd");
    move |x| n.cdf(x)
}

fn chi2_sf(stat: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64).expect("positive dof").sf(stat)
}

/// Consecutive groups of class indices whose weight reaches `min` (the
/// remainder joins the last group).
fn merge_groups(weights: &[f64], min: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut cur = Vec::new();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        cur.push(i);
        acc += w;
        if acc >= min {
            groups.push(std::mem::take(&mut cur));
            acc = 0.0;
        }
    }
    if !cur.is_empty() {
        match groups.last_mut() {
            Some(g) => g.extend(cur),
            None => groups.push(cur),
        }
    }
    groups
}

/// Pearson goodness of fit of class counts to a pmf over the same classes.
/// Classes with small expected counts are merged; the degrees of freedom
/// count the merged classes.
pub fn chi_square_test(observed: &[u64], pmf: &[f64]) -> Result<GofResult, StatsError> {
    if observed.len() != pmf.len() {
        return Err(StatsError::InvalidPmf(format!(
            "{} counts for {} probabilities",
            observed.len(),
            pmf.len()
        )));
    }
    let total: f64 = pmf.iter().sum();
    if pmf.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(StatsError::InvalidPmf(format!(
            "probabilities sum to {total}"
        )));
    }
    let n: u64 = observed.iter().sum();
    let impossible = observed.iter().zip(pmf).any(|(&o, &p)| o > 0 && p == 0.0);
    let expected: Vec<f64> = pmf.iter().map(|p| p * n as f64).collect();
    let groups = merge_groups(&expected, MIN_EXPECTED);
    if groups.len() < 2 {
        return Err(StatsError::SingleClass);
    }
    let stat = groups
        .iter()
        .map(|g| {
            let o: f64 = g.iter().map(|&i| observed[i] as f64).sum();
            let e: f64 = g.iter().map(|&i| expected[i]).sum();
            if e == 0.0 {
                if o == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (o - e).powi(2) / e
            }
        })
        .sum::<f64>();
    let dof = groups.len() - 1;
    Ok(GofResult {
        statistic: stat,
        p_value: if stat.is_finite() && !impossible {
            chi2_sf(stat, dof)
        } else {
            0.0
        },
        n: n as usize,
        dof: Some(dof),
    })
}

fn contingency(table: &[Vec<f64>]) -> (f64, usize) {
    let n: f64 = table.iter().flatten().sum();
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                stat += (o - e).powi(2) / e;
            }
        }
    }
    let live = |v: &[f64]| v.iter().filter(|x| **x > 0.0).count();
    let dof = (live(&rows).saturating_sub(1)) * (live(&cols).saturating_sub(1));
    (stat, dof)
}

/// Chi-square test that two samples of class counts share one law.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<GofResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::InvalidPmf(format!(
            "{} classes against {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    if na == 0 || nb == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, have: 0 });
    }
    let small = na.min(nb) as f64 / (na + nb) as f64;
    let weights: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x + y) as f64 * small)
        .collect();
    let groups = merge_groups(&weights, MIN_EXPECTED);
    if groups.len() < 2 {
        return Err(StatsError::SingleClass);
    }
    let row = |v: &[u64]| -> Vec<f64> {
        groups
            .iter()
            .map(|g| g.iter().map(|&i| v[i] as f64).sum())
            .collect()
    };
    let (stat, dof) = contingency(&[row(a), row(b)]);
    Ok(GofResult {
        statistic: stat,
        p_value: chi2_sf(stat, dof.max(1)),
        n: (na + nb) as usize,
        dof: Some(dof),
    })
}

fn quantile_bins(xs: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..bins).map(|k| sorted[k * sorted.len() / bins]).collect();
    xs.iter()
        .map(|x| cuts.partition_point(|c| c <= x))
        .collect()
}

/// Contingency chi-square on a `bins x bins` table of empirical quantile
/// classes of the two coordinates.
pub fn independence_test(pairs: &[(f64, f64)], bins: usize) -> Result<GofResult, StatsError> {
    if pairs.len() < MIN_INDEPENDENCE_PAIRS {
        return Err(StatsError::TooFewSamples {
            needed: MIN_INDEPENDENCE_PAIRS,
            have: pairs.len(),
        });
    }
    if bins < 2 {
        return Err(StatsError::SingleClass);
    }
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (bx, by) = (quantile_bins(&xs, bins), quantile_bins(&ys, bins));
    let mut table = vec![vec![0.0; bins]; bins];
    for (i, j) in bx.into_iter().zip(by) {
        table[i][j] += 1.0;
    }
    let (stat, dof) = contingency(&table);
    if dof == 0 {
        return Err(StatsError::SingleClass);
    }
    Ok(GofResult {
        statistic: stat,
        p_value: chi2_sf(stat, dof),
        n: pairs.len(),
        dof: Some(dof),
    })
}

/// Two-sided normal test of `estimate` against `expected` with standard
/// error `se`; the statistic is the z-score.
pub fn z_test(estimate: f64, expected: f64, se: f64, n: usize) -> Result<GofResult, StatsError> {
    if !(se > 0.0 && estimate.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let z = (estimate - expected) / se;
    Ok(GofResult {
        statistic: z,
        p_value: 2.0 * Normal::standard().sf(z.abs()),
        n,
        dof: None,
    })
}

/// Sample mean against `expected`, using `sd` when the law's standard
/// deviation is known and the sample's otherwise.
pub fn mean_test(samples: &[f64], expected: f64, sd: Option<f64>) -> Result<GofResult, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, have: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = sd.unwrap_or_else(|| {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    z_test(mean, expected, sd / (n as f64).sqrt(), n)
}

/// Observed frequency `hits / n` against probability `p`.
pub fn binomial_test(hits: u64, n: u64, p: f64) -> Result<GofResult, StatsError> {
    if n == 0 {
        return Err(StatsError::TooFewSamples { needed: 1, have: 0 });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(StatsError::InvalidPmf(format!("probability {p}")));
    }
    let freq = hits as f64 / n as f64;
    if p == 0.0 || p == 1.0 {
        let ok = freq == p;
        return Ok(GofResult {
            statistic: freq - p,
            p_value: if ok { 1.0 } else { 0.0 },
            n: n as usize,
            dof: None,
        });
    }
    z_test(freq, p, (p * (1.0 - p) / n as f64).sqrt(), n as usize)
}

/// Index-of-dispersion test that counts are Poisson: the statistic is
/// `sum (x - mean)^2 / mean`, two-sided against chi-square with `n - 1`
/// degrees of freedom.
pub fn dispersion_test(counts: &[u64]) -> Result<GofResult, StatsError> {
    let n = counts.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, have: n });
    }
    let mean = counts.iter().sum::<u64>() as f64 / n as f64;
    if mean == 0.0 {
        return Err(StatsError::SingleClass);
    }
    let stat = counts
        .iter()
        .map(|&x| (x as f64 - mean).powi(2))
        .sum::<f64>()
        / mean;
    let chi = ChiSquared::new((n - 1) as f64).expect("positive dof");
    let p = 2.0 * chi.cdf(stat).min(chi.sf(stat));
    Ok(GofResult {
        statistic: stat,
        p_value: p.min(1.0),
        n,
        dof: Some(n - 1),
    })
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (k, i) in idx.into_iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

/// Spearman rank correlation, tested against zero with `z = rho sqrt(n-1)`.
/// The statistic is `rho`.
pub fn rank_correlation_test(pairs: &[(f64, f64)]) -> Result<GofResult, StatsError> {
    let n = pairs.len();
    if n < MIN_KS_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_KS_SAMPLES,
            have: n,
        });
    }
    let rx = ranks(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let ry = ranks(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let m = (n - 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - m) * (y - m);
        sxx += (x - m).powi(2);
        syy += (y - m).powi(2);
    }
    let rho = sxy / (sxx * syy).sqrt();
    let z = z_test(rho, 0.0, 1.0 / ((n - 1) as f64).sqrt(), n)?;
    Ok(GofResult {
        statistic: rho,
        ..z
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{monte_carlo, RngStream};
    use rand::Rng;
    use rand_distr::{Distribution, Exp, Poisson};

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 1e-3);
        // the two series agree where they meet
        let a = kolmogorov_sf(1.18 - 1e-12);
        let b = kolmogorov_sf(1.18);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn ks_accepts_the_right_law_and_rejects_a_wrong_one() {
        let mut rng = RngStream::new(1, 0).rng();
        let e = Exp::new(2.0).unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| e.sample(&mut rng)).collect();
        assert!(ks_test(&xs, exponential_cdf(2.0)).unwrap().p_value > 0.001);
        assert!(ks_test(&xs, exponential_cdf(2.2)).unwrap().p_value < 1e-6);
    }

    #[test]
    fn ks_rejects_tiny_samples() {
        assert!(matches!(
            ks_test(&[1.0; 10], exponential_cdf(1.0)),
            Err(StatsError::TooFewSamples { .. })
        ));
        assert!(ks_test(&[], exponential_cdf(1.0)).is_err());
    }

    #[test]
    fn chi_square_merges_sparse_classes() {
        // 1000 draws; the last three classes hold 1.5 expected counts in all
        let pmf = [0.5, 0.3, 0.1985, 0.001, 0.0004, 0.0001];
        let obs = [500, 300, 198, 1, 1, 0];
        let r = chi_square_test(&obs, &pmf).unwrap();
        assert_eq!(r.dof, Some(2));
        assert!(r.p_value > 0.9);
        assert!(matches!(
            chi_square_test(&[3], &[1.0]),
            Err(StatsError::SingleClass)
        ));
        assert!(chi_square_test(&[1, 2], &[0.5, 0.6]).is_err());
    }

    #[test]
    fn chi_square_impossible_class_fails() {
        let r = chi_square_test(&[50, 50, 10], &[0.5, 0.5, 0.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn homogeneity_and_independence() {
        let mut rng = RngStream::new(1, 1).rng();
        let p = Poisson::new(3.0).unwrap();
        let count = |rng: &mut crate::samplers::Rng| {
            let mut c = vec![0u64; 15];
            for _ in 0..5000 {
                let k: f64 = p.sample(rng);
                c[(k as usize).min(14)] += 1;
            }
            c
        };
        let (a, b) = (count(&mut rng), count(&mut rng));
        assert!(chi_square_homogeneity(&a, &b).unwrap().p_value > 0.001);

        let indep: Vec<(f64, f64)> = (0..20_000).map(|_| (rng.random(), rng.random())).collect();
        assert!(independence_test(&indep, 5).unwrap().p_value > 0.001);
        let dep: Vec<(f64, f64)> = indep.iter().map(|&(x, y)| (x, x + 0.3 * y)).collect();
        assert!(independence_test(&dep, 5).unwrap().p_value < 1e-6);
        assert!(independence_test(&indep[..100], 5).is_err());
        assert!(rank_correlation_test(&indep).unwrap().p_value > 0.001);
        assert!(rank_correlation_test(&dep).unwrap().p_value < 1e-6);
    }

    #[test]
    fn dispersion_of_poisson_counts() {
        let mut rng = RngStream::new(1, 2).rng();
        let p = Poisson::new(2.0).unwrap();
        let xs: Vec<u64> = (0..10_000).map(|_| p.sample(&mut rng) as u64).collect();
        assert!(dispersion_test(&xs).unwrap().p_value > 0.001);
        let doubled: Vec<u64> = xs.iter().map(|x| 2 * x).collect();
        assert!(dispersion_test(&doubled).unwrap().p_value < 1e-6);
    }

    #[test]
    fn binomial_and_mean() {
        assert!(binomial_test(5100, 10_000, 0.5).unwrap().p_value > 0.04);
        assert!(binomial_test(5400, 10_000, 0.5).unwrap().p_value < 1e-6);
        assert_eq!(binomial_test(0, 10, 0.0).unwrap().p_value, 1.0);
        let r = mean_test(&[1.0, 2.0, 3.0], 2.0, None).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn ks_is_calibrated() {
        // under the null, p < 0.05 about 5% of the time
        let rejections = monte_carlo(400, RngStream::new(1, 3), |rng| {
            let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 0.05
        })
        .into_iter()
        .filter(|&r| r)
        .count();
        assert!((5..=40).contains(&rejections), "{rejections}");
    }
}
