//! Random generation of forests, alternating walks and Poisson-sampled
//! Brownian paths.

mod brownian;
mod gw;

pub use brownian::{
    conditional_bridge_min, sample_brownian_at_times, sample_brownian_poisson,
    sample_poisson_field, BrownianSamplePath, Horizon, PoissonField, SampleRecord,
};
pub use gw::{
    sample_forest, sample_forest_bounded, sample_gw_tree, sample_gw_tree_bounded, sample_walk,
    Bounded, MAX_TREE_NODES,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("tree exceeded {0} nodes")]
    Runaway(usize),
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("rate levels must be strictly increasing")]
    DecreasingRates,
    #[error("path has no samples")]
    EmptyPath,
}

/// Rate parameters `0 <= lambda < mu (< theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    pub lambda: f64,
    pub mu: f64,
    pub theta: Option<f64>,
}

impl Params {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, SampleError> {
        if !(lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && lambda < mu) {
            return Err(SampleError::InvalidParams(format!(
                "need 0 <= lambda < mu, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(Params {
            lambda,
            mu,
            theta: None,
        })
    }

    pub fn with_theta(self, theta: f64) -> Result<Self, SampleError> {
        if !(theta.is_finite() && theta > self.mu) {
            return Err(SampleError::InvalidParams(format!(
                "need mu < theta, got mu={}, theta={theta}",
                self.mu
            )));
        }
        Ok(Params {
            theta: Some(theta),
            ..self
        })
    }

    pub fn branching_prob(&self) -> f64 {
        (self.mu - self.lambda) / (2.0 * self.mu)
    }

    /// The `(mu, theta)` pair, for the finer forest of a composition.
    pub fn upper(&self) -> Result<Params, SampleError> {
        match self.theta {
            Some(t) => Params::new(self.mu, t),
            None => Err(SampleError::InvalidParams("theta is required".into())),
        }
    }

    /// The `(lambda, theta)` pair.
    pub fn outer(&self) -> Result<Params, SampleError> {
        match self.theta {
            Some(t) => Params::new(self.lambda, t),
            None => Err(SampleError::InvalidParams("theta is required".into())),
        }
    }
}

pub type Rng = ChaCha8Rng;

/// A reproducible random stream: same `(seed, stream_id)`, same numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// An independent sub-stream, e.g. one per parallel chunk.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: self
                .stream_id
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(index.wrapping_add(1)),
        }
    }
}

/// Chunks a Monte Carlo run into a fixed number of blocks, so the output
/// does not depend on how many threads rayon uses.
const CHUNKS: usize = 64;

/// Draws `n` values in parallel; item `i` is produced by `f` with the rng of
/// its chunk. Output order and values are deterministic in `stream`.
pub fn monte_carlo<T, F>(n: usize, stream: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Rng) -> T + Sync,
{
    let chunks = CHUNKS.min(n.max(1));
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * n / chunks;
            let hi = (c + 1) * n / chunks;
            let mut rng = stream.child(c as u64).rng();
            (lo..hi).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn params_ordering() {
        assert!(Params::new(0.0, 1.0).is_ok());
        assert!(Params::new(2.0, 1.0).is_err());
        assert!(Params::new(1.0, 1.0).is_err());
        assert!(Params::new(-0.5, 1.0).is_err());
        assert!(Params::new(0.0, f64::NAN).is_err());
        assert!(Params::new(0.0, 1.0).unwrap().with_theta(1.0).is_err());
        let p = Params::new(1.0, 3.0).unwrap();
        assert!((p.branching_prob() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<u64> = (0..4)
            .map(|_| RngStream::new(7, 1).rng().random())
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let x: u64 = RngStream::new(7, 1).rng().random();
        let y: u64 = RngStream::new(7, 2).rng().random();
        let z: u64 = RngStream::new(8, 1).rng().random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let s = RngStream::new(3, 9);
        let a = monte_carlo(1000, s, |r| r.random::<u32>());
        let b = monte_carlo(1000, s, |r| r.random::<u32>());
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        assert!(monte_carlo(0, s, |r| r.random::<u32>()).is_empty());
    }
}
