//! Poisson and Erlang-B primitives.
//!
//! Sampling draws from any [`rand::Rng`]; the simulator feeds it a
//! `ChaCha8Rng`, so sequences are reproducible across platforms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Means at or above this value are sampled through a precomputed CDF table
/// instead of a sequential search from zero.
pub const TABLE_THRESHOLD: f64 = 10.0;

/// Mean of a Poisson variable, e.g. the per-frame number of arrivals.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PoissonMean(f64);

impl PoissonMean {
    pub const ZERO: PoissonMean = PoissonMean(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(PoissonMean(value))
        } else {
            Err(Error::domain(format!(
                "Poisson mean must be finite and >= 0, got {value}"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PoissonMean {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        PoissonMean::new(value)
    }
}

impl From<PoissonMean> for f64 {
    fn from(m: PoissonMean) -> f64 {
        m.0
    }
}

/// `P(k; mean) = mean^k e^-mean / k!`, evaluated in log space.
pub fn poisson_pmf(k: u64, mean: PoissonMean) -> f64 {
    let mu = mean.get();
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    let log_p = kf * mu.ln() - mu - libm::lgamma(kf + 1.0);
    log_p.exp().min(1.0)
}

/// Samples Poisson variates by inversion.
///
/// Every call to [`PoissonSampler::sample`] consumes exactly one uniform
/// `f64` from the stream (`Rng::gen::<f64>()`, 53 random bits), for every
/// mean including zero. Means below [`TABLE_THRESHOLD`] use a sequential
/// search from `k = 0`; larger means use a binary search over a CDF table
/// that covers `k <= mean + 12 sqrt(mean) + 30`, continuing sequentially past
/// its end in the (rare) case the uniform lands in the truncated tail.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    mean: f64,
    exp_neg_mean: f64,
    cdf: Vec<f64>,
}

impl PoissonSampler {
    pub fn new(mean: PoissonMean) -> Self {
        let mu = mean.get();
        let cdf = if mu >= TABLE_THRESHOLD {
            let k_max = (mu + 12.0 * mu.sqrt() + 30.0).ceil() as u64;
            let mut acc = 0.0;
            (0..=k_max)
                .map(|k| {
                    acc += poisson_pmf(k, mean);
                    acc
                })
                .collect()
        } else {
            Vec::new()
        };
        PoissonSampler {
            mean: mu,
            exp_neg_mean: (-mu).exp(),
            cdf,
        }
    }

    pub fn mean(&self) -> PoissonMean {
        PoissonMean(self.mean)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        if self.cdf.is_empty() {
            self.search_from(0, self.exp_neg_mean, self.exp_neg_mean, u)
        } else {
            let idx = self.cdf.partition_point(|&c| c <= u);
            if idx < self.cdf.len() {
                idx as u64
            } else {
                let k = (self.cdf.len() - 1) as u64;
                let p = poisson_pmf(k, self.mean());
                self.search_from(k, p, self.cdf[k as usize], u)
            }
        }
    }

    // Walks k upward from (k, pmf(k), cdf(k)) until cdf exceeds u.
    fn search_from(&self, mut k: u64, mut p: f64, mut c: f64, u: f64) -> u64 {
        while u >= c {
            k += 1;
            p *= self.mean / k as f64;
            c += p;
            if p < f64::MIN_POSITIVE {
                break;
            }
        }
        k
    }
}

/// One Poisson draw; see [`PoissonSampler`] for the stream contract.
///
/// Builds a fresh sampler per call. Hot loops should keep a
/// [`PoissonSampler`] around instead.
pub fn sample_poisson<R: Rng + ?Sized>(mean: PoissonMean, rng: &mut R) -> u64 {
    PoissonSampler::new(mean).sample(rng)
}

/// Erlang-B blocking probability `B(servers, load)`.
///
/// Forward recursion `B(0) = 1`, `B(m) = E B(m-1) / (m + E B(m-1))`, which
/// never forms the factorials of the ratio definition.
pub fn erlang_b(servers: u32, load: PoissonMean) -> f64 {
    let e = load.get();
    let mut b = 1.0;
    for m in 1..=servers {
        let eb = e * b;
        b = eb / (m as f64 + eb);
    }
    b
}
