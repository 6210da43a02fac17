//! Closed-form performance metrics for one frame split.
//!
//! Query service is modelled as a loss system with `q` servers: a frame's
//! queries are served in the next frame, and whatever exceeds `q` is dropped.
//! The Erlang-B expression used here assumes an infinite source population,
//! so [`p_s_query`] is a lower bound on the success rate of the simulated
//! batch-service system rather than its exact value.
//!
//! Push packets pick one of `k_a` slots uniformly at random and succeed when
//! alone in their slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::math::{erlang_b, PoissonMean};

/// Offered pull and push traffic in arrivals per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLoad {
    /// Queries per second.
    pub lambda_q: f64,
    /// Push packets per second.
    pub lambda_p: f64,
}

impl TrafficLoad {
    pub fn new(lambda_q: f64, lambda_p: f64) -> Result<Self> {
        for (name, v) in [("lambda_q", lambda_q), ("lambda_p", lambda_p)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(TrafficLoad { lambda_q, lambda_p })
    }

    /// Mean queries per frame.
    pub fn n_q_mean(&self, config: &FrameConfig) -> Result<PoissonMean> {
        PoissonMean::new(self.lambda_q * config.frame_duration())
    }

    /// Mean push packets per frame.
    pub fn n_p_mean(&self, config: &FrameConfig) -> Result<PoissonMean> {
        PoissonMean::new(self.lambda_p * config.frame_duration())
    }
}

/// Weights of the query and push success probabilities in the combined
/// objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_q: f64,
    pub w_p: f64,
}

impl Weights {
    pub fn new(w_q: f64, w_p: f64) -> Result<Self> {
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !in_unit(w_q) || !in_unit(w_p) || (w_q + w_p - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "weights must lie in [0, 1] and sum to 1, got w_q = {w_q}, w_p = {w_p}"
            )));
        }
        Ok(Weights { w_q, w_p })
    }

    /// `w_q = 1 - w_p`.
    pub fn from_query_weight(w_q: f64) -> Result<Self> {
        Weights::new(w_q, 1.0 - w_q)
    }

    /// Weights proportional to each traffic's arrival rate. With no traffic
    /// at all both weights are 1/2.
    pub fn traffic_fair(load: &TrafficLoad) -> Self {
        let total = load.lambda_q + load.lambda_p;
        if total > 0.0 {
            let w_q = load.lambda_q / total;
            Weights { w_q, w_p: 1.0 - w_q }
        } else {
            Weights { w_q: 0.5, w_p: 0.5 }
        }
    }
}

/// Query success probability `1 - B(q, n_q_mean)`.
pub fn p_s_query(q: u32, n_q_mean: PoissonMean) -> f64 {
    1.0 - erlang_b(q, n_q_mean)
}

/// Mean successfully served queries per frame.
pub fn mean_served_queries(q: u32, n_q_mean: PoissonMean) -> f64 {
    n_q_mean.get() * p_s_query(q, n_q_mean)
}

fn check_k_a(k_a: u32) -> Result<()> {
    if k_a == 0 {
        Err(Error::domain("k_a must be >= 1"))
    } else {
        Ok(())
    }
}

/// Probability that a given packet succeeds when `n_p` packets contend for
/// `k_a` slots.
pub fn p_s_push_conditional(k_a: u32, n_p: u64) -> Result<f64> {
    check_k_a(k_a)?;
    Ok(match (k_a, n_p) {
        (1, 0 | 1) => 1.0,
        (1, _) => 0.0,
        (_, 0) => 1.0,
        (_, n) => {
            let base = 1.0 - 1.0 / k_a as f64;
            match i32::try_from(n - 1) {
                Ok(e) => base.powi(e),
                Err(_) => base.powf((n - 1) as f64),
            }
        }
    })
}

/// Push success probability averaged over Poisson(`n_p_mean`) packet counts.
pub fn p_s_push(k_a: u32, n_p_mean: PoissonMean) -> Result<f64> {
    check_k_a(k_a)?;
    let n = n_p_mean.get();
    if k_a == 1 {
        return Ok((1.0 + n) * (-n).exp());
    }
    // k_a e^{-n/k_a} - e^{-n} over k_a - 1; equal to the textbook form
    // e^{-n}(k_a e^{n(k_a-1)/k_a} - 1)/(k_a - 1) without its overflow.
    let k = k_a as f64;
    Ok(((k * (-n / k).exp() - (-n).exp()) / (k - 1.0)).clamp(0.0, 1.0))
}

/// Mean push packets successfully delivered per second.
pub fn throughput_push(k_a: u32, n_p_mean: PoissonMean, t_frame: f64) -> Result<f64> {
    check_k_a(k_a)?;
    if !(t_frame.is_finite() && t_frame > 0.0) {
        return Err(Error::domain(format!("frame duration must be > 0, got {t_frame}")));
    }
    let n = n_p_mean.get();
    Ok(n / t_frame * (-n / k_a as f64).exp())
}

/// Weighted success probability `w_q p_s_query + w_p p_s_push`.
pub fn p_s_weighted(
    q: u32,
    k_a: u32,
    n_q_mean: PoissonMean,
    n_p_mean: PoissonMean,
    weights: Weights,
) -> Result<f64> {
    let weights = Weights::new(weights.w_q, weights.w_p)?;
    let ps_q = p_s_query(q, n_q_mean);
    let ps_p = p_s_push(k_a, n_p_mean)?;
    Ok(weights.w_q * ps_q + weights.w_p * ps_p)
}

/// All analytic metrics at one `(config, load, q)` design point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub q: u32,
    pub k_a: u32,
    pub p_s_query: f64,
    /// Queries per frame.
    pub n_served_mean: f64,
    pub p_s_push: f64,
    /// Packets per second.
    pub throughput_push: f64,
    pub p_s_weighted: f64,
    pub weights: Weights,
}

/// Evaluates every metric at one design point. `weights` defaults to
/// [`Weights::traffic_fair`].
pub fn metrics(
    config: &FrameConfig,
    load: &TrafficLoad,
    q: u32,
    weights: Option<Weights>,
) -> Result<MetricsReport> {
    let split = config.split_for_q(q)?;
    let weights = match weights {
        Some(w) => Weights::new(w.w_q, w.w_p)?,
        None => Weights::traffic_fair(load),
    };
    let n_q = load.n_q_mean(config)?;
    let n_p = load.n_p_mean(config)?;
    let p_s_query = p_s_query(q, n_q);
    let p_s_push = p_s_push(split.k_a, n_p)?;
    Ok(MetricsReport {
        q,
        k_a: split.k_a,
        p_s_query,
        n_served_mean: n_q.get() * p_s_query,
        p_s_push,
        throughput_push: throughput_push(split.k_a, n_p, config.frame_duration())?,
        p_s_weighted: weights.w_q * p_s_query + weights.w_p * p_s_push,
        weights,
    })
}
