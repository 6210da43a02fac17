//! Frame-stepped Monte Carlo simulation.
//!
//! Each frame `t`:
//! 1. draw `n_q(t) ~ Poisson(lambda_q T_frame)` new queries;
//! 2. serve `min(n_q(t-1), q)` of the previous frame's queries in FIFO
//!    order and discard the rest (one-frame deadline); served queries
//!    always succeed;
//! 3. draw `n_p(t) ~ Poisson(lambda_p T_frame)` push packets, each picking
//!    one of `k_a` slots uniformly; a packet succeeds iff alone in its slot.
//!
//! # Random streams
//!
//! Replication `r` runs on `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r` via `set_stream`. Per frame it consumes, in order: one uniform
//! for `n_q`, one uniform for `n_p`, then one `gen_range(0..k_a)` per
//! packet. Results depend only on `(seed, r)`, never on how replications
//! are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::math::PoissonSampler;
use crate::metrics::{self, MetricsReport, TrafficLoad};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Measured frames per replication.
    pub frames: u64,
    pub seed: u64,
    pub replications: u32,
    /// Frames run before measurement starts, so the first measured frame
    /// has a backlog to serve.
    pub warmup_frames: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            frames: 100_000,
            seed: 1,
            replications: 1,
            warmup_frames: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::domain("frames must be >= 1"));
        }
        if self.replications == 0 {
            return Err(Error::domain("replications must be >= 1"));
        }
        Ok(())
    }
}

/// 95% confidence half-widths of the [`SimResult`] estimates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfWidths {
    pub p_s_query: f64,
    pub p_s_push: f64,
    pub throughput_push: f64,
    pub n_served_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Served over arrived queries; 1 when no query arrived (see
    /// `query_zero_samples`).
    pub p_s_query_hat: f64,
    /// Frame average of `1` (empty frame) or `successes / n_p`.
    pub p_s_push_hat: f64,
    /// Successful packets per second.
    pub throughput_push_hat: f64,
    /// Served queries per frame.
    pub n_served_mean_hat: f64,
    pub queries_total: u64,
    pub queries_served: u64,
    pub queries_discarded: u64,
    pub packets_total: u64,
    pub packets_success: u64,
    pub frames_observed: u64,
    pub replications: u32,
    /// Set when no query arrived, leaving `p_s_query_hat` undefined.
    pub query_zero_samples: bool,
    pub half_width_95: HalfWidths,
}

/// Sums over the measured frames of one replication.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    frames: u64,
    queries_total: u64,
    queries_served: u64,
    packets_total: u64,
    packets_success: u64,
    // per-frame (arrivals a, served s) moments for the ratio estimator
    sum_a2: f64,
    sum_s2: f64,
    sum_as: f64,
    // per-frame push success estimator
    sum_push: f64,
    sum_push2: f64,
    // per-frame successes
    sum_succ2: f64,
}

impl Accumulator {
    fn record_queries(&mut self, arrived: u64, served: u64) {
        let (a, s) = (arrived as f64, served as f64);
        self.queries_total += arrived;
        self.queries_served += served;
        self.sum_a2 += a * a;
        self.sum_s2 += s * s;
        self.sum_as += a * s;
    }

    fn record_push(&mut self, sent: u64, success: u64) {
        let est = if sent == 0 { 1.0 } else { success as f64 / sent as f64 };
        self.frames += 1;
        self.packets_total += sent;
        self.packets_success += success;
        self.sum_push += est;
        self.sum_push2 += est * est;
        self.sum_succ2 += (success * success) as f64;
    }

    fn p_s_query(&self) -> f64 {
        if self.queries_total == 0 {
            1.0
        } else {
            self.queries_served as f64 / self.queries_total as f64
        }
    }

    fn p_s_push(&self) -> f64 {
        self.sum_push / self.frames as f64
    }

    fn throughput(&self, t_frame: f64) -> f64 {
        self.packets_success as f64 / (self.frames as f64 * t_frame)
    }

    fn n_served_mean(&self) -> f64 {
        self.queries_served as f64 / self.frames as f64
    }

    /// Normal-approximation half-widths from per-frame samples.
    fn frame_half_widths(&self, t_frame: f64) -> HalfWidths {
        let n = self.frames as f64;
        if self.frames < 2 {
            return HalfWidths::default();
        }
        let mean_hw = |sum: f64, sum2: f64| {
            let mean = sum / n;
            let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
            Z_95 * (var / n).sqrt()
        };
        // delta method for the ratio of sums S / A
        let p_s_query = if self.queries_total == 0 {
            0.0
        } else {
            let r = self.p_s_query();
            let a_bar = self.queries_total as f64 / n;
            let resid2 = (self.sum_s2 - 2.0 * r * self.sum_as + r * r * self.sum_a2).max(0.0);
            Z_95 * (resid2 / (n - 1.0) / n).sqrt() / a_bar
        };
        HalfWidths {
            p_s_query,
            p_s_push: mean_hw(self.sum_push, self.sum_push2),
            throughput_push: mean_hw(self.packets_success as f64, self.sum_succ2) / t_frame,
            n_served_mean: mean_hw(self.queries_served as f64, self.sum_s2),
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.frames += other.frames;
        self.queries_total += other.queries_total;
        self.queries_served += other.queries_served;
        self.packets_total += other.packets_total;
        self.packets_success += other.packets_success;
        self.sum_a2 += other.sum_a2;
        self.sum_s2 += other.sum_s2;
        self.sum_as += other.sum_as;
        self.sum_push += other.sum_push;
        self.sum_push2 += other.sum_push2;
        self.sum_succ2 += other.sum_succ2;
    }
}

/// Throws `n_p` packets into `k_a` slots; returns how many landed alone.
///
/// `slots` is scratch space, resized and cleared here.
pub fn aloha_round<R: Rng + ?Sized>(k_a: u32, n_p: u64, rng: &mut R, slots: &mut Vec<u32>) -> u64 {
    slots.clear();
    slots.resize(k_a as usize, 0);
    for _ in 0..n_p {
        slots[rng.gen_range(0..k_a) as usize] += 1;
    }
    slots.iter().filter(|&&c| c == 1).count() as u64
}

/// Random stream for one replication.
pub fn replication_rng(seed: u64, replication: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

fn run_replication(
    q: u32,
    k_a: u32,
    q_sampler: &PoissonSampler,
    p_sampler: &PoissonSampler,
    sim: &SimConfig,
    replication: u32,
) -> Accumulator {
    let mut rng = replication_rng(sim.seed, replication);
    let mut acc = Accumulator::default();
    let mut slots = Vec::with_capacity(k_a as usize);
    let mut backlog = 0u64;
    for t in 0..sim.warmup_frames + sim.frames {
        let measuring = t >= sim.warmup_frames;
        let arrivals = q_sampler.sample(&mut rng);
        let served = backlog.min(q as u64);
        if measuring {
            acc.record_queries(backlog, served);
        }
        backlog = arrivals;

        let sent = p_sampler.sample(&mut rng);
        let success = aloha_round(k_a, sent, &mut rng, &mut slots);
        if measuring {
            acc.record_push(sent, success);
        }
    }
    acc
}

#[cfg(feature = "parallel")]
fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T>(n: usize, f: impl Fn(usize) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Runs `sim.replications` independent replications and pools them.
///
/// With one replication, half-widths come from the per-frame samples;
/// with several, from the spread of the per-replication estimates.
pub fn simulate(
    config: &FrameConfig,
    load: &TrafficLoad,
    q: u32,
    sim: &SimConfig,
) -> Result<SimResult> {
    sim.validate()?;
    let split = config.split_for_q(q)?;
    let q_sampler = PoissonSampler::new(load.n_q_mean(config)?);
    let p_sampler = PoissonSampler::new(load.n_p_mean(config)?);
    let t_frame = config.frame_duration();

    let reps = map_indexed(sim.replications as usize, |r| {
        run_replication(q, split.k_a, &q_sampler, &p_sampler, sim, r as u32)
    });

    let mut pooled = Accumulator::default();
    for acc in &reps {
        pooled.merge(acc);
    }

    let half_width_95 = if reps.len() == 1 {
        pooled.frame_half_widths(t_frame)
    } else {
        let spread = |f: &dyn Fn(&Accumulator) -> f64| {
            let xs: Vec<f64> = reps.iter().map(f).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Z_95 * (var / n).sqrt()
        };
        HalfWidths {
            p_s_query: spread(&|a| a.p_s_query()),
            p_s_push: spread(&|a| a.p_s_push()),
            throughput_push: spread(&|a| a.throughput(t_frame)),
            n_served_mean: spread(&|a| a.n_served_mean()),
        }
    };

    Ok(SimResult {
        p_s_query_hat: pooled.p_s_query(),
        p_s_push_hat: pooled.p_s_push(),
        throughput_push_hat: pooled.throughput(t_frame),
        n_served_mean_hat: pooled.n_served_mean(),
        queries_total: pooled.queries_total,
        queries_served: pooled.queries_served,
        queries_discarded: pooled.queries_total - pooled.queries_served,
        packets_total: pooled.packets_total,
        packets_success: pooled.packets_success,
        frames_observed: pooled.frames,
        replications: sim.replications,
        query_zero_samples: pooled.queries_total == 0,
        half_width_95,
    })
}

/// Half-widths beyond which a deviation is flagged.
pub const FLAG_HALF_WIDTHS: f64 = 4.0;

/// Empirical minus analytic, per metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub p_s_query: f64,
    pub p_s_push: f64,
    pub throughput_push: f64,
    pub n_served_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub q: u32,
    pub load: TrafficLoad,
    pub seed: u64,
    pub analytic: MetricsReport,
    pub empirical: SimResult,
    pub deviation: Deviation,
    /// `|push deviation|` exceeds [`FLAG_HALF_WIDTHS`] half-widths.
    pub push_flag: bool,
    /// Empirical query success lies more than [`FLAG_HALF_WIDTHS`]
    /// half-widths below the analytic lower bound.
    pub query_flag: bool,
}

impl ValidationPoint {
    pub fn flagged(&self) -> bool {
        self.push_flag || self.query_flag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub points: usize,
    pub flags: usize,
    pub max_abs_deviation_push: f64,
    /// Largest `analytic - empirical` query success, floored at 0.
    pub max_lower_bound_violation_query: f64,
}

impl ValidationSummary {
    pub fn from_points(points: &[ValidationPoint]) -> Self {
        ValidationSummary {
            points: points.len(),
            flags: points.iter().filter(|p| p.flagged()).count(),
            max_abs_deviation_push: points
                .iter()
                .map(|p| p.deviation.p_s_push.abs())
                .fold(0.0, f64::max),
            max_lower_bound_violation_query: points
                .iter()
                .map(|p| -p.deviation.p_s_query)
                .fold(0.0, f64::max),
        }
    }
}

/// SplitMix64 finalizer applied to `seed + index * golden`; gives each grid
/// point its own base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates every `(q, load)` pair (q-major order) and compares with the
/// analytic model. Point `i` runs with seed `derive_seed(sim.seed, i)`.
pub fn validate_grid(
    config: &FrameConfig,
    q_list: &[u32],
    loads: &[TrafficLoad],
    sim: &SimConfig,
) -> Result<Vec<ValidationPoint>> {
    if q_list.is_empty() || loads.is_empty() {
        return Err(Error::domain("validation grid must be nonempty"));
    }
    sim.validate()?;
    for &q in q_list {
        config.split_for_q(q)?;
    }
    let grid: Vec<(u32, TrafficLoad)> = q_list
        .iter()
        .flat_map(|&q| loads.iter().map(move |&l| (q, l)))
        .collect();

    map_indexed(grid.len(), |i| {
        let (q, load) = grid[i];
        let seed = derive_seed(sim.seed, i as u64);
        let point_sim = SimConfig { seed, ..*sim };
        let analytic = metrics::metrics(config, &load, q, None)?;
        let empirical = simulate(config, &load, q, &point_sim)?;
        let hw = empirical.half_width_95;
        let deviation = Deviation {
            p_s_query: empirical.p_s_query_hat - analytic.p_s_query,
            p_s_push: empirical.p_s_push_hat - analytic.p_s_push,
            throughput_push: empirical.throughput_push_hat - analytic.throughput_push,
            n_served_mean: empirical.n_served_mean_hat - analytic.n_served_mean,
        };
        Ok(ValidationPoint {
            q,
            load,
            seed,
            analytic,
            push_flag: deviation.p_s_push.abs() > FLAG_HALF_WIDTHS * hw.p_s_push,
            query_flag: deviation.p_s_query < -FLAG_HALF_WIDTHS * hw.p_s_query,
            empirical,
            deviation,
        })
    })
    .into_iter()
    .collect()
}

/// Cartesian product of query and push rates, query-rate major.
pub fn load_grid(lambda_q: &[f64], lambda_p: &[f64]) -> Result<Vec<TrafficLoad>> {
    lambda_q
        .iter()
        .flat_map(|&lq| lambda_p.iter().map(move |&lp| TrafficLoad::new(lq, lp)))
        .collect()
}
