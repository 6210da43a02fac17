//! Frame design: choosing `q`, rate limits under a success target, and
//! load crossovers between two designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameConfig;
use crate::math::PoissonMean;
use crate::metrics::{self, p_s_push, p_s_query, throughput_push, TrafficLoad, Weights};

/// Relative bracket width at which rate bisection stops.
pub const RATE_REL_TOL: f64 = 1e-9;
/// Relative bracket width at which crossover refinement stops.
pub const CROSSOVER_REL_TOL: f64 = 1e-6;
/// Grid points used to detect sign changes before refinement.
pub const CROSSOVER_GRID: usize = 2000;

/// One bar of the per-`q` objective table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    pub q: u32,
    pub p_s_weighted: f64,
    pub p_s_query: f64,
    pub p_s_push: f64,
    pub k_a: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub q_star: u32,
    pub p_s_at_star: f64,
    pub weights: Weights,
    /// One row for every `q` in `0..=q_max`, in increasing `q`.
    pub per_q_table: Vec<QRow>,
}

/// Exhaustive search for the `q` maximizing the weighted success
/// probability. Ties go to the smallest `q`.
pub fn optimal_q(
    config: &FrameConfig,
    load: &TrafficLoad,
    weights: Option<Weights>,
) -> Result<OptimizationResult> {
    let weights = weights.unwrap_or_else(|| Weights::traffic_fair(load));
    let per_q_table = (0..=config.q_max())
        .map(|q| {
            metrics::metrics(config, load, q, Some(weights)).map(|r| QRow {
                q,
                p_s_weighted: r.p_s_weighted,
                p_s_query: r.p_s_query,
                p_s_push: r.p_s_push,
                k_a: r.k_a,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let best = per_q_table
        .iter()
        .fold(None::<&QRow>, |best, row| match best {
            Some(b) if b.p_s_weighted >= row.p_s_weighted => Some(b),
            _ => Some(row),
        })
        .expect("q = 0 is always feasible");

    Ok(OptimizationResult {
        q_star: best.q,
        p_s_at_star: best.p_s_weighted,
        weights,
        per_q_table,
    })
}

fn check_threshold(p_th: f64) -> Result<()> {
    if p_th > 0.0 && p_th < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("p_th must lie in (0, 1), got {p_th}")))
    }
}

/// Finds the rate where a strictly decreasing success curve hits `target`.
///
/// Starts from `[0, 1]` and doubles the upper end until the curve drops
/// below the target, then bisects to relative width [`RATE_REL_TOL`].
fn bisect_rate(target: f64, mut success_at: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while success_at(hi)? >= target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Infeasible(format!(
                "success probability never drops below {target}"
            )));
        }
    }
    while hi - lo > RATE_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if success_at(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest query rate (per second) whose success probability still reaches
/// `p_th` with `q` services per frame.
pub fn max_lambda_q(config: &FrameConfig, q: u32, p_th: f64) -> Result<f64> {
    check_threshold(p_th)?;
    if q == 0 {
        return Err(Error::Infeasible(
            "q = 0 serves no queries at any success target".into(),
        ));
    }
    config.split_for_q(q)?;
    let t_frame = config.frame_duration();
    bisect_rate(p_th, |lambda| Ok(p_s_query(q, PoissonMean::new(lambda * t_frame)?)))
}

/// Largest push rate (per second) whose success probability still reaches
/// `p_th` with the `k_a` left by `q`.
pub fn max_lambda_p(config: &FrameConfig, q: u32, p_th: f64) -> Result<f64> {
    check_threshold(p_th)?;
    let k_a = config.split_for_q(q)?.k_a;
    let t_frame = config.frame_duration();
    bisect_rate(p_th, |lambda| p_s_push(k_a, PoissonMean::new(lambda * t_frame)?))
}

/// Design-guideline point for one `q` at a success target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidelineRow {
    pub p_th: f64,
    pub q: u32,
    pub lambda_q_max: f64,
    pub lambda_p_max: f64,
    /// Served queries per frame at `lambda_q_max`.
    pub n_served_mean: f64,
    /// Push throughput (packets/s) at `lambda_p_max`.
    pub throughput_push: f64,
}

/// One row per `q` in `1..=q_max`.
pub fn guidelines(config: &FrameConfig, p_th: f64) -> Result<Vec<GuidelineRow>> {
    check_threshold(p_th)?;
    let t_frame = config.frame_duration();
    (1..=config.q_max())
        .map(|q| {
            let lambda_q_max = max_lambda_q(config, q, p_th)?;
            let lambda_p_max = max_lambda_p(config, q, p_th)?;
            let k_a = config.split_for_q(q)?.k_a;
            let n_q = PoissonMean::new(lambda_q_max * t_frame)?;
            let n_p = PoissonMean::new(lambda_p_max * t_frame)?;
            Ok(GuidelineRow {
                p_th,
                q,
                lambda_q_max,
                lambda_p_max,
                n_served_mean: metrics::mean_served_queries(q, n_q),
                throughput_push: throughput_push(k_a, n_p, t_frame)?,
            })
        })
        .collect()
}

/// Upper end of the crossover sweep when none is given: the push rate at
/// which `q_low`'s frame sees three packets per access slot.
pub fn default_crossover_ceiling(config: &FrameConfig, q_low: u32) -> Result<f64> {
    let k_a = config.split_for_q(q_low)?.k_a;
    Ok(3.0 * k_a as f64 / config.frame_duration())
}

/// Weighted success at push rate `lambda_p` with `lambda_q = ratio *
/// lambda_p` and traffic-fair weights.
fn weighted_at_ratio(config: &FrameConfig, q: u32, ratio: f64, lambda_p: f64) -> Result<f64> {
    let load = TrafficLoad::new(ratio * lambda_p, lambda_p)?;
    Ok(metrics::metrics(config, &load, q, None)?.p_s_weighted)
}

/// Every push rate in `(0, ceiling]` where the weighted objectives of
/// `q_low` and `q_high` swap order, holding `lambda_q / lambda_p = ratio`.
///
/// Sign changes are located on a uniform grid of [`CROSSOVER_GRID`] points
/// and refined by bisection to relative width [`CROSSOVER_REL_TOL`].
pub fn crossover_points(
    config: &FrameConfig,
    q_low: u32,
    q_high: u32,
    ratio: f64,
    ceiling: Option<f64>,
) -> Result<Vec<f64>> {
    if q_low >= q_high {
        return Err(Error::domain(format!("need q_low < q_high, got {q_low} and {q_high}")));
    }
    config.split_for_q(q_high)?;
    if !(ratio.is_finite() && ratio >= 0.0) {
        return Err(Error::domain(format!("load ratio must be finite and >= 0, got {ratio}")));
    }
    let ceiling = match ceiling {
        Some(c) if c.is_finite() && c > 0.0 => c,
        Some(c) => return Err(Error::domain(format!("sweep ceiling must be > 0, got {c}"))),
        None => default_crossover_ceiling(config, q_low)?,
    };
    let diff = |lambda_p: f64| -> Result<f64> {
        Ok(weighted_at_ratio(config, q_low, ratio, lambda_p)?
            - weighted_at_ratio(config, q_high, ratio, lambda_p)?)
    };

    let step = ceiling / CROSSOVER_GRID as f64;
    let mut found = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 1..=CROSSOVER_GRID {
        let x = step * i as f64;
        let d = diff(x)?;
        if d == 0.0 {
            continue;
        }
        if let Some((px, pd)) = prev {
            if pd.signum() != d.signum() {
                found.push(refine_root(&diff, px, pd, x)?);
            }
        }
        prev = Some((x, d));
    }
    Ok(found)
}

fn refine_root(diff: &impl Fn(f64) -> Result<f64>, mut lo: f64, lo_val: f64, mut hi: f64) -> Result<f64> {
    let lo_sign = lo_val.signum();
    while hi - lo > CROSSOVER_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        let d = diff(mid)?;
        if d == 0.0 {
            return Ok(mid);
        }
        if d.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// First push rate where `q_low` overtakes `q_high` (or vice versa), if
/// any, in `(0, ceiling]`. See [`crossover_points`].
pub fn crossover_lambda_p(
    config: &FrameConfig,
    q_low: u32,
    q_high: u32,
    ratio: f64,
    ceiling: Option<f64>,
) -> Result<Option<f64>> {
    Ok(crossover_points(config, q_low, q_high, ratio, ceiling)?.first().copied())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: FrameConfig = FrameConfig::DEFAULT;

    #[test]
    fn optimal_q_reference_loads() {
        for (lq, q_star) in [(250.0, 10), (500.0, 14), (750.0, 15)] {
            let r = optimal_q(&CFG, &TrafficLoad::new(lq, 500.0).unwrap(), None).unwrap();
            assert_eq!(r.q_star, q_star, "lambda_q = {lq}");
            assert_eq!(r.per_q_table.len(), 20);
        }
    }

    #[test]
    fn pure_push_prefers_no_pull() {
        let r = optimal_q(&CFG, &TrafficLoad::new(0.0, 300.0).unwrap(), None).unwrap();
        assert_eq!(r.q_star, 0);
    }

    #[test]
    fn ties_go_to_smallest_q() {
        // no traffic: q = 0 scores 1/2 (B(0, E) = 1), every q >= 1 exactly 1
        let r = optimal_q(&CFG, &TrafficLoad::new(0.0, 0.0).unwrap(), None).unwrap();
        assert_eq!(r.per_q_table[0].p_s_weighted, 0.5);
        assert_eq!(r.q_star, 1);
        assert_eq!(r.p_s_at_star, 1.0);
    }

    #[test]
    fn max_lambda_q_quadratic_root() {
        // B(2, E) = 0.2 reduces to 2E^2 - E - 1 = 0, so E = 1
        let lq = max_lambda_q(&CFG, 2, 0.8).unwrap();
        assert!((lq * CFG.frame_duration() - 1.0).abs() < 1e-8, "{lq}");
        assert!((lq - 39.6).abs() < 0.5);
    }

    #[test]
    fn max_lambda_q_errors() {
        assert!(max_lambda_q(&CFG, 0, 0.8).unwrap_err().is_infeasible());
        assert!(max_lambda_q(&CFG, 2, 1.0).is_err());
        assert!(max_lambda_q(&CFG, 2, 0.0).is_err());
        assert!(max_lambda_q(&CFG, 20, 0.5).unwrap_err().is_infeasible());
    }

    #[test]
    fn max_lambda_p_worked_example() {
        let lp2 = max_lambda_p(&CFG, 2, 0.8).unwrap();
        let lp3 = max_lambda_p(&CFG, 3, 0.8).unwrap();
        assert!((lp2 - 835.0).abs() < 2.0, "{lp2}");
        assert!((lp3 - 791.0).abs() < 2.0, "{lp3}");
        let near_one: Vec<f64> = [0.99, 0.9999, 1.0 - 1e-8]
            .iter()
            .map(|&p| max_lambda_p(&CFG, 2, p).unwrap())
            .collect();
        assert!(near_one[0] > near_one[1] && near_one[1] > near_one[2]);
        assert!(near_one[2] < 0.1, "{near_one:?}");
        assert!(max_lambda_p(&CFG, 20, 0.5).is_err());
    }

    #[test]
    fn solver_postcondition() {
        let t = CFG.frame_duration();
        for q in 1..=CFG.q_max() {
            for &p_th in &[0.05, 0.5, 0.8, 0.99] {
                let lq = max_lambda_q(&CFG, q, p_th).unwrap();
                let got = p_s_query(q, PoissonMean::new(lq * t).unwrap());
                assert!((got - p_th).abs() < 1e-8, "q={q} p_th={p_th}: {got}");
                let k_a = CFG.split_for_q(q).unwrap().k_a;
                let lp = max_lambda_p(&CFG, q, p_th).unwrap();
                let got = p_s_push(k_a, PoissonMean::new(lp * t).unwrap()).unwrap();
                assert!((got - p_th).abs() < 1e-8, "q={q} p_th={p_th}: {got}");
            }
        }
    }

    #[test]
    fn guideline_rows() {
        let rows = guidelines(&CFG, 0.8).unwrap();
        assert_eq!(rows.len(), 19);
        let r2 = rows.iter().find(|r| r.q == 2).unwrap();
        assert!((r2.throughput_push - 660.0).abs() < 2.0);
        let r3 = rows.iter().find(|r| r.q == 3).unwrap();
        assert!((r3.throughput_push - 625.0).abs() < 2.0);
        for w in rows.windows(2) {
            assert!(w[1].lambda_q_max > w[0].lambda_q_max);
            assert!(w[1].lambda_p_max < w[0].lambda_p_max);
        }
        assert!(guidelines(&CFG, 1.5).is_err());
    }

    #[test]
    fn crossover_q1_q10() {
        let x = crossover_lambda_p(&CFG, 1, 10, 0.5, None).unwrap().expect("crossover");
        let at = |q, lp: f64| weighted_at_ratio(&CFG, q, 0.5, lp).unwrap();
        assert!(at(10, 0.9 * x) > at(1, 0.9 * x));
        assert!(at(1, 1.1 * x) > at(10, 1.1 * x));
    }

    #[test]
    fn no_crossover_without_queries() {
        assert_eq!(crossover_lambda_p(&CFG, 0, 10, 0.0, None).unwrap(), None);
        assert_eq!(crossover_lambda_p(&CFG, 1, 10, 0.0, None).unwrap(), None);
    }

    #[test]
    fn crossover_argument_checks() {
        assert!(crossover_points(&CFG, 10, 1, 0.5, None).is_err());
        assert!(crossover_points(&CFG, 1, 20, 0.5, None).is_err());
        assert!(crossover_points(&CFG, 1, 10, -1.0, None).is_err());
        assert!(crossover_points(&CFG, 1, 10, 0.5, Some(0.0)).is_err());
    }
}
