//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs under `cargo test` with its own main.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use pushpull_core::math::{erlang_b, PoissonMean};
use pushpull_core::metrics::{metrics, p_s_push, p_s_push_conditional, p_s_query, throughput_push, TrafficLoad};
use pushpull_core::optimize::{crossover_points, default_crossover_ceiling, optimal_q};
use pushpull_core::sim::{aloha_round, load_grid, replication_rng, simulate, validate_grid, SimConfig};
use pushpull_core::FrameConfig;
use serde_json::Value;

const CFG: FrameConfig = FrameConfig::DEFAULT;
const PROPERTY_CASES: u32 = 1000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn mean(v: f64) -> PoissonMean {
    PoissonMean::new(v).unwrap()
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn pushpull_json(args: &[&str]) -> Result<Value, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pushpull"))
        .args(args)
        .env_remove("PUSHPULL_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pushpull {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn optimal_q_examples() -> Outcome {
    let start = Instant::now();
    let mut detail = Vec::new();
    for (lq, q_want, p_want) in [(250, 10, 0.844_06), (500, 14, 0.770_41), (750, 15, 0.670_82)] {
        let v = pushpull_json(&["optimize", "--lambda-q", &lq.to_string(), "--lambda-p", "500"])?;
        let q = v["q_star"].as_u64().ok_or("missing q_star")?;
        let p = v["p_s_at_star"].as_f64().ok_or("missing p_s_at_star")?;
        check(q == q_want, || format!("lambda_q={lq}: q*={q}, want {q_want}"))?;
        check((p - p_want).abs() <= 1e-4, || format!("lambda_q={lq}: P_s={p}, want {p_want}"))?;
        detail.push(format!("q*={q} P_s={p:.6}"));
    }
    within_time(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{} in {:?}", detail.join(", "), start.elapsed()))
}

fn guideline_rows() -> Outcome {
    let start = Instant::now();
    let v = pushpull_json(&["guidelines", "--p-th", "0.8"])?;
    let elapsed = start.elapsed();
    let rows = v["rows"].as_array().ok_or("missing rows")?;
    let row = |q: u64| {
        rows.iter()
            .find(|r| r["q"].as_u64() == Some(q))
            .ok_or(format!("no row for q={q}"))
    };
    let field = |r: &Value, k: &str| r[k].as_f64().ok_or(format!("missing {k}"));
    let r2 = row(2)?;
    let r3 = row(3)?;
    let (lq2, lp2, s2) = (field(r2, "lambda_q_max")?, field(r2, "lambda_p_max")?, field(r2, "throughput_push")?);
    let (lp3, s3) = (field(r3, "lambda_p_max")?, field(r3, "throughput_push")?);
    check((lq2 - 39.6).abs() <= 0.5, || format!("q=2 lambda_q={lq2}"))?;
    check((lp2 - 835.0).abs() <= 2.0, || format!("q=2 lambda_p={lp2}"))?;
    check((s2 - 660.0).abs() <= 2.0, || format!("q=2 S={s2}"))?;
    check((lp3 - 791.0).abs() <= 2.0, || format!("q=3 lambda_p={lp3}"))?;
    check((s3 - 625.0).abs() <= 2.0, || format!("q=3 S={s3}"))?;
    within_time(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "q=2: {lq2:.2}/{lp2:.1}/{s2:.1}, q=3: {lp3:.1}/{s3:.1} in {elapsed:?}"
    ))
}

fn simulation_grid() -> Outcome {
    let loads = load_grid(&[10.0, 100.0, 400.0], &[100.0, 500.0, 1500.0]).map_err(|e| e.to_string())?;
    let sim = SimConfig {
        frames: 100_000,
        ..SimConfig::default()
    };
    // timed on one core
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let points = pool
        .install(|| validate_grid(&CFG, &[2, 10, 19], &loads, &sim))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(points.len() == 27, || format!("{} points", points.len()))?;
    let mut worst_push: f64 = 0.0;
    for p in &points {
        let hw = p.empirical.half_width_95;
        let at = format!("q={} lambda_q={} lambda_p={}", p.q, p.load.lambda_q, p.load.lambda_p);
        check(p.deviation.p_s_push.abs() <= 4.0 * hw.p_s_push, || {
            format!("{at}: push deviation {} vs half-width {}", p.deviation.p_s_push, hw.p_s_push)
        })?;
        check(p.deviation.p_s_query >= -4.0 * hw.p_s_query, || {
            format!("{at}: query {} below analytic beyond 4 half-widths {}", p.deviation.p_s_query, hw.p_s_query)
        })?;
        if p.load.lambda_q == 10.0 {
            check(p.empirical.p_s_query_hat >= p.analytic.p_s_query, || {
                format!("{at}: empirical query {} < analytic {}", p.empirical.p_s_query_hat, p.analytic.p_s_query)
            })?;
        }
        worst_push = worst_push.max(p.deviation.p_s_push.abs() / hw.p_s_push);
    }
    within_time(elapsed, Duration::from_secs(60))?;
    Ok(format!("27 points, worst push deviation {worst_push:.2} half-widths, {elapsed:?} single-threaded"))
}

fn erlang_b_direct(m: u32, e: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=m {
        term *= e / i as f64;
        sum += term;
    }
    term / sum
}

fn poisson_weights(mu: f64) -> Vec<f64> {
    let k_max = (mu + 20.0 * mu.sqrt() + 60.0).ceil() as usize;
    let mut w = vec![(-mu).exp()];
    for k in 1..=k_max {
        w.push(w[k - 1] * mu / k as f64);
    }
    w
}

fn oracle_equivalence() -> Outcome {
    let t_frame = CFG.frame_duration();
    let mut points = 0;
    let mut worst: f64 = 0.0;
    for k_a in [1u32, 2, 5, 17, 50] {
        for mu in [0.0, 0.5, 2.0, 6.3125, 12.625, 21.086, 30.0, 45.0, 60.0, 80.0] {
            let w = poisson_weights(mu);
            let cond: Vec<f64> = (0..w.len())
                .map(|n| p_s_push_conditional(k_a, n as u64).unwrap())
                .collect();
            let series_p: f64 = w.iter().zip(&cond).map(|(w, c)| w * c).sum();
            let series_s: f64 = w.iter().zip(&cond).enumerate().map(|(n, (w, c))| n as f64 * w * c).sum();
            let p = p_s_push(k_a, mean(mu)).map_err(|e| e.to_string())?;
            let s = throughput_push(k_a, mean(mu), t_frame).map_err(|e| e.to_string())? * t_frame;
            worst = worst.max((p - series_p).abs()).max((s - series_s).abs());
            points += 1;
        }
    }
    check(points == 50, || format!("{points} points"))?;
    check(worst <= 1e-10, || format!("push closed form off by {worst:e}"))?;
    let mut worst_b: f64 = 0.0;
    for m in 0..=25u32 {
        for i in 0..=120 {
            let e = i as f64 * 0.5;
            worst_b = worst_b.max((erlang_b(m, mean(e)) - erlang_b_direct(m, e)).abs());
        }
    }
    check(worst_b <= 1e-12, || format!("Erlang-B off by {worst_b:e}"))?;
    Ok(format!("push max error {worst:.1e} on 50 points, Erlang-B max error {worst_b:.1e}"))
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new(config);
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn property_invariants() -> Outcome {
    run_property("p_s_query nonincreasing in load", (0u32..=19, 0f64..50.0, 0f64..5.0), |(q, n, dn)| {
        prop_assert!(p_s_query(q, mean(n + dn)) <= p_s_query(q, mean(n)));
        Ok(())
    })?;
    run_property("p_s_push nonincreasing in load", (1u32..100, 0f64..60.0, 0f64..5.0), |(k, n, dn)| {
        prop_assert!(p_s_push(k, mean(n + dn)).unwrap() <= p_s_push(k, mean(n)).unwrap() + 1e-15);
        Ok(())
    })?;
    run_property("weighted success is a convex combination", (0u32..=19, 0f64..2000.0, 0f64..2000.0), |(q, lq, lp)| {
        let r = metrics(&CFG, &TrafficLoad::new(lq, lp).unwrap(), q, None).unwrap();
        let (lo, hi) = (r.p_s_query.min(r.p_s_push), r.p_s_query.max(r.p_s_push));
        prop_assert!(lo - 1e-12 <= r.p_s_weighted && r.p_s_weighted <= hi + 1e-12);
        Ok(())
    })?;
    run_property("optimum is the table maximum", (0f64..1500.0, 0f64..1500.0), |(lq, lp)| {
        let opt = optimal_q(&CFG, &TrafficLoad::new(lq, lp).unwrap(), None).unwrap();
        prop_assert!(opt.per_q_table.iter().all(|r| r.p_s_weighted <= opt.p_s_at_star));
        Ok(())
    })?;
    run_property("ALOHA round conserves packets", (1u32..100, 0u64..300, any::<u64>()), |(k_a, n_p, seed)| {
        let mut rng = replication_rng(seed, 0);
        let mut slots = Vec::new();
        let ok = aloha_round(k_a, n_p, &mut rng, &mut slots);
        prop_assert!(ok <= n_p.min(k_a as u64));
        prop_assert_eq!(slots.iter().map(|&c| c as u64).sum::<u64>(), n_p);
        prop_assert_eq!(slots.iter().filter(|&&c| c == 1).count() as u64, ok);
        Ok(())
    })?;
    run_property(
        "simulation counters conserve",
        (0u32..=19, 0f64..800.0, 0f64..2000.0, any::<u64>()),
        |(q, lq, lp, seed)| {
            let sim = SimConfig { frames: 20, seed, replications: 1, warmup_frames: 1 };
            let r = simulate(&CFG, &TrafficLoad::new(lq, lp).unwrap(), q, &sim).unwrap();
            prop_assert_eq!(r.queries_served + r.queries_discarded, r.queries_total);
            prop_assert!(r.queries_served <= q as u64 * r.frames_observed);
            prop_assert!(r.packets_success <= r.packets_total);
            Ok(())
        },
    )?;
    Ok(format!("6 invariants x {PROPERTY_CASES} cases"))
}

fn single_crossover() -> Outcome {
    let ratio = 0.5;
    let ceiling = default_crossover_ceiling(&CFG, 1).map_err(|e| e.to_string())?;
    let found = crossover_points(&CFG, 1, 10, ratio, None).map_err(|e| e.to_string())?;
    check(found.len() == 1, || format!("{} crossings: {found:?}", found.len()))?;
    let x = found[0];
    let weighted = |q: u32, lp: f64| {
        metrics(&CFG, &TrafficLoad::new(ratio * lp, lp).unwrap(), q, None)
            .unwrap()
            .p_s_weighted
    };
    for i in 1..=200 {
        let below = x * i as f64 / 201.0;
        check(weighted(10, below) > weighted(1, below), || format!("q=1 ahead at lambda_p={below}"))?;
        let above = x + (ceiling - x) * i as f64 / 200.0;
        check(weighted(1, above) > weighted(10, above), || format!("q=10 ahead at lambda_p={above}"))?;
    }
    Ok(format!("lambda_p' = {x:.2} in (0, {ceiling:.0}]"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 6] = [
        ("optimal q at the three reference loads", optimal_q_examples),
        ("design guidelines at P_th = 0.8", guideline_rows),
        ("simulation agrees with the analytic model", simulation_grid),
        ("closed forms match independent oracles", oracle_equivalence),
        ("property invariants", property_invariants),
        ("single crossover between q = 1 and q = 10", single_crossover),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
