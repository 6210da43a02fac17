use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use pushpull_core::optimize::{crossover_points, default_crossover_ceiling};
use pushpull_core::sim::{load_grid, ValidationSummary};
use pushpull_core::{
    guidelines, metrics, optimal_q, simulate, validate_grid, FrameConfig, SimConfig, TrafficLoad, Weights,
};
use serde_json::{json, Map, Value};

use crate::config::{FrameArgs, DEFAULT_SEED, SEED_ENV};
use crate::output::{emit, int, print_json, sig9, OutputArgs, RunManifest, Table};
use crate::{Cli, Command, LoadArgs, SimArgs};

/// Values forced by `replay` regardless of flags and environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub frame: Option<FrameConfig>,
}

impl Overrides {
    fn frame(&self, args: &FrameArgs) -> Result<FrameConfig> {
        match self.frame {
            Some(cfg) => Ok(cfg),
            None => args.resolve(),
        }
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = self.seed.or(flag) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().with_context(|| format!("parsing ${SEED_ENV}")),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }
}

/// Process exit code for an error: 3 for infeasible design points, 2 for
/// everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<pushpull_core::Error>() {
        Some(e) if e.is_infeasible() => 3,
        _ => 2,
    }
}

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn run(command: Command, args: &[String], ov: &Overrides) -> std::result::Result<u8, Failure> {
    dispatch(command, args, ov).map_err(|error| Failure {
        code: exit_code(&error),
        error,
    })
}

fn dispatch(command: Command, args: &[String], ov: &Overrides) -> Result<u8> {
    match command {
        Command::Analyze { frame, load, q } => analyze(ov.frame(&frame)?, &load, q, args, ov),
        Command::Optimize { frame, load, out } => optimize(ov.frame(&frame)?, &load, &out, args, ov),
        Command::Guidelines { frame, p_th, out } => guideline_table(ov.frame(&frame)?, &p_th, &out, args, ov),
        Command::Sweep {
            frame,
            q_list,
            ratio_list,
            lambda_p_range,
            crossovers,
            ceiling,
            out,
        } => sweep(
            ov.frame(&frame)?,
            &SweepArgs {
                q_list,
                ratio_list,
                lambda_p_range,
                crossovers,
                ceiling,
            },
            &out,
            args,
            ov,
        ),
        Command::Simulate { frame, load, q, sim } => simulate_point(ov.frame(&frame)?, &load, q, &sim, args, ov),
        Command::Validate {
            frame,
            q_list,
            lambda_q_list,
            lambda_p_list,
            sim,
            strict,
            out,
        } => validate(
            ov.frame(&frame)?,
            &q_list,
            &lambda_q_list,
            &lambda_p_list,
            &sim,
            strict,
            &out,
            args,
            ov,
        ),
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn load_and_weights(load: &LoadArgs) -> Result<(TrafficLoad, Option<Weights>)> {
    let traffic = TrafficLoad::new(load.lambda_q, load.lambda_p)?;
    let weights = load.w_q.map(Weights::from_query_weight).transpose()?;
    Ok((traffic, weights))
}

fn with_manifest(mut body: Map<String, Value>, manifest: &RunManifest) -> Result<Value> {
    body.insert("manifest".into(), serde_json::to_value(manifest)?);
    Ok(Value::Object(body))
}

fn object(value: impl serde::Serialize) -> Result<Map<String, Value>> {
    match serde_json::to_value(value)? {
        Value::Object(m) => Ok(m),
        other => Err(anyhow!("expected a JSON object, got {other}")),
    }
}

fn analyze(cfg: FrameConfig, load: &LoadArgs, q: u32, args: &[String], ov: &Overrides) -> Result<u8> {
    let (traffic, weights) = load_and_weights(load)?;
    let report = metrics(&cfg, &traffic, q, weights)?;
    let split = cfg.split_for_q(q)?;
    let manifest = RunManifest::new(
        "analyze",
        args,
        json!({"frame": cfg, "load": traffic, "q": q, "w_q": load.w_q}),
        ov.seed(None)?,
    );
    let mut body = object(report)?;
    body.insert("split".into(), serde_json::to_value(split)?);
    body.insert("frame_duration".into(), json!(cfg.frame_duration()));
    print_json(&with_manifest(body, &manifest)?)?;
    Ok(0)
}

fn optimize(cfg: FrameConfig, load: &LoadArgs, out: &OutputArgs, args: &[String], ov: &Overrides) -> Result<u8> {
    let (traffic, weights) = load_and_weights(load)?;
    let result = optimal_q(&cfg, &traffic, weights)?;
    let mut table = Table::new(&["q", "p_s_weighted", "p_s_query", "p_s_push", "k_a"]);
    for row in &result.per_q_table {
        table.push(vec![
            int(row.q),
            sig9(row.p_s_weighted),
            sig9(row.p_s_query),
            sig9(row.p_s_push),
            int(row.k_a),
        ]);
    }
    let manifest = RunManifest::new(
        "optimize",
        args,
        json!({"frame": cfg, "load": traffic, "w_q": load.w_q}),
        ov.seed(None)?,
    );
    let report = with_manifest(object(&result)?, &manifest)?;
    emit(out, &report, &manifest, &table)?;
    Ok(0)
}

fn guideline_table(cfg: FrameConfig, p_th: &[f64], out: &OutputArgs, args: &[String], ov: &Overrides) -> Result<u8> {
    let mut rows = Vec::new();
    for &p in p_th {
        rows.extend(guidelines(&cfg, p)?);
    }
    let mut table = Table::new(&[
        "p_th",
        "q",
        "lambda_q_max",
        "lambda_p_max",
        "n_served_mean",
        "throughput_push",
    ]);
    for r in &rows {
        table.push(vec![
            sig9(r.p_th),
            int(r.q),
            sig9(r.lambda_q_max),
            sig9(r.lambda_p_max),
            sig9(r.n_served_mean),
            sig9(r.throughput_push),
        ]);
    }
    let manifest = RunManifest::new("guidelines", args, json!({"frame": cfg, "p_th": p_th}), ov.seed(None)?);
    let mut body = Map::new();
    body.insert("rows".into(), serde_json::to_value(&rows)?);
    emit(out, &with_manifest(body, &manifest)?, &manifest, &table)?;
    Ok(0)
}

struct SweepArgs {
    q_list: Vec<u32>,
    ratio_list: Vec<f64>,
    lambda_p_range: String,
    crossovers: bool,
    ceiling: Option<f64>,
}

/// Parses `MIN:MAX:STEPS` into evenly spaced points, endpoints included.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [min, max, steps] = parts.as_slice() else {
        bail!("range must look like MIN:MAX:STEPS, got `{spec}`");
    };
    let min: f64 = min.trim().parse().with_context(|| format!("range minimum `{min}`"))?;
    let max: f64 = max.trim().parse().with_context(|| format!("range maximum `{max}`"))?;
    let steps: usize = steps.trim().parse().with_context(|| format!("range steps `{steps}`"))?;
    if steps == 0 || !(min.is_finite() && max.is_finite()) || min < 0.0 || min > max {
        bail!("empty or invalid range `{spec}`");
    }
    if steps == 1 || min == max {
        return Ok(vec![min]);
    }
    let step = (max - min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { max } else { min + step * i as f64 })
        .collect())
}

fn sweep(cfg: FrameConfig, s: &SweepArgs, out: &OutputArgs, args: &[String], ov: &Overrides) -> Result<u8> {
    let grid = parse_range(&s.lambda_p_range)?;
    if s.q_list.is_empty() || s.ratio_list.is_empty() {
        bail!("q-list and ratio-list must be nonempty");
    }
    let mut table = Table::new(&["q", "ratio", "lambda_p", "p_s_weighted"]);
    let mut rows = Vec::new();
    for &q in &s.q_list {
        for &ratio in &s.ratio_list {
            for &lambda_p in &grid {
                let load = TrafficLoad::new(ratio * lambda_p, lambda_p)?;
                let p = metrics(&cfg, &load, q, None)?.p_s_weighted;
                table.push(vec![int(q), sig9(ratio), sig9(lambda_p), sig9(p)]);
                rows.push(json!({"q": q, "ratio": ratio, "lambda_p": lambda_p, "p_s_weighted": p}));
            }
        }
    }
    let mut body = Map::new();
    body.insert("rows".into(), Value::Array(rows));
    if s.crossovers {
        let mut qs = s.q_list.clone();
        qs.sort_unstable();
        qs.dedup();
        let mut reports = Vec::new();
        for &ratio in &s.ratio_list {
            for (i, &q_low) in qs.iter().enumerate() {
                for &q_high in &qs[i + 1..] {
                    let ceiling = match s.ceiling {
                        Some(c) => c,
                        None => default_crossover_ceiling(&cfg, q_low)?,
                    };
                    let points = crossover_points(&cfg, q_low, q_high, ratio, Some(ceiling))?;
                    reports.push(json!({
                        "ratio": ratio,
                        "q_low": q_low,
                        "q_high": q_high,
                        "ceiling": ceiling,
                        "lambda_p_prime": points.first(),
                        "all_crossings": points,
                    }));
                }
            }
        }
        body.insert("crossovers".into(), Value::Array(reports));
    }
    let manifest = RunManifest::new(
        "sweep",
        args,
        json!({
            "frame": cfg,
            "q_list": s.q_list,
            "ratio_list": s.ratio_list,
            "lambda_p": grid,
            "crossovers": s.crossovers,
            "ceiling": s.ceiling,
        }),
        ov.seed(None)?,
    );
    emit(out, &with_manifest(body, &manifest)?, &manifest, &table)?;
    Ok(0)
}

fn sim_config(sim: &SimArgs, ov: &Overrides) -> Result<SimConfig> {
    Ok(SimConfig {
        frames: sim.frames,
        seed: ov.seed(sim.seed)?,
        replications: sim.replications,
        warmup_frames: sim.warmup_frames,
    })
}

fn simulate_point(
    cfg: FrameConfig,
    load: &LoadArgs,
    q: u32,
    sim: &SimArgs,
    args: &[String],
    ov: &Overrides,
) -> Result<u8> {
    let (traffic, weights) = load_and_weights(load)?;
    let sim_cfg = sim_config(sim, ov)?;
    let result = simulate(&cfg, &traffic, q, &sim_cfg)?;
    let analytic = metrics(&cfg, &traffic, q, weights)?;
    let manifest = RunManifest::new(
        "simulate",
        args,
        json!({"frame": cfg, "load": traffic, "q": q, "sim": sim_cfg}),
        sim_cfg.seed,
    );
    let mut body = object(&result)?;
    body.insert("analytic".into(), serde_json::to_value(analytic)?);
    print_json(&with_manifest(body, &manifest)?)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn validate(
    cfg: FrameConfig,
    q_list: &[u32],
    lambda_q: &[f64],
    lambda_p: &[f64],
    sim: &SimArgs,
    strict: bool,
    out: &OutputArgs,
    args: &[String],
    ov: &Overrides,
) -> Result<u8> {
    let sim_cfg = sim_config(sim, ov)?;
    let loads = load_grid(lambda_q, lambda_p)?;
    let points = validate_grid(&cfg, q_list, &loads, &sim_cfg)?;
    let summary = ValidationSummary::from_points(&points);

    let mut table = Table::new(&[
        "q",
        "lambda_q",
        "lambda_p",
        "p_s_query_analytic",
        "p_s_query_sim",
        "p_s_query_hw95",
        "p_s_push_analytic",
        "p_s_push_sim",
        "p_s_push_hw95",
        "throughput_push_analytic",
        "throughput_push_sim",
        "deviation_query",
        "deviation_push",
        "flag",
    ]);
    for p in &points {
        let hw = p.empirical.half_width_95;
        table.push(vec![
            int(p.q),
            sig9(p.load.lambda_q),
            sig9(p.load.lambda_p),
            sig9(p.analytic.p_s_query),
            sig9(p.empirical.p_s_query_hat),
            sig9(hw.p_s_query),
            sig9(p.analytic.p_s_push),
            sig9(p.empirical.p_s_push_hat),
            sig9(hw.p_s_push),
            sig9(p.analytic.throughput_push),
            sig9(p.empirical.throughput_push_hat),
            sig9(p.deviation.p_s_query),
            sig9(p.deviation.p_s_push),
            int(u8::from(p.flagged())),
        ]);
    }
    let manifest = RunManifest::new(
        "validate",
        args,
        json!({
            "frame": cfg,
            "q_list": q_list,
            "lambda_q_list": lambda_q,
            "lambda_p_list": lambda_p,
            "sim": sim_cfg,
            "strict": strict,
        }),
        sim_cfg.seed,
    );
    let mut body = object(summary)?;
    body.insert("points_detail".into(), serde_json::to_value(&points)?);
    emit(out, &with_manifest(body, &manifest)?, &manifest, &table)?;
    Ok(if strict && summary.flags > 0 { 4 } else { 0 })
}

fn replay(path: &Path) -> Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let manifest_value = value.get("manifest").cloned().unwrap_or(value);
    let manifest: RunManifest = serde_json::from_value(manifest_value).context("not a run manifest")?;
    let frame: FrameConfig = serde_json::from_value(
        manifest
            .config_echo
            .get("frame")
            .cloned()
            .ok_or_else(|| anyhow!("manifest has no frame config"))?,
    )?;
    let argv = std::iter::once("pushpull".to_string()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| anyhow!("manifest arguments: {e}"))?;
    if matches!(cli.command, Command::Replay { .. }) {
        bail!("refusing to replay a replay");
    }
    let ov = Overrides {
        seed: Some(manifest.seed),
        frame: Some(frame),
    };
    dispatch(cli.command, &manifest.args, &ov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:100:3").unwrap(), vec![0.0, 50.0, 100.0]);
        assert_eq!(parse_range("5:5:10").unwrap(), vec![5.0]);
        assert_eq!(parse_range("1:9:1").unwrap(), vec![1.0]);
        assert!(parse_range("1:9:0").is_err());
        assert!(parse_range("9:1:4").is_err());
        assert!(parse_range("1:9").is_err());
        assert!(parse_range("a:9:3").is_err());
    }

    #[test]
    fn infeasible_maps_to_three() {
        let err = anyhow::Error::from(FrameConfig::DEFAULT.split_for_q(20).unwrap_err());
        assert_eq!(exit_code(&err), 3);
        let err = anyhow::Error::from(pushpull_core::Error::Domain("x".into())).context("outer");
        assert_eq!(exit_code(&err), 2);
    }
}
