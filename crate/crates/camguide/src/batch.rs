//! Seeded batch evaluation.

use std::io::Write;
use std::time::Instant;

use camguide_core::planner::SessionStatus;
use camguide_core::simulator::{run_online, scenario, OfflineModel, PipelineConfig, Scenario, SceneError, SimError};
use serde::{Deserialize, Serialize};

use crate::formats::{status_str, NoiseJson};

/// Batch input. Run `i` uses seed `seed + i` for the scene, the noise and
/// the online phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    /// `"default"`, `"large_arc"` or `"gap"`.
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseJson,
}

impl BatchSpec {
    pub fn named(name: &str) -> Option<Self> {
        parse_scenario(name)?;
        Some(Self { scenario: name.into(), seed: 0, noise: NoiseJson::default() })
    }
}

pub fn parse_scenario(name: &str) -> Option<Scenario> {
    match name {
        "default" => Some(Scenario::Default),
        "large_arc" | "large-arc" => Some(Scenario::LargeArc),
        "gap" => Some(Scenario::Gap),
        _ => None,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("invalid noise model")]
    Noise,
    #[error("run {run}: {source}")]
    Scene { run: usize, source: SceneError },
    #[error("run {run}: {source}")]
    Sim { run: usize, source: SimError },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub run_id: usize,
    pub status: SessionStatus,
    pub steps: usize,
    pub final_err_px: f64,
    pub within_audit_bound: bool,
    pub offline_ms: f64,
    pub online_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub runs: usize,
    pub success_rate: f64,
    /// Over successful runs.
    pub mean_steps: f64,
    pub median_steps: f64,
    /// Over runs with a finite final error.
    pub mean_final_err_px: f64,
    pub mean_offline_ms: f64,
    pub mean_online_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn run_batch(spec: &BatchSpec, runs: usize) -> Result<Vec<RunRow>, BatchError> {
    let kind = parse_scenario(&spec.scenario).ok_or_else(|| BatchError::UnknownScenario(spec.scenario.clone()))?;
    let base = spec.noise.to_model().map_err(|_| BatchError::Noise)?;
    let cfg = PipelineConfig::default();
    (0..runs)
        .map(|run| {
            let seed = spec.seed.wrapping_add(run as u64);
            let sc = scenario(kind, seed).map_err(|source| BatchError::Scene { run, source })?;
            let noise = base.with_seed(seed);
            let t = Instant::now();
            let model = OfflineModel::build(&sc.scene, &noise, &cfg).map_err(|source| BatchError::Sim { run, source })?;
            let offline_ms = ms(t);
            let t = Instant::now();
            let r = run_online(&model, &sc.scene, sc.initial, sc.destination, &noise, &cfg, seed)
                .map_err(|source| BatchError::Sim { run, source })?;
            Ok(RunRow {
                run_id: run,
                status: r.status,
                steps: r.steps,
                final_err_px: r.oracle_final_error_px,
                within_audit_bound: r.within_audit_bound,
                offline_ms,
                online_ms: ms(t),
            })
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { f64::NAN } else { s / n as f64 }
}

pub fn summarize(rows: &[RunRow]) -> Summary {
    let ok: Vec<&RunRow> = rows.iter().filter(|r| r.status == SessionStatus::Success).collect();
    let mut steps: Vec<usize> = ok.iter().map(|r| r.steps).collect();
    steps.sort_unstable();
    let median_steps = match steps.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => steps[n / 2] as f64,
        n => (steps[n / 2 - 1] + steps[n / 2]) as f64 / 2.0,
    };
    Summary {
        runs: rows.len(),
        success_rate: ok.len() as f64 / rows.len().max(1) as f64,
        mean_steps: mean(ok.iter().map(|r| r.steps as f64)),
        median_steps,
        mean_final_err_px: mean(rows.iter().map(|r| r.final_err_px).filter(|e| e.is_finite())),
        mean_offline_ms: mean(rows.iter().map(|r| r.offline_ms)),
        mean_online_ms: mean(rows.iter().map(|r| r.online_ms)),
    }
}

impl Summary {
    pub fn line(&self) -> String {
        format!(
            "runs={} success_rate={:.3} mean_steps={:.2} median_steps={:.1} mean_final_err_px={:.2} mean_offline_ms={:.1} mean_online_ms={:.1}",
            self.runs,
            self.success_rate,
            self.mean_steps,
            self.median_steps,
            self.mean_final_err_px,
            self.mean_offline_ms,
            self.mean_online_ms
        )
    }
}

/// Header `run_id,status,steps,final_err_px,offline_ms,online_ms`; an
/// infinite error is written as `inf`.
pub fn write_csv<W: Write>(w: W, rows: &[RunRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["run_id", "status", "steps", "final_err_px", "offline_ms", "online_ms"])?;
    for r in rows {
        out.write_record([
            r.run_id.to_string(),
            status_str(r.status).to_string(),
            r.steps.to_string(),
            format!("{:.3}", r.final_err_px),
            format!("{:.3}", r.offline_ms),
            format!("{:.3}", r.online_ms),
        ])?;
    }
    out.flush()?;
    Ok(())
}
