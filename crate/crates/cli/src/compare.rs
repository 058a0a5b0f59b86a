//! `compare`: the four modes over a range of seeds.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use cemrm_core::campaign::{run_campaign, CampaignResult, Evaluator, IterationLog, Mode};
use cemrm_core::math;

use crate::config::RunConfig;

pub const MODES: [Mode; 4] = [Mode::PureCem, Mode::Hybrid, Mode::Rho1, Mode::Random];

/// Fraction of pure CEM's final elite mean that counts as reaching it.
pub const THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub mode: Mode,
    pub seed: u64,
    /// Normalized ground-truth mean over the final elites; `None` on abort.
    pub final_value: Option<f64>,
    /// Ground-truth interactions until the logged elite mean first reached
    /// the seed's threshold.
    pub env_to_threshold: Option<u64>,
    pub env_total: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSummary {
    pub mode: Mode,
    pub runs: usize,
    pub failures: usize,
    pub final_mean: Option<f64>,
    pub final_std: Option<f64>,
    /// Over the seeds where the threshold was reached.
    pub median_env_to_threshold: Option<f64>,
    pub reached: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<RunRow>,
    pub summaries: Vec<ModeSummary>,
}

/// First logged ground-truth elite mean at or above `threshold` (both
/// normalized).
pub fn env_to_threshold<E: Evaluator + ?Sized>(log: &[IterationLog], ev: &E, threshold: f64) -> Option<u64> {
    log.iter()
        .find(|l| l.elite_mean.is_some_and(|m| ev.normalize(m) >= threshold))
        .map(|l| l.env_interactions)
}

/// Normalized final value: the final-elite audit, else the last logged
/// ground-truth elite mean.
pub fn final_value<E: Evaluator + ?Sized>(r: &CampaignResult, ev: &E) -> Option<f64> {
    r.final_elite_audit.or_else(|| r.log.last().and_then(|l| l.elite_mean)).map(|v| ev.normalize(v))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

/// Runs every mode for `seeds` consecutive seeds starting at `first_seed`.
/// The threshold for a seed is [`THRESHOLD`] times pure CEM's last logged
/// elite mean on that seed. Aborted campaigns become rows with an error.
pub fn compare(cfg: &RunConfig, first_seed: u64, seeds: u64) -> Result<Comparison> {
    if seeds < 3 {
        bail!("compare needs at least 3 seeds, got {seeds}");
    }
    let ev = cfg.evaluator()?;
    let ev = ev.as_ref();
    let mut rows = Vec::new();
    for seed in first_seed..first_seed + seeds {
        let mut threshold = None;
        for mode in MODES {
            let c = cemrm_core::campaign::CampaignConfig { mode, seed, ..cfg.campaign.clone() };
            match run_campaign(c, ev) {
                Ok(r) => {
                    if mode == Mode::PureCem {
                        threshold = r.log.last().and_then(|l| l.elite_mean).map(|m| THRESHOLD * ev.normalize(m));
                    }
                    rows.push(RunRow {
                        mode,
                        seed,
                        final_value: final_value(&r, ev),
                        env_to_threshold: threshold.and_then(|t| env_to_threshold(&r.log, ev, t)),
                        env_total: r.log.last().map_or(0, |l| l.env_interactions),
                        error: None,
                    });
                }
                Err(e) => rows.push(RunRow {
                    mode,
                    seed,
                    final_value: None,
                    env_to_threshold: None,
                    env_total: 0,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    let summaries = MODES.iter().map(|&m| summarize(m, &rows)).collect();
    Ok(Comparison { rows, summaries })
}

fn summarize(mode: Mode, rows: &[RunRow]) -> ModeSummary {
    let mine: Vec<&RunRow> = rows.iter().filter(|r| r.mode == mode).collect();
    let finals: Vec<f64> = mine.iter().filter_map(|r| r.final_value).collect();
    let mut env: Vec<f64> = mine.iter().filter_map(|r| r.env_to_threshold.map(|e| e as f64)).collect();
    let reached = env.len();
    ModeSummary {
        mode,
        runs: mine.len(),
        failures: mine.iter().filter(|r| r.error.is_some()).count(),
        final_mean: (!finals.is_empty()).then(|| math::mean(&finals)),
        final_std: (!finals.is_empty()).then(|| math::std_dev(&finals)),
        median_env_to_threshold: median(&mut env),
        reached,
    }
}

impl Comparison {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["mode", "seed", "final", "env_to_95", "env_total", "status"])?;
        for r in &self.rows {
            w.write_record([
                r.mode.name().to_string(),
                r.seed.to_string(),
                r.final_value.map(|v| v.to_string()).unwrap_or_default(),
                r.env_to_threshold.map(|v| v.to_string()).unwrap_or_default(),
                r.env_total.to_string(),
                r.error.clone().map_or_else(|| "ok".into(), |e| format!("FAILED: {e}")),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    /// Fixed-width table, one line per mode.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>22} {:>16} {:>8}", "mode", "final (normalized)", "env to 95%", "reached");
        for m in &self.summaries {
            let fin = match (m.final_mean, m.final_std) {
                (Some(a), Some(b)) => format!("{a:.4} ± {b:.4}"),
                _ => "-".into(),
            };
            let env = m.median_env_to_threshold.map_or_else(|| "-".into(), |e| format!("{e:.0}"));
            let mut line = format!("{:<10} {:>22} {:>16} {:>5}/{}", m.mode.name(), fin, env, m.reached, m.runs);
            if m.failures > 0 {
                let _ = write!(line, "  [{} FAILED]", m.failures);
            }
            let _ = writeln!(s, "{line}");
        }
        s
    }
}
