//! `optimize`: one campaign from a config, with checkpoints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cemrm_core::campaign::{Campaign, CampaignResult, CampaignState, Mode};
use cemrm_core::design_space::{self, DesignVector};
use serde::{Deserialize, Serialize};

use crate::bundle::write_text;
use crate::config::{read_json, EvaluatorConfig, RunConfig};
use crate::{json_text, runlog};

pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const FINAL_FILE: &str = "final_design.json";

#[derive(Debug, Clone, Default)]
pub struct OptimizeOptions {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub iterations: Option<u64>,
    pub resume: Option<PathBuf>,
    /// Stop (after checkpointing) once this many iterations are done.
    pub stop_after: Option<u64>,
    /// Checkpoint every this many iterations; 0 only at the end.
    pub checkpoint_every: u64,
    /// Fill the `wall_s` column. Off by default so that logs are
    /// reproducible byte for byte.
    pub wall_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalDesign {
    pub schema_version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub iterations: u64,
    pub env_interactions: u64,
    /// `mu` after the last update, in normalized units.
    pub final_action: Vec<f64>,
    /// `s0 + mu`, for surrogate campaigns.
    pub final_design: Option<DesignVector>,
    pub best_action: Option<Vec<f64>>,
    pub best_design: Option<DesignVector>,
    pub best_reward: Option<f64>,
    /// Ground-truth mean over the final elites.
    pub final_elite_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    /// `None` when stopped early.
    pub result: Option<FinalDesign>,
    pub completed: u64,
}

/// Applies command-line overrides to a loaded config.
pub fn apply_overrides(cfg: &mut RunConfig, opts: &OptimizeOptions) -> Result<()> {
    if let Some(s) = opts.seed {
        cfg.campaign.seed = s;
    }
    if let Some(m) = opts.mode {
        cfg.campaign.mode = m;
    }
    if let Some(j) = opts.iterations {
        cfg.campaign.iterations = j;
    }
    cfg.check()
}

fn load_checkpoint(path: &Path) -> Result<CampaignState> {
    read_json(path).with_context(|| format!("cannot resume from {}", path.display()))
}

pub fn save_checkpoint(path: &Path, state: &CampaignState) -> Result<()> {
    write_text(path, &json_text(state))
}

pub fn optimize(config_path: &Path, out: &Path, opts: &OptimizeOptions) -> Result<OptimizeOutcome> {
    let mut cfg = RunConfig::load(config_path)?;
    apply_overrides(&mut cfg, opts)?;
    let evaluator = cfg.evaluator()?;

    let mut campaign = match &opts.resume {
        Some(p) => {
            let state = load_checkpoint(p)?;
            if state.config != cfg.campaign {
                bail!("checkpoint {} was written with a different campaign config", p.display());
            }
            Campaign::resume(state)?
        }
        None => Campaign::new(cfg.campaign.clone(), evaluator.dimension())?,
    };
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let checkpoint = out.join(CHECKPOINT_FILE);

    let start = Instant::now();
    while !campaign.is_done() && opts.stop_after.map_or(true, |s| campaign.iteration() < s) {
        campaign.step(evaluator.as_ref())?;
        if opts.wall_time {
            campaign.set_wall_time(start.elapsed().as_secs_f64());
        }
        if opts.checkpoint_every > 0 && campaign.iteration() % opts.checkpoint_every == 0 {
            save_checkpoint(&checkpoint, campaign.state())?;
        }
    }
    save_checkpoint(&checkpoint, campaign.state())?;
    runlog::write(&out.join(LOG_FILE), &campaign.state().log)?;
    let completed = campaign.iteration();
    if !campaign.is_done() {
        return Ok(OptimizeOutcome { result: None, completed });
    }

    let r = campaign.finish(evaluator.as_ref())?;
    let fd = final_design(&cfg, &r)?;
    write_text(&out.join(FINAL_FILE), &json_text(&fd))?;
    Ok(OptimizeOutcome { result: Some(fd), completed })
}

fn final_design(cfg: &RunConfig, r: &CampaignResult) -> Result<FinalDesign> {
    let decode = |a: &[f64]| -> Result<Option<DesignVector>> {
        match &cfg.evaluator {
            EvaluatorConfig::Surrogate(s) => Ok(Some(design_space::decode_action(&s.base()?, a)?)),
            EvaluatorConfig::Benchmark(_) => Ok(None),
        }
    };
    let last = r.log.last();
    Ok(FinalDesign {
        schema_version: crate::config::SCHEMA_VERSION,
        mode: cfg.campaign.mode,
        seed: cfg.campaign.seed,
        iterations: r.log.len() as u64,
        env_interactions: last.map_or(0, |l| l.env_interactions),
        final_design: decode(&r.final_action)?,
        final_action: r.final_action.clone(),
        best_design: match &r.best_action {
            Some(a) => decode(a)?,
            None => None,
        },
        best_action: r.best_action.clone(),
        best_reward: r.best_reward,
        final_elite_mean: r.final_elite_audit.or_else(|| last.and_then(|l| l.elite_mean)),
    })
}
