//! CSV run log.

use std::path::Path;

use anyhow::{Context, Result};
use cemrm_core::campaign::IterationLog;

pub const HEADER: [&str; 8] = ["iter", "env_interactions", "elite_mean", "elite_max", "rm_loss", "rho", "sigma", "wall_s"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Absent values are empty cells; floats use the shortest exact decimal.
pub fn to_csv(log: &[IterationLog]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in log {
        w.write_record([
            r.iter.to_string(),
            r.env_interactions.to_string(),
            opt(r.elite_mean),
            opt(r.elite_max),
            opt(r.rm_loss),
            r.rho.to_string(),
            r.sigma.to_string(),
            opt(r.wall_s),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write(path: &Path, log: &[IterationLog]) -> Result<()> {
    std::fs::write(path, to_csv(log)?).with_context(|| format!("cannot write {}", path.display()))
}

/// Parses a log written by [`write`].
pub fn read(path: &Path) -> Result<Vec<IterationLog>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let num = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { Ok(Some(s.parse()?)) } };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(IterationLog {
            iter: rec[0].parse()?,
            env_interactions: rec[1].parse()?,
            elite_mean: num(&rec[2])?,
            elite_max: num(&rec[3])?,
            rm_loss: num(&rec[4])?,
            rho: rec[5].parse()?,
            sigma: rec[6].parse()?,
            wall_s: num(&rec[7])?,
        });
    }
    Ok(out)
}
