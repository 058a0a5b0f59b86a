//! `evaluate`: disturbance-test success rates of one design.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use cemrm_core::campaign::{ObjectSuccess, SurrogateEvaluator};
use cemrm_core::design_space::DesignVector;
use cemrm_core::objective::RewardWeights;
use cemrm_core::sim::{DensityClass, SimConfig, TendonTargets};
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::config::parse_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// An object id, or `class:light` / `class:heavy`.
    pub name: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub objects: Vec<ReportRow>,
    pub classes: Vec<ReportRow>,
}

/// Reads either a bare design or the `final_design` of an optimize result.
pub fn read_design(path: &Path) -> Result<DesignVector> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read design {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("invalid design file {}", path.display()))?;
    let inner = match value.get("final_design") {
        Some(d) if d.is_null() => anyhow::bail!("invalid design file {}: `final_design` is empty", path.display()),
        Some(d) => d.to_string(),
        None => text,
    };
    parse_json(&inner).with_context(|| format!("invalid design file {}", path.display()))
}

fn row(name: String, trials: usize, successes: usize) -> ReportRow {
    let rate = if trials == 0 { 0.0 } else { successes as f64 / trials as f64 };
    ReportRow { name, trials, successes, rate }
}

/// Strips all actuation from every record.
pub fn zero_actuation(bundle: &mut Bundle) {
    for r in bundle.records.iter_mut().flatten() {
        r.prismatic_displacement = 0.0;
        r.tendon_targets = TendonTargets { thumb: 0.0, index: 0.0, middle: 0.0 };
    }
}

pub fn evaluate(design: &DesignVector, bundle: Bundle, sim: SimConfig, trials: usize, seed: u64) -> Result<SuccessReport> {
    let weights = RewardWeights::collision_penalized(bundle.objects.len());
    let ev = SurrogateEvaluator::new(design.clone(), bundle.objects, bundle.records, sim, weights)?;
    Ok(report(&ev.success_report(design, trials, seed)?))
}

pub fn report(per_object: &[ObjectSuccess]) -> SuccessReport {
    let objects = per_object.iter().map(|o| row(o.object_id.clone(), o.trials, o.successes)).collect();
    let classes = [DensityClass::Light, DensityClass::Heavy]
        .into_iter()
        .map(|c| {
            let of: Vec<&ObjectSuccess> = per_object.iter().filter(|o| o.class == c).collect();
            let name = match c {
                DensityClass::Light => "class:light",
                DensityClass::Heavy => "class:heavy",
            };
            row(name.into(), of.iter().map(|o| o.trials).sum(), of.iter().map(|o| o.successes).sum())
        })
        .collect();
    SuccessReport { objects, classes }
}

impl SuccessReport {
    pub fn class(&self, name: &str) -> Option<&ReportRow> {
        self.classes.iter().find(|r| r.name == format!("class:{name}"))
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<20} {:>9} {:>7}", "object", "success", "rate");
        for r in self.objects.iter().chain(&self.classes) {
            let _ = writeln!(s, "{:<20} {:>5}/{:<3} {:>6.0}%", r.name, r.successes, r.trials, 100.0 * r.rate);
        }
        s
    }
}
