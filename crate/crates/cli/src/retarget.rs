//! `retarget`: JSON-lines hand streams to teleoperation records.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cemrm_core::retarget::{compile_record, Calibration, HandFrame};
use cemrm_core::sim::{self, TeleopRecord};

use crate::bundle::{write_text, Manifest, RecordEntry, MANIFEST};
use crate::config::parse_json;
use crate::json_text;

#[derive(Debug, Clone, PartialEq)]
pub struct RetargetOutcome {
    pub records: Vec<(PathBuf, TeleopRecord)>,
    pub warnings: Vec<String>,
}

/// Parses one frame per non-blank line; errors cite the 1-based line.
pub fn parse_stream(text: &str) -> Result<Vec<HandFrame>> {
    let mut frames: Vec<HandFrame> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: HandFrame = parse_json(line).with_context(|| format!("line {n}"))?;
        f.check().map_err(|e| anyhow!("line {n}: {e}"))?;
        if let Some(prev) = frames.last() {
            if !(f.timestamp > prev.timestamp) {
                bail!("line {n}: timestamp {} does not increase", f.timestamp);
            }
        }
        frames.push(f);
    }
    Ok(frames)
}

/// One slice per grasp marker, running from the marker to the frame before
/// the next one (or the end of the stream).
pub fn grasp_segments(frames: &[HandFrame]) -> Vec<&[HandFrame]> {
    let marks: Vec<usize> = frames.iter().enumerate().filter(|(_, f)| f.grasp.is_some()).map(|(i, _)| i).collect();
    marks
        .iter()
        .enumerate()
        .map(|(k, &g)| &frames[g..marks.get(k + 1).copied().unwrap_or(frames.len())])
        .collect()
}

/// Writes `records/<stem>-<k>.json` for grasp event `k` under `out` and adds
/// them to `out/manifest.json`. A new manifest takes its objects from the
/// built-in set.
pub fn retarget(stream: &Path, calibration: &Calibration, out: &Path) -> Result<RetargetOutcome> {
    let text = std::fs::read_to_string(stream).with_context(|| format!("cannot read stream {}", stream.display()))?;
    let frames = parse_stream(&text).with_context(|| format!("in {}", stream.display()))?;
    let mut warnings = Vec::new();
    let segments = grasp_segments(&frames);
    if segments.is_empty() {
        warnings.push(format!("{} has no grasp marker; no records written", stream.display()));
        return Ok(RetargetOutcome { records: Vec::new(), warnings });
    }

    let stem = stream.file_stem().and_then(|s| s.to_str()).unwrap_or("stream");
    std::fs::create_dir_all(out.join("records")).with_context(|| format!("cannot create {}", out.display()))?;
    let mut manifest = if out.join(MANIFEST).is_file() { Manifest::load(out)? } else { Manifest::empty() };

    let mut records = Vec::new();
    for (k, seg) in segments.into_iter().enumerate() {
        let r = compile_record(seg, calibration).with_context(|| format!("grasp event {k}"))?;
        let rel = format!("records/{stem}-{k}.json");
        write_text(&out.join(&rel), &json_text(&r))?;
        manifest.upsert(RecordEntry { object_id: r.object_id.clone(), path: rel.clone() });
        records.push((out.join(rel), r));
    }

    let known: BTreeSet<String> = manifest.objects.iter().map(|o| o.id.clone()).collect();
    let builtin = sim::bundled_objects();
    for id in manifest.records.iter().map(|e| e.object_id.clone()).collect::<BTreeSet<_>>() {
        if known.contains(&id) {
            continue;
        }
        match builtin.iter().find(|o| o.id == id) {
            Some(o) => manifest.objects.push(o.clone()),
            None => warnings.push(format!("object `{id}` is not defined; add it to the manifest")),
        }
    }
    manifest.save(out)?;
    Ok(RetargetOutcome { records, warnings })
}
