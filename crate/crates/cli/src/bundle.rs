//! Record bundles: a directory holding `manifest.json`, which lists the
//! objects and the record files demonstrating them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cemrm_core::sim::{self, SimConfig, SimObject, TeleopRecord};
use serde::{Deserialize, Serialize};

use crate::config::read_json;
use crate::json_text;

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub objects: Vec<SimObject>,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub object_id: String,
    /// Relative to the bundle directory.
    pub path: String,
}

impl Manifest {
    pub fn empty() -> Self {
        Manifest { schema_version: MANIFEST_VERSION, objects: Vec::new(), records: Vec::new() }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m: Manifest = read_json(&dir.join(MANIFEST))?;
        if m.schema_version != MANIFEST_VERSION {
            bail!("manifest schema_version {} is not {MANIFEST_VERSION}", m.schema_version);
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join(MANIFEST), &json_text(self))
    }

    /// Adds or replaces the entry for `path`.
    pub fn upsert(&mut self, entry: RecordEntry) {
        match self.records.iter_mut().find(|e| e.path == entry.path) {
            Some(e) => *e = entry,
            None => self.records.push(entry),
        }
    }
}

/// Objects with their records, aligned by index.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub objects: Vec<SimObject>,
    pub records: Vec<Vec<TeleopRecord>>,
}

impl Bundle {
    /// The built-in object set with its scripted records.
    pub fn builtin(cfg: &SimConfig) -> Self {
        let objects = sim::bundled_objects();
        let records = objects.iter().map(|o| sim::scripted_records(o, cfg)).collect();
        Bundle { objects, records }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let m = Manifest::load(dir).with_context(|| format!("bundle {}", dir.display()))?;
        let mut by_id: BTreeMap<&str, Vec<TeleopRecord>> = BTreeMap::new();
        for o in &m.objects {
            o.check().with_context(|| format!("object `{}`", o.id))?;
            if by_id.insert(&o.id, Vec::new()).is_some() {
                bail!("object `{}` listed twice", o.id);
            }
        }
        for e in &m.records {
            let r: TeleopRecord = read_json(&dir.join(&e.path))?;
            r.check().with_context(|| format!("record {}", e.path))?;
            if r.object_id != e.object_id {
                bail!("record {} is for `{}`, manifest says `{}`", e.path, r.object_id, e.object_id);
            }
            match by_id.get_mut(e.object_id.as_str()) {
                Some(v) => v.push(r),
                None => bail!("record {} names unknown object `{}`", e.path, e.object_id),
            }
        }
        let records = m.objects.iter().map(|o| by_id.remove(o.id.as_str()).unwrap_or_default()).collect();
        Ok(Bundle { objects: m.objects, records })
    }

    /// Writes the manifest and one file per record under `records/`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("records"))?;
        let mut m = Manifest { objects: self.objects.clone(), ..Manifest::empty() };
        for (o, rs) in self.objects.iter().zip(&self.records) {
            for (k, r) in rs.iter().enumerate() {
                let path = format!("records/{}-{k}.json", o.id);
                write_text(&dir.join(&path), &json_text(r))?;
                m.records.push(RecordEntry { object_id: o.id.clone(), path });
            }
        }
        m.save(dir)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
