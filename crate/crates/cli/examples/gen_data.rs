//! Regenerates the files under `data/` from the built-in definitions:
//! `cargo run -p cemrm --example gen_data`.

use std::path::Path;

use cemrm::bundle::{write_text, Bundle};
use cemrm::{json_text, sample};
use cemrm_core::retarget::{compile_record, Calibration};
use cemrm_core::sim::SimConfig;

fn main() -> anyhow::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    Bundle::builtin(&SimConfig::default()).save(&data.join("bundle"))?;

    let dir = data.join("sample");
    std::fs::create_dir_all(&dir)?;
    write_text(&dir.join("stream.jsonl"), &sample::stream_text())?;
    let golden = compile_record(&sample::stream(), &Calibration::default())?;
    write_text(&dir.join("golden_record.json"), &json_text(&golden))?;
    println!("wrote {}", data.display());
    Ok(())
}
