//! Command line, configuration and file formats around `cemrm-core`.
//!
//! Every subcommand is a plain function here so tests can call it without
//! spawning the binary.

pub mod bundle;
pub mod compare;
pub mod config;
pub mod evaluate;
pub mod optimize;
pub mod retarget;
pub mod runlog;
pub mod sample;

use serde::Serialize;

/// Pretty JSON with a trailing newline. Floats round-trip exactly, so
/// re-saving a parsed file reproduces it byte for byte.
pub fn json_text<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Caps the global evaluation pool. `0` or unset means one thread per core.
pub fn init_threads(var: Option<&str>) -> anyhow::Result<()> {
    let n = match var {
        None | Some("") => 0,
        Some(v) => v.trim().parse::<usize>().map_err(|_| anyhow::anyhow!("CEMRM_THREADS must be a count, got `{v}`"))?,
    };
    // a second call in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
