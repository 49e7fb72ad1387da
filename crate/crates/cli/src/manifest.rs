//! Run manifests: a small JSON record written next to every output file.
//!
//! The manifest names the tool and subcommand, echoes the resolved
//! parameters, and pins a sha256 digest of every input file, so a result
//! can be traced to exactly the bytes that produced it. Nothing
//! time-dependent is recorded: rerunning the same command on the same
//! inputs writes a byte-identical manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Debug, Serialize)]
struct InputRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    schema: &'static str,
    tool: Tool,
    subcommand: String,
    parameters: serde_json::Value,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

fn sha256_hex(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Write `<out>.manifest.json` describing one completed run. `inputs` are
/// hashed as they exist now (they were just read), `outputs` are listed by
/// path as given on the command line.
pub fn write_manifest(
    out: &Path,
    subcommand: &str,
    parameters: serde_json::Value,
    inputs: &[&Path],
    outputs: &[&Path],
) -> io::Result<()> {
    let manifest = Manifest {
        schema: readout_unfold::io::SCHEMA_VERSION,
        tool: Tool {
            name: "readout-unfold",
            version: env!("CARGO_PKG_VERSION"),
        },
        subcommand: subcommand.to_string(),
        parameters,
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(InputRecord {
                    path: p.display().to_string(),
                    sha256: sha256_hex(p)?,
                })
            })
            .collect::<io::Result<_>>()?,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let manifest_path = manifest_path_for(out);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(manifest_path, text)
}

/// The manifest path belonging to an output file: `<out>.manifest.json`.
pub fn manifest_path_for(out: &Path) -> std::path::PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    std::path::PathBuf::from(name)
}
