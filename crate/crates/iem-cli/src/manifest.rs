use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use iem_core::IntegrationConfig;

/// Provenance record accompanying every output: the exact command, a
/// digest of the input file, the integration configuration, seed, and
/// tool version. Wall-clock time is recorded only in sidecar files so
/// that primary outputs stay byte-identical across repeat runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input_digest: Option<String>,
    pub config: Option<IntegrationConfig>,
    pub seed: u64,
    pub version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunManifest {
    pub fn new(input_digest: Option<String>, config: Option<IntegrationConfig>, seed: u64) -> Self {
        Self {
            command: std::env::args().collect::<Vec<_>>().join(" "),
            input_digest,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracks elapsed time from command start for the sidecar manifest.
pub struct Emitter {
    started: Instant,
}

impl Emitter {
    pub fn new() -> Self {
        Self {
            started: Instant::now(),
        }
    }

    fn sidecar(&self, out: &Path, manifest: &RunManifest) -> Result<()> {
        let mut m = manifest.clone();
        m.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        let path = sidecar_path(out);
        std::fs::write(&path, serde_json::to_string_pretty(&m)?)
            .with_context(|| format!("writing manifest sidecar {}", path.display()))?;
        Ok(())
    }

    /// JSON object output: embed the manifest when printing to stdout,
    /// write a sidecar when writing to a file.
    pub fn emit_json_object(
        &self,
        mut payload: serde_json::Map<String, serde_json::Value>,
        manifest: &RunManifest,
        out: Option<&Path>,
    ) -> Result<()> {
        match out {
            Some(path) => {
                payload.insert("manifest".into(), serde_json::to_value(manifest)?);
                let text = serde_json::to_string_pretty(&serde_json::Value::Object(payload))?;
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                self.sidecar(path, manifest)
            }
            None => {
                payload.insert("manifest".into(), serde_json::to_value(manifest)?);
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::Value::Object(payload))?
                );
                Ok(())
            }
        }
    }

    /// Bare JSON value (e.g. a report array) to stdout or file + sidecar.
    pub fn emit_json_value(
        &self,
        payload: &serde_json::Value,
        manifest: &RunManifest,
        out: Option<&Path>,
    ) -> Result<()> {
        let text = serde_json::to_string_pretty(payload)?;
        match out {
            Some(path) => {
                std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
                self.sidecar(path, manifest)
            }
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }

    pub fn emit_csv(&self, text: &str, manifest: &RunManifest, out: &Path) -> Result<()> {
        std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
        self.sidecar(out, manifest)
    }
}

pub fn sidecar_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}
