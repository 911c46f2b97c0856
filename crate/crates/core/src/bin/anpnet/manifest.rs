use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anpnet_core::checkpoint::CHECKPOINT_VERSION;
use anpnet_core::dataio::DATASET_VERSION;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Everything needed to re-run a command. Written as
/// `OUT_DIR/manifest_<command>.json`.
#[derive(Serialize)]
pub struct RunManifest {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: BTreeMap<&'static str, String>,
    outputs: Vec<String>,
    formats: BTreeMap<&'static str, u16>,
    duration_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            config: Value::Null,
            seed: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            formats: BTreeMap::from([("checkpoint", CHECKPOINT_VERSION), ("dataset", DATASET_VERSION)]),
            duration_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, name: &'static str, path: &Path) {
        self.inputs.insert(name, path.display().to_string());
    }

    /// Writes `contents` to `path` and records it.
    pub fn write(&mut self, path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.output(path);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(mut self, out_dir: &Path) -> Result<PathBuf> {
        if let Some(t) = self.started {
            self.duration_secs = t.elapsed().as_secs_f64();
        }
        let path = out_dir.join(format!("manifest_{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
