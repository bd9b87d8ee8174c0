use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::ToolConfig;
use crate::failure::Failure;

/// Record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub config: ToolConfig,
    pub seeds: Vec<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    started: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, config_path: Option<&Path>, config: &ToolConfig) -> Self {
        Self {
            manifest: RunManifest {
                command: command.into(),
                args: std::env::args().collect(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config_path: config_path.map(Path::to_path_buf),
                config_hash: config.hash(),
                config: config.clone(),
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                wall_time: 0.0,
            },
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.manifest.seeds.push(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.manifest.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.to_path_buf());
        self
    }

    pub fn write(mut self, path: &Path) -> Result<(), Failure> {
        self.manifest.wall_time = self.started.elapsed().as_secs_f64();
        let mut json = serde_json::to_string_pretty(&self.manifest)?;
        json.push('\n');
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// `<path>.manifest.json`, used when no manifest path is given.
pub fn default_path(primary_output: &Path) -> PathBuf {
    let mut name = primary_output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
