use std::path::Path;

use propsao::hydro::SolverOptions;
use propsao::optimizer::GaConfig;
use propsao::space::DesignSpaceConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Contents of the TOML config file. Every section and key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub solver: SolverOptions,
    pub space: DesignSpaceConfig,
    pub ga: GaConfig,
}

impl ToolConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.solver.validate()?;
        self.space.validate()?;
        self.ga.validate()?;
        Ok(())
    }

    /// SHA-256 of the effective settings, after command-line overrides.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
