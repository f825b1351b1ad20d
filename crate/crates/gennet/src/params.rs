//! Generator parameter container with versioned, bit-exact serialization.

use std::path::Path;

use tapegrad::serialize::{
    params_from_bytes, params_to_bytes, read_checkpoint, write_checkpoint, CheckpointMeta,
};
use tapegrad::ParamStore;

use crate::config::GeneratorConfig;
use crate::net::GeneratorNet;
use crate::{GennetError, Result};

/// The learnable state of the generator: named tensors plus spectral-norm
/// power-iteration vectors, tagged with the architecture config and the
/// training iteration count.
#[derive(Debug, Clone)]
pub struct GeneratorParams {
    pub cfg: GeneratorConfig,
    pub store: ParamStore,
    pub iteration: u64,
}

impl GeneratorParams {
    pub fn init(cfg: GeneratorConfig, seed: u64) -> Self {
        let net = GeneratorNet::new(cfg.clone());
        let store = net.init_params(seed);
        Self {
            cfg,
            store,
            iteration: 0,
        }
    }

    pub fn net(&self) -> GeneratorNet {
        GeneratorNet::new(self.cfg.clone())
    }

    pub fn config_hash(&self) -> String {
        self.cfg.hash()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            kind: "generator".into(),
            config_hash: self.config_hash(),
            iteration: self.iteration,
        };
        let cfg_text = toml::to_string(&self.cfg)
            .map_err(|e| GennetError::Checkpoint(format!("config serialization: {e}")))?;
        let sections = vec![
            ("config", cfg_text.into_bytes()),
            ("params", params_to_bytes(&self.store)),
        ];
        write_checkpoint(path, &meta, &sections)?;
        Ok(())
    }

    /// Loads a generator checkpoint. When `expected_hash` is given and does
    /// not match the stored architecture hash, loading fails unless `force`.
    pub fn load(path: &Path, expected_hash: Option<&str>, force: bool) -> Result<Self> {
        let (meta, sections) = read_checkpoint(path)?;
        if meta.kind != "generator" {
            return Err(GennetError::Checkpoint(format!(
                "expected a generator checkpoint, found kind `{}`",
                meta.kind
            )));
        }
        let cfg_bytes = sections
            .get("config")
            .ok_or_else(|| GennetError::Checkpoint("missing config section".into()))?;
        let cfg: GeneratorConfig = toml::from_str(
            std::str::from_utf8(cfg_bytes)
                .map_err(|e| GennetError::Checkpoint(e.to_string()))?,
        )
        .map_err(|e| GennetError::Checkpoint(format!("config parse: {e}")))?;
        if let Some(expected) = expected_hash {
            if expected != meta.config_hash && !force {
                return Err(GennetError::Checkpoint(format!(
                    "config hash mismatch: checkpoint {}, expected {expected}; pass --force to override",
                    meta.config_hash
                )));
            }
        }
        let store = params_from_bytes(
            sections
                .get("params")
                .ok_or_else(|| GennetError::Checkpoint("missing params section".into()))?,
        )?;
        Ok(Self {
            cfg,
            store,
            iteration: meta.iteration,
        })
    }
}
