//! TOML run configuration overriding the built-in defaults.
//!
//! Sections map onto the core config types:
//!
//! ```toml
//! [scheduler]
//! w1 = 1.0
//! w2 = 1.0
//! threshold = 1000.0
//! max_batch_size = 8
//!
//! [deployer]
//! kv_reserve = 8000000000
//!
//! [cost]
//! comm_mode = "per_batch"
//!
//! [predictor]
//! variant = "noisy"
//! error_rate = 0.0049
//! bucket_width = 50
//!
//! [monitor]
//! gamma = 1.1
//! cap = 2.0
//! ```

use std::path::Path;

use servesim_core::simulator::ExperimentConfig;

use crate::io::IoError;

/// Loads a config file, or returns defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, IoError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| IoError::parse(path, None, e.to_string()))?;
    cfg.validate()
        .map_err(|e| IoError::validation(path, None, e))?;
    Ok(cfg)
}
