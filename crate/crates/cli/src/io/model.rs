//! Model spec files: name, total memory, layer count, hidden dimension, and
//! the KV bytes-per-element constant (default 4).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use servesim_core::{ModelSpec, DEFAULT_KV_BYTES_PER_ELEM};

use super::IoError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    name: String,
    total_memory: u64,
    num_layers: u32,
    hidden_dim: u64,
    #[serde(default = "default_kv_bytes")]
    kv_bytes_per_elem: u64,
}

fn default_kv_bytes() -> u64 {
    DEFAULT_KV_BYTES_PER_ELEM
}

pub fn load_model(path: &Path) -> Result<ModelSpec, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let record: ModelRecord = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    ModelSpec::new(
        record.name,
        record.total_memory,
        record.num_layers,
        record.hidden_dim,
        record.kv_bytes_per_elem,
    )
    .map_err(|e| IoError::validation(path, None, e))
}

pub fn save_model(path: &Path, model: &ModelSpec) -> Result<(), IoError> {
    let record = ModelRecord {
        name: model.name().to_string(),
        total_memory: model.total_memory(),
        num_layers: model.num_layers(),
        hidden_dim: model.hidden_dim(),
        kv_bytes_per_elem: model.kv_bytes_per_elem(),
    };
    let out = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut writer, &record)
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    writeln!(writer).map_err(|e| IoError::io(path, e))?;
    writer.flush().map_err(|e| IoError::io(path, e))
}
