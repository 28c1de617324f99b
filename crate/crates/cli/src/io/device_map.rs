//! Device-map files: the layer count plus ordered inclusive ranges.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use servesim_core::{DeviceMap, MapEntry};

use super::IoError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceMapRecord {
    num_layers: u32,
    entries: Vec<MapEntry>,
}

pub fn load_device_map(path: &Path) -> Result<DeviceMap, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let record: DeviceMapRecord = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    DeviceMap::new(record.entries, record.num_layers)
        .map_err(|e| IoError::validation(path, None, e))
}

pub fn write_device_map(mut writer: impl Write, map: &DeviceMap) -> std::io::Result<()> {
    let record = DeviceMapRecord {
        num_layers: map.num_layers(),
        entries: map.entries().to_vec(),
    };
    serde_json::to_writer_pretty(&mut writer, &record)?;
    writeln!(writer)
}

pub fn save_device_map(path: &Path, map: &DeviceMap) -> Result<(), IoError> {
    let out = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut writer = BufWriter::new(out);
    write_device_map(&mut writer, map).map_err(|e| IoError::io(path, e))?;
    writer.flush().map_err(|e| IoError::io(path, e))
}
