//! Trace files: one JSON object per line, UTF-8, with the fields
//! `id`, `arrival_time`, `input_len`, `true_output_len`, `slo`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use servesim_core::Request;

use super::IoError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceRecord {
    id: u64,
    arrival_time: f64,
    input_len: u64,
    true_output_len: u64,
    slo: f64,
}

pub fn load_trace(path: &Path) -> Result<Vec<Request>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    read_trace(BufReader::new(file), path)
}

pub fn read_trace(reader: impl BufRead, path: &Path) -> Result<Vec<Request>, IoError> {
    let mut requests = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| IoError::parse(path, Some(lineno), e.to_string()))?;
        if !seen.insert(record.id) {
            return Err(IoError::parse(
                path,
                Some(lineno),
                format!("duplicate request id {}", record.id),
            ));
        }
        let request = Request::new(
            record.id,
            record.arrival_time,
            record.input_len,
            record.true_output_len,
            record.slo,
        )
        .map_err(|e| IoError::validation(path, Some(lineno), e))?;
        requests.push(request);
    }
    Ok(requests)
}

pub fn write_trace(mut writer: impl Write, requests: &[Request]) -> std::io::Result<()> {
    for r in requests {
        let record = TraceRecord {
            id: r.id(),
            arrival_time: r.arrival_time(),
            input_len: r.input_len(),
            true_output_len: r.true_output_len(),
            slo: r.slo(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writeln!(writer)?;
    }
    Ok(())
}

pub fn save_trace(path: &Path, requests: &[Request]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_trace(&mut writer, requests).map_err(|e| IoError::io(path, e))?;
    writer.flush().map_err(|e| IoError::io(path, e))
}
