//! Topology files: a device list plus either a full latency matrix or link
//! classes (`X` self, `PIX` one PCIe bridge, `NODE` across host bridges)
//! with a class-to-seconds mapping.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use servesim_core::{DeviceNode, Topology};

use super::IoError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceRecord {
    id: usize,
    memory_bytes: u64,
    performance: f64,
    power_watts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkClass {
    X,
    #[serde(rename = "PIX")]
    Pix,
    #[serde(rename = "NODE")]
    Node,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassLatency {
    #[serde(rename = "PIX")]
    pub pix: f64,
    #[serde(rename = "NODE")]
    pub node: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum LinkSpec {
    Matrix { matrix: Vec<Vec<f64>> },
    Classes { classes: Vec<Vec<LinkClass>>, class_latency: ClassLatency },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    devices: Vec<DeviceRecord>,
    links: LinkSpec,
}

pub fn load_topology(path: &Path) -> Result<Topology, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let parsed: TopologyFile = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    build(parsed, path)
}

fn build(parsed: TopologyFile, path: &Path) -> Result<Topology, IoError> {
    let n = parsed.devices.len();
    let mut records = parsed.devices;
    records.sort_by_key(|d| d.id);
    for (i, d) in records.iter().enumerate() {
        if d.id != i {
            return Err(IoError::parse(
                path,
                None,
                format!("device ids must be exactly 0..{n}; found id {}", d.id),
            ));
        }
    }
    let nodes: Vec<DeviceNode> = records
        .iter()
        .map(|d| DeviceNode::new(d.id, d.memory_bytes, d.performance, d.power_watts))
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::validation(path, None, e))?;

    let matrix = match parsed.links {
        LinkSpec::Matrix { matrix } => matrix,
        LinkSpec::Classes { classes, class_latency } => {
            if classes.len() != n || classes.iter().any(|row| row.len() != n) {
                return Err(IoError::parse(
                    path,
                    None,
                    format!("class grid must be {n}x{n} to match the device list"),
                ));
            }
            let mut matrix = vec![vec![0.0; n]; n];
            for (i, row) in classes.iter().enumerate() {
                for (j, class) in row.iter().enumerate() {
                    if (*class == LinkClass::X) != (i == j) {
                        return Err(IoError::parse(
                            path,
                            None,
                            format!("class X is allowed exactly on the diagonal; cell [{i}][{j}] violates that"),
                        ));
                    }
                    matrix[i][j] = match class {
                        LinkClass::X => 0.0,
                        LinkClass::Pix => class_latency.pix,
                        LinkClass::Node => class_latency.node,
                    };
                }
            }
            matrix
        }
    };

    Topology::new(nodes, matrix).map_err(|e| IoError::validation(path, None, e))
}

/// Emits the matrix form; class-encoded inputs load to the same topology.
pub fn save_topology(path: &Path, topo: &Topology) -> Result<(), IoError> {
    let file = TopologyFile {
        devices: topo
            .nodes()
            .iter()
            .map(|d| DeviceRecord {
                id: d.id(),
                memory_bytes: d.memory(),
                performance: d.performance(),
                power_watts: d.power_cap(),
            })
            .collect(),
        links: LinkSpec::Matrix { matrix: topo.latency_matrix().to_vec() },
    };
    let out = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut writer, &file)
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    writeln!(writer).map_err(|e| IoError::io(path, e))?;
    writer.flush().map_err(|e| IoError::io(path, e))
}
