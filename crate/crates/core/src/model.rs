//! Shared domain types and their construction invariants.
//!
//! Every type here is validated on construction and immutable afterwards, so
//! downstream stages (batcher, deployer, simulator) can take them by reference
//! without re-checking field ranges. No algorithms live in this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RequestId = u64;
pub type DeviceId = usize;

/// Default width of one cached key/value element in bytes (fp32 K + V pair).
pub const DEFAULT_KV_BYTES_PER_ELEM: u64 = 4;

fn ensure_finite(what: &'static str, field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(what, format!("{field} must be finite, got {v}")))
    }
}

/// One inference query as read from a trace.
///
/// `predicted_output_len` starts unset and is filled in by the profiler; the
/// batcher rejects requests that reach it without a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Request {
    id: RequestId,
    arrival_time: f64,
    input_len: u64,
    true_output_len: u64,
    predicted_output_len: Option<u64>,
    slo: f64,
}

impl Request {
    pub fn new(
        id: RequestId,
        arrival_time: f64,
        input_len: u64,
        true_output_len: u64,
        slo: f64,
    ) -> Result<Self> {
        const WHAT: &str = "Request";
        ensure_finite(WHAT, "arrival_time", arrival_time)?;
        ensure_finite(WHAT, "slo", slo)?;
        if arrival_time < 0.0 {
            return Err(Error::invalid(WHAT, format!("arrival_time must be >= 0, got {arrival_time}")));
        }
        if input_len == 0 {
            return Err(Error::invalid(WHAT, "input_len must be >= 1"));
        }
        if true_output_len == 0 {
            return Err(Error::invalid(WHAT, "true_output_len must be >= 1"));
        }
        if slo <= 0.0 {
            return Err(Error::invalid(WHAT, format!("slo must be > 0, got {slo}")));
        }
        Ok(Request {
            id,
            arrival_time,
            input_len,
            true_output_len,
            predicted_output_len: None,
            slo,
        })
    }

    /// Returns a copy with the predicted output length filled in.
    pub fn with_prediction(mut self, predicted_output_len: u64) -> Result<Self> {
        if predicted_output_len == 0 {
            return Err(Error::invalid("Request", "predicted_output_len must be >= 1"));
        }
        self.predicted_output_len = Some(predicted_output_len);
        Ok(self)
    }

    pub fn id(&self) -> RequestId {
        self.id
    }

    pub fn arrival_time(&self) -> f64 {
        self.arrival_time
    }

    pub fn input_len(&self) -> u64 {
        self.input_len
    }

    pub fn true_output_len(&self) -> u64 {
        self.true_output_len
    }

    pub fn predicted_output_len(&self) -> Option<u64> {
        self.predicted_output_len
    }

    /// Predicted length, or a contract error naming the request if the
    /// profiler has not run yet.
    pub fn predicted_or_err(&self) -> Result<u64> {
        self.predicted_output_len.ok_or_else(|| {
            Error::Contract(format!("request {} has no predicted_output_len", self.id))
        })
    }

    pub fn slo(&self) -> f64 {
        self.slo
    }
}

/// The model being served, reduced to what sizing and placement need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    name: String,
    total_memory: u64,
    num_layers: u32,
    hidden_dim: u64,
    kv_bytes_per_elem: u64,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        total_memory: u64,
        num_layers: u32,
        hidden_dim: u64,
        kv_bytes_per_elem: u64,
    ) -> Result<Self> {
        const WHAT: &str = "ModelSpec";
        if total_memory == 0 {
            return Err(Error::invalid(WHAT, "total_memory must be > 0"));
        }
        if num_layers == 0 {
            return Err(Error::invalid(WHAT, "num_layers must be >= 1"));
        }
        if hidden_dim == 0 {
            return Err(Error::invalid(WHAT, "hidden_dim must be >= 1"));
        }
        if kv_bytes_per_elem == 0 {
            return Err(Error::invalid(WHAT, "kv_bytes_per_elem must be >= 1"));
        }
        Ok(ModelSpec {
            name: name.into(),
            total_memory,
            num_layers,
            hidden_dim,
            kv_bytes_per_elem,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn total_memory(&self) -> u64 {
        self.total_memory
    }

    pub fn num_layers(&self) -> u32 {
        self.num_layers
    }

    pub fn hidden_dim(&self) -> u64 {
        self.hidden_dim
    }

    pub fn kv_bytes_per_elem(&self) -> u64 {
        self.kv_bytes_per_elem
    }

    /// Bytes of model weights per transformer layer.
    pub fn memory_per_layer(&self) -> f64 {
        self.total_memory as f64 / self.num_layers as f64
    }
}

/// One accelerator in the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviceNode {
    id: DeviceId,
    memory: u64,
    performance: f64,
    power_cap: f64,
}

impl DeviceNode {
    pub fn new(id: DeviceId, memory: u64, performance: f64, power_cap: f64) -> Result<Self> {
        const WHAT: &str = "DeviceNode";
        ensure_finite(WHAT, "performance", performance)?;
        ensure_finite(WHAT, "power_cap", power_cap)?;
        if performance <= 0.0 {
            return Err(Error::invalid(WHAT, format!("performance must be > 0, got {performance}")));
        }
        if power_cap < 0.0 {
            return Err(Error::invalid(WHAT, format!("power_cap must be >= 0, got {power_cap}")));
        }
        Ok(DeviceNode {
            id,
            memory,
            performance,
            power_cap,
        })
    }

    pub fn id(&self) -> DeviceId {
        self.id
    }

    pub fn memory(&self) -> u64 {
        self.memory
    }

    /// Tokens-per-second equivalent throughput of the device.
    pub fn performance(&self) -> f64 {
        self.performance
    }

    /// Informational power cap in watts; recorded but not simulated.
    pub fn power_cap(&self) -> f64 {
        self.power_cap
    }
}

/// Accelerator nodes plus the pairwise link-latency matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    nodes: Vec<DeviceNode>,
    link_latency: Vec<Vec<f64>>,
}

impl Topology {
    pub fn new(nodes: Vec<DeviceNode>, link_latency: Vec<Vec<f64>>) -> Result<Self> {
        const WHAT: &str = "Topology";
        let n = nodes.len();
        for (i, node) in nodes.iter().enumerate() {
            if node.id() != i {
                return Err(Error::invalid(
                    WHAT,
                    format!("node at position {i} has id {}; ids must equal their index", node.id()),
                ));
            }
        }
        if link_latency.len() != n {
            return Err(Error::invalid(
                WHAT,
                format!("latency matrix has {} rows for {n} nodes", link_latency.len()),
            ));
        }
        for (i, row) in link_latency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(
                    WHAT,
                    format!("latency matrix row {i} has {} columns for {n} nodes", row.len()),
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                ensure_finite(WHAT, "link_latency", v)?;
                if v < 0.0 {
                    return Err(Error::invalid(WHAT, format!("link_latency[{i}][{j}] = {v} is negative")));
                }
            }
            if link_latency[i][i] != 0.0 {
                return Err(Error::invalid(WHAT, format!("latency diagonal [{i}][{i}] must be 0")));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if link_latency[i][j] != link_latency[j][i] {
                    return Err(Error::invalid(
                        WHAT,
                        format!(
                            "latency matrix is asymmetric at [{i}][{j}]: {} vs {}",
                            link_latency[i][j], link_latency[j][i]
                        ),
                    ));
                }
            }
        }
        Ok(Topology { nodes, link_latency })
    }

    pub fn nodes(&self) -> &[DeviceNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: DeviceId) -> &DeviceNode {
        &self.nodes[id]
    }

    pub fn link_latency(&self, a: DeviceId, b: DeviceId) -> f64 {
        self.link_latency[a][b]
    }

    pub fn latency_matrix(&self) -> &[Vec<f64>] {
        &self.link_latency
    }
}

/// One contiguous layer range pinned to one device. Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub device: DeviceId,
    pub layer_start: u32,
    pub layer_end: u32,
}

impl MapEntry {
    pub fn span(&self) -> u32 {
        self.layer_end - self.layer_start + 1
    }
}

/// Ordered assignment of contiguous layer ranges to devices.
///
/// Entries are pipeline-ordered: entry k feeds entry k+1. Construction
/// enforces that the ranges tile `[0, num_layers)` exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceMap {
    entries: Vec<MapEntry>,
    num_layers: u32,
}

impl DeviceMap {
    pub fn new(entries: Vec<MapEntry>, num_layers: u32) -> Result<Self> {
        const WHAT: &str = "DeviceMap";
        if entries.is_empty() {
            return Err(Error::invalid(WHAT, "must contain at least one entry"));
        }
        if entries[0].layer_start != 0 {
            return Err(Error::invalid(
                WHAT,
                format!("first range starts at layer {}, expected 0", entries[0].layer_start),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for (k, e) in entries.iter().enumerate() {
            if e.layer_start > e.layer_end {
                return Err(Error::invalid(
                    WHAT,
                    format!("entry {k} has empty range {}..={}", e.layer_start, e.layer_end),
                ));
            }
            if !seen.insert(e.device) {
                return Err(Error::invalid(WHAT, format!("device {} appears twice", e.device)));
            }
            if k > 0 && e.layer_start != entries[k - 1].layer_end + 1 {
                return Err(Error::invalid(
                    WHAT,
                    format!(
                        "range {k} starts at layer {} but the previous range ends at {}",
                        e.layer_start,
                        entries[k - 1].layer_end
                    ),
                ));
            }
        }
        let last_end = entries.last().unwrap().layer_end;
        if last_end + 1 != num_layers {
            return Err(Error::invalid(
                WHAT,
                format!("ranges cover [0, {}] but the model has {num_layers} layers", last_end),
            ));
        }
        Ok(DeviceMap { entries, num_layers })
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn num_layers(&self) -> u32 {
        self.num_layers
    }

    pub fn device_count(&self) -> usize {
        self.entries.len()
    }

    /// Checks the map against a concrete model and topology: layer count
    /// match, device ids in range, and per-device memory headroom after the
    /// KV reserve.
    pub fn validate_against(
        &self,
        model: &ModelSpec,
        topo: &Topology,
        kv_reserve: u64,
    ) -> Result<()> {
        if self.num_layers != model.num_layers() {
            return Err(Error::Contract(format!(
                "device map covers {} layers but the model has {}",
                self.num_layers,
                model.num_layers()
            )));
        }
        let m = model.memory_per_layer();
        for e in &self.entries {
            if e.device >= topo.len() {
                return Err(Error::Contract(format!(
                    "device map references device {} but the topology has {}",
                    e.device,
                    topo.len()
                )));
            }
            let cap = crate::deployer::max_layers(topo.node(e.device), m, kv_reserve, self.num_layers);
            if e.span() > cap {
                return Err(Error::Contract(format!(
                    "device {} holds {} layers but only {} fit after the kv reserve",
                    e.device,
                    e.span(),
                    cap
                )));
            }
        }
        Ok(())
    }
}

/// An ordered group of requests served in a single padded forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchPlan {
    request_ids: Vec<RequestId>,
    padded_input_len: u64,
    max_output_len: u64,
}

impl BatchPlan {
    /// Builds a plan from its members, deriving the padded input length and
    /// the maximum predicted output length. Every member must be profiled.
    pub fn from_members(members: &[Request]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("BatchPlan", "must contain at least one request"));
        }
        let mut padded_input_len = 0;
        let mut max_output_len = 0;
        let mut request_ids = Vec::with_capacity(members.len());
        for r in members {
            padded_input_len = padded_input_len.max(r.input_len());
            max_output_len = max_output_len.max(r.predicted_or_err()?);
            request_ids.push(r.id());
        }
        Ok(BatchPlan {
            request_ids,
            padded_input_len,
            max_output_len,
        })
    }

    pub fn request_ids(&self) -> &[RequestId] {
        &self.request_ids
    }

    pub fn len(&self) -> usize {
        self.request_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.request_ids.is_empty()
    }

    /// Every member's input is padded up to this length before the pass.
    pub fn padded_input_len(&self) -> u64 {
        self.padded_input_len
    }

    /// Maximum predicted output length across members; generation runs this long.
    pub fn max_output_len(&self) -> u64 {
        self.max_output_len
    }
}

/// How the marginal output-length term of the admission test is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTermMode {
    /// Candidate length minus the batch's current maximum (may be negative).
    #[default]
    Marginal,
    /// Candidate length plus the batch's current maximum.
    Additive,
}

/// Knobs for the SLO/output-driven batch schedulers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    /// Weight on the latency term of the admission test.
    pub w1: f64,
    /// Weight on the output-length term of the admission test.
    pub w2: f64,
    /// Parallel-overhead multiplier on the latency term.
    pub l1_overhead: f64,
    /// Parallel-overhead multiplier on the output-length term.
    pub l2_overhead: f64,
    /// Admission threshold; a candidate joins the open batch iff its
    /// weighted total stays at or below this.
    pub threshold: f64,
    /// Hard cap on batch size; the dynamic cap never exceeds it.
    pub max_batch_size: usize,
    pub output_term: OutputTermMode,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            w1: 1.0,
            w2: 1.0,
            l1_overhead: 1.0,
            l2_overhead: 1.0,
            threshold: 1000.0,
            max_batch_size: 8,
            output_term: OutputTermMode::Marginal,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("l1_overhead", self.l1_overhead),
            ("l2_overhead", self.l2_overhead),
            ("threshold", self.threshold),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("scheduler {name} must be finite and >= 0, got {v}")));
            }
        }
        if self.w1 + self.w2 <= 0.0 {
            return Err(Error::Config("scheduler weights w1 + w2 must be > 0".into()));
        }
        if self.threshold <= 0.0 {
            return Err(Error::Config(format!("scheduler threshold must be > 0, got {}", self.threshold)));
        }
        if self.max_batch_size == 0 {
            return Err(Error::Config("scheduler max_batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Knobs for the placement planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeployerConfig {
    /// Weight on chain latency in the placement objective.
    pub a1: f64,
    /// Weight on the device-count fraction in the placement objective.
    pub a2: f64,
    /// Calibration scalar relating layer bytes over performance to seconds.
    pub p: f64,
    /// Bytes withheld from every device for the KV cache.
    pub kv_reserve: u64,
    /// Adds the literal final-device broadcast sum (link latency to every
    /// subset member plus a compute term per member) to each candidate.
    pub terminal_broadcast: bool,
}

impl Default for DeployerConfig {
    fn default() -> Self {
        DeployerConfig {
            a1: 1.0,
            a2: 1.0,
            p: 1.0,
            kv_reserve: 0,
            terminal_broadcast: false,
        }
    }
}

impl DeployerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a1", self.a1), ("a2", self.a2), ("p", self.p)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("deployer {name} must be finite and >= 0, got {v}")));
            }
        }
        if self.a1 + self.a2 <= 0.0 {
            return Err(Error::Config("deployer weights a1 + a2 must be > 0".into()));
        }
        if self.p <= 0.0 {
            return Err(Error::Config(format!("deployer p must be > 0, got {}", self.p)));
        }
        Ok(())
    }
}

/// Per-request completion record inside [`SimMetrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub id: RequestId,
    pub latency: f64,
    pub slo_violated: bool,
}

/// Aggregate results of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub per_request: Vec<RequestOutcome>,
    pub mean_latency: f64,
    pub p95_latency: f64,
    /// Total generated tokens divided by makespan.
    pub throughput: f64,
    /// Busy-time fraction per device, indexed by device id.
    pub device_utilization: Vec<f64>,
    pub slo_violation_rate: f64,
    /// Seconds from the first arrival to the last completion.
    pub makespan: f64,
    pub total_generated_tokens: u64,
    pub total_padding_tokens: u64,
    pub num_batches: usize,
}

impl SimMetrics {
    pub fn validate(&self) -> Result<()> {
        const WHAT: &str = "SimMetrics";
        if !(0.0..=1.0).contains(&self.slo_violation_rate) {
            return Err(Error::invalid(
                WHAT,
                format!("slo_violation_rate {} outside [0, 1]", self.slo_violation_rate),
            ));
        }
        for (d, &u) in self.device_utilization.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::invalid(WHAT, format!("utilization[{d}] = {u} outside [0, 1]")));
            }
        }
        for (name, v) in [
            ("mean_latency", self.mean_latency),
            ("p95_latency", self.p95_latency),
            ("throughput", self.throughput),
            ("makespan", self.makespan),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(WHAT, format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}
