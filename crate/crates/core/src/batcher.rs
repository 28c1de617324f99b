//! Batch composition: the SLO/output-driven scan and the FIFO baseline.
//!
//! The scan sorts requests by SLO, then grows one open batch at a time. A
//! candidate joins iff the weighted sum of a latency term and an output-length
//! term stays under the threshold; otherwise the open batch is flushed and the
//! candidate seeds the next one. A composite-metric-driven cap bounds how
//! large any one batch can grow.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchPlan, OutputTermMode, Request, RequestId, SchedulerConfig};

/// Scheduler selected by name in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    SloOdbs,
    SloDbs,
    Odbs,
    Fifo,
}

impl SchedulerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::SloOdbs => "slo-odbs",
            SchedulerKind::SloDbs => "slo-dbs",
            SchedulerKind::Odbs => "odbs",
            SchedulerKind::Fifo => "fifo",
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slo-odbs" => Ok(SchedulerKind::SloOdbs),
            "slo-dbs" => Ok(SchedulerKind::SloDbs),
            "odbs" => Ok(SchedulerKind::Odbs),
            "fifo" => Ok(SchedulerKind::Fifo),
            other => Err(Error::Config(format!(
                "unknown scheduler '{other}' (expected slo-odbs, slo-dbs, odbs, or fifo)"
            ))),
        }
    }
}

impl std::fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Running state of the scan's open batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchState {
    /// Ids admitted to the open batch, in admission order.
    pub current_batch: Vec<RequestId>,
    /// Maximum SLO over the open batch (0 when empty).
    pub l_cm: f64,
    /// Maximum predicted output length over the open batch (0 when empty).
    pub o_cm: u64,
    /// Maximum composite metric `w1 * length + w2 * slo` over the open batch.
    pub cm: f64,
    /// Current size cap derived from the composite metric.
    pub dynamic_cap: usize,
}

impl BatchState {
    fn new(max_batch_size: usize) -> Self {
        BatchState {
            current_batch: Vec::new(),
            l_cm: 0.0,
            o_cm: 0,
            cm: 0.0,
            dynamic_cap: max_batch_size,
        }
    }

    fn reset(&mut self, max_batch_size: usize) {
        self.current_batch.clear();
        self.l_cm = 0.0;
        self.o_cm = 0;
        self.cm = 0.0;
        self.dynamic_cap = max_batch_size;
    }

    fn admit(&mut self, q: &Request, predicted: u64, w1: f64, w2: f64) {
        self.current_batch.push(q.id());
        self.l_cm = self.l_cm.max(q.slo());
        self.o_cm = self.o_cm.max(predicted);
        self.cm = self.cm.max(w1 * predicted as f64 + w2 * q.slo());
    }
}

const CAP_EPSILON: f64 = 1e-9;

fn dynamic_cap(threshold: f64, cm: f64, max_batch_size: usize) -> usize {
    let raw = (threshold / cm.max(CAP_EPSILON)).floor();
    if !raw.is_finite() || raw >= max_batch_size as f64 {
        max_batch_size
    } else if raw < 1.0 {
        1
    } else {
        raw as usize
    }
}

/// SLO- and output-driven scan over the request list.
pub fn schedule_slo_odbs(requests: &[Request], cfg: &SchedulerConfig) -> Result<Vec<BatchPlan>> {
    cfg.validate()?;

    let mut order: Vec<&Request> = requests.iter().collect();
    order.sort_by(|a, b| {
        a.slo()
            .total_cmp(&b.slo())
            .then(a.arrival_time().total_cmp(&b.arrival_time()))
            .then(a.id().cmp(&b.id()))
    });

    let mut plans = Vec::new();
    let mut state = BatchState::new(cfg.max_batch_size);
    let mut members: Vec<Request> = Vec::new();
    for q in order {
        let predicted = q.predicted_or_err()?;
        if !members.is_empty() {
            let grown = (members.len() + 1) as f64;
            let latency_term = (q.slo() + state.l_cm) * grown * cfg.l1_overhead;
            let gap = match cfg.output_term {
                OutputTermMode::Marginal => predicted as f64 - state.o_cm as f64,
                OutputTermMode::Additive => predicted as f64 + state.o_cm as f64,
            };
            let output_term = gap * grown * cfg.l2_overhead;
            let total = cfg.w1 * latency_term + cfg.w2 * output_term;
            if total > cfg.threshold {
                plans.push(BatchPlan::from_members(&members)?);
                members.clear();
                state.reset(cfg.max_batch_size);
            }
        }
        members.push(*q);
        state.admit(q, predicted, cfg.w1, cfg.w2);
        state.dynamic_cap = dynamic_cap(cfg.threshold, state.cm, cfg.max_batch_size);
        if members.len() >= state.dynamic_cap {
            plans.push(BatchPlan::from_members(&members)?);
            members.clear();
            state.reset(cfg.max_batch_size);
        }
    }
    if !members.is_empty() {
        plans.push(BatchPlan::from_members(&members)?);
    }
    Ok(plans)
}

/// SLO-only specialization: the output-length term is forced out (w1 = 0).
pub fn schedule_slo_dbs(requests: &[Request], cfg: &SchedulerConfig) -> Result<Vec<BatchPlan>> {
    let cfg = SchedulerConfig { w1: 0.0, ..cfg.clone() };
    schedule_slo_odbs(requests, &cfg)
}

/// Output-only specialization: the latency term is forced out (w2 = 0).
pub fn schedule_odbs(requests: &[Request], cfg: &SchedulerConfig) -> Result<Vec<BatchPlan>> {
    let cfg = SchedulerConfig { w2: 0.0, ..cfg.clone() };
    schedule_slo_odbs(requests, &cfg)
}

/// Arrival-order chunking into fixed-size batches.
pub fn schedule_fifo(requests: &[Request], max_batch_size: usize) -> Result<Vec<BatchPlan>> {
    if max_batch_size == 0 {
        return Err(Error::Config("fifo max_batch_size must be >= 1".into()));
    }
    let mut order: Vec<Request> = requests.to_vec();
    order.sort_by(|a, b| {
        a.arrival_time()
            .total_cmp(&b.arrival_time())
            .then(a.id().cmp(&b.id()))
    });
    order
        .chunks(max_batch_size)
        .map(BatchPlan::from_members)
        .collect()
}

/// Dispatches on the configured scheduler name.
pub fn schedule(
    kind: SchedulerKind,
    requests: &[Request],
    cfg: &SchedulerConfig,
) -> Result<Vec<BatchPlan>> {
    match kind {
        SchedulerKind::SloOdbs => schedule_slo_odbs(requests, cfg),
        SchedulerKind::SloDbs => schedule_slo_dbs(requests, cfg),
        SchedulerKind::Odbs => schedule_odbs(requests, cfg),
        SchedulerKind::Fifo => schedule_fifo(requests, cfg.max_batch_size),
    }
}
