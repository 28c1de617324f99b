//! Trace-driven execution of batch plans over one deployed pipeline.
//!
//! Batches run strictly one after another on a single replica: processing a
//! batch walks the device chain in map order, each device contributing time
//! linear in its token share, plus link charges between consecutive devices.
//! A batch cannot start before its last member has arrived, so padding waits
//! show up as idle gaps on the timeline.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::batcher::{schedule, SchedulerKind};
use crate::deployer::{plan, PlannerKind};
use crate::error::{Error, Result};
use crate::memory::plan_token_cost;
use crate::model::{
    BatchPlan, DeployerConfig, DeviceMap, ModelSpec, Request, RequestId, RequestOutcome,
    SchedulerConfig, SimMetrics, Topology,
};
use crate::profiler::{observe_completion, profile, request_seed, MonitorConfig, MonitorState, Predictor};

/// When link latency is charged during a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    /// Once per batch, modeling pipelined execution.
    #[default]
    PerBatch,
    /// Once per generated token, modeling autoregressive round-trips.
    PerIteration,
}

/// Maps token counts and chain hops to seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub comm_mode: CommMode,
}

impl CostModel {
    /// Seconds a device needs to process `tokens` tokens.
    pub fn per_token_time(&self, performance: f64, tokens: f64) -> f64 {
        tokens / performance
    }

    /// Link charge for one batch over the map's chain.
    pub fn batch_comm(&self, map: &DeviceMap, topo: &Topology, max_output_len: u64) -> f64 {
        let hops: f64 = map
            .entries()
            .windows(2)
            .map(|w| topo.link_latency(w[0].device, w[1].device))
            .sum();
        match self.comm_mode {
            CommMode::PerBatch => hops,
            CommMode::PerIteration => hops * max_output_len as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    BatchStart { batch: usize },
    BatchEnd { batch: usize },
    RequestDone { request: RequestId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Time-ordered record of everything the simulation did.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    fn push(&mut self, time: f64, kind: EventKind) {
        debug_assert!(
            self.events.last().is_none_or(|e| e.time <= time),
            "event timestamps must be nondecreasing"
        );
        self.events.push(Event { time, kind });
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_monotone(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time <= w[1].time)
    }
}

/// Runs the plans over the deployed map and aggregates metrics.
///
/// `plans` must partition `requests`; the map must match the model and fit
/// the topology.
pub fn simulate(
    plans: &[BatchPlan],
    requests: &[Request],
    map: &DeviceMap,
    topo: &Topology,
    model: &ModelSpec,
    cost: &CostModel,
) -> Result<(SimMetrics, EventLog)> {
    if requests.is_empty() && plans.is_empty() {
        return Ok((
            SimMetrics {
                per_request: Vec::new(),
                mean_latency: 0.0,
                p95_latency: 0.0,
                throughput: 0.0,
                device_utilization: vec![0.0; topo.len()],
                slo_violation_rate: 0.0,
                makespan: 0.0,
                total_generated_tokens: 0,
                total_padding_tokens: 0,
                num_batches: 0,
            },
            EventLog::default(),
        ));
    }
    if map.num_layers() != model.num_layers() {
        return Err(Error::Contract(format!(
            "device map covers {} layers but the model has {}",
            map.num_layers(),
            model.num_layers()
        )));
    }
    for e in map.entries() {
        if e.device >= topo.len() {
            return Err(Error::Contract(format!(
                "device map references device {} outside the {}-node topology",
                e.device,
                topo.len()
            )));
        }
    }
    // Also validates that the plans partition the request set.
    let (total_generated_tokens, total_padding_tokens) = plan_token_cost(plans, requests)?;

    let by_id: HashMap<RequestId, &Request> = requests.iter().map(|r| (r.id(), r)).collect();
    let first_arrival = requests
        .iter()
        .map(Request::arrival_time)
        .fold(f64::INFINITY, f64::min);

    let num_layers = map.num_layers() as f64;
    let mut log = EventLog::default();
    let mut busy = vec![0.0f64; topo.len()];
    let mut per_request = Vec::with_capacity(requests.len());
    let mut clock = first_arrival;
    let mut last_end = first_arrival;

    for (k, plan) in plans.iter().enumerate() {
        let members: Vec<&Request> = plan.request_ids().iter().map(|id| by_id[id]).collect();
        let latest_arrival = members
            .iter()
            .map(|r| r.arrival_time())
            .fold(f64::NEG_INFINITY, f64::max);
        let start = clock.max(latest_arrival);

        let batch_tokens = plan.len() as u64 * plan.max_output_len();
        let mut service = 0.0;
        for e in map.entries() {
            let share = e.span() as f64 / num_layers;
            let device_time =
                cost.per_token_time(topo.node(e.device).performance(), batch_tokens as f64 * share);
            busy[e.device] += device_time;
            service += device_time;
        }
        service += cost.batch_comm(map, topo, plan.max_output_len());

        let end = start + service;
        log.push(start, EventKind::BatchStart { batch: k });
        log.push(end, EventKind::BatchEnd { batch: k });
        for r in &members {
            let latency = end - r.arrival_time();
            per_request.push(RequestOutcome {
                id: r.id(),
                latency,
                slo_violated: latency > r.slo(),
            });
            log.push(end, EventKind::RequestDone { request: r.id() });
        }
        clock = end;
        last_end = end;
    }

    let makespan = last_end - first_arrival;
    let n = per_request.len();
    let mean_latency = per_request.iter().map(|o| o.latency).sum::<f64>() / n as f64;
    let mut sorted: Vec<f64> = per_request.iter().map(|o| o.latency).collect();
    sorted.sort_by(f64::total_cmp);
    let p95_latency = sorted[((n as f64 * 0.95).ceil() as usize).clamp(1, n) - 1];
    let violations = per_request.iter().filter(|o| o.slo_violated).count();

    let metrics = SimMetrics {
        mean_latency,
        p95_latency,
        throughput: if makespan > 0.0 {
            total_generated_tokens as f64 / makespan
        } else {
            0.0
        },
        device_utilization: busy
            .iter()
            .map(|&b| if makespan > 0.0 { (b / makespan).min(1.0) } else { 0.0 })
            .collect(),
        slo_violation_rate: violations as f64 / n as f64,
        makespan,
        total_generated_tokens,
        total_padding_tokens,
        num_batches: plans.len(),
        per_request,
    };
    metrics.validate()?;
    Ok((metrics, log))
}

/// Named scheduler/planner pairings used in comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Optimized deployment only: helr + fifo.
    Ud,
    /// Optimized batching only: bgs + slo-odbs.
    Ub,
    /// Both optimized: helr + slo-odbs.
    Ua,
    /// Neither: bgs + fifo.
    Baseline,
}

impl Preset {
    pub fn planner(&self) -> PlannerKind {
        match self {
            Preset::Ud | Preset::Ua => PlannerKind::Helr,
            Preset::Ub | Preset::Baseline => PlannerKind::Bgs,
        }
    }

    pub fn scheduler(&self) -> SchedulerKind {
        match self {
            Preset::Ub | Preset::Ua => SchedulerKind::SloOdbs,
            Preset::Ud | Preset::Baseline => SchedulerKind::Fifo,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Ud => "ud",
            Preset::Ub => "ub",
            Preset::Ua => "ua",
            Preset::Baseline => "baseline",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ud" => Ok(Preset::Ud),
            "ub" => Ok(Preset::Ub),
            "ua" => Ok(Preset::Ua),
            "baseline" => Ok(Preset::Baseline),
            other => Err(Error::Config(format!(
                "unknown preset '{other}' (expected ud, ub, ua, or baseline)"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything an end-to-end run needs beyond the trace and hardware.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheduler: SchedulerConfig,
    pub deployer: DeployerConfig,
    pub cost: CostModel,
    pub predictor: Predictor,
    pub monitor: MonitorConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        self.deployer.validate()?;
        self.predictor.validate()?;
        self.monitor.validate()
    }
}

/// Profiles every request in arrival order.
///
/// The monitor observes each completion as it is profiled, so a
/// systematically under-predicting predictor inflates later predictions
/// within the same pass. Returns the profiled requests in arrival order.
pub fn profile_trace(
    trace: &[Request],
    predictor: &Predictor,
    monitor_cfg: &MonitorConfig,
    seed: u64,
) -> Vec<Request> {
    let mut order: Vec<&Request> = trace.iter().collect();
    order.sort_by(|a, b| {
        a.arrival_time()
            .total_cmp(&b.arrival_time())
            .then(a.id().cmp(&b.id()))
    });

    let mut monitor = MonitorState::new();
    let mut profiled = Vec::with_capacity(trace.len());
    for r in order {
        let tagged = profile(r, predictor, &monitor, request_seed(seed, r.id()));
        monitor = observe_completion(
            monitor,
            tagged.predicted_output_len().unwrap_or(0),
            r.true_output_len(),
            monitor_cfg,
        );
        profiled.push(tagged);
    }
    profiled
}

/// Wires profiler, batcher, deployer, and simulator into one run.
pub fn run_experiment(
    trace: &[Request],
    topo: &Topology,
    model: &ModelSpec,
    scheduler: SchedulerKind,
    planner: PlannerKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SimMetrics> {
    cfg.validate()?;
    let profiled = profile_trace(trace, &cfg.predictor, &cfg.monitor, seed);
    let plans = schedule(scheduler, &profiled, &cfg.scheduler)?;
    let (map, _chain_latency) = plan(planner, model, topo, &cfg.deployer)?;
    let (metrics, _log) = simulate(&plans, &profiled, &map, topo, model, &cfg.cost)?;
    Ok(metrics)
}

/// [`run_experiment`] with the preset's scheduler/planner pairing.
pub fn run_preset(
    trace: &[Request],
    topo: &Topology,
    model: &ModelSpec,
    preset: Preset,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SimMetrics> {
    run_experiment(trace, topo, model, preset.scheduler(), preset.planner(), cfg, seed)
}
