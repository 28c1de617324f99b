//! SLO-aware batch scheduling, heterogeneous layer placement, and
//! trace-driven simulation for LLM inference serving.
//!
//! The pipeline is: the [`profiler`] tags each request with a predicted
//! output length, the [`batcher`] groups profiled requests into padded
//! batches, the [`deployer`] maps model layers onto devices, and the
//! [`simulator`] replays the plans over the map to produce comparable
//! latency, throughput, utilization, and SLO-violation numbers. The
//! [`memory`] module provides the KV-cache sizing and token accounting the
//! other stages reason with.

pub mod batcher;
pub mod deployer;
mod error;
pub mod memory;
pub mod model;
pub mod profiler;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    BatchPlan, DeployerConfig, DeviceId, DeviceMap, DeviceNode, MapEntry, ModelSpec,
    OutputTermMode, Request, RequestId, RequestOutcome, SchedulerConfig, SimMetrics, Topology,
    DEFAULT_KV_BYTES_PER_ELEM,
};
