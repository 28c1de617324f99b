//! Layer placement across heterogeneous devices.
//!
//! The planner enumerates device subsets and, within each, runs a bitmask
//! dynamic program over visit orders: `dp[mask][i]` is the minimal chain
//! latency over orders that visit exactly the devices in `mask` and end at
//! device `i`. Layers are split greedily along the visit order, so the number
//! of layers already placed depends only on the visited set, never on the
//! order — which is what makes the (mask, last-device) state sufficient.
//!
//! The candidate objective for a completed chain is
//! `a1 * chain_latency + a2 * (subset_size / device_count)`; the second term
//! penalizes spreading a model over more devices than it needs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeployerConfig, DeviceId, DeviceMap, DeviceNode, MapEntry, ModelSpec, Topology};

/// Subset enumeration is exponential; planning stops here.
pub const MAX_DEVICES: usize = 16;

/// Planner selected by name in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Helr,
    He,
    Lr,
    Bgs,
}

impl PlannerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Helr => "helr",
            PlannerKind::He => "he",
            PlannerKind::Lr => "lr",
            PlannerKind::Bgs => "bgs",
        }
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "helr" => Ok(PlannerKind::Helr),
            "he" => Ok(PlannerKind::He),
            "lr" => Ok(PlannerKind::Lr),
            "bgs" => Ok(PlannerKind::Bgs),
            other => Err(Error::Config(format!(
                "unknown planner '{other}' (expected helr, he, lr, or bgs)"
            ))),
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Seconds device `device` spends pushing a batch through `layers_assigned`
/// of its layers: `p * layers * bytes_per_layer / performance`.
pub fn compute_cost(device: &DeviceNode, layers_assigned: u32, m: f64, p: f64) -> Result<f64> {
    if device.performance() <= 0.0 {
        return Err(Error::Config(format!(
            "device {} has non-positive performance {}",
            device.id(),
            device.performance()
        )));
    }
    Ok(p * layers_assigned as f64 * m / device.performance())
}

/// Most layers the device can host once the KV reserve is set aside.
pub fn max_layers(device: &DeviceNode, m: f64, kv_reserve: u64, total_layers: u32) -> u32 {
    if device.memory() <= kv_reserve {
        return 0;
    }
    let usable = (device.memory() - kv_reserve) as f64;
    let cap = (usable / m).floor();
    if cap >= total_layers as f64 {
        total_layers
    } else {
        cap as u32
    }
}

/// Chain-latency table over (visited-set, last-device) states, with
/// back-pointers for reconstructing the winning visit order.
#[derive(Debug, Clone)]
pub struct DpTable {
    /// `dp[mask][i]`: minimal latency over orders visiting `mask`, ending at `i`.
    pub dp: Vec<Vec<f64>>,
    /// Predecessor state of the minimal chain, `None` at singletons.
    pub parent: Vec<Vec<Option<(usize, usize)>>>,
}

struct Planning<'a> {
    topo: &'a Topology,
    caps: Vec<u32>,
    /// Total assignable layers over each visited set, clamped at the model.
    assigned: Vec<u64>,
    num_layers: u32,
    m: f64,
    p: f64,
}

impl<'a> Planning<'a> {
    fn new(model: &ModelSpec, topo: &'a Topology, cfg: &DeployerConfig) -> Result<Self> {
        let n = topo.len();
        let num_layers = model.num_layers();
        if n > MAX_DEVICES {
            return Err(Error::TopologyTooLarge { got: n, max: MAX_DEVICES });
        }
        let m = model.memory_per_layer();
        let caps: Vec<u32> = topo
            .nodes()
            .iter()
            .map(|d| max_layers(d, m, cfg.kv_reserve, num_layers))
            .collect();
        let capacity: u64 = caps.iter().map(|&c| c as u64).sum();
        if capacity < num_layers as u64 {
            return Err(Error::Infeasible {
                required: num_layers,
                capacity,
                shortfall: num_layers as u64 - capacity,
            });
        }
        let mut assigned = vec![0u64; 1 << n];
        for mask in 1usize..(1 << n) {
            let low = mask.trailing_zeros() as usize;
            let sum = assigned[mask & (mask - 1)] + caps[low] as u64;
            assigned[mask] = sum;
        }
        for slot in assigned.iter_mut() {
            *slot = (*slot).min(num_layers as u64);
        }
        Ok(Planning { topo, caps, assigned, num_layers, m, p: cfg.p })
    }

    /// Layers the next visited device takes, given the already-visited set.
    fn take_after(&self, mask: usize, device: DeviceId) -> u32 {
        let remaining = self.num_layers as u64 - self.assigned[mask];
        remaining.min(self.caps[device] as u64) as u32
    }

    fn cost(&self, device: DeviceId, layers: u32) -> Result<f64> {
        compute_cost(self.topo.node(device), layers, self.m, self.p)
    }

    fn build_table(&self) -> Result<DpTable> {
        let n = self.topo.len();
        let mut dp = vec![vec![f64::INFINITY; n]; 1 << n];
        let mut parent = vec![vec![None; n]; 1 << n];
        for i in 0..n {
            dp[1 << i][i] = self.cost(i, self.take_after(0, i))?;
        }
        for mask in 1usize..(1 << n) {
            for i in 0..n {
                if mask & (1 << i) == 0 || !dp[mask][i].is_finite() {
                    continue;
                }
                for j in 0..n {
                    if mask & (1 << j) != 0 {
                        continue;
                    }
                    let next = mask | (1 << j);
                    let candidate = dp[mask][i]
                        + self.topo.link_latency(i, j)
                        + self.cost(j, self.take_after(mask, j))?;
                    if candidate < dp[next][j] {
                        dp[next][j] = candidate;
                        parent[next][j] = Some((mask, i));
                    }
                }
            }
        }
        Ok(DpTable { dp, parent })
    }

    /// Literal final-device broadcast term: one link to every subset member
    /// plus one copy of the final device's compute term per member.
    fn terminal_sum(&self, mask: usize, last: DeviceId) -> Result<f64> {
        let last_layers = self.take_after(mask & !(1 << last), last);
        let compute = self.cost(last, last_layers)?;
        let mut sum = 0.0;
        for j in 0..self.topo.len() {
            if mask & (1 << j) != 0 {
                sum += self.topo.link_latency(last, j) + compute;
            }
        }
        Ok(sum)
    }

    /// Rebuilds the visit order ending at `(mask, last)` and splits layers
    /// greedily along it into a contiguous device map.
    fn decode(&self, table: &DpTable, mask: usize, last: DeviceId) -> Result<DeviceMap> {
        let mut order = vec![last];
        let mut state = (mask, last);
        while let Some(prev) = table.parent[state.0][state.1] {
            order.push(prev.1);
            state = prev;
        }
        order.reverse();

        let mut entries = Vec::new();
        let mut placed = 0u32;
        for device in order {
            let take = (self.num_layers - placed).min(self.caps[device]);
            if take == 0 {
                continue;
            }
            entries.push(MapEntry {
                device,
                layer_start: placed,
                layer_end: placed + take - 1,
            });
            placed += take;
        }
        DeviceMap::new(entries, self.num_layers)
    }
}

/// Masks ordered by subset size, then value: the canonical tie-break order.
fn masks_by_size(n: usize) -> Vec<usize> {
    let mut masks: Vec<usize> = (1..(1usize << n)).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    masks
}

/// Optimal placement under the weighted latency/utilization objective.
///
/// Returns the device map and the chain-latency component of the winning
/// objective, in seconds.
pub fn plan_helr(
    model: &ModelSpec,
    topo: &Topology,
    cfg: &DeployerConfig,
) -> Result<(DeviceMap, f64)> {
    cfg.validate()?;
    let planning = Planning::new(model, topo, cfg)?;
    let table = planning.build_table()?;
    let n = topo.len();

    let mut best: Option<(f64, f64, usize, DeviceId)> = None;
    for mask in masks_by_size(n) {
        // Eq-style feasibility: the subset must be able to hold every layer.
        if planning.assigned[mask] < planning.num_layers as u64 {
            continue;
        }
        for i in 0..n {
            if mask & (1 << i) == 0 || !table.dp[mask][i].is_finite() {
                continue;
            }
            let mut chain_latency = table.dp[mask][i];
            if cfg.terminal_broadcast {
                chain_latency += planning.terminal_sum(mask, i)?;
            }
            let objective =
                cfg.a1 * chain_latency + cfg.a2 * (mask.count_ones() as f64 / n as f64);
            if best.is_none_or(|(b, _, _, _)| objective < b) {
                best = Some((objective, chain_latency, mask, i));
            }
        }
    }

    let (_, chain_latency, mask, last) = best.ok_or(Error::Infeasible {
        required: model.num_layers(),
        capacity: 0,
        shortfall: model.num_layers() as u64,
    })?;
    let map = planning.decode(&table, mask, last)?;
    map.validate_against(model, topo, cfg.kv_reserve)?;
    Ok((map, chain_latency))
}

/// Utilization-first specialization: the latency weight is dropped, so the
/// smallest feasible subset wins and latency only breaks ties.
pub fn plan_he(
    model: &ModelSpec,
    topo: &Topology,
    cfg: &DeployerConfig,
) -> Result<(DeviceMap, f64)> {
    let cfg = DeployerConfig { a1: 0.0, a2: 1.0, ..cfg.clone() };
    plan_helr(model, topo, &cfg)
}

/// Latency-first specialization: latency outweighs utilization ten to one.
pub fn plan_lr(
    model: &ModelSpec,
    topo: &Topology,
    cfg: &DeployerConfig,
) -> Result<(DeviceMap, f64)> {
    let cfg = DeployerConfig { a1: 10.0, a2: 1.0, ..cfg.clone() };
    plan_helr(model, topo, &cfg)
}

/// Greedy baseline: fill devices in descending-memory order (ties by id)
/// until every layer is placed.
pub fn plan_bgs(model: &ModelSpec, topo: &Topology, kv_reserve: u64) -> Result<DeviceMap> {
    let num_layers = model.num_layers();
    let m = model.memory_per_layer();
    let mut order: Vec<DeviceId> = (0..topo.len()).collect();
    order.sort_by(|&a, &b| {
        topo.node(b)
            .memory()
            .cmp(&topo.node(a).memory())
            .then(a.cmp(&b))
    });

    let mut entries = Vec::new();
    let mut placed = 0u32;
    let mut capacity = 0u64;
    for device in order {
        let cap = max_layers(topo.node(device), m, kv_reserve, num_layers);
        capacity += cap as u64;
        let take = (num_layers - placed).min(cap);
        if take == 0 {
            continue;
        }
        entries.push(MapEntry {
            device,
            layer_start: placed,
            layer_end: placed + take - 1,
        });
        placed += take;
        if placed == num_layers {
            break;
        }
    }
    if placed < num_layers {
        return Err(Error::Infeasible {
            required: num_layers,
            capacity,
            shortfall: num_layers as u64 - capacity.min(num_layers as u64),
        });
    }
    let map = DeviceMap::new(entries, num_layers)?;
    map.validate_against(model, topo, kv_reserve)?;
    Ok(map)
}

/// Chain latency of an existing map under the same cost terms the planner
/// uses; exposed so baseline maps report comparable numbers.
pub fn map_chain_latency(
    map: &DeviceMap,
    topo: &Topology,
    model: &ModelSpec,
    p: f64,
) -> Result<f64> {
    let m = model.memory_per_layer();
    let mut latency = 0.0;
    for (k, e) in map.entries().iter().enumerate() {
        if k > 0 {
            latency += topo.link_latency(map.entries()[k - 1].device, e.device);
        }
        latency += compute_cost(topo.node(e.device), e.span(), m, p)?;
    }
    Ok(latency)
}

/// Dispatches on the configured planner name. Every arm reports the map and
/// its chain latency.
pub fn plan(
    kind: PlannerKind,
    model: &ModelSpec,
    topo: &Topology,
    cfg: &DeployerConfig,
) -> Result<(DeviceMap, f64)> {
    match kind {
        PlannerKind::Helr => plan_helr(model, topo, cfg),
        PlannerKind::He => plan_he(model, topo, cfg),
        PlannerKind::Lr => plan_lr(model, topo, cfg),
        PlannerKind::Bgs => {
            let map = plan_bgs(model, topo, cfg.kv_reserve)?;
            let latency = map_chain_latency(&map, topo, model, cfg.p)?;
            Ok((map, latency))
        }
    }
}
