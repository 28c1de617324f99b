//! Independent reference computations: an exhaustive chain enumerator for
//! placement and an exhaustive partition enumerator for batch token costs.
//! Neither shares search logic with the implementations they check.

use servesim_core::{DeployerConfig, DeviceId, ModelSpec, Topology};

fn permutations(items: &[DeviceId]) -> Vec<Vec<DeviceId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Minimal `(objective, chain latency)` over every device subset and every
/// visit order, with the greedy layer split; `None` when no subset fits.
pub fn brute_force_chain_best(
    model: &ModelSpec,
    topo: &Topology,
    cfg: &DeployerConfig,
) -> Option<(f64, f64)> {
    let n = topo.len();
    let m = model.memory_per_layer();
    let num_layers = model.num_layers();
    let caps: Vec<u32> = topo
        .nodes()
        .iter()
        .map(|d| {
            if d.memory() <= cfg.kv_reserve {
                return 0;
            }
            let cap = ((d.memory() - cfg.kv_reserve) as f64 / m).floor();
            if cap >= num_layers as f64 {
                num_layers
            } else {
                cap as u32
            }
        })
        .collect();

    let mut best: Option<(f64, f64)> = None;
    for mask in 1usize..(1 << n) {
        let members: Vec<DeviceId> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let capacity: u64 = members.iter().map(|&i| caps[i] as u64).sum();
        if capacity < num_layers as u64 {
            continue;
        }
        for order in permutations(&members) {
            let mut remaining = num_layers;
            let mut latency = 0.0;
            let mut last_layers = 0u32;
            for (k, &d) in order.iter().enumerate() {
                let take = remaining.min(caps[d]);
                if k > 0 {
                    latency += topo.link_latency(order[k - 1], d);
                }
                latency += cfg.p * take as f64 * m / topo.node(d).performance();
                remaining -= take;
                last_layers = take;
            }
            if remaining > 0 {
                continue;
            }
            let mut chain = latency;
            if cfg.terminal_broadcast {
                let last = *order.last().unwrap();
                let compute = cfg.p * last_layers as f64 * m / topo.node(last).performance();
                let mut extra = 0.0;
                for &j in &members {
                    extra += topo.link_latency(last, j) + compute;
                }
                chain += extra;
            }
            let objective = cfg.a1 * chain + cfg.a2 * (members.len() as f64 / n as f64);
            if best.is_none_or(|(b, _)| objective < b) {
                best = Some((objective, chain));
            }
        }
    }
    best
}

/// Minimal generated-token total over every partition of the lengths,
/// by exhaustive enumeration (each item joins an existing group or opens a
/// new one).
pub fn min_partition_tokens(lens: &[u64]) -> u64 {
    fn recurse(lens: &[u64], idx: usize, groups: &mut Vec<(u64, u64)>, best: &mut u64) {
        if idx == lens.len() {
            let total: u64 = groups.iter().map(|&(count, max)| count * max).sum();
            *best = (*best).min(total);
            return;
        }
        let len = lens[idx];
        for g in 0..groups.len() {
            let saved = groups[g];
            groups[g] = (saved.0 + 1, saved.1.max(len));
            recurse(lens, idx + 1, groups, best);
            groups[g] = saved;
        }
        groups.push((1, len));
        recurse(lens, idx + 1, groups, best);
        groups.pop();
    }

    if lens.is_empty() {
        return 0;
    }
    let mut best = u64::MAX;
    recurse(lens, 0, &mut Vec::new(), &mut best);
    best
}
