//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use servesim_core::{DeviceNode, ModelSpec, Request, Topology};

const GB: u64 = 1_000_000_000;

/// Profiled synthetic requests with spread SLOs and output lengths.
pub fn synthetic_requests(n: usize, seed: u64) -> Vec<Request> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clock = 0.0;
    (0..n)
        .map(|i| {
            clock += rng.gen_range(0.0..2.0);
            let output = rng.gen_range(1..256);
            Request::new(i as u64, clock, rng.gen_range(8..256), output, rng.gen_range(1.0..350.0))
                .unwrap()
                .with_prediction(output)
                .unwrap()
        })
        .collect()
}

/// Fully connected topology with mixed memory and performance.
pub fn mixed_topology(devices: usize, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..devices)
        .map(|i| {
            DeviceNode::new(i, rng.gen_range(12 * GB..32 * GB), rng.gen_range(10.0..40.0), 300.0)
                .unwrap()
        })
        .collect();
    let mut matrix = vec![vec![0.0; devices]; devices];
    for i in 0..devices {
        for j in (i + 1)..devices {
            let v = rng.gen_range(1e-6..1e-4);
            matrix[i][j] = v;
            matrix[j][i] = v;
        }
    }
    Topology::new(nodes, matrix).unwrap()
}

pub fn serving_model() -> ModelSpec {
    ModelSpec::new("bench-26g", 26 * GB, 40, 4096, 4).unwrap()
}
