//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p servesim-cli --test acceptance -- --nocapture`
//! to see the per-criterion lines.

mod oracle;

use std::collections::HashSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use servesim_core::batcher::{
    schedule, schedule_fifo, schedule_odbs, schedule_slo_dbs, schedule_slo_odbs, SchedulerKind,
};
use servesim_core::deployer::{plan, plan_helr, PlannerKind};
use servesim_core::memory::{kv_cache_peak_bytes, plan_token_cost};
use servesim_core::profiler::{bucket_index, profile, request_seed, MonitorState, Predictor};
use servesim_core::simulator::{profile_trace, simulate, CostModel, EventKind, Preset};
use servesim_core::{
    BatchPlan, DeployerConfig, Error, ModelSpec, Request, RequestId, SchedulerConfig, SimMetrics,
    Topology,
};

use fixtures::{reference_config, reference_model, reference_topology, reference_trace, GB};

fn random_requests(rng: &mut ChaCha8Rng, n: usize) -> Vec<Request> {
    (0..n)
        .map(|i| {
            let output = rng.gen_range(1..400);
            Request::new(
                i as u64,
                rng.gen_range(0.0..60.0),
                rng.gen_range(1..256),
                output,
                rng.gen_range(1.0..350.0),
            )
            .unwrap()
            .with_prediction(output)
            .unwrap()
        })
        .collect()
}

fn random_scheduler_config(rng: &mut ChaCha8Rng) -> SchedulerConfig {
    let mut cfg = SchedulerConfig {
        w1: rng.gen_range(0.0..3.0),
        w2: rng.gen_range(0.0..3.0),
        threshold: rng.gen_range(10.0..5000.0),
        max_batch_size: rng.gen_range(1..12),
        ..Default::default()
    };
    if cfg.w1 + cfg.w2 == 0.0 {
        cfg.w1 = 1.0;
    }
    cfg
}

#[test]
fn c1_kv_formula_matches_the_big_integer_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..1000 {
        let elem = rng.gen_range(1u64..=8);
        let layers = rng.gen_range(1u32..=128);
        let hidden = rng.gen_range(1u64..=16_384);
        let batch = rng.gen_range(0u64..=512);
        let (input, output) = if case % 10 == 0 {
            // push some cases toward overflow
            (rng.gen_range(0..=u64::MAX / 2), rng.gen_range(0..=u64::MAX / 2))
        } else {
            (rng.gen_range(0u64..=8192), rng.gen_range(0u64..=8192))
        };
        let model = ModelSpec::new("kv", 1, layers, hidden, elem).unwrap();
        let expect = elem as u128
            * batch as u128
            * layers as u128
            * hidden as u128
            * (input as u128 + output as u128);
        match kv_cache_peak_bytes(&model, batch, input, output) {
            Ok(bytes) => assert_eq!(bytes as u128, expect, "case {case}"),
            Err(Error::KvSizeOverflow { .. }) => {
                assert!(expect > u64::MAX as u128, "case {case}: spurious overflow")
            }
            Err(other) => panic!("case {case}: unexpected error {other:?}"),
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1s");
    println!(
        "PASS: criterion 1 - kv sizing matches the big-integer oracle on 1000 tuples ({elapsed:.2?})"
    );
}

#[test]
fn c2_placement_matches_exhaustive_chain_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut feasible = 0;
    for case in 0..500 {
        let n = 1 + case % 4;
        let layers = rng.gen_range(4..48);
        let model = ModelSpec::new("m", rng.gen_range(4 * GB..40 * GB), layers, 4096, 4).unwrap();
        let nodes = (0..n)
            .map(|i| {
                servesim_core::DeviceNode::new(
                    i,
                    rng.gen_range(GB..32 * GB),
                    rng.gen_range(1.0..400.0),
                    300.0,
                )
                .unwrap()
            })
            .collect();
        let mut matrix = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.gen_range(0.0..1e-3);
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        let topo = Topology::new(nodes, matrix).unwrap();
        let mut cfg = DeployerConfig {
            a1: rng.gen_range(0.0..2.0),
            a2: rng.gen_range(0.0..2.0),
            kv_reserve: rng.gen_range(0..3 * GB),
            terminal_broadcast: case % 7 == 0,
            ..Default::default()
        };
        if cfg.a1 + cfg.a2 == 0.0 {
            cfg.a2 = 1.0;
        }
        match (plan_helr(&model, &topo, &cfg), oracle::brute_force_chain_best(&model, &topo, &cfg)) {
            (Ok((map, latency)), Some((_, chain))) => {
                assert_eq!(latency, chain, "case {case}: latency differs from enumeration");
                map.validate_against(&model, &topo, cfg.kv_reserve).unwrap();
                feasible += 1;
            }
            (Err(Error::Infeasible { .. }), None) => {}
            (got, want) => panic!("case {case}: feasibility diverges: {got:?} vs {want:?}"),
        }
    }
    let elapsed = started.elapsed();
    assert!(feasible >= 100, "only {feasible} feasible cases");
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    println!(
        "PASS: criterion 2 - placement equals the exhaustive chain minimum on 500 topologies, \
         {feasible} feasible ({elapsed:.2?})"
    );
}

#[test]
fn c3_batcher_partition_sortedness_and_specializations() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..1000 {
        let n = rng.gen_range(1..48);
        let requests = random_requests(&mut rng, n);
        let cfg = random_scheduler_config(&mut rng);

        for kind in [
            SchedulerKind::SloOdbs,
            SchedulerKind::SloDbs,
            SchedulerKind::Odbs,
            SchedulerKind::Fifo,
        ] {
            let plans = schedule(kind, &requests, &cfg).unwrap();
            let mut ids: Vec<RequestId> = plans
                .iter()
                .flat_map(|p| p.request_ids().iter().copied())
                .collect();
            ids.sort_unstable();
            let mut expect: Vec<RequestId> = requests.iter().map(Request::id).collect();
            expect.sort_unstable();
            assert_eq!(ids, expect, "case {case}: {kind} does not partition the input");
        }

        let plans = schedule_slo_odbs(&requests, &cfg).unwrap();
        let slo_of = |id: RequestId| requests.iter().find(|r| r.id() == id).unwrap().slo();
        let mins: Vec<f64> = plans
            .iter()
            .map(|p| p.request_ids().iter().map(|&id| slo_of(id)).fold(f64::INFINITY, f64::min))
            .collect();
        assert!(
            mins.windows(2).all(|w| w[0] <= w[1]),
            "case {case}: per-batch min SLOs decrease"
        );

        let forced_w1 = SchedulerConfig { w1: 0.0, ..cfg.clone() };
        assert_eq!(
            schedule_slo_odbs(&requests, &forced_w1).unwrap(),
            schedule_slo_dbs(&requests, &cfg).unwrap(),
            "case {case}: w1=0 diverges from the slo-dbs specialization"
        );
        let forced_w2 = SchedulerConfig { w2: 0.0, ..cfg.clone() };
        assert_eq!(
            schedule_slo_odbs(&requests, &forced_w2).unwrap(),
            schedule_odbs(&requests, &cfg).unwrap(),
            "case {case}: w2=0 diverges from the odbs specialization"
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30s");
    println!(
        "PASS: criterion 3 - partition, sortedness, and specializations hold on 1000 request sets \
         ({elapsed:.2?})"
    );
}

/// Requests with predicted outputs {5, 5, 50, 50} and a threshold that splits
/// across the length jump: two two-member batches, 110 generated tokens
/// against 200 in a single batch.
fn heterogeneous_instance() -> (Vec<Request>, SchedulerConfig) {
    let requests: Vec<Request> = [5u64, 5, 50, 50]
        .iter()
        .enumerate()
        .map(|(i, &len)| {
            Request::new(i as u64, 0.0, 8, len, 10.0)
                .unwrap()
                .with_prediction(len)
                .unwrap()
        })
        .collect();
    let cfg = SchedulerConfig {
        w1: 0.001,
        w2: 1.0,
        threshold: 40.0,
        max_batch_size: 8,
        ..Default::default()
    };
    (requests, cfg)
}

#[test]
fn c4_scheduled_tokens_never_exceed_the_single_batch() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst_gap = 0.0f64;
    let mut gap_sum = 0.0f64;
    for case in 0..500 {
        let n = rng.gen_range(1..=8);
        let requests = random_requests(&mut rng, n);
        let cfg = random_scheduler_config(&mut rng);
        let plans = schedule_slo_odbs(&requests, &cfg).unwrap();
        let (scheduled, _) = plan_token_cost(&plans, &requests).unwrap();

        let single = schedule_fifo(&requests, requests.len()).unwrap();
        assert_eq!(single.len(), 1);
        let (single_tokens, _) = plan_token_cost(&single, &requests).unwrap();
        assert!(
            scheduled <= single_tokens,
            "case {case}: scheduled {scheduled} exceeds single batch {single_tokens}"
        );

        let lens: Vec<u64> = requests
            .iter()
            .map(|r| r.predicted_output_len().unwrap())
            .collect();
        let optimal = oracle::min_partition_tokens(&lens);
        assert!(optimal <= scheduled);
        let gap = (scheduled - optimal) as f64 / optimal as f64;
        worst_gap = worst_gap.max(gap);
        gap_sum += gap;
    }

    // Constructed heterogeneous instance with a strict win: 110 vs 200.
    let (requests, cfg) = heterogeneous_instance();
    let plans = schedule_slo_odbs(&requests, &cfg).unwrap();
    let (scheduled, _) = plan_token_cost(&plans, &requests).unwrap();
    assert_eq!(scheduled, 110);
    let single = schedule_fifo(&requests, 4).unwrap();
    let (single_tokens, _) = plan_token_cost(&single, &requests).unwrap();
    assert_eq!(single_tokens, 200);
    assert!(scheduled < single_tokens);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60s");
    println!(
        "PASS: criterion 4 - token dominance on 500 sets, strict win 110 vs 200; \
         gap to optimal partition: mean {:.3}, worst {:.3} ({elapsed:.2?})",
        gap_sum / 500.0,
        worst_gap
    );
}

struct GridRun {
    seed: u64,
    preset: Preset,
    metrics: SimMetrics,
}

fn preset_grid() -> Vec<GridRun> {
    let topo = reference_topology();
    let model = reference_model();
    let cfg = reference_config();
    let mut runs = Vec::new();
    for seed in 0..20 {
        let trace = reference_trace(seed);
        for preset in [Preset::Ua, Preset::Ub, Preset::Ud, Preset::Baseline] {
            let metrics =
                servesim_core::simulator::run_preset(&trace, &topo, &model, preset, &cfg, seed)
                    .unwrap();
            runs.push(GridRun { seed, preset, metrics });
        }
    }
    runs
}

fn grid_metric(runs: &[GridRun], seed: u64, preset: Preset) -> &SimMetrics {
    &runs
        .iter()
        .find(|r| r.seed == seed && r.preset == preset)
        .unwrap()
        .metrics
}

#[test]
fn c5_preset_orderings_over_seeded_traces() {
    let started = Instant::now();
    let runs = preset_grid();

    let mut latency_wins = 0;
    let mut violation_chains = 0;
    for seed in 0..20 {
        let ua = grid_metric(&runs, seed, Preset::Ua);
        let ub = grid_metric(&runs, seed, Preset::Ub);
        let baseline = grid_metric(&runs, seed, Preset::Baseline);
        if ua.mean_latency <= baseline.mean_latency {
            latency_wins += 1;
        }
        if ua.slo_violation_rate <= ub.slo_violation_rate
            && ub.slo_violation_rate <= baseline.slo_violation_rate
        {
            violation_chains += 1;
        }
    }
    assert!(
        latency_wins >= 19,
        "ua mean latency beat baseline on only {latency_wins}/20 traces (need 95%)"
    );
    assert!(
        violation_chains >= 18,
        "violation ordering held on only {violation_chains}/20 traces (need 90%)"
    );

    // Deployment subset minimality: the optimizing planner never uses more
    // devices than the greedy baseline.
    let topo = reference_topology();
    let model = reference_model();
    let deployer = reference_config().deployer;
    let (helr_map, _) = plan(PlannerKind::Helr, &model, &topo, &deployer).unwrap();
    let (bgs_map, _) = plan(PlannerKind::Bgs, &model, &topo, &deployer).unwrap();
    assert!(helr_map.device_count() <= bgs_map.device_count());

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}, budget 2min");
    println!(
        "PASS: criterion 5 - latency ordering {latency_wins}/20, violation ordering \
         {violation_chains}/20, device count {} <= {} ({elapsed:.2?})",
        helr_map.device_count(),
        bgs_map.device_count()
    );
}

#[test]
fn c6_profiler_guarantees() {
    let started = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..100_000 {
        let true_len = rng.gen_range(1u64..100_000);
        let width = rng.gen_range(1u64..512);
        let request = Request::new(0, 0.0, 8, true_len, 10.0).unwrap();
        let predictor = Predictor::Bucketed { bucket_width: width };
        let predicted = profile(&request, &predictor, &MonitorState::new(), 0)
            .predicted_output_len()
            .unwrap();
        assert!(predicted >= true_len, "bucketed under-predicted {true_len} as {predicted}");
    }

    let error_rate = 0.0049;
    let width = 50;
    let predictor = Predictor::Noisy { error_rate, bucket_width: width };
    let draws = 100_000u64;
    let mut hits = 0u64;
    for i in 0..draws {
        let true_len = 1 + (i * 7919) % 4000;
        let request = Request::new(i, 0.0, 8, true_len, 10.0).unwrap();
        let predicted = profile(&request, &predictor, &MonitorState::new(), request_seed(42, i))
            .predicted_output_len()
            .unwrap();
        if bucket_index(predicted, width) == bucket_index(true_len, width) {
            hits += 1;
        }
    }
    let accuracy = hits as f64 / draws as f64;
    let expected = 1.0 - error_rate;
    let standard_error = (error_rate * expected / draws as f64).sqrt();
    assert!(
        (accuracy - expected).abs() <= 3.0 * standard_error,
        "accuracy {accuracy:.5} outside {expected:.5} +/- {:.5}",
        3.0 * standard_error
    );

    let elapsed = started.elapsed();
    println!(
        "PASS: criterion 6 - bucketed never under-predicts; noisy accuracy {accuracy:.4} within \
         3 standard errors of {expected:.4} ({elapsed:.2?})"
    );
}

#[test]
fn c7_simulator_conservation_on_experiment_runs() {
    let started = Instant::now();
    let topo = reference_topology();
    let model = reference_model();
    let cfg = reference_config();

    let mut checked = 0;
    for seed in 0..20u64 {
        let trace = reference_trace(seed);
        for preset in [Preset::Ua, Preset::Ub, Preset::Ud, Preset::Baseline] {
            let profiled = profile_trace(&trace, &cfg.predictor, &cfg.monitor, seed);
            let plans = schedule(preset.scheduler(), &profiled, &cfg.scheduler).unwrap();
            let (map, _) = plan(preset.planner(), &model, &topo, &cfg.deployer).unwrap();
            let (metrics, log) =
                simulate(&plans, &profiled, &map, &topo, &model, &cfg.cost).unwrap();

            // every request completes exactly once
            let mut done: Vec<RequestId> = log
                .events()
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::RequestDone { request } => Some(request),
                    _ => None,
                })
                .collect();
            done.sort_unstable();
            let mut expect: Vec<RequestId> = trace.iter().map(Request::id).collect();
            expect.sort_unstable();
            assert_eq!(done, expect, "seed {seed} {preset}: completions diverge");
            assert_eq!(done.len(), done.iter().collect::<HashSet<_>>().len());

            // token accounting is exact
            let independent_tokens: u64 = plans
                .iter()
                .map(|p: &BatchPlan| p.len() as u64 * p.max_output_len())
                .sum();
            assert_eq!(metrics.total_generated_tokens, independent_tokens);
            assert_eq!(
                metrics.throughput.to_bits(),
                (metrics.total_generated_tokens as f64 / metrics.makespan).to_bits()
            );
            assert_eq!(
                metrics.throughput * metrics.makespan,
                metrics.total_generated_tokens as f64,
                "seed {seed} {preset}: throughput x makespan != tokens"
            );
            checked += 1;
        }
    }

    // the constructed heterogeneous instance, end to end on one device
    let (requests, sched_cfg) = heterogeneous_instance();
    let plans = schedule_slo_odbs(&requests, &sched_cfg).unwrap();
    let one = Topology::new(
        vec![servesim_core::DeviceNode::new(0, 64 * GB, 100.0, 300.0).unwrap()],
        vec![vec![0.0]],
    )
    .unwrap();
    let small_model = ModelSpec::new("m", 8 * GB, 8, 1024, 4).unwrap();
    let (map, _) = plan(PlannerKind::Bgs, &small_model, &one, &DeployerConfig::default()).unwrap();
    let (metrics, _) =
        simulate(&plans, &requests, &map, &one, &small_model, &CostModel::default()).unwrap();
    assert_eq!(metrics.total_generated_tokens, 110);
    assert_eq!(
        metrics.throughput * metrics.makespan,
        metrics.total_generated_tokens as f64
    );
    checked += 1;

    let elapsed = started.elapsed();
    println!("PASS: criterion 7 - conservation held on {checked} runs ({elapsed:.2?})");
}

#[test]
fn c8_round_trips_and_bit_identical_cli() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // trace round trip
    let trace = reference_trace(3);
    let trace_path = dir.path().join("trace.jsonl");
    servesim_cli::io::trace::save_trace(&trace_path, &trace).unwrap();
    assert_eq!(servesim_cli::io::trace::load_trace(&trace_path).unwrap(), trace);

    // topology round trip
    let topo = reference_topology();
    let topo_path = dir.path().join("topo.json");
    servesim_cli::io::topology::save_topology(&topo_path, &topo).unwrap();
    assert_eq!(servesim_cli::io::topology::load_topology(&topo_path).unwrap(), topo);

    // model round trip
    let model = reference_model();
    let model_path = dir.path().join("model.json");
    servesim_cli::io::model::save_model(&model_path, &model).unwrap();
    assert_eq!(servesim_cli::io::model::load_model(&model_path).unwrap(), model);

    // device map round trip
    let (map, _) = plan(PlannerKind::Helr, &model, &topo, &reference_config().deployer).unwrap();
    let map_path = dir.path().join("map.json");
    servesim_cli::io::device_map::save_device_map(&map_path, &map).unwrap();
    assert_eq!(servesim_cli::io::device_map::load_device_map(&map_path).unwrap(), map);

    // metrics round trip
    let metrics = servesim_core::simulator::run_preset(
        &trace,
        &topo,
        &model,
        Preset::Ua,
        &reference_config(),
        3,
    )
    .unwrap();
    let metrics_path = dir.path().join("metrics.json");
    servesim_cli::io::metrics::save_metrics(&metrics_path, &metrics).unwrap();
    assert_eq!(servesim_cli::io::metrics::load_metrics(&metrics_path).unwrap(), metrics);

    // identical CLI invocations are bit-identical
    let config_path = dir.path().join("cfg.toml");
    std::fs::write(
        &config_path,
        "[scheduler]\nthreshold = 4000.0\nmax_batch_size = 8\n\n[deployer]\nkv_reserve = 8000000000\n",
    )
    .unwrap();
    let run = |args: &[&str]| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_servesim"))
            .args(args)
            .current_dir(dir.path())
            .output()
            .expect("spawn servesim");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let gen_args = ["gen", "--count", "200", "--seed", "3", "--arrival", "poisson:20.0"];
    assert_eq!(run(&gen_args), run(&gen_args));
    let sim_args = [
        "simulate",
        "--trace", "trace.jsonl",
        "--topology", "topo.json",
        "--model", "model.json",
        "--preset", "ua",
        "--config", "cfg.toml",
        "--seed", "3",
    ];
    let first = run(&sim_args);
    assert_eq!(first, run(&sim_args));
    assert!(!first.is_empty());

    let elapsed = started.elapsed();
    println!(
        "PASS: criterion 8 - load/emit round-trips are identity and reruns are bit-identical \
         ({elapsed:.2?})"
    );
}
