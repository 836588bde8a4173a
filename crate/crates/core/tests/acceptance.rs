//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use cascadehg::features::{augment_cascade, deepwalk_embed, DeepWalkConfig};
use cascadehg::hypergraph::{build_hypergraph, BuildOptions, UserClusters};
use cascadehg::ingest::{build_social_graph, user_to_cascades, UserId};
use cascadehg::model::{
    classification_metrics, hyperconv_forward, loss_and_grads, DropoutMasks, HyperConvParams, ModelParams,
    Propagation, TrainConfig,
};
use cascadehg::partition::{
    imbalance, partition_multilevel, partition_multilevel_traced, Partition, WeightedGraph,
};
use cascadehg::pipeline::{ablation, run_pipeline, Axis, RunConfig};
use cascadehg::synth::{generate_synthetic, SyntheticSpec};
use cascadehg::seed;
use common::*;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn synthetic_config(dir: &Path, spec: &SyntheticSpec) -> Result<RunConfig, String> {
    let files = generate_synthetic(spec, &dir.join("data")).map_err(err)?;
    Ok(RunConfig {
        interactions: files.interactions,
        cascades: files.cascades,
        users: Some(files.users),
        workdir: dir.join("work"),
        ..RunConfig::default()
    })
}

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        n_users: 600,
        n_cascades: 120,
        p_intra: 0.04,
        p_inter: 0.001,
        ..SyntheticSpec::default()
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(err)?;
    let mut cfg = synthetic_config(dir.path(), &SyntheticSpec::default())?;
    cfg.k_clusters = 4;
    cfg.trials = 5;
    let report = run_pipeline(&cfg).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let row = &report.rows[0];
    let (f1, base) = (row.f1_weighted.mean, row.baseline_f1.mean);
    let detail = format!(
        "F1 {:.4}±{:.4}, baseline {:.4}, {:.1}s",
        f1, row.f1_weighted.std, base, elapsed
    );
    ensure(row.trials.len() == 5, "expected 5 trials")?;
    ensure(f1 >= 0.90, format!("F1 below 0.90: {detail}"))?;
    ensure(f1 >= base + 0.25, format!("F1 not 0.25 above baseline: {detail}"))?;
    ensure(elapsed < 120.0, format!("too slow: {detail}"))?;
    Ok(detail)
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    for inst in 0..5u64 {
        let mut rng = seed::rng(seed::derive_indexed(11, "grad", inst));
        let n = rng.random_range(6..12);
        let h = random_hypergraph(n, 4, &mut rng);
        let d = rng.random_range(2..5);
        let x = random_matrix(n, d, &mut rng);
        let cfg = TrainConfig {
            hidden_dim: 4,
            mlp_dims: [5, 3],
            num_conv_layers: 1 + inst as usize % 2,
            ..TrainConfig::default()
        };
        let mut params = ModelParams::init(d, &cfg, &mut rng);
        for t in params.tensors_mut() {
            *t += random_matrix(t.nrows(), t.ncols(), &mut rng) * 0.5;
        }
        let prop = Propagation::new(&h);
        let classes: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let train: Vec<usize> = (0..n).collect();
        let masks = DropoutMasks::sample(n, &params, 0.3, &mut rng);
        let (_, grads) = loss_and_grads(&x, &prop, &params, &classes, &train, Some(&masks)).map_err(err)?;
        let loss = |p: &ModelParams| loss_and_grads(&x, &prop, p, &classes, &train, Some(&masks)).unwrap().0;
        let delta = 1e-5;
        let grad_tensors = grads.tensors();
        for t in 0..grad_tensors.len() {
            let (rows, cols) = grad_tensors[t].shape();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = params.clone();
                    plus.tensors_mut()[t][(r, c)] += delta;
                    let mut minus = params.clone();
                    minus.tensors_mut()[t][(r, c)] -= delta;
                    let numeric = (loss(&plus) - loss(&minus)) / (2.0 * delta);
                    let analytic = grad_tensors[t][(r, c)];
                    let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                    worst = worst.max(rel);
                }
            }
        }
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.3e}"))?;
    Ok(format!("max relative error {worst:.3e}"))
}

fn sparse_dense() -> Outcome {
    let mut worst = 0.0f64;
    for inst in 0..20u64 {
        let mut rng = seed::rng(seed::derive_indexed(12, "conv", inst));
        let n = rng.random_range(1..=50);
        let h = random_hypergraph(n, 12, &mut rng);
        let (d, out) = (rng.random_range(1..8), rng.random_range(1..8));
        let x = random_matrix(n, d, &mut rng);
        let params = HyperConvParams {
            theta: random_matrix(d, out, &mut rng),
            bias: random_matrix(1, out, &mut rng),
        };
        let sparse = hyperconv_forward(&x, &Propagation::new(&h), &params).map_err(err)?;
        let dense = dense_conv(&h, &x, &params.theta, &params.bias);
        worst = worst.max((sparse - dense).amax());
    }
    ensure(worst < 1e-10, format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.3e}"))
}

fn partitioner() -> Outcome {
    let bridge = WeightedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
    let p = partition_multilevel(&bridge, 2, 0.03, 0).map_err(err)?;
    ensure(p.edge_cut == 1, format!("bridge cut {}", p.edge_cut))?;

    let mut worst_imb = 0.0f64;
    let mut passes = 0;
    for inst in 0..20u64 {
        let mut rng = seed::rng(seed::derive_indexed(13, "part", inst));
        let n = 8 * rng.random_range(40..100);
        let edges = if inst % 2 == 0 {
            erdos_renyi(n, 6.0 / n as f64, &mut rng)
        } else {
            planted(n, 6, 12.0 / n as f64, 1.0 / n as f64, &mut rng)
        };
        let g = WeightedGraph::from_edges(n, &edges);
        for k in [2, 4, 8] {
            let (p, trace) = partition_multilevel_traced(&g, k, 0.03, inst).map_err(err)?;
            let imb = imbalance(&p.assignment, k);
            worst_imb = worst_imb.max(imb);
            ensure(imb <= 0.03 + 1e-12, format!("instance {inst} k={k}: imbalance {imb:.4}"))?;
            for level in &trace.levels {
                for &(before, after) in &level.passes {
                    passes += 1;
                    ensure(after <= before, format!("FM pass raised cut {before} -> {after}"))?;
                }
            }
        }
    }
    Ok(format!("bridge cut 1, max imbalance {worst_imb:.4}, {passes} FM passes non-increasing"))
}

fn hypergraph_oracle() -> Outcome {
    for inst in 0..100u64 {
        let mut rng = seed::rng(seed::derive_indexed(14, "hyper", inst));
        let users = rng.random_range(2..30);
        let data = random_cascades(users, rng.random_range(1..15), 6, &mut rng);
        let graph = build_social_graph(&data.records);
        let k = rng.random_range(1..=graph.num_nodes().clamp(1, 6));
        let wg = WeightedGraph::from_social(&graph);
        let assignment: Vec<u32> = (0..graph.num_nodes()).map(|_| rng.random_range(0..k as u32)).collect();
        let clusters = UserClusters::from_partition(&Partition::new(&wg, assignment.clone(), k), &graph);
        let (h, _) = build_hypergraph(
            &clusters,
            &user_to_cascades(&data.cascades),
            &data.cascades,
            BuildOptions::default(),
        );
        let cluster_of: HashMap<UserId, u32> = graph.users().iter().copied().zip(assignment).collect();
        let expected = naive_hyperedges(&cluster_of, k, &data.cascades);
        ensure(h.hyperedges() == expected.as_slice(), format!("instance {inst} differs"))?;
        ensure(h.num_nodes() == data.cascades.len(), format!("instance {inst}: node count"))?;
    }
    Ok("100 instances equal".into())
}

fn augmentation_oracle() -> Outcome {
    for inst in 0..100u64 {
        let mut rng = seed::rng(seed::derive_indexed(15, "aug", inst));
        let users = rng.random_range(2..14);
        let data = random_cascades(users, 3, 8, &mut rng);
        let graph = build_social_graph(&data.records);
        for c in &data.cascades {
            let ag = augment_cascade(c, &graph);
            let p = ag.participants();
            let got: BTreeSet<(UserId, UserId)> = ag
                .edges()
                .iter()
                .map(|&(a, b)| {
                    let (a, b) = (p[a as usize], p[b as usize]);
                    if a < b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                })
                .collect();
            let expected = brute_force_augmentation(c, &data.records);
            ensure(got == expected, format!("instance {inst} cascade {}: edge sets differ", c.id))?;
            ensure(ag.is_connected(), format!("instance {inst} cascade {}: disconnected", c.id))?;
        }
    }
    Ok("100 instances equal and connected".into())
}

fn metrics_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for inst in 0..50u64 {
        let mut rng = seed::rng(seed::derive_indexed(16, "metrics", inst));
        let n = rng.random_range(1..200);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let m = classification_metrics(&truth, &pred);
        let (acc, f1) = confusion_oracle(&truth, &pred);
        worst = worst.max((m.accuracy - acc).abs()).max((m.f1_weighted - f1).abs());
    }
    ensure(worst < 1e-9, format!("max deviation {worst:.3e}"))?;
    let truth: Vec<usize> = (0..100).map(|i| i % 2).collect();
    let constant = classification_metrics(&truth, &[1; 100]);
    let expected = 0.5 * (2.0 / 3.0);
    ensure(
        (constant.f1_weighted - expected).abs() < 1e-12,
        format!("constant prediction F1 {}", constant.f1_weighted),
    )?;
    Ok(format!("max deviation {worst:.3e}; constant predictor F1 {:.6}", constant.f1_weighted))
}

fn deepwalk_structure() -> Outcome {
    let size = 6;
    let edges: Vec<(u32, u32)> = barbell(size).into_iter().map(|(a, b)| (a as u32, b as u32)).collect();
    let ag = cascadehg::features::AugmentedCascadeGraph::from_edges((0..2 * size as u32).map(UserId).collect(), edges);
    let cfg = DeepWalkConfig {
        dim: 32,
        ..DeepWalkConfig::default()
    };
    let mut wins = 0;
    let mut gaps = Vec::new();
    for s in 0..5 {
        let emb = deepwalk_embed(&ag, &cfg, s);
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for i in 0..2 * size {
            for j in i + 1..2 * size {
                let sim = cosine(&emb[i], &emb[j]);
                if (i < size) == (j < size) {
                    intra.push(sim);
                } else {
                    inter.push(sim);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let gap = mean(&intra) - mean(&inter);
        gaps.push(format!("{gap:.3}"));
        if gap > 0.0 {
            wins += 1;
        }
    }
    let detail = format!("{wins}/5 seeds, intra−inter gaps [{}]", gaps.join(", "));
    ensure(wins >= 4, detail.clone())?;
    Ok(detail)
}

fn protocol_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut cfg = synthetic_config(dir.path(), &small_spec())?;
    cfg.k_clusters = 4;
    cfg.features.deepwalk.walks_per_node = 4;
    let report = run_pipeline(&cfg).map_err(err)?;
    ensure(report.rows.len() == 1, "pipeline report should have one row")?;
    let row = &report.rows[0];
    ensure(row.trials.len() == 5, "pipeline row should aggregate 5 trials")?;
    for (name, ms) in [
        ("accuracy", &row.accuracy),
        ("f1_weighted", &row.f1_weighted),
        ("train_time_sec", &row.train_time_sec),
        ("inference_time_sec", &row.inference_time_sec),
    ] {
        ensure(ms.mean.is_finite() && ms.std >= 0.0, format!("{name} mean±std missing"))?;
    }
    let table = report.to_table();
    for col in ["Accuracy", "F1 weighted", "Train Time", "Inference Time", "±"] {
        ensure(table.contains(col), format!("table lacks `{col}`"))?;
    }
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).map_err(err)?;
    ensure(json["rows"][0]["f1_weighted"]["std"].is_number(), "JSON lacks f1_weighted.std")?;
    ensure(dir.path().join("work/report.json").exists(), "report.json not written")?;

    cfg.trials = 2;
    let layers = ablation(&cfg, Axis::Layers).map_err(err)?;
    let settings: Vec<&str> = layers.rows.iter().map(|r| r.setting.as_str()).collect();
    ensure(
        settings == ["layers=1", "layers=2", "layers=3", "layers=4", "layers=5"],
        format!("layer sweep rows {settings:?}"),
    )?;
    let fractions = ablation(&cfg, Axis::TrainFraction).map_err(err)?;
    ensure(fractions.rows.len() == 8, format!("train-fraction sweep has {} rows", fractions.rows.len()))?;
    let sizes: Vec<usize> = fractions.rows.iter().map(|r| r.trials[0].train_size).collect();
    ensure(sizes.windows(2).all(|w| w[0] < w[1]), format!("train sizes not increasing {sizes:?}"))?;
    ensure(dir.path().join("work/ablation_layers.json").exists(), "ablation json not written")?;
    Ok(format!("5-trial mean±std report; layer sweep 5 rows; train-fraction sweep sizes {sizes:?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let mut cfg = synthetic_config(dir.path(), &small_spec())?;
        cfg.k_clusters = 4;
        cfg.trials = 2;
        cfg.seed = 7;
        cfg.features.deepwalk.walks_per_node = 4;
        let report = run_pipeline(&cfg).map_err(err)?;
        let model = std::fs::read(cfg.workdir.join("model_trial0.json")).map_err(err)?;
        outputs.push((report.deterministic_json(), model));
    }
    ensure(outputs[0].0 == outputs[1].0, "metrics JSON differs between runs")?;
    ensure(outputs[0].1 == outputs[1].1, "saved model differs between runs")?;
    Ok(format!("{} bytes of metrics JSON identical", outputs[0].0.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("synthetic end-to-end quality gate", end_to_end),
        ("gradient correctness", gradients),
        ("sparse/dense convolution equivalence", sparse_dense),
        ("partitioner correctness", partitioner),
        ("hypergraph construction oracle", hypergraph_oracle),
        ("cascade augmentation oracle", augmentation_oracle),
        ("metrics oracle", metrics_oracle),
        ("DeepWalk structure", deepwalk_structure),
        ("protocol fidelity", protocol_shape),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
