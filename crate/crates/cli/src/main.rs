//! `cascadehg` command-line driver.
//!
//! Each stage reads its inputs from the original data files or from artifacts an
//! earlier stage left in the work directory, so stages can be run one at a time or
//! all at once with `pipeline`.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cascadehg::error::StageExt;
use cascadehg::hypergraph::hypergraph_stats;
use cascadehg::ingest::SocialGraph;
use cascadehg::model::{self, Checkpoint, Propagation, Split, TrainConfig};
use cascadehg::partition::{Partition, WeightedGraph};
use cascadehg::pipeline::{self, artifacts, read_json, write_json, Axis, Partitioner, Report, RunConfig, TrialResult};
use cascadehg::synth::{generate_synthetic, SyntheticSpec};
use cascadehg::{seed, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "cascadehg", version, about = "Retweet-cascade hypergraph classification pipeline")]
struct Cli {
    /// Flat key=value config file applied over the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra key=value override, applied after the config file (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args, Debug, Default)]
struct Inputs {
    /// Interaction records (JSON lines).
    #[arg(long)]
    interactions: Option<PathBuf>,
    /// Cascade metadata (JSON lines).
    #[arg(long)]
    cascades: Option<PathBuf>,
    /// Optional account metadata (JSON lines).
    #[arg(long)]
    users: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse interactions and write the social graph dump and user table.
    BuildGraph(Inputs),
    /// Partition the social graph dump from the work directory.
    Partition {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        partitioner: Option<String>,
        #[arg(long)]
        imbalance: Option<f64>,
    },
    /// Lift the stored partition to a cascade hypergraph.
    BuildHypergraph(Inputs),
    /// Build the cascade feature matrix.
    Featurize(Inputs),
    /// Train one model on a fresh split of the stored hypergraph and features.
    Train {
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Evaluate the stored model on its held-out split.
    Evaluate,
    /// Run every stage and the repeated-trial protocol.
    Pipeline(Inputs),
    /// Sweep one setting and report a row per value.
    Ablation {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_parser = ["layers", "train_fraction", "k"])]
        axis: String,
        /// Comma-separated values overriding the configured sweep list.
        #[arg(long)]
        values: Option<String>,
    },
    /// Write a planted-partition synthetic dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SyntheticSpec::default().n_users)]
        users: usize,
        #[arg(long, default_value_t = SyntheticSpec::default().n_cascades)]
        cascades: usize,
        #[arg(long, default_value_t = SyntheticSpec::default().n_blocks)]
        blocks: usize,
        #[arg(long, default_value_t = SyntheticSpec::default().p_intra)]
        p_intra: f64,
        #[arg(long, default_value_t = SyntheticSpec::default().p_inter)]
        p_inter: f64,
        #[arg(long, default_value_t = SyntheticSpec::default().label_fidelity)]
        fidelity: f64,
        #[arg(long, default_value_t = SyntheticSpec::default().participants_per_cascade)]
        participants: usize,
        #[arg(long, default_value_t = SyntheticSpec::default().cross_block_rate)]
        cross_block_rate: f64,
        #[arg(long, default_value_t = SyntheticSpec::default().unknown_fraction)]
        unknown_fraction: f64,
    },
}

/// Written by `train`, read by `evaluate`.
#[derive(Debug, Serialize, Deserialize)]
struct TrainingRecord {
    seed: u64,
    epochs: usize,
    final_loss: f64,
    loss_history: Vec<f64>,
    train_time_sec: f64,
}

const TRAINING: &str = "training.json";

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("`--set {kv}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = &cli.workdir {
        cfg.workdir = w.clone();
    }
    Ok(cfg)
}

fn apply_inputs(cfg: &mut RunConfig, inputs: &Inputs) {
    if let Some(p) = &inputs.interactions {
        cfg.interactions = p.clone();
    }
    if let Some(p) = &inputs.cascades {
        cfg.cascades = p.clone();
    }
    if let Some(p) = &inputs.users {
        cfg.users = Some(p.clone());
    }
}

fn workdir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))?;
    Ok(&cfg.workdir)
}

fn print_value<T: Serialize>(format: Format, value: &T) -> Result<()> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Table => {
            let v = serde_json::to_value(value)?;
            match v {
                serde_json::Value::Object(map) => {
                    let width = map.keys().map(|k| k.len()).max().unwrap_or(0);
                    for (k, v) in map {
                        println!("{k:<width$}  {v}");
                    }
                }
                other => println!("{other}"),
            }
        }
    }
    Ok(())
}

fn print_report(format: Format, report: &Report) {
    match format {
        Format::Json => println!("{}", report.to_json()),
        Format::Table => print!("{}", report.to_table()),
    }
}

fn read_graph(dir: &Path) -> Result<SocialGraph> {
    let path = dir.join(artifacts::GRAPH);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    SocialGraph::read_dump(BufReader::new(file), &path)
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = run_config(cli).stage("config")?;
    match &cli.command {
        Command::BuildGraph(inputs) => {
            apply_inputs(&mut cfg, inputs);
            let dir = workdir(&cfg).stage("ingest")?;
            let data = pipeline::ingest(&cfg).stage("ingest")?;
            pipeline::write_graph_artifacts(&data, dir).stage("ingest")?;
            print_value(
                cli.format,
                &serde_json::json!({
                    "users": data.graph.num_nodes(),
                    "edges": data.graph.num_edges(),
                    "duplicates_collapsed": data.graph.duplicates_collapsed,
                    "self_loops_dropped": data.graph.self_loops_dropped,
                    "interaction_lines": data.interactions_report.lines,
                    "malformed_lines": data.interactions_report.malformed,
                    "cascades": data.cascades.len(),
                    "unknown_cascade_refs": data.extract_report.unknown_cascade_refs,
                    "graph": dir.join(artifacts::GRAPH),
                }),
            )
        }
        Command::Partition { k, partitioner, imbalance } => {
            if let Some(k) = k {
                cfg.k_clusters = *k;
            }
            if let Some(p) = partitioner {
                cfg.partitioner = p.parse::<Partitioner>().stage("config")?;
            }
            if let Some(e) = imbalance {
                cfg.imbalance = *e;
            }
            let dir = workdir(&cfg).stage("partition")?;
            let graph = read_graph(dir).stage("partition")?;
            let p = pipeline::partition_graph(&graph, &cfg).stage("partition")?;
            pipeline::write_partition_artifacts(&p, cfg.seed, dir).stage("partition")?;
            print_value(cli.format, &p.summary(cfg.seed))
        }
        Command::BuildHypergraph(inputs) => {
            apply_inputs(&mut cfg, inputs);
            let dir = workdir(&cfg).stage("hypergraph")?;
            let data = pipeline::ingest(&cfg).stage("ingest")?;
            let path = dir.join(artifacts::PARTITION);
            let file = File::open(&path).map_err(|e| Error::io(&path, e)).stage("hypergraph")?;
            let wg = WeightedGraph::from_social(&data.graph);
            let p = Partition::read_dump(BufReader::new(file), &wg, &path).stage("hypergraph")?;
            let (h, report) = pipeline::hypergraph_from_partition(&data, &p, &cfg);
            pipeline::write_hypergraph_artifacts(&h, dir).stage("hypergraph")?;
            print_value(
                cli.format,
                &serde_json::json!({ "stats": hypergraph_stats(&h), "build": report }),
            )
        }
        Command::Featurize(inputs) => {
            apply_inputs(&mut cfg, inputs);
            let dir = workdir(&cfg).stage("features")?;
            let data = pipeline::ingest(&cfg).stage("ingest")?;
            let fm = pipeline::featurize(&data, &cfg).stage("features")?;
            pipeline::write_feature_artifacts(&fm.rows, dir).stage("features")?;
            let explained: f64 = fm.explained_variance_ratio.iter().sum();
            print_value(
                cli.format,
                &serde_json::json!({
                    "cascades": fm.num_rows(),
                    "raw_dim": fm.mean.len(),
                    "dim": fm.dim(),
                    "explained_variance": explained,
                    "features": dir.join(artifacts::FEATURES),
                }),
            )
        }
        Command::Train { train_fraction } => {
            if let Some(f) = train_fraction {
                cfg.split_fraction = *f;
            }
            cfg.validate().stage("config")?;
            let dir = workdir(&cfg).stage("train")?;
            let h = pipeline::read_hypergraph_artifacts(dir).stage("train")?;
            let x = pipeline::read_feature_artifacts(dir).stage("train")?;
            let classes = model::node_classes(&h);
            let trial_seed = seed::derive_indexed(cfg.seed, "trial", 0);
            let split = pipeline::make_split(
                &classes,
                cfg.split_fraction,
                cfg.stratified,
                seed::derive(trial_seed, b"split"),
            );
            let train_cfg = TrainConfig {
                seed: seed::derive(trial_seed, b"model"),
                ..cfg.train.clone()
            };
            let trained = model::train(&h, &x, &split, &train_cfg).stage("train")?;
            write_json(&dir.join(artifacts::MODEL), &Checkpoint::new(&trained.params, &train_cfg)).stage("train")?;
            write_json(&dir.join(artifacts::SPLIT), &split).stage("train")?;
            let record = TrainingRecord {
                seed: trial_seed,
                epochs: train_cfg.epochs,
                final_loss: trained.loss_history.last().copied().unwrap_or(f64::NAN),
                loss_history: trained.loss_history,
                train_time_sec: trained.train_time_sec,
            };
            write_json(&dir.join(TRAINING), &record).stage("train")?;
            print_value(
                cli.format,
                &serde_json::json!({
                    "seed": record.seed,
                    "epochs": record.epochs,
                    "train_size": split.train.len(),
                    "test_size": split.test.len(),
                    "final_loss": record.final_loss,
                    "train_time_sec": record.train_time_sec,
                    "model": dir.join(artifacts::MODEL),
                }),
            )
        }
        Command::Evaluate => {
            let dir = workdir(&cfg).stage("evaluate")?;
            let h = pipeline::read_hypergraph_artifacts(dir).stage("evaluate")?;
            let x = pipeline::read_feature_artifacts(dir).stage("evaluate")?;
            let ck: Checkpoint = read_json(&dir.join(artifacts::MODEL)).stage("evaluate")?;
            let params = ck.params().stage("evaluate")?;
            let split: Split = read_json(&dir.join(artifacts::SPLIT)).stage("evaluate")?;
            split.validate(h.num_nodes()).stage("evaluate")?;
            let training: TrainingRecord = read_json(&dir.join(TRAINING)).stage("evaluate")?;
            let classes = model::node_classes(&h);
            let prop = Propagation::new(&h);
            let eval = model::evaluate(&params, &prop, &classes, &x, &split.test).stage("evaluate")?;
            let truth = |idx: &[usize]| idx.iter().map(|&i| classes[i]).collect::<Vec<_>>();
            let baseline = model::majority_baseline(&truth(&split.train), &truth(&split.test));
            let m = eval.metrics;
            let result = TrialResult {
                trial: 0,
                seed: training.seed,
                accuracy: m.accuracy,
                f1_weighted: m.f1_weighted,
                f1_per_class: m.f1_per_class,
                precision: m.precision,
                recall: m.recall,
                baseline_f1: baseline.f1_weighted,
                final_loss: training.final_loss,
                train_size: split.train.len(),
                test_size: split.test.len(),
                train_time_sec: training.train_time_sec,
                inference_time_sec: eval.inference_time_sec,
            };
            write_json(&dir.join(artifacts::METRICS), &result).stage("evaluate")?;
            print_value(cli.format, &result)
        }
        Command::Pipeline(inputs) => {
            apply_inputs(&mut cfg, inputs);
            let report = pipeline::run_pipeline(&cfg)?;
            print_report(cli.format, &report);
            Ok(())
        }
        Command::Ablation { inputs, axis, values } => {
            apply_inputs(&mut cfg, inputs);
            let axis: Axis = axis.parse().stage("config")?;
            if let Some(values) = values {
                let key = match axis {
                    Axis::Layers => "sweep_layers",
                    Axis::TrainFraction => "sweep_train_fractions",
                    Axis::K => "sweep_k",
                };
                cfg.set(key, values).stage("config")?;
            }
            let report = pipeline::ablation(&cfg, axis)?;
            print_report(cli.format, &report);
            Ok(())
        }
        Command::Synth {
            out,
            users,
            cascades,
            blocks,
            p_intra,
            p_inter,
            fidelity,
            participants,
            cross_block_rate,
            unknown_fraction,
        } => {
            let spec = SyntheticSpec {
                n_users: *users,
                n_cascades: *cascades,
                n_blocks: *blocks,
                p_intra: *p_intra,
                p_inter: *p_inter,
                label_fidelity: *fidelity,
                participants_per_cascade: *participants,
                cross_block_rate: *cross_block_rate,
                unknown_fraction: *unknown_fraction,
                seed: cfg.seed,
            };
            let files = generate_synthetic(&spec, out).stage("synth")?;
            print_value(cli.format, &serde_json::json!({ "spec": spec, "files": files }))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
