//! Experiment protocol: ingest → partition → hypergraph → features → repeated
//! train/evaluate trials, plus one-axis sweeps and report rendering.
//!
//! Construction is deterministic, so every stage before training runs once per
//! configuration; trials only redraw the split and the model initialization.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::StageExt;
use crate::features::{self, FeatureConfig, UserContext};
use crate::hypergraph::{
    add_hashtag_hyperedges, build_hypergraph, hypergraph_stats, BuildOptions, BuildReport, CascadeHypergraph,
    HypergraphStats, UserClusters,
};
use crate::ingest::{self, Cascade, ExtractReport, Interner, ParseReport, SocialGraph, UserCascades, COUNTER_NAMES};
use crate::model::{self, majority_baseline, Checkpoint, OptimizerKind, Propagation, Split, TrainConfig};
use crate::partition::{self, Partition, PartitionSummary, WeightedGraph};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partitioner {
    Multilevel,
    Louvain,
}

impl FromStr for Partitioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multilevel" | "metis" => Ok(Partitioner::Multilevel),
            "louvain" => Ok(Partitioner::Louvain),
            other => Err(Error::invalid(format!("unknown partitioner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Layers,
    TrainFraction,
    K,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layers" => Ok(Axis::Layers),
            "train_fraction" | "train-fraction" => Ok(Axis::TrainFraction),
            "k" => Ok(Axis::K),
            other => Err(Error::invalid(format!("unknown ablation axis `{other}`"))),
        }
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Layers => "layers",
            Axis::TrainFraction => "train_fraction",
            Axis::K => "k",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub interactions: PathBuf,
    pub cascades: PathBuf,
    /// Optional account metadata.
    pub users: Option<PathBuf>,
    pub workdir: PathBuf,
    pub seed: u64,
    pub k_clusters: usize,
    pub partitioner: Partitioner,
    pub imbalance: f64,
    pub louvain_resolution: f64,
    pub min_participants: usize,
    pub drop_singletons: bool,
    pub hashtag_hyperedges: bool,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub trials: usize,
    pub split_fraction: f64,
    pub stratified: bool,
    pub sweep_k: Vec<usize>,
    pub sweep_layers: Vec<usize>,
    pub sweep_train_fractions: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            interactions: PathBuf::from("interactions.jsonl"),
            cascades: PathBuf::from("cascades.jsonl"),
            users: None,
            workdir: PathBuf::from("work"),
            seed: 0,
            k_clusters: 50,
            partitioner: Partitioner::Multilevel,
            imbalance: partition::DEFAULT_IMBALANCE,
            louvain_resolution: 1.0,
            min_participants: 1,
            drop_singletons: false,
            hashtag_hyperedges: false,
            features: FeatureConfig::default(),
            train: TrainConfig::default(),
            trials: 5,
            split_fraction: 0.8,
            stratified: true,
            sweep_k: vec![20, 50, 100],
            sweep_layers: vec![1, 2, 3, 4, 5],
            sweep_train_fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

impl RunConfig {
    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let f = &mut self.features;
        let t = &mut self.train;
        match key {
            "interactions" => self.interactions = value.into(),
            "cascades" => self.cascades = value.into(),
            "users" => self.users = (!value.is_empty()).then(|| value.into()),
            "workdir" => self.workdir = value.into(),
            "seed" => self.seed = parse_value(key, value)?,
            "dataset" => self.apply_dataset(value)?,
            "k" | "k_clusters" => self.k_clusters = parse_value(key, value)?,
            "partitioner" => self.partitioner = value.parse()?,
            "imbalance" | "epsilon" => self.imbalance = parse_value(key, value)?,
            "louvain_resolution" => self.louvain_resolution = parse_value(key, value)?,
            "min_participants" => self.min_participants = parse_value(key, value)?,
            "drop_singletons" => self.drop_singletons = parse_value(key, value)?,
            "hashtag_hyperedges" => self.hashtag_hyperedges = parse_value(key, value)?,
            "cap" => f.cap = parse_value(key, value)?,
            "pca_dim" => f.pca_dim = parse_value(key, value)?,
            "use_deepwalk" => f.use_deepwalk = parse_value(key, value)?,
            "walks_per_node" => f.deepwalk.walks_per_node = parse_value(key, value)?,
            "walk_length" => f.deepwalk.walk_length = parse_value(key, value)?,
            "embedding_dim" => f.deepwalk.dim = parse_value(key, value)?,
            "window" => f.deepwalk.window = parse_value(key, value)?,
            "negative" => f.deepwalk.negative = parse_value(key, value)?,
            "deepwalk_epochs" => f.deepwalk.epochs = parse_value(key, value)?,
            "deepwalk_sample" => f.deepwalk.sample = parse_value(key, value)?,
            "account_creation" => f.account_creation = parse_value(key, value)?,
            "verified" => f.verified = parse_value(key, value)?,
            "language" => f.language = parse_value(key, value)?,
            "reaction_time" => f.reaction_time = parse_value(key, value)?,
            "sentiment" => f.sentiment = parse_value(key, value)?,
            "topics" => f.topics = parse_value(key, value)?,
            "max_topics" => f.max_topics = parse_value(key, value)?,
            "cascade_size" => f.cascade_size = parse_value(key, value)?,
            "epochs" => t.epochs = parse_value(key, value)?,
            "dropout" => t.dropout = parse_value(key, value)?,
            "learning_rate" | "lr" => t.learning_rate = parse_value(key, value)?,
            "optimizer" => t.optimizer = parse_value::<OptimizerKind>(key, value)?,
            "hidden_dim" => t.hidden_dim = parse_value(key, value)?,
            "mlp_dims" => {
                let dims: Vec<usize> = parse_list(key, value)?;
                t.mlp_dims = dims
                    .try_into()
                    .map_err(|_| Error::invalid("mlp_dims takes exactly two widths"))?;
            }
            "num_conv_layers" | "layers" => t.num_conv_layers = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "split_fraction" | "train_fraction" => self.split_fraction = parse_value(key, value)?,
            "stratified" => self.stratified = parse_value(key, value)?,
            "sweep_k" => self.sweep_k = parse_list(key, value)?,
            "sweep_layers" => self.sweep_layers = parse_list(key, value)?,
            "sweep_train_fractions" => self.sweep_train_fractions = parse_list(key, value)?,
            other => {
                if let Some(counter) = other.strip_prefix("counter.") {
                    let idx = COUNTER_NAMES
                        .iter()
                        .position(|&c| c == counter)
                        .ok_or_else(|| Error::invalid(format!("unknown counter `{counter}`")))?;
                    f.counters[idx] = parse_value(key, value)?;
                } else {
                    return Err(Error::invalid(format!("unknown config key `{other}`")));
                }
            }
        }
        Ok(())
    }

    /// Per-dataset presets: participant cap, PCA width and the minimum cascade size.
    pub fn apply_dataset(&mut self, name: &str) -> Result<()> {
        let (cap, pca_dim, min_participants) = match name {
            "us_election" => (250, 90, 1),
            "mm_covid" => (50, 60, 10),
            "fakehealth" | "health_release" | "health_story" => (60, 60, 1),
            other => return Err(Error::invalid(format!("unknown dataset preset `{other}`"))),
        };
        self.features.cap = cap;
        self.features.pca_dim = pca_dim;
        self.min_participants = min_participants;
        if name == "health_release" {
            self.train.num_conv_layers = 2;
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format(origin, i + 1, "expected key=value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::format(origin, i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::invalid("split fraction must be in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if self.features.cap == 0 {
            return Err(Error::invalid("cap must be at least 1"));
        }
        self.train.validate()
    }
}

/// Parsed inputs and the structures derived from them.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub interner: Interner,
    pub graph: SocialGraph,
    pub cascades: Vec<Cascade>,
    pub user_cascades: UserCascades,
    pub context: UserContext,
    pub interactions_report: ParseReport,
    pub extract_report: ExtractReport,
}

pub fn ingest(cfg: &RunConfig) -> Result<Ingested> {
    let mut interner = Interner::new();
    let (records, interactions_report) = ingest::parse_interactions(&cfg.interactions, &mut interner)?;
    if interactions_report.malformed > 0 {
        log::warn!("{} malformed interaction lines skipped", interactions_report.malformed);
    }
    let graph = ingest::build_social_graph(&records);
    let (cascades, extract_report) = ingest::extract_cascades_from_file(&records, &cfg.cascades, &mut interner)?;
    let cascades = ingest::filter_min_participants(cascades, cfg.min_participants);
    let user_cascades = ingest::user_to_cascades(&cascades);
    let profiles = match &cfg.users {
        Some(path) => ingest::parse_user_profiles(path, &mut interner)?.0,
        None => Default::default(),
    };
    log::info!(
        "ingested {} users, {} edges, {} cascades",
        graph.num_nodes(),
        graph.num_edges(),
        cascades.len()
    );
    Ok(Ingested {
        interner,
        graph,
        cascades,
        user_cascades,
        context: UserContext::new(profiles),
        interactions_report,
        extract_report,
    })
}

pub fn partition_graph(graph: &SocialGraph, cfg: &RunConfig) -> Result<Partition> {
    let wg = WeightedGraph::from_social(graph);
    match cfg.partitioner {
        Partitioner::Multilevel => partition::partition_multilevel(&wg, cfg.k_clusters, cfg.imbalance, cfg.seed),
        Partitioner::Louvain => partition::partition_louvain(&wg, cfg.louvain_resolution, cfg.seed),
    }
}

pub fn hypergraph_from_partition(
    data: &Ingested,
    p: &Partition,
    cfg: &RunConfig,
) -> (CascadeHypergraph, BuildReport) {
    let clusters = UserClusters::from_partition(p, &data.graph);
    let opts = BuildOptions {
        drop_singletons: cfg.drop_singletons,
    };
    let (h, report) = build_hypergraph(&clusters, &data.user_cascades, &data.cascades, opts);
    if report.skipped_users > 0 {
        log::warn!("{} cascade participants are not in the social graph", report.skipped_users);
    }
    let h = if cfg.hashtag_hyperedges {
        add_hashtag_hyperedges(&h, &data.cascades)
    } else {
        h
    };
    (h, report)
}

pub fn featurize(data: &Ingested, cfg: &RunConfig) -> Result<features::FeatureMatrix> {
    features::build_feature_matrix(&data.cascades, &data.graph, &data.context, &cfg.features, cfg.seed)
}

/// Train/test split over labelled nodes. Stratified splits take `round(fraction·n_c)`
/// of every class (at least one, leaving one for testing when the class has two or
/// more members).
pub fn make_split(classes: &[usize], fraction: f64, stratified: bool, seed: u64) -> Split {
    let mut rng = seed::rng(seed);
    let labelled: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] <= 1).collect();
    let take = |n: usize| -> usize {
        let t = (fraction * n as f64).round() as usize;
        if n >= 2 {
            t.clamp(1, n - 1)
        } else {
            t.min(n)
        }
    };
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratified {
        for c in 0..2 {
            let mut members: Vec<usize> = labelled.iter().copied().filter(|&i| classes[i] == c).collect();
            members.shuffle(&mut rng);
            let t = take(members.len());
            train.extend_from_slice(&members[..t]);
            test.extend_from_slice(&members[t..]);
        }
    } else {
        let mut members = labelled;
        members.shuffle(&mut rng);
        let t = take(members.len());
        train.extend_from_slice(&members[..t]);
        test.extend_from_slice(&members[t..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Split { train, test }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub f1_weighted: f64,
    pub f1_per_class: [f64; 2],
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub baseline_f1: f64,
    pub final_loss: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub train_time_sec: f64,
    pub inference_time_sec: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

/// One configuration's aggregated trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub setting: String,
    pub config: RunConfig,
    pub partition: PartitionSummary,
    pub hypergraph: HypergraphStats,
    pub accuracy: MeanStd,
    pub f1_weighted: MeanStd,
    pub baseline_f1: MeanStd,
    pub train_time_sec: MeanStd,
    pub inference_time_sec: MeanStd,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub users: usize,
    pub social_edges: usize,
    pub duplicate_edges_collapsed: usize,
    pub cascades: usize,
    pub malformed_lines: usize,
    pub unknown_cascade_refs: usize,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub axis: Option<String>,
    pub dataset: DatasetSummary,
    pub rows: Vec<ExperimentRow>,
    pub notes: Vec<String>,
    pub total_time_sec: f64,
}

const NOTES: [&str; 2] = [
    "train_time_sec covers the optimizer loop only",
    "inference_time_sec covers one forward pass over all nodes plus metric computation; featurization is excluded",
];

fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("_time_sec"));
            map.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with every wall-clock field removed; identical configs and seeds
    /// give identical strings.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        strip_timings(&mut v);
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    /// Aligned plain-text table, one line per row.
    pub fn to_table(&self) -> String {
        let header = [
            "Setting",
            "Accuracy (%)",
            "F1 weighted (%)",
            "Baseline F1 (%)",
            "Train Time (sec)",
            "Inference Time (sec)",
        ];
        let pct = |m: &MeanStd| format!("{:.2}±{:.2}", 100.0 * m.mean, 100.0 * m.std);
        let sec = |m: &MeanStd| format!("{:.4}±{:.4}", m.mean, m.std);
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.setting.clone(),
                    pct(&r.accuracy),
                    pct(&r.f1_weighted),
                    pct(&r.baseline_f1),
                    sec(&r.train_time_sec),
                    sec(&r.inference_time_sec),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let padded: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}", w = *w))
                .collect();
            let _ = writeln!(out, "{}", padded.join("  "));
        };
        line(&mut out, &header.map(String::from));
        line(&mut out, &widths.map(|w| "-".repeat(w)));
        for row in &cells {
            line(&mut out, row);
        }
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out
    }
}

/// Everything a set of trials needs: the hypergraph, node classes and features.
pub struct Prepared {
    pub hypergraph: CascadeHypergraph,
    pub partition: Partition,
    pub features: DMatrix<f64>,
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Artifact file names inside the work directory.
pub mod artifacts {
    pub const GRAPH: &str = "graph.txt";
    pub const USERS: &str = "users.tsv";
    pub const PARTITION: &str = "partition.txt";
    pub const PARTITION_SUMMARY: &str = "partition.json";
    pub const HYPERGRAPH: &str = "hypergraph.txt";
    pub const LABELS: &str = "labels.txt";
    pub const HYPERGRAPH_STATS: &str = "hypergraph_stats.json";
    pub const FEATURES: &str = "features.txt";
    pub const MODEL: &str = "model.json";
    pub const SPLIT: &str = "split.json";
    pub const METRICS: &str = "metrics.json";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TABLE: &str = "report.txt";
}

pub fn write_graph_artifacts(data: &Ingested, dir: &Path) -> Result<()> {
    write_with(&dir.join(artifacts::GRAPH), |w| data.graph.write_dump(w))?;
    data.interner.write_tsv(&dir.join(artifacts::USERS))
}

pub fn write_partition_artifacts(p: &Partition, seed: u64, dir: &Path) -> Result<()> {
    write_with(&dir.join(artifacts::PARTITION), |w| p.write_dump(w))?;
    write_json(&dir.join(artifacts::PARTITION_SUMMARY), &p.summary(seed))
}

pub fn write_hypergraph_artifacts(h: &CascadeHypergraph, dir: &Path) -> Result<()> {
    write_with(&dir.join(artifacts::HYPERGRAPH), |w| h.write_dump(w))?;
    write_with(&dir.join(artifacts::LABELS), |w| h.write_labels(w))?;
    write_json(&dir.join(artifacts::HYPERGRAPH_STATS), &hypergraph_stats(h))
}

pub fn write_feature_artifacts(rows: &DMatrix<f64>, dir: &Path) -> Result<()> {
    write_with(&dir.join(artifacts::FEATURES), |w| features::write_features(rows, w))
}

pub fn read_hypergraph_artifacts(dir: &Path) -> Result<CascadeHypergraph> {
    let edges_path = dir.join(artifacts::HYPERGRAPH);
    let labels_path = dir.join(artifacts::LABELS);
    let edges = File::open(&edges_path).map_err(|e| Error::io(&edges_path, e))?;
    let labels = File::open(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    CascadeHypergraph::read_dump(BufReader::new(edges), BufReader::new(labels), &edges_path)
}

pub fn read_feature_artifacts(dir: &Path) -> Result<DMatrix<f64>> {
    let path = dir.join(artifacts::FEATURES);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    features::read_features(BufReader::new(file), &path)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dataset_summary(data: &Ingested, feature_dim: usize) -> DatasetSummary {
    DatasetSummary {
        users: data.graph.num_nodes(),
        social_edges: data.graph.num_edges(),
        duplicate_edges_collapsed: data.graph.duplicates_collapsed,
        cascades: data.cascades.len(),
        malformed_lines: data.interactions_report.malformed,
        unknown_cascade_refs: data.extract_report.unknown_cascade_refs,
        feature_dim,
    }
}

/// Runs `cfg.trials` split/train/evaluate rounds on prepared inputs. Trial `t` draws
/// its split and model seed from `(cfg.seed, t)`. When `save_dir` is given, each
/// trial's checkpoint and metrics are written there.
pub fn run_trials(prep: &Prepared, cfg: &RunConfig, setting: &str, save_dir: Option<&Path>) -> Result<ExperimentRow> {
    cfg.validate()?;
    let classes = model::node_classes(&prep.hypergraph);
    let prop = Propagation::new(&prep.hypergraph);
    let mut trials = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let trial_seed = seed::derive_indexed(cfg.seed, "trial", t as u64);
        let split = make_split(
            &classes,
            cfg.split_fraction,
            cfg.stratified,
            seed::derive(trial_seed, b"split"),
        );
        let train_cfg = TrainConfig {
            seed: seed::derive(trial_seed, b"model"),
            ..cfg.train.clone()
        };
        let trained = model::train_with(&prop, &classes, &prep.features, &split, &train_cfg).stage("train")?;
        let eval = model::evaluate(&trained.params, &prop, &classes, &prep.features, &split.test).stage("evaluate")?;
        let truth = |idx: &[usize]| idx.iter().map(|&i| classes[i]).collect::<Vec<_>>();
        let baseline = majority_baseline(&truth(&split.train), &truth(&split.test));
        let m = &eval.metrics;
        let result = TrialResult {
            trial: t,
            seed: trial_seed,
            accuracy: m.accuracy,
            f1_weighted: m.f1_weighted,
            f1_per_class: m.f1_per_class,
            precision: m.precision,
            recall: m.recall,
            baseline_f1: baseline.f1_weighted,
            final_loss: trained.loss_history.last().copied().unwrap_or(f64::NAN),
            train_size: split.train.len(),
            test_size: split.test.len(),
            train_time_sec: trained.train_time_sec,
            inference_time_sec: eval.inference_time_sec,
        };
        log::info!(
            "{setting} trial {t}: accuracy {:.4} f1 {:.4} (baseline {:.4})",
            result.accuracy,
            result.f1_weighted,
            result.baseline_f1
        );
        if let Some(dir) = save_dir {
            write_json(&dir.join(format!("model_trial{t}.json")), &Checkpoint::new(&trained.params, &train_cfg))?;
            write_json(&dir.join(format!("metrics_trial{t}.json")), &result)?;
        }
        trials.push(result);
    }
    let col = |f: fn(&TrialResult) -> f64| MeanStd::of(&trials.iter().map(f).collect::<Vec<_>>());
    Ok(ExperimentRow {
        setting: setting.to_owned(),
        config: cfg.clone(),
        partition: prep.partition.summary(cfg.seed),
        hypergraph: hypergraph_stats(&prep.hypergraph),
        accuracy: col(|r| r.accuracy),
        f1_weighted: col(|r| r.f1_weighted),
        baseline_f1: col(|r| r.baseline_f1),
        train_time_sec: col(|r| r.train_time_sec),
        inference_time_sec: col(|r| r.inference_time_sec),
        trials,
    })
}

fn setting_name(cfg: &RunConfig) -> String {
    match cfg.partitioner {
        Partitioner::Multilevel => format!("multilevel k={}", cfg.k_clusters),
        Partitioner::Louvain => "louvain".to_owned(),
    }
}

fn build_for(data: &Ingested, cfg: &RunConfig, dir: &Path) -> Result<(Partition, CascadeHypergraph)> {
    let p = partition_graph(&data.graph, cfg).stage("partition")?;
    write_partition_artifacts(&p, cfg.seed, dir).stage("partition")?;
    let (h, _) = hypergraph_from_partition(data, &p, cfg);
    write_hypergraph_artifacts(&h, dir).stage("hypergraph")?;
    Ok((p, h))
}

fn ingest_and_featurize(cfg: &RunConfig) -> Result<(Ingested, DMatrix<f64>)> {
    create_dir(&cfg.workdir).stage("ingest")?;
    let data = ingest(cfg).stage("ingest")?;
    write_graph_artifacts(&data, &cfg.workdir).stage("ingest")?;
    let fm = featurize(&data, cfg).stage("features")?;
    write_feature_artifacts(&fm.rows, &cfg.workdir).stage("features")?;
    Ok((data, fm.rows))
}

/// Full pipeline for one configuration. Artifacts and the report land in `workdir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Report> {
    cfg.validate().stage("config")?;
    let start = Instant::now();
    let (data, features) = ingest_and_featurize(cfg)?;
    let (partition, hypergraph) = build_for(&data, cfg, &cfg.workdir)?;
    let prep = Prepared {
        hypergraph,
        partition,
        features,
    };
    let row = run_trials(&prep, cfg, &setting_name(cfg), Some(&cfg.workdir))?;
    let report = Report {
        command: "pipeline".into(),
        axis: None,
        dataset: dataset_summary(&data, prep.features.ncols()),
        rows: vec![row],
        notes: NOTES.map(String::from).to_vec(),
        total_time_sec: start.elapsed().as_secs_f64(),
    };
    write_report(&report, &cfg.workdir, "report")?;
    Ok(report)
}

fn write_report(report: &Report, dir: &Path, stem: &str) -> Result<()> {
    write_json(&dir.join(format!("{stem}.json")), report).stage("report")?;
    std::fs::write(dir.join(format!("{stem}.txt")), report.to_table())
        .map_err(|e| Error::io(dir.join(format!("{stem}.txt")), e))
        .stage("report")
}

/// One row per value on `axis`; all other settings come from `cfg`.
pub fn ablation(cfg: &RunConfig, axis: Axis) -> Result<Report> {
    cfg.validate().stage("config")?;
    let values: Vec<String> = match axis {
        Axis::Layers => cfg.sweep_layers.iter().map(|v| v.to_string()).collect(),
        Axis::TrainFraction => cfg.sweep_train_fractions.iter().map(|v| v.to_string()).collect(),
        Axis::K => cfg.sweep_k.iter().map(|v| v.to_string()).collect(),
    };
    if values.is_empty() {
        return Err(Error::invalid(format!("sweep list for axis `{}` is empty", axis.name()))).stage("config");
    }
    let start = Instant::now();
    let (data, features) = ingest_and_featurize(cfg)?;
    let mut rows = Vec::with_capacity(values.len());
    let mut base: Option<Prepared> = None;
    for (i, _) in values.iter().enumerate() {
        let mut c = cfg.clone();
        match axis {
            Axis::Layers => c.train.num_conv_layers = cfg.sweep_layers[i],
            Axis::TrainFraction => c.split_fraction = cfg.sweep_train_fractions[i],
            Axis::K => c.k_clusters = cfg.sweep_k[i],
        }
        c.validate().stage("config")?;
        let setting = format!("{}={}", axis.name(), values[i]);
        let row = if axis == Axis::K {
            let dir = cfg.workdir.join(format!("k{}", c.k_clusters));
            create_dir(&dir).stage("partition")?;
            let (partition, hypergraph) = build_for(&data, &c, &dir)?;
            let prep = Prepared {
                hypergraph,
                partition,
                features: features.clone(),
            };
            run_trials(&prep, &c, &setting, None)?
        } else {
            if base.is_none() {
                let (partition, hypergraph) = build_for(&data, cfg, &cfg.workdir)?;
                base = Some(Prepared {
                    hypergraph,
                    partition,
                    features: features.clone(),
                });
            }
            run_trials(base.as_ref().expect("prepared above"), &c, &setting, None)?
        };
        rows.push(row);
    }
    let report = Report {
        command: "ablation".into(),
        axis: Some(axis.name().into()),
        dataset: dataset_summary(&data, features.ncols()),
        rows,
        notes: NOTES.map(String::from).to_vec(),
        total_time_sec: start.elapsed().as_secs_f64(),
    };
    write_report(&report, &cfg.workdir, &format!("ablation_{}", axis.name()))?;
    Ok(report)
}
