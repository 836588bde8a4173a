//! Independent oracles and random instance generators shared by the integration
//! tests and the acceptance binary.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use cascadehg::hypergraph::CascadeHypergraph;
use cascadehg::ingest::{Cascade, InteractionKind, InteractionRecord, Label, UserId};
use cascadehg::model::{DropoutMasks, ModelParams};
use cascadehg::seed;
use nalgebra::DMatrix;
use rand::Rng;

pub fn record(kind: InteractionKind, s: u32, t: u32, ts: i64, cascade: Option<&str>) -> InteractionRecord {
    InteractionRecord {
        kind,
        source: UserId(s),
        target: UserId(t),
        timestamp: ts,
        tweet_id: format!("t{s}-{t}-{ts}"),
        cascade_id: cascade.map(str::to_owned),
    }
}

// ---------------------------------------------------------------- hypergraphs

/// Random hypergraph on `n` nodes with up to `max_edges` hyperedges; some nodes may
/// be isolated.
pub fn random_hypergraph(n: usize, max_edges: usize, rng: &mut seed::Rng) -> CascadeHypergraph {
    let labels = (0..n)
        .map(|_| if rng.random::<bool>() { Label::Fake } else { Label::NonFake })
        .collect();
    let m = rng.random_range(1..=max_edges);
    let edges = (0..m)
        .map(|_| {
            let size = rng.random_range(1..=n.min(6));
            (0..size).map(|_| rng.random_range(0..n as u32)).collect()
        })
        .collect();
    CascadeHypergraph::new(labels, edges).unwrap()
}

/// `Dv^{-1/2} H W De^{-1} Hᵀ Dv^{-1/2}` built densely; isolated rows are zero.
pub fn dense_propagation(h: &CascadeHypergraph) -> DMatrix<f64> {
    let (n, m) = (h.num_nodes(), h.num_hyperedges());
    let mut inc = DMatrix::<f64>::zeros(n, m);
    for j in 0..m {
        for &i in h.hyperedge(j) {
            inc[(i as usize, j)] = 1.0;
        }
    }
    let w = DMatrix::from_fn(m, m, |a, b| if a == b { h.weight(a) } else { 0.0 });
    let dv_inv_sqrt = DMatrix::from_fn(n, n, |a, b| {
        let d: f64 = (0..m).map(|j| inc[(a, j)] * h.weight(j)).sum();
        if a == b && d > 0.0 {
            1.0 / d.sqrt()
        } else {
            0.0
        }
    });
    let de_inv = DMatrix::from_fn(m, m, |a, b| {
        let d: f64 = inc.column(a).sum();
        if a == b {
            1.0 / d
        } else {
            0.0
        }
    });
    &dv_inv_sqrt * &inc * w * de_inv * inc.transpose() * &dv_inv_sqrt
}

pub fn dense_conv(h: &CascadeHypergraph, x: &DMatrix<f64>, theta: &DMatrix<f64>, bias: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = dense_propagation(h) * x * theta;
    for mut r in out.row_iter_mut() {
        r += bias;
    }
    out
}

/// Dense re-implementation of the whole network.
pub fn dense_forward(
    h: &CascadeHypergraph,
    x: &DMatrix<f64>,
    p: &ModelParams,
    masks: Option<&DropoutMasks>,
) -> DMatrix<f64> {
    let relu = |m: DMatrix<f64>| m.map(|v| if v > 0.0 { v } else { 0.0 });
    let affine = |x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DMatrix<f64>| {
        let mut o = x * w;
        for mut r in o.row_iter_mut() {
            r += b;
        }
        o
    };
    let mut z = x.clone();
    for c in &p.convs {
        z = relu(dense_conv(h, &z, &c.theta, &c.bias));
    }
    let [l0, l1, l2] = &p.mlp.layers;
    let mut a = relu(affine(&z, &l0.weight, &l0.bias));
    if let Some(m) = masks {
        a = a.component_mul(&m.first);
    }
    let mut a = relu(affine(&a, &l1.weight, &l1.bias));
    if let Some(m) = masks {
        a = a.component_mul(&m.second);
    }
    affine(&a, &l2.weight, &l2.bias)
}

pub fn random_matrix(r: usize, c: usize, rng: &mut seed::Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

// ------------------------------------------------------- cascades and clusters

/// A random social/cascade instance over `users` users.
pub struct CascadeInstance {
    pub records: Vec<InteractionRecord>,
    pub cascades: Vec<Cascade>,
}

/// Background replies/mentions plus cascades whose retweets are also recorded.
pub fn random_cascades(users: u32, n_cascades: usize, max_retweeters: usize, rng: &mut seed::Rng) -> CascadeInstance {
    let mut records = Vec::new();
    let background = rng.random_range(0..=(users as usize * 3));
    for _ in 0..background {
        let s = rng.random_range(0..users);
        let t = rng.random_range(0..users);
        let kind = if rng.random::<bool>() { InteractionKind::Reply } else { InteractionKind::Mention };
        records.push(record(kind, s, t, rng.random_range(0..100), None));
    }
    let mut cascades = Vec::new();
    for c in 0..n_cascades {
        let id = format!("c{c}");
        let root = rng.random_range(0..users);
        let root_ts = rng.random_range(0..50);
        let mut seen = BTreeSet::new();
        let mut retweeters = Vec::new();
        for _ in 0..rng.random_range(0..=max_retweeters) {
            let u = rng.random_range(0..users);
            if u == root || !seen.insert(u) {
                continue;
            }
            let ts = root_ts + rng.random_range(1..60);
            records.push(record(InteractionKind::Retweet, u, root, ts, Some(&id)));
            retweeters.push((UserId(u), ts));
        }
        retweeters.sort_by_key(|&(u, ts)| (ts, u));
        cascades.push(Cascade {
            id,
            root_user: UserId(root),
            root_tweet_id: format!("r{c}"),
            root_timestamp: root_ts,
            retweeters,
            label: Label::Unknown,
            sentiment: None,
            topics: None,
            hashtags: Vec::new(),
        });
    }
    CascadeInstance { records, cascades }
}

/// Hyperedge `c` is the union, over users assigned to cluster `c`, of the cascades
/// the user rooted or retweeted. Empty clusters produce no hyperedge.
pub fn naive_hyperedges(cluster_of: &HashMap<UserId, u32>, k: usize, cascades: &[Cascade]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for c in 0..k as u32 {
        let mut set = BTreeSet::new();
        for (ci, cascade) in cascades.iter().enumerate() {
            let mut users = vec![cascade.root_user];
            users.extend(cascade.retweeters.iter().map(|r| r.0));
            if users.iter().any(|u| cluster_of.get(u) == Some(&c)) {
                set.insert(ci as u32);
            }
        }
        if !set.is_empty() {
            out.push(set.into_iter().collect());
        }
    }
    out
}

/// Star edges plus, for each retweeter `i`, every raw interaction `i→j` earlier than
/// `i`'s retweet with `j` a participant. Pairs are unordered user pairs.
pub fn brute_force_augmentation(c: &Cascade, records: &[InteractionRecord]) -> BTreeSet<(UserId, UserId)> {
    let pair = |a: UserId, b: UserId| if a < b { (a, b) } else { (b, a) };
    let mut participants = vec![c.root_user];
    participants.extend(c.retweeters.iter().map(|r| r.0));
    let mut edges = BTreeSet::new();
    for &(u, _) in &c.retweeters {
        edges.insert(pair(c.root_user, u));
    }
    for &(i, t) in &c.retweeters {
        for r in records {
            if r.source == i && r.target != i && r.timestamp < t && participants.contains(&r.target) {
                edges.insert(pair(i, r.target));
            }
        }
    }
    edges
}

// -------------------------------------------------------------------- metrics

/// `(accuracy, weighted F1)` from the 2×2 confusion matrix with class 1 positive.
pub fn confusion_oracle(truth: &[usize], predicted: &[usize]) -> (f64, f64) {
    let (mut tp, mut fp, mut fneg, mut tn) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (1, 1) => tp += 1.0,
            (0, 1) => fp += 1.0,
            (1, 0) => fneg += 1.0,
            _ => tn += 1.0,
        }
    }
    let total = tp + fp + fneg + tn;
    let f1 = |tp: f64, fp: f64, fneg: f64| {
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fneg)
        }
    };
    let f1_pos = f1(tp, fp, fneg);
    let f1_neg = f1(tn, fneg, fp);
    let weighted = ((tp + fneg) * f1_pos + (tn + fp) * f1_neg) / total;
    ((tp + tn) / total, weighted)
}

// ---------------------------------------------------------------------- graphs

/// Erdős–Rényi edge list on `n` nodes.
pub fn erdos_renyi(n: usize, p: f64, rng: &mut seed::Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Planted partition with `blocks` equal blocks.
pub fn planted(n: usize, blocks: usize, p_in: f64, p_out: f64, rng: &mut seed::Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if i * blocks / n == j * blocks / n { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Two `size`-cliques joined by one bridge between node `size-1` and node `size`.
pub fn barbell(size: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for base in [0, size] {
        for i in 0..size {
            for j in i + 1..size {
                edges.push((base + i, base + j));
            }
        }
    }
    edges.push((size - 1, size));
    edges
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}
