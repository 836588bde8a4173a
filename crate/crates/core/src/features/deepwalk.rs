//! DeepWalk: uniform truncated random walks fed to skip-gram with negative sampling.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::AugmentedCascadeGraph;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepWalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub dim: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    /// Frequent-token downsampling threshold; 0 disables it.
    pub sample: f64,
}

impl Default for DeepWalkConfig {
    fn default() -> Self {
        DeepWalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            dim: 128,
            window: 5,
            negative: 5,
            epochs: 1,
            learning_rate: 0.05,
            min_learning_rate: 1e-4,
            sample: 1e-3,
        }
    }
}

/// `walks_per_node` rounds; each round starts one walk from every node in index
/// order. Each step moves to a uniformly chosen neighbor; a node without neighbors
/// repeats itself.
pub fn random_walks(
    ag: &AugmentedCascadeGraph,
    walks_per_node: usize,
    walk_length: usize,
    rng: &mut seed::Rng,
) -> Vec<Vec<u32>> {
    let n = ag.num_nodes();
    let mut walks = Vec::with_capacity(n * walks_per_node);
    for _ in 0..walks_per_node {
        for start in 0..n {
            let mut walk = Vec::with_capacity(walk_length);
            let mut cur = start as u32;
            walk.push(cur);
            while walk.len() < walk_length {
                let nb = ag.neighbors(cur as usize);
                if !nb.is_empty() {
                    cur = nb[rng.random_range(0..nb.len())];
                }
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    walks
}

fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Skip-gram with negative sampling over `walks`; returns one `dim`-vector per token
/// in `0..vocab`.
///
/// Input vectors start uniform in `±0.5/dim` and output vectors at zero. The
/// learning rate decays linearly over all training tokens. Each center token uses a
/// window shrunk uniformly in `1..=window`, and negatives come from the unigram
/// distribution raised to 0.75.
pub fn skipgram(walks: &[Vec<u32>], vocab: usize, cfg: &DeepWalkConfig, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let dim = cfg.dim;
    let mut input: Vec<f32> = (0..vocab * dim)
        .map(|_| (rng.random::<f32>() - 0.5) / dim as f32)
        .collect();
    let mut output = vec![0f32; vocab * dim];

    let mut counts = vec![0u64; vocab];
    for w in walks {
        for &t in w {
            counts[t as usize] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![vec![0.0; dim]; vocab];
    }
    let mut cumulative = Vec::with_capacity(vocab);
    let mut acc = 0.0f64;
    for &c in &counts {
        acc += (c as f64).powf(0.75);
        cumulative.push(acc);
    }
    let keep_prob: Vec<f64> = counts
        .iter()
        .map(|&c| {
            if cfg.sample <= 0.0 || c == 0 {
                return 1.0;
            }
            let threshold = cfg.sample * total as f64;
            ((c as f64 / threshold).sqrt() + 1.0) * threshold / c as f64
        })
        .collect();

    let planned = (cfg.epochs as u64 * total).max(1);
    let mut processed = 0u64;
    let mut grad = vec![0f32; dim];
    let mut sentence: Vec<u32> = Vec::new();
    for _ in 0..cfg.epochs {
        for walk in walks {
            sentence.clear();
            sentence.extend(walk.iter().copied().filter(|&t| {
                let p = keep_prob[t as usize];
                p >= 1.0 || rng.random::<f64>() < p
            }));
            let progress = processed as f64 / planned as f64;
            let alpha = (cfg.learning_rate * (1.0 - progress)).max(cfg.min_learning_rate) as f32;
            processed += walk.len() as u64;
            for (pos, &center) in sentence.iter().enumerate() {
                let reduced = rng.random_range(0..cfg.window.max(1));
                let span = cfg.window.max(1) - reduced;
                let lo = pos.saturating_sub(span);
                let hi = (pos + span).min(sentence.len() - 1);
                for (cpos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    let inp = center as usize * dim;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=cfg.negative {
                        let (target, label) = if d == 0 {
                            (context as usize, 1.0f32)
                        } else {
                            let r = rng.random::<f64>() * acc;
                            let t = cumulative.partition_point(|&c| c <= r).min(vocab - 1);
                            if t == context as usize {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = target * dim;
                        let dot: f32 = (0..dim).map(|k| input[inp + k] * output[out + k]).sum();
                        let g = (label - sigmoid(dot)) * alpha;
                        for k in 0..dim {
                            grad[k] += g * output[out + k];
                            output[out + k] += g * input[inp + k];
                        }
                    }
                    for k in 0..dim {
                        input[inp + k] += grad[k];
                    }
                }
            }
        }
    }
    input
        .chunks(dim)
        .map(|row| row.iter().map(|&x| x as f64).collect())
        .collect()
}

/// DeepWalk embedding of every participant; row `i` belongs to local node `i`.
pub fn deepwalk_embed(ag: &AugmentedCascadeGraph, cfg: &DeepWalkConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let walks = random_walks(ag, cfg.walks_per_node, cfg.walk_length, &mut rng);
    skipgram(&walks, ag.num_nodes(), cfg, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::UserId;

    fn graph(n: usize, edges: &[(u32, u32)]) -> AugmentedCascadeGraph {
        AugmentedCascadeGraph::from_edges((0..n as u32).map(UserId).collect(), edges.iter().copied())
    }

    #[test]
    fn single_node() {
        let ag = graph(1, &[]);
        let emb = deepwalk_embed(&ag, &DeepWalkConfig::default(), 1);
        assert_eq!(emb.len(), 1);
        assert_eq!(emb[0].len(), 128);
        assert!(emb[0].iter().all(|x| x.is_finite()));
    }

    #[test]
    fn path_graph_is_finite() {
        let ag = graph(3, &[(0, 1), (1, 2)]);
        let emb = deepwalk_embed(&ag, &DeepWalkConfig::default(), 2);
        assert_eq!(emb.len(), 3);
        assert!(emb.iter().flatten().all(|x| x.is_finite()));
    }

    #[test]
    fn walk_count_and_steps_follow_edges() {
        let ag = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let mut rng = seed::rng(5);
        let walks = random_walks(&ag, 10, 80, &mut rng);
        assert_eq!(walks.len(), 40);
        for w in &walks {
            assert_eq!(w.len(), 80);
            for pair in w.windows(2) {
                assert!(ag.neighbors(pair[0] as usize).contains(&pair[1]));
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let ag = graph(3, &[(0, 1), (1, 2)]);
        let cfg = DeepWalkConfig::default();
        assert_eq!(deepwalk_embed(&ag, &cfg, 9), deepwalk_embed(&ag, &cfg, 9));
        assert_ne!(deepwalk_embed(&ag, &cfg, 9), deepwalk_embed(&ag, &cfg, 10));
    }
}
