//! User-graph partitioning.
//!
//! Two partitioners share the [`Partition`] result type:
//!
//! - [`partition_multilevel`]: balanced k-way partitioning with an edge-cut objective.
//!   The graph is coarsened by heavy-edge matching, the coarsest graph is split by
//!   greedy region growing, and the partition is projected back level by level with
//!   one boundary Fiduccia–Mattheyses pass per level and one extra pass at the end.
//! - [`partition_louvain`]: modularity communities (no balance guarantee).
//!
//! Both operate on the undirected [`WeightedGraph`] view of the social graph.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ingest::SocialGraph;
use crate::seed;
use crate::{Error, Result};

/// Region-growing attempts on the coarsest graph.
const INITIAL_TRIES: usize = 8;

/// Default imbalance tolerance.
pub const DEFAULT_IMBALANCE: f64 = 0.03;

/// Undirected graph in CSR form with integer vertex and edge weights.
///
/// Every undirected edge appears in both endpoint lists; neighbor lists are sorted
/// and contain no self-loops.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    xadj: Vec<usize>,
    adjncy: Vec<u32>,
    adjwgt: Vec<i64>,
    vwgt: Vec<i64>,
}

impl WeightedGraph {
    /// Symmetrized view of the social graph: `{i, j}` is an edge iff `i→j` or `j→i`.
    pub fn from_social(g: &SocialGraph) -> Self {
        let edges: Vec<(usize, usize)> = g.edges().map(|(s, t, _)| (s, t)).collect();
        Self::from_edges(g.num_nodes(), &edges)
    }

    /// Unit-weight undirected graph; duplicate pairs and self-loops are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            assert!(a < n && b < n, "edge ({a}, {b}) out of range for {n} nodes");
            if a != b {
                lists[a].push(b as u32);
                lists[b].push(a as u32);
            }
        }
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adjncy = Vec::new();
        xadj.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            adjncy.extend(l);
            xadj.push(adjncy.len());
        }
        let adjwgt = vec![1; adjncy.len()];
        WeightedGraph {
            xadj,
            adjncy,
            adjwgt,
            vwgt: vec![1; n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.vwgt.len()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjncy.len() / 2
    }

    pub fn total_vertex_weight(&self) -> i64 {
        self.vwgt.iter().sum()
    }

    pub fn vertex_weight(&self, u: usize) -> i64 {
        self.vwgt[u]
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adjncy[r.clone()]
            .iter()
            .zip(&self.adjwgt[r])
            .map(|(&v, &w)| (v as usize, w))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.xadj[u + 1] - self.xadj[u]
    }

    /// Total weight of undirected edges whose endpoints lie in different clusters.
    pub fn cut(&self, assignment: &[u32]) -> i64 {
        let mut cut = 0;
        for u in 0..self.num_nodes() {
            for (v, w) in self.neighbors(u) {
                if u < v && assignment[u] != assignment[v] {
                    cut += w;
                }
            }
        }
        cut
    }
}

/// Assignment of every node to one of `k` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignment: Vec<u32>,
    pub k: usize,
    pub edge_cut: usize,
    pub imbalance: f64,
}

impl Partition {
    pub fn new(g: &WeightedGraph, assignment: Vec<u32>, k: usize) -> Self {
        let edge_cut = edge_cut(g, &assignment);
        let imbalance = imbalance(&assignment, k);
        Partition {
            assignment,
            k,
            edge_cut,
            imbalance,
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c as usize] += 1;
        }
        sizes
    }

    pub fn summary(&self, seed: u64) -> PartitionSummary {
        PartitionSummary {
            k: self.k,
            edge_cut: self.edge_cut,
            imbalance: self.imbalance,
            seed,
        }
    }

    /// One `node_index cluster_id` line per node.
    pub fn write_dump<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, c) in self.assignment.iter().enumerate() {
            writeln!(w, "{i} {c}")?;
        }
        w.flush()
    }

    /// Reads a dump written by [`Partition::write_dump`]; `k` is one past the largest id.
    pub fn read_dump<R: std::io::BufRead>(
        reader: R,
        g: &WeightedGraph,
        origin: &std::path::Path,
    ) -> Result<Self> {
        let mut assignment = vec![u32::MAX; g.num_nodes()];
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(origin, i + 1, "expected `node cluster`");
            let mut it = line.split_whitespace();
            let node: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let cluster: u32 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            *assignment.get_mut(node).ok_or_else(bad)? = cluster;
        }
        if assignment.contains(&u32::MAX) {
            return Err(Error::format(origin, 0, "partition does not cover every node"));
        }
        let k = assignment.iter().max().map_or(0, |&m| m as usize + 1);
        Ok(Partition::new(g, assignment, k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub k: usize,
    pub edge_cut: usize,
    pub imbalance: f64,
    pub seed: u64,
}

pub fn edge_cut(g: &WeightedGraph, assignment: &[u32]) -> usize {
    g.cut(assignment) as usize
}

/// `max_c |c|·k/n − 1`; zero for an empty assignment.
pub fn imbalance(assignment: &[u32], k: usize) -> f64 {
    if assignment.is_empty() || k == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        sizes[c as usize] += 1;
    }
    let max = *sizes.iter().max().unwrap_or(&0);
    max as f64 * k as f64 / assignment.len() as f64 - 1.0
}

/// Largest part weight allowed for total weight `total`, `k` parts and tolerance `eps`.
///
/// Never below `ceil(total / k)`, which is the smallest achievable maximum.
pub fn max_part_weight(total: i64, k: usize, eps: f64) -> i64 {
    let k = k as i64;
    let ceil = (total + k - 1) / k;
    let tol = ((1.0 + eps) * total as f64 / k as f64 + 1e-9).floor() as i64;
    ceil.max(tol)
}

/// One level of the coarsening hierarchy.
#[derive(Debug, Clone)]
pub struct CoarseLevel {
    pub graph: WeightedGraph,
    /// Fine node → coarse node.
    pub projection: Vec<u32>,
}

impl CoarseLevel {
    pub fn project(&self, coarse_assignment: &[u32]) -> Vec<u32> {
        self.projection
            .iter()
            .map(|&c| coarse_assignment[c as usize])
            .collect()
    }
}

/// Coarse node count at which coarsening stops.
pub fn coarsening_target(k: usize) -> usize {
    (20 * k).max(200)
}

/// One round of heavy-edge matching.
///
/// Nodes are visited in a seeded random order; each unmatched node pairs with the
/// unmatched neighbor behind its heaviest edge (lowest index on ties) unless the
/// merged weight would exceed `max_vwgt`.
pub fn coarsen_once(g: &WeightedGraph, max_vwgt: i64, rng: &mut seed::Rng) -> CoarseLevel {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; n];
    for &u in &order {
        if mate[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for (v, w) in g.neighbors(u) {
            if mate[v] != usize::MAX || g.vwgt[u] + g.vwgt[v] > max_vwgt {
                continue;
            }
            if best.is_none_or(|(bw, bv)| w > bw || (w == bw && v < bv)) {
                best = Some((w, v));
            }
        }
        match best {
            Some((_, v)) => {
                mate[u] = v;
                mate[v] = u;
            }
            None => mate[u] = u,
        }
    }

    let mut projection = vec![u32::MAX; n];
    let mut members: Vec<(usize, usize)> = Vec::new();
    for u in 0..n {
        if projection[u] != u32::MAX {
            continue;
        }
        let c = members.len() as u32;
        projection[u] = c;
        projection[mate[u]] = c;
        members.push((u, mate[u]));
    }

    let cn = members.len();
    let mut xadj = Vec::with_capacity(cn + 1);
    let mut adjncy = Vec::new();
    let mut adjwgt = Vec::new();
    let mut vwgt = Vec::with_capacity(cn);
    let mut acc = vec![0i64; cn];
    let mut touched: Vec<usize> = Vec::new();
    xadj.push(0);
    for (c, &(a, b)) in members.iter().enumerate() {
        vwgt.push(if a == b { g.vwgt[a] } else { g.vwgt[a] + g.vwgt[b] });
        let fine: &[usize] = if a == b { &[a] } else { &[a, b] };
        for &u in fine {
            for (v, w) in g.neighbors(u) {
                let cv = projection[v] as usize;
                if cv == c {
                    continue;
                }
                if acc[cv] == 0 {
                    touched.push(cv);
                }
                acc[cv] += w;
            }
        }
        touched.sort_unstable();
        for &cv in &touched {
            adjncy.push(cv as u32);
            adjwgt.push(acc[cv]);
            acc[cv] = 0;
        }
        touched.clear();
        xadj.push(adjncy.len());
    }
    CoarseLevel {
        graph: WeightedGraph {
            xadj,
            adjncy,
            adjwgt,
            vwgt,
        },
        projection,
    }
}

/// Builds the coarsening hierarchy, finest first.
///
/// Stops once a level has at most [`coarsening_target`]`(k)` nodes or a round shrinks
/// the node count by less than 10%.
pub fn coarsen(g: &WeightedGraph, k: usize, rng: &mut seed::Rng) -> Vec<CoarseLevel> {
    let target = coarsening_target(k);
    let max_vwgt = ((1.5 * g.total_vertex_weight() as f64 / target as f64).ceil() as i64).max(1);
    let mut levels: Vec<CoarseLevel> = Vec::new();
    loop {
        let current = levels.last().map_or(g, |l| &l.graph);
        let n = current.num_nodes();
        if n <= target {
            break;
        }
        let level = coarsen_once(current, max_vwgt, rng);
        let shrunk = level.graph.num_nodes();
        if (shrunk as f64) > 0.9 * n as f64 {
            break;
        }
        levels.push(level);
    }
    levels
}

/// Greedy region growing into `k` non-empty parts.
///
/// Each part starts from the first unassigned node in a seeded order and repeatedly
/// absorbs the frontier node whose addition lowers the region's cut the most, until
/// it holds its share of the remaining weight. Disconnected leftovers are pulled in
/// visit order.
pub fn initial_partition(g: &WeightedGraph, k: usize, rng: &mut seed::Rng) -> Vec<u32> {
    let n = g.num_nodes();
    let mut part = vec![u32::MAX; n];
    if k == 1 {
        return vec![0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut cursor = 0;
    let mut unassigned = n;
    let mut remaining_weight = g.total_vertex_weight();
    let mut conn = vec![0i64; n];
    let wdeg: Vec<i64> = (0..n).map(|u| g.neighbors(u).map(|e| e.1).sum()).collect();

    for p in 0..k - 1 {
        let target = remaining_weight as f64 / (k - p) as f64;
        let parts_after = k - 1 - p;
        let mut weight = 0i64;
        let mut heap: BinaryHeap<(i64, Reverse<usize>)> = BinaryHeap::new();
        let mut grown: Vec<usize> = Vec::new();
        while (weight as f64) < target && unassigned > parts_after {
            let next = loop {
                match heap.pop() {
                    Some((c, Reverse(u))) if part[u] == u32::MAX && c == 2 * conn[u] - wdeg[u] => {
                        break Some(u)
                    }
                    Some(_) => continue,
                    None => break None,
                }
            };
            let u = match next {
                Some(u) => u,
                None => {
                    while part[order[cursor]] != u32::MAX {
                        cursor += 1;
                    }
                    order[cursor]
                }
            };
            // Stop short rather than overshoot by more than half the node's weight.
            if weight > 0 && (weight + g.vwgt[u]) as f64 - target > target - weight as f64 {
                break;
            }
            part[u] = p as u32;
            weight += g.vwgt[u];
            unassigned -= 1;
            grown.push(u);
            for (v, w) in g.neighbors(u) {
                if part[v] == u32::MAX {
                    conn[v] += w;
                    heap.push((2 * conn[v] - wdeg[v], Reverse(v)));
                }
            }
        }
        remaining_weight -= weight;
        for u in grown {
            for (v, _) in g.neighbors(u) {
                conn[v] = 0;
            }
        }
    }
    for p in part.iter_mut() {
        if *p == u32::MAX {
            *p = (k - 1) as u32;
        }
    }
    part
}

fn part_weights(g: &WeightedGraph, part: &[u32], k: usize) -> Vec<i64> {
    let mut w = vec![0i64; k];
    for (u, &p) in part.iter().enumerate() {
        w[p as usize] += g.vwgt[u];
    }
    w
}

/// Connection weight from `u` to each adjacent part, plus the internal weight.
fn connectivity(g: &WeightedGraph, part: &[u32], u: usize, ext: &mut Vec<(u32, i64)>) -> i64 {
    ext.clear();
    let home = part[u];
    let mut internal = 0;
    for (v, w) in g.neighbors(u) {
        let p = part[v];
        if p == home {
            internal += w;
        } else if let Some(e) = ext.iter_mut().find(|e| e.0 == p) {
            e.1 += w;
        } else {
            ext.push((p, w));
        }
    }
    internal
}

/// Best allowed move for `u`: `(gain, target)` with lowest target id on ties.
fn best_move(
    g: &WeightedGraph,
    part: &[u32],
    weights: &[i64],
    max_weight: i64,
    u: usize,
    ext: &mut Vec<(u32, i64)>,
) -> Option<(i64, u32)> {
    let from = part[u] as usize;
    if weights[from] - g.vwgt[u] <= 0 {
        return None;
    }
    let internal = connectivity(g, part, u, ext);
    let mut best: Option<(i64, u32)> = None;
    for &(p, w) in ext.iter() {
        if weights[p as usize] + g.vwgt[u] > max_weight {
            continue;
        }
        let gain = w - internal;
        if best.is_none_or(|(bg, bp)| gain > bg || (gain == bg && p < bp)) {
            best = Some((gain, p));
        }
    }
    best
}

/// Moves nodes out of parts heavier than `max_weight`, cheapest cut increase first.
///
/// Returns `true` when every part ends within the bound.
pub fn rebalance(g: &WeightedGraph, part: &mut [u32], k: usize, max_weight: i64) -> bool {
    let mut weights = part_weights(g, part, k);
    let mut ext = Vec::new();
    for _round in 0..k.max(4) {
        let Some(from) = (0..k).filter(|&p| weights[p] > max_weight).max_by_key(|&p| (weights[p], Reverse(p))) else {
            return true;
        };
        let mut candidates: Vec<(i64, usize)> = Vec::new();
        for u in 0..g.num_nodes() {
            if part[u] as usize != from {
                continue;
            }
            let internal = connectivity(g, part, u, &mut ext);
            let best_ext = ext.iter().map(|e| e.1).max().unwrap_or(0);
            candidates.push((best_ext - internal, u));
        }
        candidates.sort_by_key(|&(gain, u)| (Reverse(gain), u));
        for (_, u) in candidates {
            if weights[from] <= max_weight {
                break;
            }
            let vw = g.vwgt[u];
            if weights[from] - vw <= 0 {
                continue;
            }
            let internal = connectivity(g, part, u, &mut ext);
            let mut target: Option<(i64, u32)> = None;
            for &(p, w) in &ext {
                if weights[p as usize] + vw <= max_weight
                    && target.is_none_or(|(tg, tp)| w - internal > tg || (w - internal == tg && p < tp))
                {
                    target = Some((w - internal, p));
                }
            }
            let target = target.map(|t| t.1).or_else(|| {
                (0..k as u32)
                    .filter(|&p| p as usize != from && weights[p as usize] + vw <= max_weight)
                    .min_by_key(|&p| (weights[p as usize], p))
            });
            if let Some(t) = target {
                part[u] = t;
                weights[from] -= vw;
                weights[t as usize] += vw;
            }
        }
    }
    weights.iter().all(|&w| w <= max_weight)
}

/// One boundary Fiduccia–Mattheyses pass.
///
/// Boundary nodes sit in gain buckets (highest gain first, lowest index on ties).
/// The best node moves to its best allowed part and is locked; its unlocked
/// neighbors are re-bucketed. Moves continue through non-improving stretches up to a
/// limit, then the pass rolls back to the best prefix, so the cut never increases.
/// Returns `(cut_before, cut_after)`.
pub fn fm_pass(g: &WeightedGraph, part: &mut [u32], k: usize, max_weight: i64) -> (i64, i64) {
    let before = g.cut(part);
    let n = g.num_nodes();
    if k < 2 || n == 0 {
        return (before, before);
    }
    let mut weights = part_weights(g, part, k);
    let mut ext = Vec::new();
    let mut buckets: BTreeSet<(Reverse<i64>, usize)> = BTreeSet::new();
    let mut bucket_gain: Vec<Option<i64>> = vec![None; n];
    let mut locked = vec![false; n];

    let is_boundary = |part: &[u32], u: usize| g.neighbors(u).any(|(v, _)| part[v] != part[u]);
    for u in 0..n {
        if is_boundary(part, u) {
            if let Some((gain, _)) = best_move(g, part, &weights, max_weight, u, &mut ext) {
                buckets.insert((Reverse(gain), u));
                bucket_gain[u] = Some(gain);
            }
        }
    }

    let stall_limit = 50.max(n / 100);
    let mut moves: Vec<(usize, u32)> = Vec::new();
    let mut total_gain = 0i64;
    let mut best_gain = 0i64;
    let mut best_len = 0usize;
    while let Some((_, u)) = buckets.pop_first() {
        bucket_gain[u] = None;
        locked[u] = true;
        let Some((gain, to)) = best_move(g, part, &weights, max_weight, u, &mut ext) else {
            continue;
        };
        let from = part[u];
        part[u] = to;
        weights[from as usize] -= g.vwgt[u];
        weights[to as usize] += g.vwgt[u];
        moves.push((u, from));
        total_gain += gain;
        if total_gain > best_gain {
            best_gain = total_gain;
            best_len = moves.len();
        }
        if moves.len() - best_len > stall_limit {
            break;
        }
        for (v, _) in g.neighbors(u) {
            if locked[v] {
                continue;
            }
            if let Some(old) = bucket_gain[v].take() {
                buckets.remove(&(Reverse(old), v));
            }
            if is_boundary(part, v) {
                if let Some((gain, _)) = best_move(g, part, &weights, max_weight, v, &mut ext) {
                    buckets.insert((Reverse(gain), v));
                    bucket_gain[v] = Some(gain);
                }
            }
        }
    }
    for &(u, from) in moves[best_len..].iter().rev() {
        part[u] = from;
    }
    let after = g.cut(part);
    debug_assert_eq!(before - after, best_gain);
    (before, after)
}

/// Per-level record of a multilevel run, coarsest level first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LevelTrace {
    pub nodes: usize,
    /// Cut of the coarser partition on the coarser graph (`None` at the coarsest level).
    pub coarse_cut: Option<i64>,
    /// Cut right after projection onto this level, before any refinement.
    pub projected_cut: i64,
    /// `(cut_before, cut_after)` per FM pass.
    pub passes: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefinementTrace {
    pub levels: Vec<LevelTrace>,
}

/// Balanced k-way partition minimizing edge cut.
pub fn partition_multilevel(g: &WeightedGraph, k: usize, eps: f64, seed: u64) -> Result<Partition> {
    partition_multilevel_traced(g, k, eps, seed).map(|(p, _)| p)
}

pub fn partition_multilevel_traced(
    g: &WeightedGraph,
    k: usize,
    eps: f64,
    seed: u64,
) -> Result<(Partition, RefinementTrace)> {
    let n = g.num_nodes();
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(eps >= 0.0) {
        return Err(Error::invalid("imbalance tolerance must be non-negative"));
    }
    if k > n {
        if n == 0 && k == 1 {
            return Ok((Partition::new(g, Vec::new(), 1), RefinementTrace::default()));
        }
        return Err(Error::invalid(format!("more clusters than nodes ({k} > {n})")));
    }
    if k == 1 {
        return Ok((Partition::new(g, vec![0; n], 1), RefinementTrace::default()));
    }

    let mut rng = seed::rng(seed);
    let max_weight = max_part_weight(g.total_vertex_weight(), k, eps);
    let levels = coarsen(g, k, &mut rng);
    let coarsest = levels.last().map_or(g, |l| &l.graph);

    // Several region-growing starts on the (small) coarsest graph; keep the best
    // refined one, preferring balanced results.
    let mut best: Option<((bool, i64), Vec<u32>, LevelTrace)> = None;
    for _ in 0..INITIAL_TRIES {
        let mut part = initial_partition(coarsest, k, &mut rng);
        let mut level_trace = LevelTrace {
            nodes: coarsest.num_nodes(),
            coarse_cut: None,
            projected_cut: coarsest.cut(&part),
            passes: Vec::new(),
        };
        let balanced = rebalance(coarsest, &mut part, k, max_weight);
        let (before, cut) = fm_pass(coarsest, &mut part, k, max_weight);
        level_trace.passes.push((before, cut));
        let key = (!balanced, cut);
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, part, level_trace));
        }
    }
    let (_, mut part, level_trace) = best.expect("at least one initial try");
    let mut trace = RefinementTrace::default();
    trace.levels.push(level_trace);

    for (i, level) in levels.iter().enumerate().rev() {
        let coarse_graph = &level.graph;
        let fine_graph = if i == 0 { g } else { &levels[i - 1].graph };
        let coarse_cut = coarse_graph.cut(&part);
        part = level.project(&part);
        let mut level_trace = LevelTrace {
            nodes: fine_graph.num_nodes(),
            coarse_cut: Some(coarse_cut),
            projected_cut: fine_graph.cut(&part),
            passes: Vec::new(),
        };
        rebalance(fine_graph, &mut part, k, max_weight);
        level_trace.passes.push(fm_pass(fine_graph, &mut part, k, max_weight));
        trace.levels.push(level_trace);
    }

    let last = trace.levels.last_mut().expect("at least one level");
    if !rebalance(g, &mut part, k, max_weight) {
        return Err(Error::invalid("could not satisfy the balance constraint"));
    }
    last.passes.push(fm_pass(g, &mut part, k, max_weight));
    Ok((Partition::new(g, part, k), trace))
}

/// Modularity of `assignment` at the given resolution.
pub fn modularity(g: &WeightedGraph, assignment: &[u32], resolution: f64) -> f64 {
    let m2: f64 = g.adjwgt.iter().map(|&w| w as f64).sum();
    if m2 == 0.0 {
        return 0.0;
    }
    let k = assignment.iter().max().map_or(0, |&m| m as usize + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for u in 0..g.num_nodes() {
        let cu = assignment[u] as usize;
        for (v, w) in g.neighbors(u) {
            total[cu] += w as f64;
            if assignment[v] as usize == cu {
                internal[cu] += w as f64;
            }
        }
    }
    internal
        .iter()
        .zip(&total)
        .map(|(&i, &t)| i / m2 - resolution * (t / m2) * (t / m2))
        .sum()
}

/// Aggregated graph used between Louvain levels. Self-loop weight counts internal
/// adjacency in both directions, so `degree` stays the sum of a row of the adjacency.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
    degree: Vec<f64>,
}

impl LevelGraph {
    fn from_weighted(g: &WeightedGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..g.num_nodes())
            .map(|u| g.neighbors(u).map(|(v, w)| (v, w as f64)).collect())
            .collect();
        let degree = adj.iter().map(|l| l.iter().map(|e| e.1).sum()).collect();
        LevelGraph {
            self_w: vec![0.0; adj.len()],
            adj,
            degree,
        }
    }

    fn aggregate(&self, community: &[usize], count: usize) -> Self {
        let mut self_w = vec![0.0; count];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for u in 0..self.adj.len() {
            let cu = community[u];
            self_w[cu] += self.self_w[u];
            for &(v, w) in &self.adj[u] {
                let cv = community[v];
                if cu == cv {
                    self_w[cu] += w;
                } else {
                    *maps[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = maps.into_iter().map(|m| m.into_iter().collect()).collect();
        let degree = adj
            .iter()
            .zip(&self_w)
            .map(|(l, s)| s + l.iter().map(|e| e.1).sum::<f64>())
            .collect();
        LevelGraph { adj, self_w, degree }
    }
}

/// Local-move phase; returns `true` if any node changed community.
fn louvain_local_moves(lg: &LevelGraph, community: &mut [usize], resolution: f64, m2: f64, rng: &mut seed::Rng) -> bool {
    let n = lg.adj.len();
    let mut tot = vec![0.0; n];
    for u in 0..n {
        tot[community[u]] += lg.degree[u];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut links = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut improvement = 0.0;
        for &u in &order {
            let home = community[u];
            let ku = lg.degree[u];
            for &(v, w) in &lg.adj[u] {
                let c = community[v];
                if links[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                links[c] += w;
            }
            tot[home] -= ku;
            let gain_of = |c: usize, links: &[f64]| links[c] - resolution * tot[c] * ku / m2;
            let stay = gain_of(home, &links);
            let mut best = (stay, home);
            touched.sort_unstable();
            for &c in &touched {
                let gain = gain_of(c, &links);
                if gain > best.0 + 1e-12 {
                    best = (gain, c);
                }
            }
            tot[best.1] += ku;
            if best.1 != home {
                community[u] = best.1;
                improvement += 2.0 * (best.0 - stay) / m2;
                moved_any = true;
            }
            for &c in &touched {
                links[c] = 0.0;
            }
            links[home] = 0.0;
            touched.clear();
        }
        if improvement <= 1e-7 {
            break;
        }
    }
    moved_any
}

fn renumber(labels: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for l in labels.iter_mut() {
        let next = map.len();
        *l = *map.entry(*l).or_insert(next);
    }
    map.len()
}

/// Modularity communities by Louvain; the trace holds the modularity on the input
/// graph after every local-move phase.
pub fn partition_louvain_traced(g: &WeightedGraph, resolution: f64, seed: u64) -> Result<(Partition, Vec<f64>)> {
    let n = g.num_nodes();
    if n == 0 {
        return Err(Error::invalid("cannot run Louvain on an empty graph"));
    }
    if !(resolution > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    let mut rng = seed::rng(seed);
    let mut node_comm: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut lg = LevelGraph::from_weighted(g);
    let m2: f64 = lg.degree.iter().sum();
    if m2 > 0.0 {
        let mut current_q = modularity(g, &to_u32(&node_comm), resolution);
        loop {
            let mut community: Vec<usize> = (0..lg.adj.len()).collect();
            louvain_local_moves(&lg, &mut community, resolution, m2, &mut rng);
            let count = renumber(&mut community);
            for c in node_comm.iter_mut() {
                *c = community[*c];
            }
            let q = modularity(g, &to_u32(&node_comm), resolution);
            trace.push(q);
            if q - current_q <= 1e-7 || count == lg.adj.len() {
                break;
            }
            current_q = q;
            lg = lg.aggregate(&community, count);
        }
    }
    let k = renumber(&mut node_comm);
    Ok((Partition::new(g, to_u32(&node_comm), k), trace))
}

pub fn partition_louvain(g: &WeightedGraph, resolution: f64, seed: u64) -> Result<Partition> {
    partition_louvain_traced(g, resolution, seed).map(|(p, _)| p)
}

fn to_u32(v: &[usize]) -> Vec<u32> {
    v.iter().map(|&x| x as u32).collect()
}
