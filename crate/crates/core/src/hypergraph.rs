//! Cascade hypergraph: one node per cascade, one hyperedge per user cluster.
//!
//! A cluster's hyperedge is the deduplicated union of the cascades its users took
//! part in. Empty hyperedges are dropped; cascades that end up in no hyperedge stay
//! as isolated nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{Cascade, Label, SocialGraph, UserCascades, UserId};
use crate::partition::Partition;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeHypergraph {
    labels: Vec<Label>,
    hyperedges: Vec<Vec<u32>>,
    weights: Vec<f64>,
    node_edges: Vec<Vec<u32>>,
}

impl CascadeHypergraph {
    /// Hyperedge members are sorted and deduplicated; every weight is 1.
    pub fn new(labels: Vec<Label>, hyperedges: Vec<Vec<u32>>) -> Result<Self> {
        let n = labels.len();
        let mut node_edges: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut edges = Vec::with_capacity(hyperedges.len());
        for (j, mut e) in hyperedges.into_iter().enumerate() {
            e.sort_unstable();
            e.dedup();
            if let Some(&bad) = e.iter().find(|&&i| i as usize >= n) {
                return Err(Error::invalid(format!("hyperedge {j} references node {bad} of {n}")));
            }
            for &i in &e {
                node_edges[i as usize].push(j as u32);
            }
            edges.push(e);
        }
        let weights = vec![1.0; edges.len()];
        Ok(CascadeHypergraph {
            labels,
            hyperedges: edges,
            weights,
            node_edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn hyperedge(&self, j: usize) -> &[u32] {
        &self.hyperedges[j]
    }

    pub fn hyperedges(&self) -> &[Vec<u32>] {
        &self.hyperedges
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    /// Hyperedges containing node `i`, ascending.
    pub fn node_edges(&self, i: usize) -> &[u32] {
        &self.node_edges[i]
    }

    pub fn node_degree(&self, i: usize) -> usize {
        self.node_edges[i].len()
    }

    pub fn edge_degree(&self, j: usize) -> usize {
        self.hyperedges[j].len()
    }

    /// `(node, hyperedge)` pairs, hyperedge-major.
    pub fn incidence(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.hyperedges
            .iter()
            .enumerate()
            .flat_map(|(j, e)| e.iter().map(move |&i| (i as usize, j)))
    }

    pub fn num_incidences(&self) -> usize {
        self.hyperedges.iter().map(Vec::len).sum()
    }

    /// Same structure with nodes renumbered: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut labels = vec![Label::Unknown; self.num_nodes()];
        for (i, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[i];
        }
        let edges = self
            .hyperedges
            .iter()
            .map(|e| e.iter().map(|&i| perm[i as usize] as u32).collect())
            .collect();
        CascadeHypergraph::new(labels, edges)
    }

    /// `h <index> <node>...` per hyperedge.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (j, e) in self.hyperedges.iter().enumerate() {
            write!(w, "h {j}")?;
            for i in e {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// `<node> <label>` per node.
    pub fn write_labels<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i} {}", l.as_str())?;
        }
        w.flush()
    }

    pub fn read_dump<R1: BufRead, R2: BufRead>(edges: R1, labels: R2, origin: &Path) -> Result<Self> {
        let mut label_list = Vec::new();
        for (i, line) in labels.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let idx: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(|| Error::format(origin, i + 1, "bad label line"))?;
            let label = match it.next() {
                Some("fake") => Label::Fake,
                Some("nonfake") => Label::NonFake,
                Some("unknown") => Label::Unknown,
                _ => return Err(Error::format(origin, i + 1, "bad label")),
            };
            if idx != label_list.len() {
                return Err(Error::format(origin, i + 1, "labels must be listed in node order"));
            }
            label_list.push(label);
        }
        let mut hyperedges = Vec::new();
        for (i, line) in edges.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::format(origin, i + 1, "expected `h <index> <node>...`");
            if it.next() != Some("h") {
                return Err(bad());
            }
            let idx: usize = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if idx != hyperedges.len() {
                return Err(bad());
            }
            let members = it.map(|x| x.parse::<u32>().map_err(|_| bad())).collect::<Result<Vec<_>>>()?;
            hyperedges.push(members);
        }
        CascadeHypergraph::new(label_list, hyperedges)
    }
}

/// User → cluster lookup.
#[derive(Debug, Clone, Default)]
pub struct UserClusters {
    pub k: usize,
    cluster: HashMap<UserId, u32>,
}

impl UserClusters {
    /// Maps each social-graph user to its partition cluster.
    pub fn from_partition(p: &Partition, g: &SocialGraph) -> Self {
        let cluster = g
            .users()
            .iter()
            .zip(&p.assignment)
            .map(|(&u, &c)| (u, c))
            .collect();
        UserClusters { k: p.k, cluster }
    }

    pub fn from_map(k: usize, cluster: HashMap<UserId, u32>) -> Self {
        UserClusters { k, cluster }
    }

    pub fn cluster_of(&self, u: UserId) -> Option<u32> {
        self.cluster.get(&u).copied()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    /// Cascade participants that have no cluster (absent from the social graph).
    pub skipped_users: usize,
    pub empty_hyperedges: usize,
    pub dropped_singletons: usize,
    pub isolated_cascades: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub drop_singletons: bool,
}

pub fn build_hypergraph(
    clusters: &UserClusters,
    u2c: &UserCascades,
    cascades: &[Cascade],
    opts: BuildOptions,
) -> (CascadeHypergraph, BuildReport) {
    let mut report = BuildReport::default();
    let mut members: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); clusters.k];
    for (user, cs) in u2c {
        match clusters.cluster_of(*user) {
            Some(c) => members[c as usize].extend(cs.iter().map(|&i| i as u32)),
            None => report.skipped_users += 1,
        }
    }
    let mut hyperedges = Vec::new();
    for m in members {
        if m.is_empty() {
            report.empty_hyperedges += 1;
        } else if opts.drop_singletons && m.len() == 1 {
            report.dropped_singletons += 1;
        } else {
            hyperedges.push(m.into_iter().collect::<Vec<u32>>());
        }
    }
    let labels = cascades.iter().map(|c| c.label).collect();
    let h = CascadeHypergraph::new(labels, hyperedges).expect("cascade indices come from u2c");
    report.isolated_cascades = (0..h.num_nodes()).filter(|&i| h.node_degree(i) == 0).count();
    (h, report)
}

/// Appends one hyperedge per hashtag shared by at least two cascades (hashtags in
/// lexicographic order).
pub fn add_hashtag_hyperedges(h: &CascadeHypergraph, cascades: &[Cascade]) -> CascadeHypergraph {
    let mut by_tag: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for (i, c) in cascades.iter().enumerate() {
        for tag in &c.hashtags {
            by_tag.entry(tag.as_str()).or_default().insert(i as u32);
        }
    }
    let mut edges = h.hyperedges.clone();
    edges.extend(
        by_tag
            .into_values()
            .filter(|s| s.len() >= 2)
            .map(|s| s.into_iter().collect()),
    );
    CascadeHypergraph::new(h.labels.clone(), edges).expect("indices within range")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypergraphStats {
    pub nodes: usize,
    pub hyperedges: usize,
    pub incidences: usize,
    pub fake: usize,
    pub nonfake: usize,
    pub unknown: usize,
    pub min_edge_degree: usize,
    pub mean_edge_degree: f64,
    pub max_edge_degree: usize,
    pub isolated_nodes: usize,
}

pub fn hypergraph_stats(h: &CascadeHypergraph) -> HypergraphStats {
    let degrees: Vec<usize> = (0..h.num_hyperedges()).map(|j| h.edge_degree(j)).collect();
    let count = |l| h.labels.iter().filter(|&&x| x == l).count();
    HypergraphStats {
        nodes: h.num_nodes(),
        hyperedges: h.num_hyperedges(),
        incidences: h.num_incidences(),
        fake: count(Label::Fake),
        nonfake: count(Label::NonFake),
        unknown: count(Label::Unknown),
        min_edge_degree: degrees.iter().copied().min().unwrap_or(0),
        mean_edge_degree: if degrees.is_empty() {
            0.0
        } else {
            degrees.iter().sum::<usize>() as f64 / degrees.len() as f64
        },
        max_edge_degree: degrees.iter().copied().max().unwrap_or(0),
        isolated_nodes: (0..h.num_nodes()).filter(|&i| h.node_degree(i) == 0).count(),
    }
}
