use std::collections::{BTreeSet, HashMap};

use crate::ingest::{Cascade, SocialGraph, UserId};

/// Undirected participant graph of one cascade: the root–retweeter star plus prior
/// interactions among participants.
///
/// Node 0 is the root; retweeters follow in timestamp order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedCascadeGraph {
    participants: Vec<UserId>,
    edges: BTreeSet<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl AugmentedCascadeGraph {
    /// Builds a graph from participants and undirected edges `(a, b)` with `a != b`.
    pub fn from_edges(participants: Vec<UserId>, pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let n = participants.len();
        let mut edges = BTreeSet::new();
        for (a, b) in pairs {
            assert!((a as usize) < n && (b as usize) < n, "edge outside participant range");
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for l in &mut adjacency {
            l.sort_unstable();
        }
        AugmentedCascadeGraph {
            participants,
            edges,
            adjacency,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.participants.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn participants(&self) -> &[UserId] {
        &self.participants
    }

    /// Edges as `(low, high)` local index pairs.
    pub fn edges(&self) -> &BTreeSet<(u32, u32)> {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[i]
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &self.adjacency[u] {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    count += 1;
                    stack.push(v as usize);
                }
            }
        }
        count == n
    }
}

/// Star edges root–retweeter, plus `i–j` whenever retweeter `i` has a social-graph
/// edge `i→j` that predates its retweet and `j` participates in the cascade.
pub fn augment_cascade(c: &Cascade, g: &SocialGraph) -> AugmentedCascadeGraph {
    let participants: Vec<UserId> = c.participants().collect();
    let local: HashMap<UserId, u32> = participants
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i as u32))
        .collect();
    let mut pairs: Vec<(u32, u32)> = (1..participants.len() as u32).map(|i| (0, i)).collect();
    for (i, &(user, retweet_ts)) in c.retweeters.iter().enumerate() {
        let Some(node) = g.node_of(user) else { continue };
        for (target, ts) in g.out_edges(node) {
            if ts >= retweet_ts {
                continue;
            }
            if let Some(&j) = local.get(&g.user(target)) {
                pairs.push((i as u32 + 1, j));
            }
        }
    }
    AugmentedCascadeGraph::from_edges(participants, pairs)
}
