mod common;

use cascadehg::partition::{
    coarsen, coarsen_once, fm_pass, imbalance, max_part_weight, modularity, partition_louvain_traced,
    partition_multilevel, partition_multilevel_traced, WeightedGraph,
};
use cascadehg::seed;
use common::{erdos_renyi, planted};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn graph(n: usize, planted_blocks: Option<usize>, seed: u64) -> WeightedGraph {
    let mut rng = seed::rng(seed);
    let edges = match planted_blocks {
        Some(b) => planted(n, b, 14.0 / n as f64 * b as f64 / 2.0, 1.0 / n as f64, &mut rng),
        None => erdos_renyi(n, 5.0 / n as f64, &mut rng),
    };
    WeightedGraph::from_edges(n, &edges)
}

fn random_balanced(n: usize, k: usize, seed: u64) -> Vec<u32> {
    let mut a: Vec<u32> = (0..n).map(|i| (i % k) as u32).collect();
    a.shuffle(&mut seed::rng(seed));
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn balanced_and_better_than_random(
        blocks in 19usize..50,
        k in prop::sample::select(vec![2usize, 4, 8, 16]),
        structured in any::<bool>(),
        s in any::<u64>(),
    ) {
        let n = 16 * blocks;
        let g = graph(n, structured.then_some(k.min(8)), s);
        let (p, trace) = partition_multilevel_traced(&g, k, 0.03, s).unwrap();
        prop_assert_eq!(p.assignment.len(), n);
        prop_assert!(p.assignment.iter().all(|&c| (c as usize) < k));
        prop_assert!(imbalance(&p.assignment, k) <= 0.03 + 1e-12);
        prop_assert_eq!(p.edge_cut as i64, g.cut(&p.assignment));
        prop_assert!(p.edge_cut as i64 <= g.cut(&random_balanced(n, k, s ^ 1)));
        for level in &trace.levels {
            for &(before, after) in &level.passes {
                prop_assert!(after <= before);
            }
            if let Some(coarse) = level.coarse_cut {
                prop_assert_eq!(coarse, level.projected_cut);
            }
        }
    }

    #[test]
    fn coarsening_preserves_weight_and_cut(n in 50usize..400, s in any::<u64>()) {
        let g = graph(n, None, s);
        let mut rng = seed::rng(s);
        let level = coarsen_once(&g, i64::MAX, &mut rng);
        prop_assert_eq!(level.graph.total_vertex_weight(), g.total_vertex_weight());
        prop_assert_eq!(level.projection.len(), n);
        prop_assert!(level.graph.num_nodes() <= n);
        let coarse: Vec<u32> = (0..level.graph.num_nodes()).map(|i| (i % 3) as u32).collect();
        prop_assert_eq!(level.graph.cut(&coarse), g.cut(&level.project(&coarse)));
    }

    #[test]
    fn fm_respects_balance(n in 40usize..300, k in 2usize..6, s in any::<u64>()) {
        let g = graph(n, None, s);
        let max_w = max_part_weight(g.total_vertex_weight(), k, 0.03);
        let mut part = random_balanced(n, k, s);
        let (before, after) = fm_pass(&g, &mut part, k, max_w);
        prop_assert_eq!(before, g.cut(&random_balanced(n, k, s)));
        prop_assert_eq!(after, g.cut(&part));
        prop_assert!(after <= before);
        let mut sizes = vec![0i64; k];
        for &c in &part {
            sizes[c as usize] += 1;
        }
        prop_assert!(sizes.iter().all(|&w| w <= max_w));
    }

    #[test]
    fn louvain_monotone(n in 20usize..300, structured in any::<bool>(), s in any::<u64>()) {
        let g = graph(n, structured.then_some(4), s);
        let (p, trace) = partition_louvain_traced(&g, 1.0, s).unwrap();
        let singletons: Vec<u32> = (0..n as u32).collect();
        let q = modularity(&g, &p.assignment, 1.0);
        prop_assert!(q >= modularity(&g, &singletons, 1.0) - 1e-12);
        for w in trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        if let Some(&last) = trace.last() {
            prop_assert!((last - q).abs() < 1e-9);
        }
        let mut labels: Vec<u32> = p.assignment.clone();
        labels.sort_unstable();
        labels.dedup();
        prop_assert_eq!(labels.len(), p.k);
    }
}

#[test]
fn two_triangles_split_at_bridge() {
    let g = WeightedGraph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]);
    for s in 0..10 {
        let p = partition_multilevel(&g, 2, 0.03, s).unwrap();
        assert_eq!(p.edge_cut, 1);
        assert_eq!(p.assignment[0], p.assignment[2]);
        assert_ne!(p.assignment[2], p.assignment[3]);
    }
}

#[test]
fn planted_blocks_are_recovered() {
    let g = graph(800, Some(4), 3);
    let p = partition_multilevel(&g, 4, 0.03, 3).unwrap();
    let mut agree = 0;
    for b in 0..4 {
        let mut counts = [0usize; 4];
        for u in b * 200..(b + 1) * 200 {
            counts[p.assignment[u] as usize] += 1;
        }
        agree += counts.iter().max().unwrap();
    }
    assert!(agree >= 760, "only {agree} of 800 nodes follow their block");
}

#[test]
fn coarsening_stops_near_target() {
    let g = graph(2000, None, 5);
    let levels = coarsen(&g, 4, &mut seed::rng(5));
    assert!(!levels.is_empty());
    let last = &levels.last().unwrap().graph;
    assert!(last.num_nodes() < 2000);
    assert_eq!(last.total_vertex_weight(), 2000);
}

#[test]
fn rejects_impossible_requests() {
    let g = graph(10, None, 1);
    assert!(partition_multilevel(&g, 0, 0.03, 0).is_err());
    assert!(partition_multilevel(&g, 11, 0.03, 0).is_err());
    assert!(partition_multilevel(&g, 2, -0.1, 0).is_err());
    assert!(partition_louvain_traced(&g, 0.0, 0).is_err());
}

#[test]
fn deterministic_for_seed() {
    let g = graph(500, Some(4), 9);
    let a = partition_multilevel(&g, 4, 0.03, 42).unwrap();
    let b = partition_multilevel(&g, 4, 0.03, 42).unwrap();
    assert_eq!(a.assignment, b.assignment);
}
