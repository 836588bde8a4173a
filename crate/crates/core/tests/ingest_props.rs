mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use cascadehg::features::augment_cascade;
use cascadehg::ingest::{
    build_social_graph, extract_cascades, extract_cascades_from_file, filter_min_participants, parse_interactions,
    parse_user_profiles, user_to_cascades, InteractionKind, Interner, Label, SocialGraph, UserId,
};
use cascadehg::seed;
use common::{random_cascades, record};
use proptest::prelude::*;
use rand::Rng;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn random_records(users: u32, count: usize, s: u64) -> Vec<cascadehg::ingest::InteractionRecord> {
    let mut rng = seed::rng(s);
    (0..count)
        .map(|_| {
            let kind = [InteractionKind::Reply, InteractionKind::Mention, InteractionKind::Retweet][rng.random_range(0..3)];
            record(kind, rng.random_range(0..users), rng.random_range(0..users), rng.random_range(0..1000), None)
        })
        .collect()
}

fn edge_map(g: &SocialGraph) -> BTreeMap<(UserId, UserId), i64> {
    g.edges().map(|(s, t, ts)| ((g.user(s), g.user(t)), ts)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn graph_keeps_earliest_interaction(users in 1u32..20, count in 0usize..120, s in any::<u64>()) {
        let records = random_records(users, count, s);
        let g = build_social_graph(&records);
        let mut expected: BTreeMap<(UserId, UserId), i64> = BTreeMap::new();
        let mut nodes = BTreeSet::new();
        for r in records.iter().filter(|r| r.source != r.target) {
            let ts = expected.entry((r.source, r.target)).or_insert(r.timestamp);
            *ts = (*ts).min(r.timestamp);
            nodes.insert(r.source);
            nodes.insert(r.target);
        }
        prop_assert_eq!(edge_map(&g), expected.clone());
        prop_assert_eq!(g.users().iter().copied().collect::<BTreeSet<_>>(), nodes);
        prop_assert_eq!(g.num_edges() + g.duplicates_collapsed + g.self_loops_dropped, records.len());
        for ((s, t), ts) in &expected {
            let (a, b) = (g.node_of(*s).unwrap(), g.node_of(*t).unwrap());
            prop_assert_eq!(g.edge_timestamp(a, b), Some(*ts));
        }
        let out: usize = (0..g.num_nodes()).map(|i| g.out_degree(i)).sum();
        let inc: usize = (0..g.num_nodes()).map(|i| g.in_degree(i)).sum();
        prop_assert_eq!(out, g.num_edges());
        prop_assert_eq!(inc, g.num_edges());
        for v in 0..g.num_nodes() {
            for (u, ts) in g.in_edges(v) {
                prop_assert_eq!(g.edge_timestamp(u, v), Some(ts));
            }
        }
    }

    #[test]
    fn replaying_the_graph_is_idempotent(users in 1u32..20, count in 0usize..120, s in any::<u64>()) {
        let g = build_social_graph(&random_records(users, count, s));
        let again = build_social_graph(&g.to_records());
        prop_assert_eq!(edge_map(&again), edge_map(&g));
        prop_assert_eq!(again.duplicates_collapsed, 0);
        let mut dump = Vec::new();
        g.write_dump(&mut dump).unwrap();
        let back = SocialGraph::read_dump(dump.as_slice(), Path::new("mem")).unwrap();
        let by_index = |g: &SocialGraph| g.edges().collect::<Vec<_>>();
        prop_assert_eq!(by_index(&back), by_index(&g));
    }

    #[test]
    fn user_cascade_map_covers_participants(s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let data = random_cascades(rng.random_range(2..30), rng.random_range(0..20), 8, &mut rng);
        let u2c = user_to_cascades(&data.cascades);
        let total: usize = u2c.values().map(BTreeSet::len).sum();
        prop_assert_eq!(total, data.cascades.iter().map(|c| c.participant_count()).sum::<usize>());
        for (ci, c) in data.cascades.iter().enumerate() {
            for u in c.participants() {
                prop_assert!(u2c[&u].contains(&ci));
            }
        }
        let min = rng.random_range(1..5);
        let kept = filter_min_participants(data.cascades.clone(), min);
        prop_assert!(kept.iter().all(|c| c.participant_count() >= min));
        prop_assert_eq!(kept.len(), data.cascades.iter().filter(|c| c.participant_count() >= min).count());
    }
}

#[test]
fn fixture_interactions_skip_bad_lines() {
    let mut interner = Interner::new();
    let (records, report) = parse_interactions(&fixture("interactions.jsonl"), &mut interner).unwrap();
    assert_eq!(report.lines, 16);
    assert_eq!(report.malformed, 3);
    assert_eq!(report.unknown_kind, 1);
    assert_eq!(records.len(), 12);
    let mention = records.iter().find(|r| r.tweet_id == "t15").unwrap();
    assert_eq!(mention.cascade_id, None);

    let g = build_social_graph(&records);
    assert_eq!(g.num_nodes(), 7);
    assert_eq!(g.num_edges(), 7);
    assert_eq!(g.duplicates_collapsed, 3);
    assert_eq!(g.self_loops_dropped, 2);
    let id = |n: &str| g.node_of(interner.get(n).unwrap()).unwrap();
    assert_eq!(g.edge_timestamp(id("alice"), id("bob")), Some(50));
    assert_eq!(g.edge_timestamp(id("bob"), id("alice")), Some(130));
    assert_eq!(g.edge_timestamp(id("carol"), id("alice")), Some(250));
}

#[test]
fn fixture_cascades_are_extracted() {
    let mut interner = Interner::new();
    let (records, _) = parse_interactions(&fixture("interactions.jsonl"), &mut interner).unwrap();
    let (cascades, report) = extract_cascades_from_file(&records, &fixture("cascades.jsonl"), &mut interner).unwrap();
    let user = |n: &str| interner.get(n).unwrap();
    assert_eq!(cascades.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["c1", "c2", "c3"]);
    assert_eq!(cascades[0].retweeters, vec![(user("bob"), 200), (user("carol"), 250)]);
    assert_eq!(cascades[0].label, Label::Fake);
    assert_eq!(cascades[0].topics.as_deref(), Some(&[3, 7][..]));
    assert_eq!(cascades[1].retweeters, vec![(user("dave"), 400)]);
    assert_eq!(cascades[2].label, Label::Unknown);
    assert!(cascades[2].retweeters.is_empty());
    assert_eq!(report.unknown_cascade_refs, 1);
    assert_eq!(report.inconsistent_retweets, 2);
    assert_eq!(report.duplicate_retweets, 1);

    let g = build_social_graph(&records);
    let ag = augment_cascade(&cascades[0], &g);
    assert_eq!(ag.edges().iter().copied().collect::<Vec<_>>(), vec![(0, 1), (0, 2), (1, 2)]);
}

#[test]
fn fixture_user_profiles_merge() {
    let mut interner = Interner::new();
    let (profiles, report) = parse_user_profiles(&fixture("users.jsonl"), &mut interner).unwrap();
    assert_eq!(report.lines, 6);
    assert_eq!(report.malformed, 2);
    assert_eq!(profiles.len(), 3);
    let alice = &profiles[&interner.get("alice").unwrap()];
    assert_eq!(alice.created, Some(-86400));
    assert_eq!(alice.verified, Some(true));
    assert_eq!(alice.lang.as_deref(), Some("en"));
    assert_eq!(alice.counters[0], Some(25.0));
    assert_eq!(alice.counters[1], Some(3.0));
    assert_eq!(alice.counters[2], None);
}

#[test]
fn missing_input_is_an_error() {
    let mut interner = Interner::new();
    assert!(parse_interactions(Path::new("/nonexistent/interactions.jsonl"), &mut interner).is_err());
}

#[test]
fn retweets_before_root_are_rejected() {
    use cascadehg::ingest::CascadeMeta;
    let meta = CascadeMeta {
        id: "c".into(),
        root_user: UserId(0),
        root_tweet_id: "r".into(),
        root_timestamp: 100,
        label: Label::Fake,
        sentiment: None,
        topics: None,
        hashtags: Vec::new(),
    };
    let records = vec![
        record(InteractionKind::Retweet, 1, 0, 99, Some("c")),
        record(InteractionKind::Retweet, 2, 0, 100, Some("c")),
        record(InteractionKind::Retweet, 3, 0, 150, Some("c")),
        record(InteractionKind::Retweet, 3, 0, 120, Some("c")),
    ];
    let (cascades, report) = extract_cascades(&records, &[meta]);
    assert_eq!(cascades[0].retweeters, vec![(UserId(2), 100), (UserId(3), 120)]);
    assert_eq!(report.inconsistent_retweets, 1);
    assert_eq!(report.duplicate_retweets, 1);
}
