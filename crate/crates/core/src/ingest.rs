//! Interaction and cascade ingestion.
//!
//! Raw inputs are line-delimited JSON. User-id strings are interned to dense
//! [`UserId`]s as they are first seen; every downstream structure works on those
//! integers and the [`Interner`] keeps the mapping for reporting.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId(pub u32);

/// Bidirectional user-id string ↔ dense integer mapping.
#[derive(Debug, Default, Clone)]
pub struct Interner {
    ids: HashMap<String, UserId>,
    names: Vec<String>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> UserId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = UserId(self.names.len() as u32);
        self.ids.insert(name.to_owned(), id);
        self.names.push(name.to_owned());
        id
    }

    pub fn get(&self, name: &str) -> Option<UserId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: UserId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Writes `index<TAB>user` lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (i, name) in self.names.iter().enumerate() {
            writeln!(w, "{i}\t{name}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Retweet,
    Reply,
    Mention,
}

impl InteractionKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "retweet" => Some(Self::Retweet),
            "reply" => Some(Self::Reply),
            "mention" => Some(Self::Mention),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Retweet => "retweet",
            Self::Reply => "reply",
            Self::Mention => "mention",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionRecord {
    pub kind: InteractionKind,
    pub source: UserId,
    pub target: UserId,
    pub timestamp: i64,
    pub tweet_id: String,
    /// Only set for retweets that belong to a tracked cascade.
    pub cascade_id: Option<String>,
}

/// Counts of lines that were skipped while parsing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub lines: usize,
    pub malformed: usize,
    pub unknown_kind: usize,
}

#[derive(Debug, Deserialize)]
struct RawInteraction {
    kind: String,
    src: String,
    dst: String,
    ts: i64,
    tweet: String,
    #[serde(default)]
    cascade: Option<String>,
}

pub fn parse_interactions(
    path: &Path,
    interner: &mut Interner,
) -> Result<(Vec<InteractionRecord>, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions_from(BufReader::new(file), path, interner)
}

pub fn parse_interactions_from<R: BufRead>(
    reader: R,
    origin: &Path,
    interner: &mut Interner,
) -> Result<(Vec<InteractionRecord>, ParseReport)> {
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let raw: RawInteraction = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("{}:{}: skipping malformed line: {e}", origin.display(), lineno + 1);
                report.malformed += 1;
                continue;
            }
        };
        if raw.ts < 0 {
            log::warn!("{}:{}: negative timestamp", origin.display(), lineno + 1);
            report.malformed += 1;
            continue;
        }
        let Some(kind) = InteractionKind::parse(&raw.kind) else {
            report.unknown_kind += 1;
            continue;
        };
        let cascade_id = match kind {
            InteractionKind::Retweet => raw.cascade,
            _ => None,
        };
        records.push(InteractionRecord {
            kind,
            source: interner.intern(&raw.src),
            target: interner.intern(&raw.dst),
            timestamp: raw.ts,
            tweet_id: raw.tweet,
            cascade_id,
        });
    }
    Ok((records, report))
}

/// Directed simple graph of users; each edge keeps the earliest interaction time.
///
/// Nodes are the users that are an endpoint of at least one non-self interaction,
/// re-indexed densely in order of first appearance. Both out- and in-adjacency are
/// stored in CSR form with neighbor lists sorted by local index.
#[derive(Debug, Clone, Default)]
pub struct SocialGraph {
    users: Vec<UserId>,
    local: HashMap<UserId, u32>,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    out_ts: Vec<i64>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    in_ts: Vec<i64>,
    /// Raw interactions that were folded into an existing edge.
    pub duplicates_collapsed: usize,
    pub self_loops_dropped: usize,
}

pub fn build_social_graph(records: &[InteractionRecord]) -> SocialGraph {
    let mut users = Vec::new();
    let mut local: HashMap<UserId, u32> = HashMap::new();
    let mut earliest: HashMap<(u32, u32), i64> = HashMap::new();
    let mut duplicates = 0;
    let mut self_loops = 0;
    let mut local_of = |u: UserId, users: &mut Vec<UserId>| -> u32 {
        *local.entry(u).or_insert_with(|| {
            users.push(u);
            (users.len() - 1) as u32
        })
    };
    for r in records {
        if r.source == r.target {
            self_loops += 1;
            continue;
        }
        let s = local_of(r.source, &mut users);
        let t = local_of(r.target, &mut users);
        earliest
            .entry((s, t))
            .and_modify(|ts| {
                duplicates += 1;
                *ts = (*ts).min(r.timestamp);
            })
            .or_insert(r.timestamp);
    }
    let local = users
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i as u32))
        .collect();
    let edges: Vec<(u32, u32, i64)> = earliest.into_iter().map(|((s, t), ts)| (s, t, ts)).collect();
    let mut g = SocialGraph::from_edges(users, local, edges);
    g.duplicates_collapsed = duplicates;
    g.self_loops_dropped = self_loops;
    g
}

impl SocialGraph {
    fn from_edges(users: Vec<UserId>, local: HashMap<UserId, u32>, mut edges: Vec<(u32, u32, i64)>) -> Self {
        let n = users.len();
        edges.sort_unstable();
        let mut out_offsets = vec![0usize; n + 1];
        let mut in_offsets = vec![0usize; n + 1];
        for &(s, t, _) in &edges {
            out_offsets[s as usize + 1] += 1;
            in_offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
            in_offsets[i + 1] += in_offsets[i];
        }
        let out_targets = edges.iter().map(|e| e.1).collect();
        let out_ts = edges.iter().map(|e| e.2).collect();
        // Edges are sorted by (src, dst), so filling by source keeps in-lists sorted.
        let mut in_sources = vec![0u32; edges.len()];
        let mut in_ts = vec![0i64; edges.len()];
        let mut cursor = in_offsets.clone();
        for &(s, t, ts) in &edges {
            let slot = &mut cursor[t as usize];
            in_sources[*slot] = s;
            in_ts[*slot] = ts;
            *slot += 1;
        }
        SocialGraph {
            users,
            local,
            out_offsets,
            out_targets,
            out_ts,
            in_offsets,
            in_sources,
            in_ts,
            duplicates_collapsed: 0,
            self_loops_dropped: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.users.len()
    }

    pub fn num_edges(&self) -> usize {
        self.out_targets.len()
    }

    pub fn user(&self, node: usize) -> UserId {
        self.users[node]
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn node_of(&self, user: UserId) -> Option<usize> {
        self.local.get(&user).map(|&i| i as usize)
    }

    /// `(target, earliest_timestamp)` pairs for edges leaving `node`.
    pub fn out_edges(&self, node: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let range = self.out_offsets[node]..self.out_offsets[node + 1];
        self.out_targets[range.clone()]
            .iter()
            .zip(&self.out_ts[range])
            .map(|(&t, &ts)| (t as usize, ts))
    }

    /// `(source, earliest_timestamp)` pairs for edges entering `node`.
    pub fn in_edges(&self, node: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let range = self.in_offsets[node]..self.in_offsets[node + 1];
        self.in_sources[range.clone()]
            .iter()
            .zip(&self.in_ts[range])
            .map(|(&s, &ts)| (s as usize, ts))
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_offsets[node + 1] - self.out_offsets[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_offsets[node + 1] - self.in_offsets[node]
    }

    /// All edges as `(src, dst, earliest_timestamp)` in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        (0..self.num_nodes()).flat_map(move |s| self.out_edges(s).map(move |(t, ts)| (s, t, ts)))
    }

    pub fn edge_timestamp(&self, src: usize, dst: usize) -> Option<i64> {
        let range = self.out_offsets[src]..self.out_offsets[src + 1];
        let targets = &self.out_targets[range.clone()];
        targets
            .binary_search(&(dst as u32))
            .ok()
            .map(|k| self.out_ts[range.start + k])
    }

    /// Re-emits the graph as one retweet record per edge, with the original user ids.
    pub fn to_records(&self) -> Vec<InteractionRecord> {
        self.edges()
            .map(|(s, t, ts)| InteractionRecord {
                kind: InteractionKind::Retweet,
                source: self.users[s],
                target: self.users[t],
                timestamp: ts,
                tweet_id: String::new(),
                cascade_id: None,
            })
            .collect()
    }

    /// Header `nodes <n> edges <m>` followed by one `src dst ts` line per edge.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nodes {} edges {}", self.num_nodes(), self.num_edges())?;
        for (s, t, ts) in self.edges() {
            writeln!(w, "{s} {t} {ts}")?;
        }
        w.flush()
    }

    /// Reads a dump written by [`SocialGraph::write_dump`]. Node `i` gets `UserId(i)`.
    pub fn read_dump<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (n, m) = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(origin, e))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts.as_slice() {
                    ["nodes", n, "edges", m] => (
                        n.parse::<usize>().map_err(|e| Error::format(origin, 1, e.to_string()))?,
                        m.parse::<usize>().map_err(|e| Error::format(origin, 1, e.to_string()))?,
                    ),
                    _ => return Err(Error::format(origin, 1, "expected `nodes <n> edges <m>`")),
                }
            }
            None => return Err(Error::format(origin, 1, "empty graph dump")),
        };
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::format(origin, i + 1, "expected `src dst ts`");
            let mut it = line.split_whitespace();
            let s: u32 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let t: u32 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let ts: i64 = it.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if s as usize >= n || t as usize >= n || s == t {
                return Err(Error::format(origin, i + 1, "edge endpoint out of range or self-loop"));
            }
            edges.push((s, t, ts));
        }
        if edges.len() != m {
            return Err(Error::format(
                origin,
                0,
                format!("header announces {m} edges, found {}", edges.len()),
            ));
        }
        let users: Vec<UserId> = (0..n as u32).map(UserId).collect();
        let local = users.iter().map(|&u| (u, u.0)).collect();
        Ok(SocialGraph::from_edges(users, local, edges))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    NonFake,
    Unknown,
}

impl Label {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "fake" => Some(Self::Fake),
            "nonfake" => Some(Self::NonFake),
            "unknown" => Some(Self::Unknown),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fake => "fake",
            Self::NonFake => "nonfake",
            Self::Unknown => "unknown",
        }
    }

    /// Class index used by the classifier: fake = 1, non-fake = 0.
    pub fn class(self) -> Option<usize> {
        match self {
            Self::Fake => Some(1),
            Self::NonFake => Some(0),
            Self::Unknown => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sentiment {
    /// 1 = negative, 2 = positive.
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub id: String,
    pub root_user: UserId,
    pub root_tweet_id: String,
    pub root_timestamp: i64,
    /// Sorted ascending by timestamp (ties by user id); one entry per user.
    pub retweeters: Vec<(UserId, i64)>,
    pub label: Label,
    pub sentiment: Option<Sentiment>,
    pub topics: Option<Vec<i64>>,
    pub hashtags: Vec<String>,
}

impl Cascade {
    /// Root plus retweeters.
    pub fn participant_count(&self) -> usize {
        1 + self.retweeters.len()
    }

    /// Root first, then retweeters in timestamp order.
    pub fn participants(&self) -> impl Iterator<Item = UserId> + '_ {
        std::iter::once(self.root_user).chain(self.retweeters.iter().map(|r| r.0))
    }
}

/// One line of the cascade metadata file.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeMeta {
    pub id: String,
    pub root_user: UserId,
    pub root_tweet_id: String,
    pub root_timestamp: i64,
    pub label: Label,
    pub sentiment: Option<Sentiment>,
    pub topics: Option<Vec<i64>>,
    pub hashtags: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawCascade {
    cascade: String,
    root_user: String,
    root_tweet: String,
    root_ts: i64,
    label: String,
    #[serde(default)]
    sentiment: Option<(u8, f64)>,
    #[serde(default)]
    topics: Option<Vec<i64>>,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
}

pub fn parse_cascade_meta(
    path: &Path,
    interner: &mut Interner,
) -> Result<(Vec<CascadeMeta>, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cascade_meta_from(BufReader::new(file), path, interner)
}

pub fn parse_cascade_meta_from<R: BufRead>(
    reader: R,
    origin: &Path,
    interner: &mut Interner,
) -> Result<(Vec<CascadeMeta>, ParseReport)> {
    let mut metas = Vec::new();
    let mut seen = BTreeSet::new();
    let mut report = ParseReport::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let raw: RawCascade = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("{}:{}: skipping malformed cascade: {e}", origin.display(), lineno + 1);
                report.malformed += 1;
                continue;
            }
        };
        let Some(label) = Label::parse(&raw.label) else {
            report.malformed += 1;
            continue;
        };
        let sentiment_ok = raw
            .sentiment
            .is_none_or(|(l, s)| (l == 1 || l == 2) && (0.0..=1.0).contains(&s));
        if raw.root_ts < 0 || !sentiment_ok || !seen.insert(raw.cascade.clone()) {
            log::warn!("{}:{}: invalid or duplicate cascade", origin.display(), lineno + 1);
            report.malformed += 1;
            continue;
        }
        metas.push(CascadeMeta {
            id: raw.cascade,
            root_user: interner.intern(&raw.root_user),
            root_tweet_id: raw.root_tweet,
            root_timestamp: raw.root_ts,
            label,
            sentiment: raw.sentiment.map(|(label, score)| Sentiment { label, score }),
            topics: raw.topics,
            hashtags: raw.hashtags.unwrap_or_default(),
        });
    }
    Ok((metas, report))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExtractReport {
    /// Retweets naming a cascade id absent from the metadata.
    pub unknown_cascade_refs: usize,
    /// Retweets of a user by the cascade root or earlier than the root tweet.
    pub inconsistent_retweets: usize,
    /// Repeated retweets by a user already in the cascade.
    pub duplicate_retweets: usize,
}

/// Groups cascade retweets under their metadata entries.
pub fn extract_cascades(
    records: &[InteractionRecord],
    metas: &[CascadeMeta],
) -> (Vec<Cascade>, ExtractReport) {
    let index: HashMap<&str, usize> = metas.iter().enumerate().map(|(i, m)| (m.id.as_str(), i)).collect();
    let mut earliest: Vec<BTreeMap<UserId, i64>> = vec![BTreeMap::new(); metas.len()];
    let mut report = ExtractReport::default();
    for r in records {
        if r.kind != InteractionKind::Retweet {
            continue;
        }
        let Some(cid) = r.cascade_id.as_deref() else {
            continue;
        };
        let Some(&ci) = index.get(cid) else {
            report.unknown_cascade_refs += 1;
            continue;
        };
        let meta = &metas[ci];
        if r.source == meta.root_user || r.timestamp < meta.root_timestamp {
            report.inconsistent_retweets += 1;
            continue;
        }
        earliest[ci]
            .entry(r.source)
            .and_modify(|ts| {
                report.duplicate_retweets += 1;
                *ts = (*ts).min(r.timestamp);
            })
            .or_insert(r.timestamp);
    }
    let cascades = metas
        .iter()
        .zip(earliest)
        .map(|(m, rts)| {
            let mut retweeters: Vec<(UserId, i64)> = rts.into_iter().collect();
            retweeters.sort_by_key(|&(u, ts)| (ts, u));
            Cascade {
                id: m.id.clone(),
                root_user: m.root_user,
                root_tweet_id: m.root_tweet_id.clone(),
                root_timestamp: m.root_timestamp,
                retweeters,
                label: m.label,
                sentiment: m.sentiment,
                topics: m.topics.clone(),
                hashtags: m.hashtags.clone(),
            }
        })
        .collect();
    (cascades, report)
}

/// Parses the cascade metadata file and assembles cascades from `records`.
pub fn extract_cascades_from_file(
    records: &[InteractionRecord],
    meta_path: &Path,
    interner: &mut Interner,
) -> Result<(Vec<Cascade>, ExtractReport)> {
    let (metas, _) = parse_cascade_meta(meta_path, interner)?;
    Ok(extract_cascades(records, &metas))
}

/// Keeps cascades with at least `min` participants (root included).
pub fn filter_min_participants(cascades: Vec<Cascade>, min: usize) -> Vec<Cascade> {
    cascades.into_iter().filter(|c| c.participant_count() >= min).collect()
}

/// User → indices (into `cascades`) of the cascades the user rooted or retweeted.
pub type UserCascades = BTreeMap<UserId, BTreeSet<usize>>;

pub fn user_to_cascades(cascades: &[Cascade]) -> UserCascades {
    let mut map = UserCascades::new();
    for (ci, c) in cascades.iter().enumerate() {
        for u in c.participants() {
            map.entry(u).or_default().insert(ci);
        }
    }
    map
}

pub const COUNTER_NAMES: [&str; 9] = [
    "followers",
    "friends",
    "statuses",
    "favorites",
    "listed",
    "impression",
    "reply",
    "quote",
    "like",
];

/// Optional per-user account metadata (`users.jsonl`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserProfile {
    pub created: Option<i64>,
    pub verified: Option<bool>,
    pub lang: Option<String>,
    /// Maximum observed value per counter, indexed like [`COUNTER_NAMES`].
    pub counters: [Option<f64>; 9],
}

impl UserProfile {
    fn merge(&mut self, other: UserProfile) {
        self.created = self.created.or(other.created);
        self.verified = match (self.verified, other.verified) {
            (Some(a), Some(b)) => Some(a || b),
            (a, b) => a.or(b),
        };
        if self.lang.is_none() {
            self.lang = other.lang;
        }
        for (mine, theirs) in self.counters.iter_mut().zip(other.counters) {
            *mine = match (*mine, theirs) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
    }
}

/// Parses `users.jsonl`. Repeated lines for a user are merged keeping counter maxima.
pub fn parse_user_profiles(
    path: &Path,
    interner: &mut Interner,
) -> Result<(HashMap<UserId, UserProfile>, ParseReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut profiles: HashMap<UserId, UserProfile> = HashMap::new();
    let mut report = ParseReport::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("{}:{}: skipping malformed user: {e}", path.display(), lineno + 1);
                report.malformed += 1;
                continue;
            }
        };
        let Some(name) = value.get("user").and_then(|v| v.as_str()) else {
            report.malformed += 1;
            continue;
        };
        let mut profile = UserProfile {
            created: value.get("created").and_then(|v| v.as_i64()),
            verified: value.get("verified").and_then(|v| v.as_bool()),
            lang: value.get("lang").and_then(|v| v.as_str()).map(str::to_owned),
            counters: [None; 9],
        };
        for (slot, key) in profile.counters.iter_mut().zip(COUNTER_NAMES) {
            *slot = value.get(key).and_then(|v| v.as_f64());
        }
        profiles.entry(interner.intern(name)).or_default().merge(profile);
    }
    Ok((profiles, report))
}
