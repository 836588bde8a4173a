//! Planted-partition synthetic datasets.
//!
//! Users are split into `n_blocks` equal blocks. Directed follow-like links are drawn
//! independently with probability `p_intra` inside a block and `p_inter` across
//! blocks, and each link is emitted as one or two reply/mention interactions. Each
//! cascade picks a home block, a root inside it and retweeters mostly from the same
//! block. The label is the home block's parity (odd = fake), flipped with
//! probability `1 − label_fidelity`. Users also get account metadata: the language
//! leans towards a per-block language and accounts in odd blocks skew younger.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

const HORIZON: i64 = 30 * 86_400;
const YEAR: i64 = 365 * 86_400;
const LANGS: [&str; 6] = ["en", "es", "fr", "de", "pt", "it"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_cascades: usize,
    pub n_blocks: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub label_fidelity: f64,
    /// Mean retweeter count; each cascade draws uniformly from `[m/2, 3m/2]`.
    pub participants_per_cascade: usize,
    /// Chance that a retweeter comes from outside the home block.
    pub cross_block_rate: f64,
    /// Fraction of cascades labelled unknown.
    pub unknown_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 2000,
            n_cascades: 400,
            n_blocks: 4,
            p_intra: 0.02,
            p_inter: 0.0005,
            label_fidelity: 0.95,
            participants_per_cascade: 8,
            cross_block_rate: 0.005,
            unknown_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n_blocks == 0 || self.n_users < self.n_blocks {
            return Err(Error::invalid("need at least one user per block"));
        }
        if !prob(self.p_intra) || !prob(self.p_inter) || !prob(self.cross_block_rate) || !prob(self.unknown_fraction) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if self.p_intra <= self.p_inter {
            return Err(Error::invalid("intra-block probability must exceed inter-block probability"));
        }
        if !(self.label_fidelity > 0.5 && self.label_fidelity <= 1.0) {
            return Err(Error::invalid("label fidelity must be in (0.5, 1]"));
        }
        if self.participants_per_cascade == 0 {
            return Err(Error::invalid("participants per cascade must be positive"));
        }
        Ok(())
    }

    pub fn block_of(&self, user: usize) -> usize {
        user * self.n_blocks / self.n_users
    }

    fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        let lo = (b * self.n_users).div_ceil(self.n_blocks);
        let hi = ((b + 1) * self.n_users).div_ceil(self.n_blocks);
        lo..hi
    }
}

#[derive(Debug, Clone, Serialize)]
struct InteractionLine {
    kind: &'static str,
    src: String,
    dst: String,
    ts: i64,
    tweet: String,
    cascade: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct CascadeLine {
    cascade: String,
    root_user: String,
    root_tweet: String,
    root_ts: i64,
    label: &'static str,
    sentiment: Option<(u8, f64)>,
    topics: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
struct UserLine {
    user: String,
    created: i64,
    verified: bool,
    lang: &'static str,
    followers: f64,
    friends: f64,
    statuses: f64,
    favorites: f64,
    listed: f64,
}

/// Generated records plus the planted ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    interactions: Vec<InteractionLine>,
    cascades: Vec<CascadeLine>,
    users: Vec<UserLine>,
    /// Home block of each cascade, in file order.
    pub home_block: Vec<usize>,
    /// Directed social links `(src, dst)` by user index.
    pub links: Vec<(usize, usize)>,
}

impl SyntheticData {
    pub fn num_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn num_cascades(&self) -> usize {
        self.cascades.len()
    }

    /// Label string of each cascade (`fake`, `nonfake` or `unknown`).
    pub fn labels(&self) -> Vec<&'static str> {
        self.cascades.iter().map(|c| c.label).collect()
    }
}

pub fn user_name(i: usize) -> String {
    format!("u{i:05}")
}

pub fn cascade_name(i: usize) -> String {
    format!("c{i:04}")
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = seed::rng(seed::derive(spec.seed, b"synthetic"));
    let n = spec.n_users;

    let mut links = Vec::new();
    for i in 0..n {
        let bi = spec.block_of(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if spec.block_of(j) == bi { spec.p_intra } else { spec.p_inter };
            if rng.random::<f64>() < p {
                links.push((i, j));
            }
        }
    }

    let mut interactions = Vec::new();
    let mut tweet = 0usize;
    let mut next_tweet = || {
        tweet += 1;
        format!("t{tweet}")
    };
    for &(i, j) in &links {
        let repeats = rng.random_range(1..=2);
        for _ in 0..repeats {
            interactions.push(InteractionLine {
                kind: if rng.random::<bool>() { "reply" } else { "mention" },
                src: user_name(i),
                dst: user_name(j),
                ts: rng.random_range(0..HORIZON),
                tweet: next_tweet(),
                cascade: None,
            });
        }
    }

    let delay = Exp::<f64>::new(1.0 / 3600.0).expect("positive rate");
    let mut cascades = Vec::with_capacity(spec.n_cascades);
    let mut home_block = Vec::with_capacity(spec.n_cascades);
    let m = spec.participants_per_cascade;
    for c in 0..spec.n_cascades {
        let block = c % spec.n_blocks;
        let members: Vec<usize> = spec.block_range(block).collect();
        let root = *members.choose(&mut rng).expect("non-empty block");
        let root_ts = rng.random_range(0..HORIZON);
        let root_tweet = next_tweet();
        let count = rng.random_range(m.div_ceil(2)..=m + m / 2);
        let mut chosen = std::collections::BTreeSet::new();
        let mut attempts = 0;
        while chosen.len() < count && attempts < 50 * count {
            attempts += 1;
            let u = if spec.n_blocks > 1 && rng.random::<f64>() < spec.cross_block_rate {
                rng.random_range(0..n)
            } else {
                *members.choose(&mut rng).expect("non-empty block")
            };
            if u != root {
                chosen.insert(u);
            }
        }
        for u in chosen {
            interactions.push(InteractionLine {
                kind: "retweet",
                src: user_name(u),
                dst: user_name(root),
                ts: root_ts + 1 + delay.sample(&mut rng) as i64,
                tweet: next_tweet(),
                cascade: Some(cascade_name(c)),
            });
        }
        let planted = if block % 2 == 1 { "fake" } else { "nonfake" };
        let flipped = if planted == "fake" { "nonfake" } else { "fake" };
        let label = if rng.random::<f64>() < spec.unknown_fraction {
            "unknown"
        } else if rng.random::<f64>() < spec.label_fidelity {
            planted
        } else {
            flipped
        };
        cascades.push(CascadeLine {
            cascade: cascade_name(c),
            root_user: user_name(root),
            root_tweet,
            root_ts,
            label,
            sentiment: Some((rng.random_range(1..=2), rng.random::<f64>())),
            topics: Some((0..rng.random_range(1..=3)).map(|_| rng.random_range(0..20)).collect()),
        });
        home_block.push(block);
    }

    let counts = LogNormal::<f64>::new(5.0, 1.5).expect("valid log-normal");
    let users = (0..n)
        .map(|i| {
            let lang = if rng.random::<f64>() < 0.9 {
                LANGS[spec.block_of(i) % LANGS.len()]
            } else {
                *LANGS.choose(&mut rng).expect("non-empty")
            };
            UserLine {
                user: user_name(i),
                created: if spec.block_of(i) % 2 == 1 {
                    rng.random_range(-2 * YEAR..0)
                } else {
                    rng.random_range(-6 * YEAR..-YEAR)
                },
                verified: rng.random::<f64>() < 0.05,
                lang,
                followers: counts.sample(&mut rng).round(),
                friends: counts.sample(&mut rng).round(),
                statuses: counts.sample(&mut rng).round(),
                favorites: counts.sample(&mut rng).round(),
                listed: (counts.sample(&mut rng) / 50.0).round(),
            }
        })
        .collect();

    Ok(SyntheticData {
        interactions,
        cascades,
        users,
        home_block,
        links,
    })
}

/// Where [`write_synthetic`] put its files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntheticFiles {
    pub interactions: PathBuf,
    pub cascades: PathBuf,
    pub users: PathBuf,
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_synthetic(data: &SyntheticData, dir: &Path) -> Result<SyntheticFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = SyntheticFiles {
        interactions: dir.join("interactions.jsonl"),
        cascades: dir.join("cascades.jsonl"),
        users: dir.join("users.jsonl"),
    };
    write_jsonl(&files.interactions, &data.interactions)?;
    write_jsonl(&files.cascades, &data.cascades)?;
    write_jsonl(&files.users, &data.users)?;
    Ok(files)
}

pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<SyntheticFiles> {
    write_synthetic(&generate(spec)?, dir)
}
