//! Per-cascade feature vectors.
//!
//! For every cascade: augment the participant star with prior interactions, embed the
//! participants with DeepWalk, attach per-user account features, flatten the first
//! `cap` participants (root first, then by retweet time, zero-padded) and append the
//! cascade's text block. Scalar columns are z-normalized across cascades and the
//! whole matrix is reduced with PCA.

mod augment;
mod deepwalk;
mod pca;

pub use augment::{augment_cascade, AugmentedCascadeGraph};
pub use deepwalk::{deepwalk_embed, random_walks, skipgram, DeepWalkConfig};
pub use pca::{pca_fit_transform, FeatureMatrix};

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{Cascade, SocialGraph, UserId, UserProfile, COUNTER_NAMES};
use crate::{seed, Error, Result};

pub const LAYOUT_VERSION: u32 = 1;

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Which features go into the cascade vector and how it is sized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Participants (root included) flattened into the vector.
    pub cap: usize,
    pub pca_dim: usize,
    pub deepwalk: DeepWalkConfig,
    pub use_deepwalk: bool,
    pub account_creation: bool,
    pub verified: bool,
    pub language: bool,
    pub reaction_time: bool,
    /// Enabled account counters, indexed like [`COUNTER_NAMES`].
    pub counters: [bool; 9],
    pub sentiment: bool,
    pub topics: bool,
    pub max_topics: usize,
    pub cascade_size: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            cap: 50,
            pca_dim: 60,
            deepwalk: DeepWalkConfig::default(),
            use_deepwalk: true,
            account_creation: true,
            verified: true,
            language: true,
            reaction_time: true,
            counters: [true; 9],
            sentiment: true,
            topics: true,
            max_topics: 3,
            cascade_size: true,
        }
    }
}

/// Column layout of the raw (pre-PCA) cascade vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    pub cap: usize,
    pub deepwalk_width: usize,
    /// DeepWalk block plus scalar user features.
    pub row_width: usize,
    pub text_width: usize,
}

impl FeatureLayout {
    pub fn new(cfg: &FeatureConfig) -> Self {
        let deepwalk_width = if cfg.use_deepwalk { cfg.deepwalk.dim } else { 0 };
        let scalars = [cfg.account_creation, cfg.verified, cfg.language, cfg.reaction_time]
            .iter()
            .filter(|&&b| b)
            .count()
            + 2 * cfg.counters.iter().filter(|&&b| b).count();
        let text_width = if cfg.sentiment { 3 } else { 0 }
            + if cfg.topics { cfg.max_topics } else { 0 }
            + usize::from(cfg.cascade_size);
        FeatureLayout {
            cap: cfg.cap,
            deepwalk_width,
            row_width: deepwalk_width + scalars,
            text_width,
        }
    }

    pub fn width(&self) -> usize {
        self.cap * self.row_width + self.text_width
    }

    /// Offset of participant slot `slot`.
    pub fn row_offset(&self, slot: usize) -> usize {
        slot * self.row_width
    }

    pub fn text_offset(&self) -> usize {
        self.cap * self.row_width
    }

    /// Whether column `col` holds a scalar (non-embedding) feature.
    pub fn is_scalar(&self, col: usize) -> bool {
        col >= self.text_offset() || col % self.row_width >= self.deepwalk_width
    }
}

/// Per-participant feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct UserFeatureRow {
    pub deepwalk: Vec<f64>,
    /// Days since the epoch.
    pub account_creation: f64,
    pub verified: bool,
    /// Frequency-ranked language code, 0 when unknown.
    pub language: u32,
    /// Seconds from the root tweet to the user's retweet (0 for the root).
    pub reaction_time: f64,
    pub counters: [Option<f64>; 9],
}

/// Account metadata lookup shared by all cascades.
#[derive(Debug, Clone, Default)]
pub struct UserContext {
    profiles: HashMap<UserId, UserProfile>,
    language_codes: HashMap<String, u32>,
}

impl UserContext {
    /// Languages are coded by descending frequency (ties alphabetically), from 1.
    pub fn new(profiles: HashMap<UserId, UserProfile>) -> Self {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for p in profiles.values() {
            if let Some(l) = &p.lang {
                *freq.entry(l.as_str()).or_default() += 1;
            }
        }
        let mut langs: Vec<(&str, usize)> = freq.into_iter().collect();
        langs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let language_codes = langs
            .iter()
            .enumerate()
            .map(|(i, (l, _))| (l.to_string(), i as u32 + 1))
            .collect();
        UserContext {
            profiles,
            language_codes,
        }
    }

    pub fn language_code(&self, lang: &str) -> u32 {
        self.language_codes.get(lang).copied().unwrap_or(0)
    }

    pub fn profile(&self, user: UserId) -> Option<&UserProfile> {
        self.profiles.get(&user)
    }
}

/// Rows for every participant, root first. `embedding[i]` is participant `i`'s
/// DeepWalk vector.
pub fn user_feature_rows(c: &Cascade, embedding: &[Vec<f64>], ctx: &UserContext) -> Vec<UserFeatureRow> {
    let times = std::iter::once(c.root_timestamp).chain(c.retweeters.iter().map(|r| r.1));
    c.participants()
        .zip(times)
        .zip(embedding)
        .map(|((user, ts), emb)| {
            let profile = ctx.profile(user);
            UserFeatureRow {
                deepwalk: emb.clone(),
                account_creation: profile.and_then(|p| p.created).map_or(0.0, |t| t as f64 / SECONDS_PER_DAY),
                verified: profile.and_then(|p| p.verified).unwrap_or(false),
                language: profile.and_then(|p| p.lang.as_deref()).map_or(0, |l| ctx.language_code(l)),
                reaction_time: (ts - c.root_timestamp).max(0) as f64,
                counters: profile.map_or([None; 9], |p| p.counters),
            }
        })
        .collect()
}

/// Flattens the first `cap` rows, zero-pads the missing slots and appends the
/// cascade-level text block (sentiment presence/label/score, topic ids + 1 with 0
/// for empty slots, participant count).
pub fn assemble_cascade_vector(c: &Cascade, rows: &[UserFeatureRow], cfg: &FeatureConfig) -> Vec<f64> {
    let layout = FeatureLayout::new(cfg);
    let mut out = Vec::with_capacity(layout.width());
    for row in rows.iter().take(cfg.cap) {
        if cfg.use_deepwalk {
            assert_eq!(row.deepwalk.len(), cfg.deepwalk.dim, "embedding width");
            out.extend_from_slice(&row.deepwalk);
        }
        if cfg.account_creation {
            out.push(row.account_creation);
        }
        if cfg.verified {
            out.push(f64::from(u8::from(row.verified)));
        }
        if cfg.language {
            out.push(f64::from(row.language));
        }
        if cfg.reaction_time {
            out.push(row.reaction_time);
        }
        for (value, _) in row.counters.iter().zip(cfg.counters).filter(|(_, on)| *on) {
            out.push(value.unwrap_or(0.0));
            out.push(f64::from(u8::from(value.is_some())));
        }
    }
    out.resize(layout.text_offset(), 0.0);
    if cfg.sentiment {
        match c.sentiment {
            Some(s) => out.extend([1.0, f64::from(s.label), s.score]),
            None => out.extend([0.0, 0.0, 0.0]),
        }
    }
    if cfg.topics {
        let topics = c.topics.as_deref().unwrap_or(&[]);
        for slot in 0..cfg.max_topics {
            out.push(topics.get(slot).map_or(0.0, |&t| (t + 1) as f64));
        }
    }
    if cfg.cascade_size {
        out.push(c.participant_count() as f64);
    }
    debug_assert_eq!(out.len(), layout.width());
    out
}

/// Raw vector of one cascade; DeepWalk is seeded from `(seed, cascade id)`.
pub fn cascade_vector(c: &Cascade, g: &SocialGraph, ctx: &UserContext, cfg: &FeatureConfig, seed: u64) -> Vec<f64> {
    let ag = augment_cascade(c, g);
    let embedding = if cfg.use_deepwalk {
        deepwalk_embed(&ag, &cfg.deepwalk, seed::derive(seed, c.id.as_bytes()))
    } else {
        vec![Vec::new(); ag.num_nodes()]
    };
    let rows = user_feature_rows(c, &embedding, ctx);
    assemble_cascade_vector(c, &rows, cfg)
}

/// `M × D` raw matrix, one row per cascade. Cascades are processed in parallel;
/// per-cascade seeding keeps the result independent of scheduling.
pub fn raw_feature_matrix(
    cascades: &[Cascade],
    g: &SocialGraph,
    ctx: &UserContext,
    cfg: &FeatureConfig,
    seed: u64,
) -> DMatrix<f64> {
    let width = FeatureLayout::new(cfg).width();
    let rows: Vec<Vec<f64>> = cascades
        .par_iter()
        .map(|c| cascade_vector(c, g, ctx, cfg, seed))
        .collect();
    DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j])
}

/// Z-normalizes the scalar columns in place; constant columns become zero.
pub fn standardize_scalars(raw: &mut DMatrix<f64>, layout: &FeatureLayout) {
    let m = raw.nrows();
    if m == 0 {
        return;
    }
    for j in 0..raw.ncols() {
        if !layout.is_scalar(j) {
            continue;
        }
        let mut col = raw.column_mut(j);
        let mean = col.sum() / m as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64;
        let std = var.sqrt();
        for x in col.iter_mut() {
            *x = if std > 1e-12 { (*x - mean) / std } else { 0.0 };
        }
    }
}

/// Raw features → standardized → PCA. `pca_dim` is clipped to the matrix rank bound.
pub fn build_feature_matrix(
    cascades: &[Cascade],
    g: &SocialGraph,
    ctx: &UserContext,
    cfg: &FeatureConfig,
    seed: u64,
) -> Result<FeatureMatrix> {
    let mut raw = raw_feature_matrix(cascades, g, ctx, cfg, seed);
    standardize_scalars(&mut raw, &FeatureLayout::new(cfg));
    let dim = cfg.pca_dim.min(raw.nrows()).min(raw.ncols());
    if dim < cfg.pca_dim {
        log::warn!("PCA dimension clipped from {} to {dim}", cfg.pca_dim);
    }
    pca_fit_transform(&raw, dim)
}

/// Header `features <M> <D> v<layout>` then one whitespace-separated row per line.
pub fn write_features<W: Write>(rows: &DMatrix<f64>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "features {} {} v{}", rows.nrows(), rows.ncols(), LAYOUT_VERSION)?;
    for row in rows.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()
}

pub fn read_features<R: BufRead>(reader: R, origin: &Path) -> Result<DMatrix<f64>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(origin, 1, "empty feature file"))?
        .map_err(|e| Error::io(origin, e))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (m, d) = match parts.as_slice() {
        ["features", m, d, v] if *v == format!("v{LAYOUT_VERSION}") => (
            m.parse::<usize>().map_err(|e| Error::format(origin, 1, e.to_string()))?,
            d.parse::<usize>().map_err(|e| Error::format(origin, 1, e.to_string()))?,
        ),
        _ => return Err(Error::format(origin, 1, "expected `features <M> <D> v1`")),
    };
    let mut data = Vec::with_capacity(m * d);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| Error::format(origin, i + 2, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != d {
            return Err(Error::format(origin, i + 2, format!("expected {d} values, got {}", row.len())));
        }
        data.extend(row);
    }
    if data.len() != m * d {
        return Err(Error::format(origin, 0, format!("expected {m} rows")));
    }
    Ok(DMatrix::from_row_slice(m, d, &data))
}

/// Names of the scalar columns of one participant row, for reports.
pub fn scalar_column_names(cfg: &FeatureConfig) -> Vec<String> {
    let mut names = Vec::new();
    for (flag, name) in [
        (cfg.account_creation, "account_creation"),
        (cfg.verified, "verified"),
        (cfg.language, "language"),
        (cfg.reaction_time, "reaction_time"),
    ] {
        if flag {
            names.push(name.to_string());
        }
    }
    for (name, on) in COUNTER_NAMES.iter().zip(cfg.counters) {
        if on {
            names.push(format!("max_{name}"));
            names.push(format!("has_{name}"));
        }
    }
    names
}
