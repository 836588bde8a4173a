//! Retweet-cascade hypergraphs for disinformation detection.
//!
//! The pipeline turns raw user–user interaction records into a user social graph,
//! partitions the users into clusters, lifts every cluster to the set of cascades its
//! users took part in (a hyperedge), builds one feature vector per cascade and finally
//! classifies cascades with a hypergraph-convolution network.
//!
//! - [`ingest`]: interaction/cascade parsing, social graph, user→cascade map
//! - [`partition`]: multilevel k-way partitioning and the Louvain baseline
//! - [`hypergraph`]: cascade hypergraph and its incidence structure
//! - [`features`]: augmented cascade subgraphs, DeepWalk, flattening, PCA
//! - [`model`]: hypergraph convolution + MLP with hand-written gradients
//! - [`pipeline`]: experiment protocol, sweeps and reports
//! - [`synth`]: planted-partition synthetic datasets

pub mod error;
pub mod features;
pub mod hypergraph;
pub mod ingest;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
