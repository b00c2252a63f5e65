//! String similarity search combining query relaxation with result
//! diversification.
//!
//! Given a query string and a result-count range `[k_min, k_max]`, the
//! library returns a set `S` with `|S|` in range that heuristically maximizes
//!
//! ```text
//! F(S, q) = lambda * argDiv(S) - (1 - lambda) * argSim(S, q)
//! ```
//!
//! via three interchangeable algorithms:
//!
//! - [`gen_greedy`]: relax the query over a q-gram inverted index, then keep
//!   the candidates with the largest summed pairwise distance.
//! - [`gen_cluster`]: relax, build a guide tree, progressively align the pool
//!   into a gap-padded matrix, extract a per-column majority motif, and keep
//!   the candidates farthest from it.
//! - [`cb2s_search`]: partition the corpus with k-means over bigram feature
//!   vectors, classify the query into a cluster with KNN, and harvest
//!   F-guided results from the nearest clusters only.
//!
//! The `divsearch` binary exposes dataset ingestion, index/model persistence
//! and a benchmark runner on top of the same API.

pub mod bench;
pub mod cb2s;
pub mod cluster;
pub mod dataset;
pub mod error;
pub mod greedy;
pub mod metrics;
pub mod oracle;
pub mod persist;
pub mod qgram;
pub mod relax;

pub use cb2s::{cb2s_search, ClusterModel, ModelConfig};
pub use cluster::gen_cluster;
pub use error::{Error, PersistError, Result};
pub use greedy::gen_greedy;
pub use metrics::{
    arg_div, arg_sim, edit_distance, objective_f, QualityReport, ResultMember, ResultSet,
    SearchParams,
};
pub use qgram::{Corpus, InvertedIndex, RecordId};
pub use relax::{relax, CandidateSet};

use serde::Serialize;

/// Everything one search run produces: the result set, its quality report,
/// and whether the search space ran out before `k_min` results were found.
#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub result: ResultSet,
    pub report: QualityReport,
    /// Set when the result holds fewer than `k_min` members because the
    /// corpus (or the pruned search space) could not supply more.
    pub exhausted: bool,
    /// The final relaxation threshold, for the relaxation-based algorithms.
    pub epsilon_final: Option<usize>,
    /// Sum-of-pairs alignment score of the substitution matrix, reported as a
    /// diagnostic by the cluster algorithm.
    pub sp_score: Option<i64>,
}
