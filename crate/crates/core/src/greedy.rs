//! Contribution-ranked diversification over the relaxed candidate pool.
//!
//! Each candidate is scored by its summed distance to every other candidate
//! (`DD`), a sampled threshold prunes low-contribution candidates, and the
//! survivors are cut to the top `|pool| / (1 + lambda)` by descending `DD`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{
    edit_distance_chars, QualityReport, ResultMember, ResultSet, SearchParams,
};
use crate::qgram::{Corpus, InvertedIndex};
use crate::relax::{relax, CandidateSet};
use crate::SearchOutcome;

/// Symmetric matrix of exact pairwise edit distances over one candidate pool,
/// indexed by member position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<u32>,
}

impl DistanceMatrix {
    /// Builds from explicit entries; test-side constructor.
    pub fn from_entries(n: usize, entries: Vec<u32>) -> Self {
        assert_eq!(entries.len(), n * n);
        DistanceMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }

    /// Summed distance from member `i` to every other member.
    pub fn row_sum(&self, i: usize) -> u64 {
        self.entries[i * self.n..(i + 1) * self.n]
            .iter()
            .map(|&d| d as u64)
            .sum()
    }
}

/// Exact pairwise edit distances over the candidate texts.
pub fn build_distance_matrix(candidates: &CandidateSet, corpus: &Corpus) -> DistanceMatrix {
    let n = candidates.len();
    let chars: Vec<Vec<char>> = candidates
        .members()
        .iter()
        .map(|&(id, _)| corpus.text(id).chars().collect())
        .collect();
    let mut entries = vec![0u32; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = edit_distance_chars(&chars[i], &chars[j]) as u32;
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix { n, entries }
}

/// How the prune threshold normalizes the sampled distance mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PruneNorm {
    /// `omega` times the mean `DD` contribution over the sampled members;
    /// commensurate with the `DD` values the threshold is compared against.
    #[default]
    MeanContribution,
    /// `omega` times the mean per-pair distance between the pool and the
    /// sample; kept for comparison runs.
    MeanPairDistance,
}

/// Sampled pruning threshold with the default normalization.
///
/// Draws `round(sigma * n)` members (at least one) without replacement using
/// the seed, and returns `omega` times their mean contribution. Pools with
/// fewer than two members threshold at zero.
pub fn prune_threshold(
    candidates: &CandidateSet,
    d: &DistanceMatrix,
    sigma: f64,
    omega: f64,
    seed: u64,
) -> f64 {
    prune_threshold_with(candidates, d, sigma, omega, seed, PruneNorm::MeanContribution)
}

/// Pruning threshold with an explicit normalization.
pub fn prune_threshold_with(
    candidates: &CandidateSet,
    d: &DistanceMatrix,
    sigma: f64,
    omega: f64,
    seed: u64,
    norm: PruneNorm,
) -> f64 {
    let n = candidates.len();
    if n < 2 {
        return 0.0;
    }
    let m = (sigma * n as f64).round().clamp(1.0, n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = rand::seq::index::sample(&mut rng, n, m);
    let total: u64 = sample.iter().map(|t| d.row_sum(t)).sum();
    match norm {
        PruneNorm::MeanContribution => omega * total as f64 / m as f64,
        PruneNorm::MeanPairDistance => omega * total as f64 / (m as f64 * n as f64),
    }
}

/// Selection order: descending contribution, then ascending distance to the
/// query, then ascending record id.
fn rank_key(dd: &[u64], candidates: &CandidateSet, i: usize) -> (std::cmp::Reverse<u64>, usize, u32) {
    let (id, dist) = candidates.members()[i];
    (std::cmp::Reverse(dd[i]), dist, id.0)
}

/// Prunes, ranks and cuts the candidate pool into a result set.
///
/// The nominal selection size is `round(n / (1 + lambda))` clamped into
/// `[k_min, k_max]`; when pruning leaves fewer than `k_min` survivors, pruned
/// candidates are restored in rank order until `k_min` (or the pool) is met.
pub fn greedy_filter(
    candidates: &CandidateSet,
    d: &DistanceMatrix,
    corpus: &Corpus,
    params: &SearchParams,
    seed: u64,
) -> Result<ResultSet> {
    greedy_filter_with(candidates, d, corpus, params, seed, PruneNorm::MeanContribution)
}

/// [`greedy_filter`] with an explicit prune normalization.
pub fn greedy_filter_with(
    candidates: &CandidateSet,
    d: &DistanceMatrix,
    corpus: &Corpus,
    params: &SearchParams,
    seed: u64,
    norm: PruneNorm,
) -> Result<ResultSet> {
    let n = candidates.len();
    if n == 0 {
        return Err(Error::EmptySet("greedy_filter needs a non-empty candidate pool"));
    }
    let dd: Vec<u64> = (0..n).map(|i| d.row_sum(i)).collect();
    let threshold = prune_threshold_with(candidates, d, params.sigma, params.omega, seed, norm);

    let mut survivors: Vec<usize> = (0..n).filter(|&i| dd[i] as f64 >= threshold).collect();
    let mut pruned: Vec<usize> = (0..n).filter(|&i| (dd[i] as f64) < threshold).collect();
    survivors.sort_by_key(|&i| rank_key(&dd, candidates, i));
    pruned.sort_by_key(|&i| rank_key(&dd, candidates, i));

    let target = ((n as f64 / (1.0 + params.lambda)).round() as usize)
        .clamp(params.k_min, params.k_max)
        .min(n);
    let mut selected: Vec<usize> = survivors.iter().copied().take(target).collect();

    // Result-count guarantee: pruning must never push the result below k_min.
    let min_size = params.k_min.min(n);
    let mut restore = pruned.into_iter();
    while selected.len() < min_size {
        selected.push(restore.next().expect("pool holds at least min_size members"));
    }

    let members: Vec<ResultMember> = selected
        .into_iter()
        .map(|i| {
            let (id, dist) = candidates.members()[i];
            ResultMember { id, text: corpus.text(id).to_string(), dist_to_query: dist }
        })
        .collect();
    ResultSet::from_members(candidates.query(), members)
}

/// The full pipeline: relaxation, pairwise distances, diversification filter,
/// quality report.
pub fn gen_greedy(
    query: &str,
    params: &SearchParams,
    index: &InvertedIndex,
    corpus: &Corpus,
    seed: u64,
) -> Result<SearchOutcome> {
    let candidates = relax(query, params, index, corpus)?;
    let matrix = build_distance_matrix(&candidates, corpus);
    let result = greedy_filter(&candidates, &matrix, corpus, params, seed)?;
    let report = QualityReport::evaluate(&result, params)?;
    Ok(SearchOutcome {
        exhausted: result.len() < params.k_min,
        epsilon_final: Some(candidates.epsilon_final()),
        sp_score: None,
        result,
        report,
    })
}
