//! Cluster-based string search: partition the corpus with k-means over
//! character-bigram feature vectors, classify the query into a cluster with
//! KNN over a sampled training set, and harvest results from the nearest
//! clusters only, guided by the objective function.
//!
//! Vectorization is deterministic: term-frequency vectors over the top-`d`
//! bigrams ranked by document frequency, normalized to unit length.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{
    ceil_frac, edit_distance_chars, floor_frac, QualityReport, ResultMember, ResultSet,
    SearchParams,
};
use crate::qgram::{extract_grams, Corpus, RecordId};
use crate::SearchOutcome;

/// Clusters with more member bytes than this are flagged at build time.
pub const CLUSTER_SIZE_LIMIT_BYTES: usize = 64 * 1024 * 1024;

/// Clusters up to this size get their medoid by exact pairwise edit distance;
/// larger ones fall back to the member nearest the centroid.
const MEDOID_EXACT_LIMIT: usize = 512;

/// A record's position in feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Self {
        FeatureVector { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn euclidean_distance(&self, other: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Corpus-frozen bigram vocabulary and the featurization it defines.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectorizer {
    grams: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vectorizer {
    /// Selects the top-`dims` bigrams by document frequency (ties by gram);
    /// the dimension shrinks when the corpus has fewer distinct bigrams.
    pub fn fit(corpus: &Corpus, dims: usize) -> Self {
        let mut df: HashMap<String, u32> = HashMap::new();
        for (_, text) in corpus.iter() {
            for (gram, _) in extract_grams(text, 2).iter() {
                *df.entry(gram.to_string()).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, u32)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(dims);
        let grams: Vec<String> = ranked.into_iter().map(|(g, _)| g).collect();
        let index = grams.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Vectorizer { grams, index }
    }

    pub fn dims(&self) -> usize {
        self.grams.len()
    }

    pub fn grams(&self) -> &[String] {
        &self.grams
    }

    pub(crate) fn from_grams(grams: Vec<String>) -> Self {
        let index = grams.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Vectorizer { grams, index }
    }

    /// Unit-normalized bigram term frequencies; out-of-vocabulary bigrams are
    /// dropped, and a text with none in vocabulary stays at the origin.
    pub fn vectorize_text(&self, text: &str) -> FeatureVector {
        let mut values = vec![0.0; self.grams.len()];
        for (gram, count) in extract_grams(text, 2).iter() {
            if let Some(&dim) = self.index.get(gram) {
                values[dim] += count as f64;
            }
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        FeatureVector { values }
    }

    pub fn vectorize_corpus(&self, corpus: &Corpus) -> Vec<FeatureVector> {
        corpus.iter().map(|(_, t)| self.vectorize_text(t)).collect()
    }
}

/// Deterministic featurization of a whole corpus.
pub fn vectorize(corpus: &Corpus, dims: usize) -> Vec<FeatureVector> {
    Vectorizer::fit(corpus, dims).vectorize_corpus(corpus)
}

/// Raw k-means output: one centroid per cluster and a label per vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub centroids: Vec<FeatureVector>,
    pub assignments: Vec<u32>,
}

fn nearest_centroid(v: &FeatureVector, centroids: &[FeatureVector]) -> (usize, f64) {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = v.euclidean_distance(centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// Lloyd's algorithm from seeded farthest-point initialization.
///
/// Converges when assignments stabilize or `max_iters` is reached. A cluster
/// that empties during iteration is re-seeded with the point farthest from
/// its own centroid; with enough duplicate points an empty cluster can be
/// unavoidable and is then left empty.
pub fn kmeans_partition(
    vectors: &[FeatureVector],
    m: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KmeansResult> {
    let n = vectors.len();
    if n == 0 {
        return Err(Error::EmptySet("kmeans needs at least one vector"));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidParams(format!(
            "cluster count {m} out of range for {n} vectors"
        )));
    }

    // Farthest-point traversal from a seeded start.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..n);
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = vectors.iter().map(|v| v.euclidean_distance(&vectors[first])).collect();
    while chosen.len() < m {
        let mut best = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, _)) => min_dist[i] > bd,
            };
            if better {
                best = Some((min_dist[i], i));
            }
        }
        let (_, pick) = best.expect("m <= n leaves an unchosen point");
        chosen.push(pick);
        for i in 0..n {
            min_dist[i] = min_dist[i].min(vectors[i].euclidean_distance(&vectors[pick]));
        }
    }
    let mut centroids: Vec<FeatureVector> = chosen.iter().map(|&i| vectors[i].clone()).collect();

    let mut assignments = vec![0u32; n];
    for _ in 0..max_iters {
        let mut next: Vec<u32> = vectors
            .iter()
            .map(|v| nearest_centroid(v, &centroids).0 as u32)
            .collect();

        // Re-seed empty clusters with the farthest point from its centroid.
        for _ in 0..m {
            let mut counts = vec![0usize; m];
            for &a in &next {
                counts[a as usize] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else { break };
            let far = (0..n)
                .map(|i| (vectors[i].euclidean_distance(&centroids[next[i] as usize]), i))
                .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
                .map(|(_, i)| i)
                .expect("vectors not empty");
            centroids[empty] = vectors[far].clone();
            next = vectors
                .iter()
                .map(|v| nearest_centroid(v, &centroids).0 as u32)
                .collect();
        }

        let converged = next == assignments;
        assignments = next;

        // Recompute centroids as member means.
        let mut sums = vec![vec![0.0; vectors[0].dim()]; m];
        let mut counts = vec![0usize; m];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a as usize] += 1;
            for (s, v) in sums[a as usize].iter_mut().zip(vectors[i].values()) {
                *s += v;
            }
        }
        for c in 0..m {
            if counts[c] > 0 {
                for s in &mut sums[c] {
                    *s /= counts[c] as f64;
                }
                centroids[c] = FeatureVector::from_values(std::mem::take(&mut sums[c]));
            }
        }

        if converged {
            break;
        }
    }

    Ok(KmeansResult { centroids, assignments })
}

/// Build-time knobs for [`ClusterModel::build`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Feature dimension; shrinks to the number of distinct bigrams.
    pub dims: usize,
    /// Cluster count; `None` sizes by corpus (one cluster per 5000 records,
    /// at least 2, capped at the record count).
    pub clusters: Option<usize>,
    pub seed: u64,
    pub max_iters: usize,
    /// Fraction of the corpus sampled into the KNN training set.
    pub sample_rate: f64,
    /// Neighbors consulted when classifying a query.
    pub knn_k: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dims: 64,
            clusters: None,
            seed: 0,
            max_iters: 50,
            sample_rate: 0.05,
            knn_k: 5,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::InvalidParams("dims must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be positive".into()));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "sample_rate must be in (0, 1], got {}",
                self.sample_rate
            )));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidParams("knn_k must be positive".into()));
        }
        if self.clusters == Some(0) {
            return Err(Error::InvalidParams("clusters must be positive".into()));
        }
        Ok(())
    }
}

/// The trained partition: feature vectors, centroids, member lists, medoids,
/// the inter-centroid distance matrix and the sampled KNN training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    config: ModelConfig,
    vectorizer: Vectorizer,
    vectors: Vec<FeatureVector>,
    assignments: Vec<u32>,
    members: Vec<Vec<RecordId>>,
    centroids: Vec<FeatureVector>,
    medians: Vec<Option<RecordId>>,
    centroid_distances: Vec<f64>,
    training_sample: Vec<(RecordId, u32)>,
    oversized_clusters: Vec<usize>,
    corpus_checksum: [u8; 32],
}

impl ClusterModel {
    /// Vectorizes, partitions and samples the corpus.
    pub fn build(corpus: &Corpus, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n = corpus.len();
        let vectorizer = Vectorizer::fit(corpus, config.dims);
        let vectors = vectorizer.vectorize_corpus(corpus);
        let m = config
            .clusters
            .unwrap_or_else(|| 2.max(n.div_ceil(5000)))
            .min(n);
        let km = kmeans_partition(&vectors, m, config.seed, config.max_iters)?;

        let mut members: Vec<Vec<RecordId>> = vec![Vec::new(); m];
        for (i, &a) in km.assignments.iter().enumerate() {
            members[a as usize].push(RecordId(i as u32));
        }

        let medians = members
            .iter()
            .enumerate()
            .map(|(c, ids)| cluster_medoid(corpus, ids, &km.centroids[c], &vectors))
            .collect();

        let mut centroid_distances = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let d = km.centroids[i].euclidean_distance(&km.centroids[j]);
                centroid_distances[i * m + j] = d;
                centroid_distances[j * m + i] = d;
            }
        }

        // Uniform sample of (record, label) pairs for KNN; at least one.
        let sample_size = ((config.sample_rate * n as f64).round() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x73616d70));
        let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, n, sample_size).into_vec();
        picks.sort_unstable();
        let training_sample = picks
            .into_iter()
            .map(|i| (RecordId(i as u32), km.assignments[i]))
            .collect();

        let oversized_clusters = members
            .iter()
            .enumerate()
            .filter(|(_, ids)| {
                ids.iter().map(|&id| corpus.text(id).len()).sum::<usize>() > CLUSTER_SIZE_LIMIT_BYTES
            })
            .map(|(c, _)| c)
            .collect();

        Ok(ClusterModel {
            config: ModelConfig { clusters: Some(m), dims: vectorizer.dims(), ..config.clone() },
            vectorizer,
            vectors,
            assignments: km.assignments,
            members,
            centroids: km.centroids,
            medians,
            centroid_distances,
            training_sample,
            oversized_clusters,
            corpus_checksum: corpus.checksum(),
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vectorizer(&self) -> &Vectorizer {
        &self.vectorizer
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn assignments(&self) -> &[u32] {
        &self.assignments
    }

    pub fn members(&self, cluster: usize) -> &[RecordId] {
        &self.members[cluster]
    }

    pub fn centroids(&self) -> &[FeatureVector] {
        &self.centroids
    }

    /// Medoid of each cluster; `None` for a degenerate empty cluster.
    pub fn medians(&self) -> &[Option<RecordId>] {
        &self.medians
    }

    pub fn centroid_distance(&self, a: usize, b: usize) -> f64 {
        self.centroid_distances[a * self.cluster_count() + b]
    }

    pub fn training_sample(&self) -> &[(RecordId, u32)] {
        &self.training_sample
    }

    /// Clusters whose member texts exceed the 64MB block limit.
    pub fn oversized_clusters(&self) -> &[usize] {
        &self.oversized_clusters
    }

    pub fn corpus_checksum(&self) -> &[u8; 32] {
        &self.corpus_checksum
    }

    pub fn record_count(&self) -> usize {
        self.assignments.len()
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        config: ModelConfig,
        vectorizer: Vectorizer,
        vectors: Vec<FeatureVector>,
        assignments: Vec<u32>,
        centroids: Vec<FeatureVector>,
        medians: Vec<Option<RecordId>>,
        centroid_distances: Vec<f64>,
        training_sample: Vec<(RecordId, u32)>,
        oversized_clusters: Vec<usize>,
        corpus_checksum: [u8; 32],
    ) -> Self {
        let m = centroids.len();
        let mut members: Vec<Vec<RecordId>> = vec![Vec::new(); m];
        for (i, &a) in assignments.iter().enumerate() {
            members[a as usize].push(RecordId(i as u32));
        }
        ClusterModel {
            config,
            vectorizer,
            vectors,
            assignments,
            members,
            centroids,
            medians,
            centroid_distances,
            training_sample,
            oversized_clusters,
            corpus_checksum,
        }
    }
}

/// Member minimizing summed edit distance to its co-members; clusters past
/// [`MEDOID_EXACT_LIMIT`] use the member nearest the centroid instead.
fn cluster_medoid(
    corpus: &Corpus,
    ids: &[RecordId],
    centroid: &FeatureVector,
    vectors: &[FeatureVector],
) -> Option<RecordId> {
    if ids.is_empty() {
        return None;
    }
    if ids.len() <= MEDOID_EXACT_LIMIT {
        let chars: Vec<Vec<char>> = ids.iter().map(|&id| corpus.text(id).chars().collect()).collect();
        let mut sums = vec![0u64; ids.len()];
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                let d = edit_distance_chars(&chars[i], &chars[j]) as u64;
                sums[i] += d;
                sums[j] += d;
            }
        }
        let best = (0..ids.len()).min_by_key(|&i| (sums[i], ids[i])).unwrap();
        Some(ids[best])
    } else {
        ids.iter()
            .copied()
            .min_by(|&a, &b| {
                vectors[a.index()]
                    .euclidean_distance(centroid)
                    .total_cmp(&vectors[b.index()].euclidean_distance(centroid))
                    .then_with(|| a.cmp(&b))
            })
    }
}

/// Majority cluster label among the `k` nearest training samples; ties go to
/// the single nearest neighbor's label. `k` is clamped to the sample size.
pub fn knn_classify(query_vec: &FeatureVector, model: &ClusterModel, k_neighbors: usize) -> usize {
    let mut neighbors: Vec<(f64, RecordId, u32)> = model
        .training_sample()
        .iter()
        .map(|&(id, label)| (query_vec.euclidean_distance(&model.vectors()[id.index()]), id, label))
        .collect();
    neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let k = k_neighbors.clamp(1, neighbors.len());

    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &(_, _, label) in &neighbors[..k] {
        *counts.entry(label).or_insert(0) += 1;
    }
    let max = counts.values().copied().max().unwrap();
    let tied: Vec<u32> = counts.iter().filter(|&(_, &c)| c == max).map(|(&l, _)| l).collect();
    if tied.len() == 1 {
        tied[0] as usize
    } else {
        neighbors[0].2 as usize
    }
}

/// The `ceil(sigma * M)` clusters nearest to `center` by centroid distance,
/// center first, then ascending distance.
///
/// On a complete graph with metric edges the shortest path to any cluster is
/// the direct edge, so this ranking is the single-source shortest-path order.
pub fn prune_clusters(model: &ClusterModel, center: usize, sigma: f64) -> Vec<usize> {
    let m = model.cluster_count();
    let keep = ceil_frac(sigma * m as f64).clamp(1, m);
    let mut others: Vec<(f64, usize)> = (0..m)
        .filter(|&c| c != center)
        .map(|c| (model.centroid_distance(center, c), c))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    std::iter::once(center)
        .chain(others.into_iter().map(|(_, c)| c))
        .take(keep)
        .collect()
}

/// When the harvesting loop moves to the next cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwitchPolicy {
    /// Switch when F drops, and after the similarity budget
    /// `floor((1 - lambda) * k_min)` is spent switch on every addition,
    /// spreading the remaining draws across clusters.
    #[default]
    SpreadAfterBudget,
    /// Switch only when F drops; keeps harvesting a cluster while F rises.
    FGuidedOnly,
}

/// Cluster-based search over a prebuilt model with the default switch policy.
pub fn cb2s_search(
    query: &str,
    params: &SearchParams,
    model: &ClusterModel,
    corpus: &Corpus,
) -> Result<SearchOutcome> {
    cb2s_search_with(query, params, model, corpus, SwitchPolicy::SpreadAfterBudget)
}

/// Classifies the query, prunes the cluster graph, then repeatedly moves the
/// member nearest the query (in feature space) into the result, switching
/// clusters when the objective drops or the similarity budget is spent.
/// Returns as soon as `k_max` is reached; each pass over the cluster list
/// restarts at the center until `k_min` is met or the clusters run dry.
pub fn cb2s_search_with(
    query: &str,
    params: &SearchParams,
    model: &ClusterModel,
    corpus: &Corpus,
    policy: SwitchPolicy,
) -> Result<SearchOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if model.record_count() != corpus.len() {
        return Err(Error::InvalidParams(format!(
            "model was built over {} records but the corpus holds {}",
            model.record_count(),
            corpus.len()
        )));
    }

    let query_vec = model.vectorizer().vectorize_text(query);
    let center = knn_classify(&query_vec, model, model.config().knn_k);
    let set_list = prune_clusters(model, center, params.sigma);

    // Per-cluster queues of remaining members, nearest to the query first.
    let mut queues: Vec<std::vec::IntoIter<(f64, RecordId)>> = set_list
        .iter()
        .map(|&c| {
            let mut q: Vec<(f64, RecordId)> = model
                .members(c)
                .iter()
                .map(|&id| (query_vec.euclidean_distance(&model.vectors()[id.index()]), id))
                .collect();
            q.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            q.into_iter()
        })
        .collect();

    let query_chars: Vec<char> = query.chars().collect();
    let budget = floor_frac((1.0 - params.lambda) * params.k_min as f64);

    let mut members: Vec<ResultMember> = Vec::new();
    let mut member_chars: Vec<Vec<char>> = Vec::new();
    let mut sum_query: u64 = 0;
    let mut sum_pair: u64 = 0;
    let mut f_prev = f64::NEG_INFINITY;
    let mut exhausted = false;

    'outer: while members.len() < params.k_min {
        if queues.iter().all(|q| q.len() == 0) {
            exhausted = true;
            break;
        }
        for queue in &mut queues {
            loop {
                let Some((_, id)) = queue.next() else { break };
                let text = corpus.text(id);
                let chars: Vec<char> = text.chars().collect();
                let dist = edit_distance_chars(&query_chars, &chars);
                sum_query += dist as u64;
                for other in &member_chars {
                    sum_pair += edit_distance_chars(other, &chars) as u64;
                }
                member_chars.push(chars);
                members.push(ResultMember { id, text: text.to_string(), dist_to_query: dist });

                let k = members.len();
                let div = if k < 2 {
                    0.0
                } else {
                    2.0 * sum_pair as f64 / (k as f64 * (k - 1) as f64)
                };
                let sim = sum_query as f64 / k as f64;
                let f_new = params.lambda * div - (1.0 - params.lambda) * sim;

                if members.len() >= params.k_max {
                    break 'outer;
                }
                let over_budget = matches!(policy, SwitchPolicy::SpreadAfterBudget)
                    && members.len() > budget;
                if f_new < f_prev || over_budget {
                    break; // next cluster; the baseline F stays put
                }
                f_prev = f_new;
            }
        }
    }

    let result = ResultSet::from_members(query, members)?;
    let report = QualityReport::evaluate(&result, params)?;
    Ok(SearchOutcome {
        exhausted: exhausted && result.len() < params.k_min,
        epsilon_final: None,
        sp_score: None,
        result,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts.iter().map(|s| s.to_string()).collect())
    }

    /// Four families of strings with disjoint bigram sets.
    fn blob_corpus(per_blob: usize) -> Corpus {
        let patterns = ["ab", "xy", "мн", "pq"];
        let mut texts = Vec::new();
        for i in 0..per_blob {
            for p in patterns {
                texts.push(p.repeat(4 + i % 3));
            }
        }
        Corpus::from_texts(texts)
    }

    #[test]
    fn identical_strings_identical_vectors() {
        let c = corpus(&["hello", "hello", "world"]);
        let vecs = vectorize(&c, 16);
        assert_eq!(vecs[0], vecs[1]);
        assert_ne!(vecs[0], vecs[2]);
    }

    #[test]
    fn similar_strings_are_closer() {
        let c = corpus(&["computer", "computing", "apple"]);
        let v = Vectorizer::fit(&c, 32);
        let computer = v.vectorize_text("computer");
        let computing = v.vectorize_text("computing");
        let apple = v.vectorize_text("apple");
        assert!(computer.dot(&computing) > computer.dot(&apple));
        assert!(
            computer.euclidean_distance(&computing) < computer.euclidean_distance(&apple)
        );
    }

    #[test]
    fn vectors_are_unit_norm() {
        let c = corpus(&["abcdef", "aa", "x"]);
        for v in vectorize(&c, 8) {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dims_shrink_to_distinct_bigrams() {
        let c = corpus(&["ababab"]); // bigrams {ab, ba}
        let v = Vectorizer::fit(&c, 100);
        assert_eq!(v.dims(), 2);
    }

    #[test]
    fn kmeans_single_cluster() {
        let vecs: Vec<FeatureVector> =
            (0..5).map(|_| FeatureVector::from_values(vec![1.0, 0.0])).collect();
        let km = kmeans_partition(&vecs, 1, 0, 10).unwrap();
        assert!(km.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut vecs = Vec::new();
        for i in 0..10 {
            let jitter = i as f64 * 1e-3;
            vecs.push(FeatureVector::from_values(vec![1.0 + jitter, 0.0]));
            vecs.push(FeatureVector::from_values(vec![0.0, 1.0 + jitter]));
        }
        let km = kmeans_partition(&vecs, 2, 7, 50).unwrap();
        // Even indexes are one blob, odd the other.
        let first = km.assignments[0];
        let second = km.assignments[1];
        assert_ne!(first, second);
        for (i, &a) in km.assignments.iter().enumerate() {
            assert_eq!(a, if i % 2 == 0 { first } else { second });
        }
    }

    #[test]
    fn kmeans_is_seed_deterministic() {
        let c = blob_corpus(6);
        let vecs = vectorize(&c, 16);
        let a = kmeans_partition(&vecs, 3, 11, 30).unwrap();
        let b = kmeans_partition(&vecs, 3, 11, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kmeans_rejects_bad_cluster_counts() {
        let vecs = vec![FeatureVector::from_values(vec![0.0])];
        assert!(kmeans_partition(&vecs, 0, 0, 10).is_err());
        assert!(kmeans_partition(&vecs, 2, 0, 10).is_err());
        assert!(kmeans_partition(&[], 1, 0, 10).is_err());
    }

    #[test]
    fn model_partition_invariant() {
        let c = blob_corpus(5);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(4), ..Default::default() }).unwrap();
        let mut seen = vec![false; c.len()];
        for cl in 0..model.cluster_count() {
            for &id in model.members(cl) {
                assert!(!seen[id.index()], "record {id} in two clusters");
                seen[id.index()] = true;
                assert_eq!(model.assignments()[id.index()], cl as u32);
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(
            model.training_sample().len(),
            ((0.05 * c.len() as f64).round() as usize).clamp(1, c.len())
        );
    }

    #[test]
    fn model_medoid_minimizes_summed_distance() {
        let c = corpus(&["aaaa", "aaab", "aabb", "zzzz", "zzzy"]);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(2), ..Default::default() }).unwrap();
        for cl in 0..model.cluster_count() {
            let ids = model.members(cl);
            if ids.is_empty() {
                continue;
            }
            let medoid = model.medians()[cl].unwrap();
            let sum = |a: RecordId| -> u64 {
                ids.iter()
                    .map(|&b| crate::metrics::edit_distance(c.text(a), c.text(b)) as u64)
                    .sum()
            };
            assert!(ids.iter().all(|&b| sum(medoid) <= sum(b)));
        }
    }

    #[test]
    fn knn_identity_and_majority() {
        let c = blob_corpus(8);
        let model = ClusterModel::build(
            &c,
            &ModelConfig { clusters: Some(4), sample_rate: 0.9, ..Default::default() },
        )
        .unwrap();
        // A training string maps to its own cluster at k = 1.
        let (id, label) = model.training_sample()[0];
        let v = model.vectorizer().vectorize_text(c.text(id));
        assert_eq!(knn_classify(&v, &model, 1), label as usize);

        // A fresh string from one blob maps to that blob's cluster.
        let probe = model.vectorizer().vectorize_text("abababababab");
        let expected = model.assignments()[0] as usize; // record 0 is an "ab" string
        assert_eq!(knn_classify(&probe, &model, 5), expected);
    }

    #[test]
    fn knn_single_label_sample() {
        let c = corpus(&["aaaa", "aaab", "aaba"]);
        let model = ClusterModel::build(
            &c,
            &ModelConfig { clusters: Some(1), sample_rate: 0.99, ..Default::default() },
        )
        .unwrap();
        let v = model.vectorizer().vectorize_text("zzzz");
        assert_eq!(knn_classify(&v, &model, 3), 0);
    }

    #[test]
    fn prune_orders_by_center_distance() {
        let c = blob_corpus(6);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(5), ..Default::default() }).unwrap();
        let m = model.cluster_count();
        let all = prune_clusters(&model, 2, 1.0);
        assert_eq!(all.len(), m);
        assert_eq!(all[0], 2);
        for w in all[1..].windows(2) {
            assert!(
                model.centroid_distance(2, w[0]) <= model.centroid_distance(2, w[1])
            );
        }

        let only_center = prune_clusters(&model, 3, 1e-9);
        assert_eq!(only_center, vec![3]);

        // Hand-checked 3-element prefix against a sort of the distance row.
        let keep3 = prune_clusters(&model, 2, 3.0 / m as f64);
        let mut row: Vec<(f64, usize)> = (0..m)
            .filter(|&c| c != 2)
            .map(|c| (model.centroid_distance(2, c), c))
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        assert_eq!(keep3, vec![2, row[0].1, row[1].1]);
    }

    #[test]
    fn search_single_cluster_takes_everything() {
        let c = corpus(&["aaa", "aab", "abb", "bbb"]);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(1), ..Default::default() }).unwrap();
        let params = SearchParams::new(0.5, 4, 8, 0).unwrap();
        let out = cb2s_search("aaa", &params, &model, &c).unwrap();
        assert_eq!(out.result.len(), 4);
        assert!(!out.exhausted);
    }

    #[test]
    fn search_space_stays_inside_pruned_clusters() {
        let c = blob_corpus(10);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(4), ..Default::default() }).unwrap();
        let params = SearchParams::new(0.5, 6, 10, 0).unwrap().with_sigma(0.45).unwrap();
        let query_vec = model.vectorizer().vectorize_text("abababab");
        let center = knn_classify(&query_vec, &model, model.config().knn_k);
        let set_list = prune_clusters(&model, center, params.sigma);

        let out = cb2s_search("abababab", &params, &model, &c).unwrap();
        for m in out.result.members() {
            let label = model.assignments()[m.id.index()] as usize;
            assert!(set_list.contains(&label), "member {} outside the search space", m.id);
        }
    }

    #[test]
    fn lambda_one_spreads_across_clusters() {
        let c = blob_corpus(10);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(4), ..Default::default() }).unwrap();
        // Budget floor((1 - 1) * k_min) = 0 forces a switch after every draw.
        let params = SearchParams::new(1.0, 6, 10, 0).unwrap().with_sigma(0.49).unwrap();
        let out = cb2s_search("abababab", &params, &model, &c).unwrap();
        let labels: std::collections::HashSet<u32> = out
            .result
            .members()
            .iter()
            .map(|m| model.assignments()[m.id.index()])
            .collect();
        assert!(labels.len() >= 2, "draws should spread, got {labels:?}");
    }

    #[test]
    fn nearest_first_within_cluster() {
        let c = blob_corpus(10);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(4), ..Default::default() }).unwrap();
        let params = SearchParams::new(0.3, 8, 12, 0).unwrap().with_sigma(0.49).unwrap();
        let query = "abababababab";
        let out = cb2s_search(query, &params, &model, &c).unwrap();
        let qv = model.vectorizer().vectorize_text(query);
        let mut last_by_cluster: HashMap<u32, f64> = HashMap::new();
        for m in out.result.members() {
            let label = model.assignments()[m.id.index()];
            let d = qv.euclidean_distance(&model.vectors()[m.id.index()]);
            if let Some(&prev) = last_by_cluster.get(&label) {
                assert!(d >= prev - 1e-12);
            }
            last_by_cluster.insert(label, d);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let c = blob_corpus(8);
        let cfg = ModelConfig { clusters: Some(3), seed: 9, ..Default::default() };
        let m1 = ClusterModel::build(&c, &cfg).unwrap();
        let m2 = ClusterModel::build(&c, &cfg).unwrap();
        assert_eq!(m1, m2);
        let params = SearchParams::new(0.5, 5, 9, 0).unwrap();
        let a = cb2s_search("abab", &params, &m1, &c).unwrap();
        let b = cb2s_search("abab", &params, &m2, &c).unwrap();
        assert_eq!(a.result, b.result);
    }

    #[test]
    fn result_capped_at_k_max() {
        let c = blob_corpus(20);
        let model = ClusterModel::build(&c, &ModelConfig { clusters: Some(2), ..Default::default() }).unwrap();
        let params = SearchParams::new(0.9, 10, 12, 0).unwrap().with_sigma(0.49).unwrap();
        let out = cb2s_search("abababab", &params, &model, &c).unwrap();
        assert!(out.result.len() >= 10 && out.result.len() <= 12);
    }
}
