//! Q-gram extraction, the inverted index, and count-filter candidate lookup
//! with exact edit-distance verification.
//!
//! Two strings within edit distance `eps` must share at least
//! `(query_len - gram_len + 1) - gram_len * eps` grams (counting multiplicity),
//! so posting-list counting prunes the corpus before any distance is computed.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::edit_distance_bounded_chars;

/// Dense identifier of a corpus record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RecordId(pub u32);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl RecordId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Aggregate shape statistics of a corpus, lengths counted in chars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub count: usize,
    pub max_len: usize,
    pub mean_len: f64,
}

/// The searchable dataset: strings with stable, contiguous integer ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    records: Vec<String>,
}

impl Corpus {
    /// Wraps texts verbatim; record ids are the positions in `texts`.
    pub fn from_texts(texts: Vec<String>) -> Self {
        Corpus { records: texts }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn text(&self, id: RecordId) -> &str {
        &self.records[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = RecordId> + '_ {
        (0..self.records.len() as u32).map(RecordId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RecordId, &str)> + '_ {
        self.records
            .iter()
            .enumerate()
            .map(|(i, t)| (RecordId(i as u32), t.as_str()))
    }

    pub fn stats(&self) -> CorpusStats {
        let mut max_len = 0usize;
        let mut total = 0usize;
        for t in &self.records {
            let n = t.chars().count();
            max_len = max_len.max(n);
            total += n;
        }
        CorpusStats {
            count: self.records.len(),
            max_len,
            mean_len: if self.records.is_empty() {
                0.0
            } else {
                total as f64 / self.records.len() as f64
            },
        }
    }

    /// SHA-256 over length-prefixed record texts; pins persisted artifacts to
    /// the corpus they were built from.
    pub fn checksum(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.records.len() as u64).to_le_bytes());
        for t in &self.records {
            hasher.update((t.len() as u64).to_le_bytes());
            hasher.update(t.as_bytes());
        }
        hasher.finalize().into()
    }
}

/// Multiset of fixed-length substrings of one string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramSet {
    counts: BTreeMap<String, u32>,
    total: usize,
}

impl GramSet {
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Occurrences of `gram`, counting multiplicity.
    pub fn count(&self, gram: &str) -> u32 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> + '_ {
        self.counts.iter().map(|(g, &c)| (g.as_str(), c))
    }

    /// Size of the multiset intersection with `other`.
    pub fn intersection_size(&self, other: &GramSet) -> usize {
        self.counts
            .iter()
            .map(|(g, &c)| c.min(other.count(g)) as usize)
            .sum()
    }
}

/// Sliding-window grams of length `gram_len`.
///
/// Strings shorter than `gram_len` contribute their whole text as a single
/// gram so that every record stays indexable; the count-filter bound is
/// non-positive for them, which forces verification. The empty string yields
/// an empty set.
pub fn extract_grams(text: &str, gram_len: usize) -> GramSet {
    assert!(gram_len >= 1, "gram_len must be positive");
    let chars: Vec<char> = text.chars().collect();
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut total = 0usize;
    if chars.is_empty() {
        return GramSet { counts, total };
    }
    if chars.len() < gram_len {
        counts.insert(text.to_string(), 1);
        return GramSet { counts, total: 1 };
    }
    for w in chars.windows(gram_len) {
        *counts.entry(w.iter().collect()).or_insert(0) += 1;
        total += 1;
    }
    GramSet { counts, total }
}

/// One posting: a record containing the gram, with its occurrence count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub id: RecordId,
    pub count: u32,
}

/// Gram -> posting-list map over one corpus.
///
/// Posting lists are sorted ascending by record id with no duplicates; a
/// record appears under a gram iff that gram occurs in its text. Occurrence
/// counts ride along so lookups can count multiset intersections.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    gram_len: usize,
    record_count: usize,
    corpus_checksum: [u8; 32],
    postings: BTreeMap<String, Vec<Posting>>,
}

/// How verification treats candidates exactly at the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonRule {
    /// Keep records with `dist <= eps`. Epsilon 0 returns exact matches and
    /// successive increments leave no gap.
    #[default]
    Inclusive,
    /// Keep records with `dist < eps`, matching the strict reading of the
    /// relaxation loop; available for fidelity experiments.
    Exclusive,
}

impl InvertedIndex {
    /// Builds the index over `corpus`; deterministic for a given corpus.
    pub fn build(corpus: &Corpus, gram_len: usize) -> Result<Self> {
        if gram_len == 0 {
            return Err(Error::InvalidParams("gram_len must be positive".into()));
        }
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (id, text) in corpus.iter() {
            for (gram, count) in extract_grams(text, gram_len).iter() {
                postings
                    .entry(gram.to_string())
                    .or_default()
                    .push(Posting { id, count });
            }
        }
        // Record ids arrive in ascending order, so lists are already sorted.
        Ok(InvertedIndex {
            gram_len,
            record_count: corpus.len(),
            corpus_checksum: corpus.checksum(),
            postings,
        })
    }

    pub fn gram_len(&self) -> usize {
        self.gram_len
    }

    pub fn record_count(&self) -> usize {
        self.record_count
    }

    pub fn corpus_checksum(&self) -> &[u8; 32] {
        &self.corpus_checksum
    }

    /// Number of distinct grams indexed.
    pub fn gram_count(&self) -> usize {
        self.postings.len()
    }

    pub fn postings(&self, gram: &str) -> Option<&[Posting]> {
        self.postings.get(gram).map(|v| v.as_slice())
    }

    pub fn iter_postings(&self) -> impl Iterator<Item = (&str, &[Posting])> + '_ {
        self.postings.iter().map(|(g, v)| (g.as_str(), v.as_slice()))
    }

    pub(crate) fn from_parts(
        gram_len: usize,
        record_count: usize,
        corpus_checksum: [u8; 32],
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        InvertedIndex { gram_len, record_count, corpus_checksum, postings }
    }
}

/// Count-filter lower bound on shared grams for strings within `epsilon`.
///
/// `(query_len - gram_len + 1) - gram_len * epsilon`; non-positive values mean
/// the filter is inactive and every record is a candidate.
pub fn min_common_grams(query_len: usize, epsilon: usize, gram_len: usize) -> i64 {
    (query_len as i64 - gram_len as i64 + 1) - (gram_len as i64 * epsilon as i64)
}

/// Records whose multiset gram intersection with the query reaches the
/// count-filter bound, with their shared-gram counts, ascending by id.
///
/// The output is a superset of the `epsilon`-neighborhood of `query` and must
/// be verified; when the bound is non-positive every record is returned.
pub fn candidate_lookup(
    index: &InvertedIndex,
    query: &str,
    epsilon: usize,
) -> Vec<(RecordId, usize)> {
    let query_len = query.chars().count();
    let bound = min_common_grams(query_len, epsilon, index.gram_len());
    let grams = extract_grams(query, index.gram_len());

    let mut shared: HashMap<RecordId, usize> = HashMap::new();
    for (gram, q_count) in grams.iter() {
        if let Some(postings) = index.postings(gram) {
            for p in postings {
                *shared.entry(p.id).or_insert(0) += q_count.min(p.count) as usize;
            }
        }
    }

    let mut out: Vec<(RecordId, usize)> = if bound <= 0 {
        (0..index.record_count() as u32)
            .map(RecordId)
            .map(|id| (id, shared.get(&id).copied().unwrap_or(0)))
            .collect()
    } else {
        shared
            .into_iter()
            .filter(|&(_, count)| count as i64 >= bound)
            .collect()
    };
    out.sort_unstable_by_key(|&(id, _)| id);
    out
}

/// Keeps exactly the candidates within `epsilon` of the query, annotated with
/// their exact distance. Inclusive threshold; see [`verify_candidates_with`].
pub fn verify_candidates(
    corpus: &Corpus,
    query: &str,
    candidates: &[RecordId],
    epsilon: usize,
) -> Vec<(RecordId, usize)> {
    verify_candidates_with(corpus, query, candidates, epsilon, EpsilonRule::Inclusive)
}

/// Verification with an explicit threshold rule.
pub fn verify_candidates_with(
    corpus: &Corpus,
    query: &str,
    candidates: &[RecordId],
    epsilon: usize,
    rule: EpsilonRule,
) -> Vec<(RecordId, usize)> {
    let query_chars: Vec<char> = query.chars().collect();
    let mut out = Vec::new();
    for &id in candidates {
        let text_chars: Vec<char> = corpus.text(id).chars().collect();
        if let Some(dist) = edit_distance_bounded_chars(&query_chars, &text_chars, epsilon) {
            match rule {
                EpsilonRule::Inclusive => out.push((id, dist)),
                EpsilonRule::Exclusive if dist < epsilon => out.push((id, dist)),
                EpsilonRule::Exclusive => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_neighbors;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn extract_grams_windows() {
        let g = extract_grams("abcd", 2);
        assert_eq!(g.total(), 3);
        assert_eq!(g.count("ab"), 1);
        assert_eq!(g.count("bc"), 1);
        assert_eq!(g.count("cd"), 1);
        assert_eq!(g.count("zz"), 0);
    }

    #[test]
    fn extract_grams_multiplicity() {
        let g = extract_grams("aaa", 2);
        assert_eq!(g.total(), 2);
        assert_eq!(g.count("aa"), 2);
    }

    #[test]
    fn extract_grams_short_string() {
        let g = extract_grams("a", 2);
        assert_eq!(g.total(), 1);
        assert_eq!(g.count("a"), 1);
    }

    #[test]
    fn extract_grams_empty() {
        assert!(extract_grams("", 2).is_empty());
    }

    #[test]
    fn gram_length_invariant() {
        for text in ["hello world", "aaaa", "xy"] {
            for q in 1..=3 {
                let g = extract_grams(text, q);
                let n = text.chars().count();
                if n >= q {
                    assert_eq!(g.total(), n - q + 1, "text {text:?} q {q}");
                }
            }
        }
    }

    #[test]
    fn build_index_tiny() {
        let c = corpus(&["ab", "ab"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let post = idx.postings("ab").unwrap();
        assert_eq!(
            post,
            &[
                Posting { id: RecordId(0), count: 1 },
                Posting { id: RecordId(1), count: 1 }
            ]
        );

        let c = corpus(&["abc"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        assert_eq!(idx.postings("ab").unwrap().len(), 1);
        assert_eq!(idx.postings("bc").unwrap().len(), 1);
        assert_eq!(idx.gram_count(), 2);
    }

    #[test]
    fn build_index_rejects_empty_corpus() {
        let c = corpus(&[]);
        assert!(matches!(InvertedIndex::build(&c, 2), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn index_membership_matches_scan_oracle() {
        // Seeded pseudo-random corpus, checked gram by gram against a rescan.
        let mut texts = Vec::new();
        let mut state = 0x9e3779b9u64;
        for _ in 0..1000 {
            let mut s = String::new();
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let len = 1 + (state >> 33) as usize % 12;
            for k in 0..len {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let c = b'a' + ((state >> 29) as u8 ^ k as u8) % 4;
                s.push(c as char);
            }
            texts.push(s);
        }
        let c = Corpus::from_texts(texts);
        let idx = InvertedIndex::build(&c, 2).unwrap();

        for (gram, postings) in idx.iter_postings() {
            // Sorted, duplicate-free ids.
            assert!(postings.windows(2).all(|w| w[0].id < w[1].id));
            for p in postings {
                let g = extract_grams(c.text(p.id), 2);
                assert_eq!(g.count(gram), p.count, "gram {gram:?} record {}", p.id);
                assert!(p.count > 0);
            }
        }
        // Every record's grams appear in the index.
        for (id, text) in c.iter() {
            for (gram, count) in extract_grams(text, 2).iter() {
                let postings = idx.postings(gram).expect("gram missing from index");
                let p = postings.iter().find(|p| p.id == id).expect("record missing");
                assert_eq!(p.count, count);
            }
        }
    }

    #[test]
    fn min_common_examples() {
        assert_eq!(min_common_grams(8, 1, 2), 5);
        assert_eq!(min_common_grams(3, 5, 2), -8);
        // Epsilon 0 requires all of the query's grams to be shared.
        for (len, g) in [(8usize, 2usize), (10, 3), (4, 1)] {
            assert_eq!(min_common_grams(len, 0, g), (len - g + 1) as i64);
        }
    }

    #[test]
    fn candidate_lookup_exact_match() {
        let c = corpus(&["hello", "help", "world"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let out = candidate_lookup(&idx, "hello", 0);
        assert!(out.iter().any(|&(id, _)| id == RecordId(0)));
        // The exact match shares every gram.
        let hit = out.iter().find(|&&(id, _)| id == RecordId(0)).unwrap();
        assert_eq!(hit.1, 4);
    }

    #[test]
    fn candidate_lookup_inactive_filter_returns_all() {
        let c = corpus(&["abc", "zzz", "qqq"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let out = candidate_lookup(&idx, "abc", 10);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].0, RecordId(0));
    }

    #[test]
    fn multiset_intersection_counts_repeats() {
        // "aaaa" vs "aaa": grams {aa,aa,aa} vs {aa,aa} intersect at 2, not 1.
        let c = corpus(&["aaa"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let out = candidate_lookup(&idx, "aaaa", 10);
        assert_eq!(out, vec![(RecordId(0), 2)]);
    }

    #[test]
    fn verify_boundary() {
        let c = corpus(&["abcd", "abxd", "xxxx"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let ids: Vec<RecordId> = candidate_lookup(&idx, "abcd", 1).into_iter().map(|(id, _)| id).collect();
        let kept = verify_candidates(&c, "abcd", &ids, 1);
        assert!(kept.contains(&(RecordId(0), 0)));
        assert!(kept.contains(&(RecordId(1), 1)));
        assert!(!kept.iter().any(|&(id, _)| id == RecordId(2)));

        // A candidate at distance eps + 1 is dropped.
        let all: Vec<RecordId> = c.ids().collect();
        let kept = verify_candidates(&c, "abcd", &all, 0);
        assert_eq!(kept, vec![(RecordId(0), 0)]);

        // Exclusive rule drops the boundary.
        let kept = verify_candidates_with(&c, "abcd", &all, 1, EpsilonRule::Exclusive);
        assert_eq!(kept, vec![(RecordId(0), 0)]);
    }

    #[test]
    fn index_path_equals_brute_force() {
        // Small seeded corpus over a tight alphabet so neighborhoods are rich.
        let mut texts = Vec::new();
        let mut state = 42u64;
        for _ in 0..500 {
            let mut s = String::new();
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let len = 3 + (state >> 33) as usize % 8;
            for _ in 0..len {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                s.push((b'a' + ((state >> 30) as u8) % 3) as char);
            }
            texts.push(s);
        }
        let c = Corpus::from_texts(texts);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        for query in ["abcab", "aa", "bbbbbbb", "cab"] {
            for eps in [0usize, 1, 2, 3, 5] {
                let ids: Vec<RecordId> =
                    candidate_lookup(&idx, query, eps).into_iter().map(|(id, _)| id).collect();
                let mut verified = verify_candidates(&c, query, &ids, eps);
                verified.sort_unstable();
                let mut oracle = brute_force_neighbors(&c, query, eps);
                oracle.sort_unstable();
                assert_eq!(verified, oracle, "query {query:?} eps {eps}");
            }
        }
    }

    #[test]
    fn corpus_stats() {
        let c = corpus(&["ab", "abcd"]);
        let s = c.stats();
        assert_eq!(s.count, 2);
        assert_eq!(s.max_len, 4);
        assert!((s.mean_len - 3.0).abs() < 1e-12);
    }
}
