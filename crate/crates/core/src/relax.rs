//! Query relaxation: widen the edit-distance threshold until the candidate
//! pool reaches `(1 + lambda) * k_min`, capped at `(1 + lambda) * k_max`.
//!
//! Each round runs the count filter at the current threshold, verifies the
//! survivors, and admits new qualifying records in ascending
//! `(distance, record id)` order. If the floor is still unmet the threshold
//! grows by one and the round repeats.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::metrics::{ceil_frac, edit_distance_chars, floor_frac, SearchParams};
use crate::qgram::{extract_grams, min_common_grams, Corpus, InvertedIndex, RecordId};

/// The relaxed candidate pool: records with their verified distance to the
/// query, in admission order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    query: String,
    members: Vec<(RecordId, usize)>,
    epsilon_final: usize,
    exhausted: bool,
}

impl CandidateSet {
    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn members(&self) -> &[(RecordId, usize)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The threshold at which the search stopped.
    pub fn epsilon_final(&self) -> usize {
        self.epsilon_final
    }

    /// True when the corpus ran out before the pool floor was met.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// Verified distance of a member to the query, if present.
    pub fn distance_of(&self, id: RecordId) -> Option<usize> {
        self.members.iter().find(|&&(m, _)| m == id).map(|&(_, d)| d)
    }

    /// Candidate texts in member order.
    pub fn texts<'c>(&self, corpus: &'c Corpus) -> Vec<&'c str> {
        self.members.iter().map(|&(id, _)| corpus.text(id)).collect()
    }

    /// Test/oracle constructor; members must be unique and pre-verified.
    pub fn from_parts(
        query: impl Into<String>,
        members: Vec<(RecordId, usize)>,
        epsilon_final: usize,
        exhausted: bool,
    ) -> Self {
        CandidateSet { query: query.into(), members, epsilon_final, exhausted }
    }
}

/// Pool bounds derived from the params: floor `ceil((1+lambda)*k_min)` and
/// cap `floor((1+lambda)*k_max)`, lifted to the floor when the two cross.
pub(crate) fn pool_bounds(params: &SearchParams) -> (usize, usize) {
    let floor_target = ceil_frac((1.0 + params.lambda) * params.k_min as f64).max(1);
    let cap = floor_frac((1.0 + params.lambda) * params.k_max as f64).max(floor_target);
    (floor_target, cap)
}

/// Iteratively relaxes `query` over the indexed corpus.
///
/// Starts at `params.epsilon0` and widens by one per round until the pool
/// floor is reached or the cap is hit mid-round. Terminates with
/// `exhausted = true` once the threshold exceeds every possible distance and
/// the corpus still cannot fill the floor.
pub fn relax(
    query: &str,
    params: &SearchParams,
    index: &InvertedIndex,
    corpus: &Corpus,
) -> Result<CandidateSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (floor_target, cap) = pool_bounds(params);
    let query_chars: Vec<char> = query.chars().collect();
    // Once epsilon reaches this bound, every record verifies.
    let guard = query_chars.len().max(corpus.stats().max_len);

    // Shared-gram counts do not depend on epsilon; walk the postings once and
    // re-apply the count-filter bound as the threshold widens.
    let mut shared: Vec<(RecordId, usize)> = {
        let mut counts: HashMap<RecordId, usize> = HashMap::new();
        for (gram, q_count) in extract_grams(query, index.gram_len()).iter() {
            if let Some(postings) = index.postings(gram) {
                for p in postings {
                    *counts.entry(p.id).or_insert(0) += q_count.min(p.count) as usize;
                }
            }
        }
        counts.into_iter().collect()
    };
    shared.sort_unstable();

    let mut epsilon = params.epsilon0;
    let mut members: Vec<(RecordId, usize)> = Vec::new();
    let mut admitted: Vec<bool> = vec![false; corpus.len()];
    // Exact distances are computed once per record and reused across rounds.
    let mut dist_cache: HashMap<RecordId, usize> = HashMap::new();

    loop {
        let bound = min_common_grams(query_chars.len(), epsilon, index.gram_len());
        let mut qualifying: Vec<(usize, RecordId)> = Vec::new();
        let mut consider = |id: RecordId,
                            admitted: &[bool],
                            dist_cache: &mut HashMap<RecordId, usize>,
                            qualifying: &mut Vec<(usize, RecordId)>| {
            if admitted[id.index()] {
                return;
            }
            let dist = *dist_cache.entry(id).or_insert_with(|| {
                let text_chars: Vec<char> = corpus.text(id).chars().collect();
                edit_distance_chars(&query_chars, &text_chars)
            });
            if dist <= epsilon {
                qualifying.push((dist, id));
            }
        };
        if bound <= 0 {
            for id in corpus.ids() {
                consider(id, &admitted, &mut dist_cache, &mut qualifying);
            }
        } else {
            for &(id, count) in &shared {
                if count as i64 >= bound {
                    consider(id, &admitted, &mut dist_cache, &mut qualifying);
                }
            }
        }
        qualifying.sort_unstable();
        let done = |members: Vec<(RecordId, usize)>, exhausted: bool| CandidateSet {
            query: query.to_string(),
            members,
            epsilon_final: epsilon,
            exhausted,
        };
        for (dist, id) in qualifying {
            if members.len() >= cap {
                return Ok(done(members, false));
            }
            admitted[id.index()] = true;
            members.push((id, dist));
        }
        if members.len() >= floor_target {
            return Ok(done(members, false));
        }
        if epsilon >= guard {
            return Ok(done(members, true));
        }
        epsilon += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgram::InvertedIndex;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::from_texts(texts.iter().map(|s| s.to_string()).collect())
    }

    fn params(lambda: f64, k_min: usize, k_max: usize, eps0: usize) -> SearchParams {
        SearchParams::new(lambda, k_min, k_max, eps0).unwrap()
    }

    #[test]
    fn single_round_when_floor_met_at_epsilon0() {
        // Ten strings within distance 1 of the query; floor of 3 at eps0 = 1.
        let texts: Vec<String> = (0..10).map(|i| format!("abcde{}", (b'a' + i) as char)).collect();
        let c = Corpus::from_texts(texts);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let p = params(0.5, 2, 4, 1); // floor ceil(3.0) = 3, cap floor(6.0) = 6
        let out = relax("abcdea", &p, &idx, &c).unwrap();
        assert_eq!(out.epsilon_final(), 1);
        assert!(!out.exhausted());
        assert!(out.len() >= 3 && out.len() <= 6);
        assert!(out.members().iter().all(|&(_, d)| d <= 1));
    }

    #[test]
    fn tiny_corpus_exhausts() {
        let c = corpus(&["aaa", "bbb", "ccc"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let p = params(1.0, 15, 20, 0); // floor 30 is unreachable
        let out = relax("aaa", &p, &idx, &c).unwrap();
        assert!(out.exhausted());
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn exact_match_at_epsilon_zero() {
        let c = corpus(&["target", "other", "another"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let p = params(0.0, 1, 1, 0); // floor 1, cap 1
        let out = relax("target", &p, &idx, &c).unwrap();
        assert_eq!(out.members(), &[(RecordId(0), 0)]);
        assert_eq!(out.epsilon_final(), 0);
        assert!(!out.exhausted());
    }

    #[test]
    fn empty_corpus_errors() {
        let c = corpus(&["x"]);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let empty = corpus(&[]);
        let p = params(0.5, 1, 2, 0);
        assert!(matches!(relax("q", &p, &idx, &empty), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn cap_cut_is_distance_then_id_ordered() {
        // Six records at distance 1; cap of 2 keeps the two lowest ids.
        let texts: Vec<String> = (0..6).map(|i| format!("abc{}", (b'a' + i) as char)).collect();
        let c = Corpus::from_texts(texts);
        let idx = InvertedIndex::build(&c, 2).unwrap();
        let p = params(0.0, 2, 2, 1); // floor 2, cap 2
        let out = relax("abc", &p, &idx, &c).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.members()[0].0, RecordId(0));
        assert_eq!(out.members()[1].0, RecordId(1));
    }

    #[test]
    fn bounds_never_cross() {
        let p = params(0.5, 1, 1, 0);
        let (floor_target, cap) = pool_bounds(&p);
        assert!(cap >= floor_target);
        assert_eq!(floor_target, 2); // ceil(1.5)
        assert_eq!(cap, 2); // floor(1.5) = 1, lifted to the floor target
    }
}
