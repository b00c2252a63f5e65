//! Brute-force reference implementations: the full-scan neighborhood the
//! index path is checked against, and exhaustive subset enumeration for
//! desk-scale quality comparisons.

use crate::error::{Error, Result};
use crate::metrics::{edit_distance_chars, SearchParams};
use crate::qgram::{Corpus, RecordId};
use crate::relax::CandidateSet;

/// Full-scan exact epsilon-neighborhood (inclusive threshold), ascending by
/// record id.
pub fn brute_force_neighbors(
    corpus: &Corpus,
    query: &str,
    epsilon: usize,
) -> Vec<(RecordId, usize)> {
    let query_chars: Vec<char> = query.chars().collect();
    let mut out = Vec::new();
    for (id, text) in corpus.iter() {
        let text_chars: Vec<char> = text.chars().collect();
        let dist = edit_distance_chars(&query_chars, &text_chars);
        if dist <= epsilon {
            out.push((id, dist));
        }
    }
    out
}

/// Largest candidate count the exhaustive subset oracle accepts.
pub const MAX_ORACLE_CANDIDATES: usize = 20;

/// Enumerates every size-`size` subset of the candidates and returns the ids
/// of the F-maximal one with its objective value. Ties go to the subset whose
/// id tuple is lexicographically smallest.
pub fn brute_force_best_subset(
    candidates: &CandidateSet,
    corpus: &Corpus,
    size: usize,
    params: &SearchParams,
) -> Result<(Vec<RecordId>, f64)> {
    let n = candidates.len();
    if n > MAX_ORACLE_CANDIDATES {
        return Err(Error::TooManyCandidates { got: n, max: MAX_ORACLE_CANDIDATES });
    }
    if size == 0 || size > n {
        return Err(Error::InvalidParams(format!(
            "subset size {size} out of range for {n} candidates"
        )));
    }

    // Pairwise distances once; subsets reuse them.
    let chars: Vec<Vec<char>> = candidates
        .members()
        .iter()
        .map(|&(id, _)| corpus.text(id).chars().collect())
        .collect();
    let mut pair = vec![vec![0u64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = edit_distance_chars(&chars[i], &chars[j]) as u64;
            pair[i][j] = d;
            pair[j][i] = d;
        }
    }
    let query_dist: Vec<u64> = candidates.members().iter().map(|&(_, d)| d as u64).collect();

    let f_of = |subset: &[usize]| -> f64 {
        let k = subset.len();
        let sim: u64 = subset.iter().map(|&i| query_dist[i]).sum();
        let sim = sim as f64 / k as f64;
        let div = if k < 2 {
            0.0
        } else {
            let mut total = 0u64;
            for (a, &i) in subset.iter().enumerate() {
                for &j in &subset[a + 1..] {
                    total += pair[i][j];
                }
            }
            2.0 * total as f64 / (k as f64 * (k - 1) as f64)
        };
        params.lambda * div - (1.0 - params.lambda) * sim
    };

    // Lexicographic combination enumeration; strict improvement keeps the
    // lexicographically-first subset among F ties.
    let mut combo: Vec<usize> = (0..size).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let f = f_of(&combo);
        if best.as_ref().map_or(true, |(bf, _)| f > *bf) {
            best = Some((f, combo.clone()));
        }
        // Advance to the next combination.
        let mut i = size;
        loop {
            if i == 0 {
                let (f, idxs) = best.unwrap();
                let ids = idxs.iter().map(|&i| candidates.members()[i].0).collect();
                return Ok((ids, f));
            }
            i -= 1;
            if combo[i] != i + n - size {
                break;
            }
        }
        combo[i] += 1;
        for j in (i + 1)..size {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(texts: &[&str], query: &str) -> (Corpus, CandidateSet) {
        let corpus = Corpus::from_texts(texts.iter().map(|s| s.to_string()).collect());
        let members = corpus
            .iter()
            .map(|(id, t)| (id, crate::metrics::edit_distance(query, t)))
            .collect();
        (corpus, CandidateSet::from_parts(query, members, 0, false))
    }

    #[test]
    fn neighbors_epsilon_zero_and_max() {
        let corpus = Corpus::from_texts(vec!["abc".into(), "abd".into(), "abc".into()]);
        let exact = brute_force_neighbors(&corpus, "abc", 0);
        assert_eq!(exact, vec![(RecordId(0), 0), (RecordId(2), 0)]);
        let all = brute_force_neighbors(&corpus, "abc", 3);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn best_subset_whole_set_and_singleton() {
        let (corpus, cands) = fixture(&["aaa", "aab", "zzzz"], "aaa");
        let p = SearchParams::new(0.5, 1, 3, 0).unwrap();

        let (ids, _) = brute_force_best_subset(&cands, &corpus, 3, &p).unwrap();
        assert_eq!(ids.len(), 3);

        // Size 1: argDiv is 0, so the best singleton minimizes argSim.
        let (ids, f) = brute_force_best_subset(&cands, &corpus, 1, &p).unwrap();
        assert_eq!(ids, vec![RecordId(0)]);
        assert_eq!(f, 0.0);
    }

    #[test]
    fn best_subset_matches_bitmask_enumeration() {
        let texts = ["query", "quarry", "banana", "queue", "kiwi", "melon", "quest", "berry", "apple", "plumb"];
        let (corpus, cands) = fixture(&texts, "query");
        let p = SearchParams::new(0.6, 1, 10, 0).unwrap();
        let (ids, f) = brute_force_best_subset(&cands, &corpus, 4, &p).unwrap();

        // Independent enumeration in bitmask order.
        let n = texts.len();
        let mut best: Option<(f64, Vec<RecordId>)> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() != 4 {
                continue;
            }
            let subset: Vec<RecordId> =
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| RecordId(i as u32)).collect();
            let set = crate::metrics::ResultSet::from_texts(
                "query",
                subset.iter().map(|&id| (id, corpus.text(id).to_string())),
            )
            .unwrap();
            let fv = crate::metrics::objective_f(&set, &p).unwrap();
            let better = match &best {
                None => true,
                Some((bf, bids)) => fv > *bf + 1e-12 || ((fv - bf).abs() <= 1e-12 && subset < *bids),
            };
            if better {
                best = Some((fv, subset));
            }
        }
        let (bf, bids) = best.unwrap();
        assert_eq!(ids, bids);
        assert!((f - bf).abs() < 1e-9);
    }

    #[test]
    fn too_many_candidates_rejected() {
        let texts: Vec<String> = (0..21).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
        let (corpus, cands) = fixture(&refs, "t0");
        let p = SearchParams::default();
        assert!(matches!(
            brute_force_best_subset(&cands, &corpus, 2, &p),
            Err(Error::TooManyCandidates { got: 21, max: 20 })
        ));
    }
}
