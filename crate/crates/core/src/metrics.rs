//! Objective function and distance arithmetic shared by every search algorithm.
//!
//! The result quality of a set `S` for a query `q` is
//!
//! ```text
//! F(S, q) = lambda * argDiv(S) - (1 - lambda) * argSim(S, q)
//! ```
//!
//! where `argSim` is the mean edit distance from the query to the members and
//! `argDiv` is the mean pairwise edit distance among the members.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::greedy::DistanceMatrix;
use crate::qgram::RecordId;
use crate::relax::CandidateSet;

/// Unit-cost Levenshtein distance between two strings, computed over chars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_chars(&a, &b)
}

/// Levenshtein distance over pre-collected char slices.
pub fn edit_distance_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // Keep the inner row short.
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };

    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let tmp = row[j + 1];
            let sub = diag + usize::from(ca != cb);
            row[j + 1] = sub.min(tmp + 1).min(row[j] + 1);
            diag = tmp;
        }
    }
    row[b.len()]
}

/// Banded Levenshtein with an early exit.
///
/// Returns `Some(d)` with `d` equal to [`edit_distance`] whenever `d <= bound`,
/// and `None` when the distance exceeds the bound.
pub fn edit_distance_bounded(a: &str, b: &str, bound: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_bounded_chars(&a, &b, bound)
}

/// Banded variant of [`edit_distance_chars`].
pub fn edit_distance_bounded_chars(a: &[char], b: &[char], bound: usize) -> Option<usize> {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let (n, m) = (a.len(), b.len());
    if n - m > bound {
        return None;
    }
    if m == 0 {
        return Some(n); // n <= bound by the check above
    }

    // Cells outside the diagonal band |i - j| > bound can never contribute to a
    // distance <= bound; seed them with a sentinel larger than any real value.
    let inf = bound + 1;
    let mut row: Vec<usize> = (0..=m).map(|j| if j <= bound { j } else { inf }).collect();
    for i in 1..=n {
        let lo = i.saturating_sub(bound).max(1);
        let hi = (i + bound).min(m);
        let mut diag = row[lo - 1];
        row[lo - 1] = if lo == 1 { i.min(inf) } else { inf };
        let mut best = row[lo - 1];
        for j in lo..=hi {
            let tmp = row[j];
            let sub = diag + usize::from(a[i - 1] != b[j - 1]);
            let up = if j == hi && tmp == inf { inf } else { tmp.saturating_add(1) };
            let left = row[j - 1].saturating_add(1);
            row[j] = sub.min(up).min(left).min(inf);
            diag = tmp;
            best = best.min(row[j]);
        }
        if hi < m {
            row[hi + 1] = inf;
        }
        if best > bound {
            return None;
        }
    }
    let d = row[m];
    (d <= bound).then_some(d)
}

/// Every tunable the search pipeline exposes, validated at construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchParams {
    /// Trade-off between diversity and similarity, in `[0, 1]`.
    pub lambda: f64,
    /// Lower bound on the returned result count.
    pub k_min: usize,
    /// Upper bound on the returned result count.
    pub k_max: usize,
    /// Initial edit-distance threshold for query relaxation.
    pub epsilon0: usize,
    /// Prune sampling rate, in `(0, 0.5)`.
    pub sigma: f64,
    /// Prune aggressiveness, in `(0.5, 1)`.
    pub omega: f64,
    /// Gram length for the inverted index.
    pub gram_len: usize,
}

impl SearchParams {
    /// Builds params with the default `sigma` (0.25), `omega` (0.75) and
    /// `gram_len` (2), rejecting out-of-range values.
    pub fn new(lambda: f64, k_min: usize, k_max: usize, epsilon0: usize) -> Result<Self> {
        let p = SearchParams {
            lambda,
            k_min,
            k_max,
            epsilon0,
            sigma: 0.25,
            omega: 0.75,
            gram_len: 2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega(mut self, omega: f64) -> Result<Self> {
        self.omega = omega;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gram_len(mut self, gram_len: usize) -> Result<Self> {
        self.gram_len = gram_len;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParams(format!(
                "lambda must be in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.k_min == 0 {
            return Err(Error::InvalidParams("k_min must be positive".into()));
        }
        if self.k_min > self.k_max {
            return Err(Error::InvalidParams(format!(
                "k_min ({}) must not exceed k_max ({})",
                self.k_min, self.k_max
            )));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 || self.sigma >= 0.5 {
            return Err(Error::InvalidParams(format!(
                "sigma must be in (0, 0.5), got {}",
                self.sigma
            )));
        }
        if !self.omega.is_finite() || self.omega <= 0.5 || self.omega >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "omega must be in (0.5, 1), got {}",
                self.omega
            )));
        }
        if self.gram_len == 0 {
            return Err(Error::InvalidParams("gram_len must be positive".into()));
        }
        Ok(())
    }
}

impl Default for SearchParams {
    /// The benchmark defaults: lambda 0.5, k in [25, 55], epsilon 40.
    fn default() -> Self {
        SearchParams {
            lambda: 0.5,
            k_min: 25,
            k_max: 55,
            epsilon0: 40,
            sigma: 0.25,
            omega: 0.75,
            gram_len: 2,
        }
    }
}

/// One member of a result set, annotated with its distance to the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultMember {
    pub id: RecordId,
    pub text: String,
    pub dist_to_query: usize,
}

/// An ordered, duplicate-free set of query results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultSet {
    query: String,
    members: Vec<ResultMember>,
}

impl ResultSet {
    /// Builds a result set from pre-verified members, rejecting duplicate ids.
    ///
    /// Each member's `dist_to_query` must already be the exact edit distance
    /// to `query`; callers that only hold texts can use
    /// [`ResultSet::from_texts`].
    pub fn from_members(query: impl Into<String>, members: Vec<ResultMember>) -> Result<Self> {
        let query = query.into();
        let mut seen = std::collections::HashSet::with_capacity(members.len());
        for m in &members {
            if !seen.insert(m.id) {
                return Err(Error::DuplicateMember(m.id));
            }
            debug_assert_eq!(m.dist_to_query, edit_distance(&query, &m.text));
        }
        Ok(ResultSet { query, members })
    }

    /// Builds a result set by computing each member's distance to the query.
    pub fn from_texts(
        query: impl Into<String>,
        members: impl IntoIterator<Item = (RecordId, String)>,
    ) -> Result<Self> {
        let query = query.into();
        let members = members
            .into_iter()
            .map(|(id, text)| {
                let dist_to_query = edit_distance(&query, &text);
                ResultMember { id, text, dist_to_query }
            })
            .collect();
        Self::from_members(query, members)
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn members(&self) -> &[ResultMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Mean distance between the query and the members of `s`.
pub fn arg_sim(s: &ResultSet) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySet("arg_sim needs at least one member"));
    }
    let total: usize = s.members.iter().map(|m| m.dist_to_query).sum();
    Ok(total as f64 / s.len() as f64)
}

/// Mean pairwise edit distance over unordered member pairs.
///
/// Sets with fewer than two members have no pairs and score 0.
pub fn arg_div(s: &ResultSet) -> f64 {
    let k = s.len();
    if k < 2 {
        return 0.0;
    }
    let chars: Vec<Vec<char>> = s.members.iter().map(|m| m.text.chars().collect()).collect();
    let mut total: u64 = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            total += edit_distance_chars(&chars[i], &chars[j]) as u64;
        }
    }
    2.0 * total as f64 / (k as f64 * (k - 1) as f64)
}

/// The combined quality objective `lambda * argDiv - (1 - lambda) * argSim`.
pub fn objective_f(s: &ResultSet, params: &SearchParams) -> Result<f64> {
    let sim = arg_sim(s)?;
    let div = arg_div(s);
    Ok(params.lambda * div - (1.0 - params.lambda) * sim)
}

/// A member's summed distance to every other candidate: its marginal
/// diversity value.
///
/// Errors when `t` is not a member of `candidates`. `d` must be the pairwise
/// distance matrix over `candidates` in member order.
pub fn dd_contribution(t: RecordId, candidates: &CandidateSet, d: &DistanceMatrix) -> Result<f64> {
    let pos = candidates
        .members()
        .iter()
        .position(|&(id, _)| id == t)
        .ok_or(Error::MemberNotFound(t))?;
    Ok(d.row_sum(pos) as f64)
}

/// Ceiling of a non-negative product like `(1 + lambda) * k`, nudged so that
/// float noise on an exact integer does not bump the result up.
pub(crate) fn ceil_frac(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Floor counterpart of [`ceil_frac`].
pub(crate) fn floor_frac(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Quality measurements for one result set under one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    pub arg_sim: f64,
    pub arg_div: f64,
    pub f_value: f64,
    pub result_count: usize,
}

impl QualityReport {
    /// Measures `s` under `params`; errors on an empty set.
    pub fn evaluate(s: &ResultSet, params: &SearchParams) -> Result<Self> {
        let sim = arg_sim(s)?;
        let div = arg_div(s);
        Ok(QualityReport {
            arg_sim: sim,
            arg_div: div,
            f_value: params.lambda * div - (1.0 - params.lambda) * sim,
            result_count: s.len(),
        })
    }
}
