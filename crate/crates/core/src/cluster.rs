//! Alignment-based diversification: build a guide tree over the candidate
//! pool, progressively align the pool into a gap-padded substitution matrix,
//! extract the per-column majority motif, and keep the candidates farthest
//! from it.
//!
//! Alignment scoring is match +1, mismatch 0, gap -1 throughout (a column
//! where both rows hold a placeholder scores 0), for both the pairwise DP and
//! the sum-of-pairs score.

use std::cmp::Reverse;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::greedy::{build_distance_matrix, DistanceMatrix};
use crate::metrics::{
    edit_distance_chars, QualityReport, ResultMember, ResultSet, SearchParams,
};
use crate::qgram::{Corpus, InvertedIndex};
use crate::relax::{relax, CandidateSet};
use crate::SearchOutcome;

const MATCH: i64 = 1;
const MISMATCH: i64 = 0;
const GAP: i64 = -1;

/// Column score between two aligned symbols; `None` is the placeholder.
fn symbol_score(a: Option<char>, b: Option<char>) -> i64 {
    match (a, b) {
        (Some(x), Some(y)) if x == y => MATCH,
        (Some(_), Some(_)) => MISMATCH,
        (None, None) => 0,
        _ => GAP,
    }
}

/// One agglomerative merge step; node ids `0..n_leaves` are leaves and merge
/// `k` creates node `n_leaves + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    /// Branch length between the merged sets at merge time.
    pub distance: f64,
}

/// Agglomerative merge tree over the candidate pool, in merge order.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideTree {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl GuideTree {
    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
}

/// Builds the guide tree by repeatedly joining the pair of sets with minimal
/// branch length; the merged set's distance to the others is the plain
/// average of the two parents' distances.
pub fn build_guide_tree(d: &DistanceMatrix) -> GuideTree {
    let n = d.n();
    let mut dist: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            dist.insert((i, j), d.get(i, j) as f64);
        }
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut next_id = n;

    while nodes.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (a_pos, &a) in nodes.iter().enumerate() {
            for &b in &nodes[a_pos + 1..] {
                let key = (a.min(b), a.max(b));
                let len = dist[&key];
                let better = match best {
                    None => true,
                    Some((bl, ba, bb)) => {
                        len < bl || (len == bl && (a, b) < (ba, bb))
                    }
                };
                if better {
                    best = Some((len, a, b));
                }
            }
        }
        let (len, a, b) = best.expect("at least one pair");
        let z = next_id;
        next_id += 1;
        for &t in &nodes {
            if t == a || t == b {
                continue;
            }
            let da = dist[&(t.min(a), t.max(a))];
            let db = dist[&(t.min(b), t.max(b))];
            dist.insert((t.min(z), t.max(z)), 0.5 * (da + db));
        }
        nodes.retain(|&t| t != a && t != b);
        nodes.push(z);
        merges.push(Merge { left: a, right: b, distance: len });
    }

    GuideTree { n_leaves: n, merges }
}

/// Gap-padded alignment of the candidate texts to a common width.
///
/// Row `i` corresponds to candidate `i`; stripping placeholders from a row
/// recovers the original text exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMatrix {
    rows: Vec<Vec<Option<char>>>,
}

impl SubstitutionMatrix {
    /// Parses rows written with an explicit placeholder char; all rows must
    /// share one width.
    pub fn from_gapped_rows(rows: &[&str], placeholder: char) -> Result<Self> {
        let parsed: Vec<Vec<Option<char>>> = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| if c == placeholder { None } else { Some(c) })
                    .collect()
            })
            .collect();
        if let Some(w) = parsed.first().map(|r: &Vec<_>| r.len()) {
            if parsed.iter().any(|r| r.len() != w) {
                return Err(Error::InvalidParams("rows differ in width".into()));
            }
        }
        Ok(SubstitutionMatrix { rows: parsed })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn rows(&self) -> &[Vec<Option<char>>] {
        &self.rows
    }

    /// Row with placeholders removed: the original candidate text.
    pub fn row_text(&self, i: usize) -> String {
        self.rows[i].iter().flatten().collect()
    }

    /// Row rendered with `-` placeholders.
    pub fn render_row(&self, i: usize) -> String {
        self.rows[i].iter().map(|c| c.unwrap_or('-')).collect()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = Option<char>> + '_ {
        self.rows.iter().map(move |r| r[c])
    }
}

/// A profile: some rows of the eventual matrix, kept aligned to one width.
struct Profile {
    row_ids: Vec<usize>,
    rows: Vec<Vec<Option<char>>>,
}

/// Per-column symbol statistics used by the profile DP.
struct ColStats {
    /// (symbol, count) sorted by symbol.
    counts: Vec<(char, u32)>,
    non_gap: i64,
}

fn col_stats(rows: &[Vec<Option<char>>], col: usize) -> ColStats {
    let mut map: HashMap<char, u32> = HashMap::new();
    let mut non_gap = 0i64;
    for row in rows {
        if let Some(c) = row[col] {
            *map.entry(c).or_insert(0) += 1;
            non_gap += 1;
        }
    }
    let mut counts: Vec<(char, u32)> = map.into_iter().collect();
    counts.sort_unstable();
    ColStats { counts, non_gap }
}

/// Summed pair score between two profile columns: matching symbol pairs score
/// +1, char-vs-gap pairs -1, everything else 0.
fn column_pair_score(a: &ColStats, b: &ColStats, rows_a: i64, rows_b: i64) -> i64 {
    let mut matches = 0i64;
    let (mut i, mut j) = (0, 0);
    while i < a.counts.len() && j < b.counts.len() {
        match a.counts[i].0.cmp(&b.counts[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                matches += a.counts[i].1 as i64 * b.counts[j].1 as i64;
                i += 1;
                j += 1;
            }
        }
    }
    let gaps_a = rows_a - a.non_gap;
    let gaps_b = rows_b - b.non_gap;
    MATCH * matches + GAP * (a.non_gap * gaps_b + gaps_a * b.non_gap)
}

/// Profile-profile global alignment. Scores are summed over row pairs, so the
/// two-single-row case is exactly the pairwise DP; ties prefer diagonal over
/// up over left.
fn align_profiles(a: Profile, b: Profile) -> (Profile, i64) {
    let m = a.rows.first().map_or(0, |r| r.len());
    let n = b.rows.first().map_or(0, |r| r.len());
    let rows_a = a.rows.len() as i64;
    let rows_b = b.rows.len() as i64;

    let a_stats: Vec<ColStats> = (0..m).map(|c| col_stats(&a.rows, c)).collect();
    let b_stats: Vec<ColStats> = (0..n).map(|c| col_stats(&b.rows, c)).collect();
    // Cost of aligning a column against a whole-gap column in the other
    // profile, summed over row pairs.
    let a_gap: Vec<i64> = a_stats.iter().map(|s| GAP * s.non_gap * rows_b).collect();
    let b_gap: Vec<i64> = b_stats.iter().map(|s| GAP * s.non_gap * rows_a).collect();

    let mut score = vec![vec![0i64; n + 1]; m + 1];
    // 0 = diagonal, 1 = up (consume a), 2 = left (consume b).
    let mut trace = vec![vec![0u8; n + 1]; m + 1];
    for i in 1..=m {
        score[i][0] = score[i - 1][0] + a_gap[i - 1];
        trace[i][0] = 1;
    }
    for j in 1..=n {
        score[0][j] = score[0][j - 1] + b_gap[j - 1];
        trace[0][j] = 2;
    }
    for i in 1..=m {
        for j in 1..=n {
            let diag = score[i - 1][j - 1] + column_pair_score(&a_stats[i - 1], &b_stats[j - 1], rows_a, rows_b);
            let up = score[i - 1][j] + a_gap[i - 1];
            let left = score[i][j - 1] + b_gap[j - 1];
            let (best, dir) = if diag >= up && diag >= left {
                (diag, 0)
            } else if up >= left {
                (up, 1)
            } else {
                (left, 2)
            };
            score[i][j] = best;
            trace[i][j] = dir;
        }
    }

    // Traceback into per-output-column sources.
    let mut cols: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        match trace[i][j] {
            0 => {
                cols.push((Some(i - 1), Some(j - 1)));
                i -= 1;
                j -= 1;
            }
            1 => {
                cols.push((Some(i - 1), None));
                i -= 1;
            }
            _ => {
                cols.push((None, Some(j - 1)));
                j -= 1;
            }
        }
    }
    cols.reverse();

    let width = cols.len();
    let mut rows = Vec::with_capacity(a.rows.len() + b.rows.len());
    for row in &a.rows {
        rows.push(cols.iter().map(|&(ca, _)| ca.and_then(|c| row[c])).collect::<Vec<_>>());
    }
    for row in &b.rows {
        rows.push(cols.iter().map(|&(_, cb)| cb.and_then(|c| row[c])).collect::<Vec<_>>());
    }
    debug_assert!(rows.iter().all(|r| r.len() == width));

    let mut row_ids = a.row_ids;
    row_ids.extend(b.row_ids);
    (Profile { row_ids, rows }, score[m][n])
}

/// Global pairwise alignment of two strings under the match/mismatch/gap
/// scoring; returns the aligned rows and the alignment score.
pub fn pairwise_align(a: &str, b: &str) -> (Vec<Option<char>>, Vec<Option<char>>, i64) {
    let pa = Profile { row_ids: vec![0], rows: vec![a.chars().map(Some).collect()] };
    let pb = Profile { row_ids: vec![1], rows: vec![b.chars().map(Some).collect()] };
    let (merged, score) = align_profiles(pa, pb);
    let mut it = merged.rows.into_iter();
    (it.next().unwrap(), it.next().unwrap(), score)
}

/// Renders an aligned row with `-` placeholders.
pub fn render_alignment(row: &[Option<char>]) -> String {
    row.iter().map(|c| c.unwrap_or('-')).collect()
}

/// Aligns the candidate texts in guide-tree merge order.
pub fn progressive_align(tree: &GuideTree, texts: &[&str]) -> SubstitutionMatrix {
    assert_eq!(tree.n_leaves(), texts.len());
    let n = texts.len();
    if n == 0 {
        return SubstitutionMatrix { rows: Vec::new() };
    }
    let mut profiles: HashMap<usize, Profile> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            (i, Profile { row_ids: vec![i], rows: vec![t.chars().map(Some).collect()] })
        })
        .collect();
    for (k, merge) in tree.merges().iter().enumerate() {
        let a = profiles.remove(&merge.left).expect("left profile exists");
        let b = profiles.remove(&merge.right).expect("right profile exists");
        let (merged, _) = align_profiles(a, b);
        profiles.insert(n + k, merged);
    }
    let final_profile = profiles.into_values().next().expect("one profile remains");

    // Restore original candidate order.
    let width = final_profile.rows.first().map_or(0, |r| r.len());
    let mut rows = vec![vec![None; width]; n];
    for (pos, &row_id) in final_profile.row_ids.iter().enumerate() {
        rows[row_id] = final_profile.rows[pos].clone();
    }
    SubstitutionMatrix { rows }
}

/// Sum-of-pairs score over all unordered row pairs of the matrix.
pub fn sp_score(m: &SubstitutionMatrix) -> i64 {
    let rows = m.rows();
    let mut total = 0i64;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            total += pair_row_score(&rows[i], &rows[j]);
        }
    }
    total
}

/// Column-wise score between two aligned rows.
pub fn pair_row_score(a: &[Option<char>], b: &[Option<char>]) -> i64 {
    a.iter().zip(b).map(|(&x, &y)| symbol_score(x, y)).sum()
}

/// One motif column: the winning symbol and its frequency. A `None` symbol
/// means the placeholder won and the column is omitted from the motif text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotifColumn {
    pub column: usize,
    pub symbol: Option<char>,
    pub count: usize,
}

/// The per-column majority string of a substitution matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Motif {
    text: String,
    columns: Vec<MotifColumn>,
}

impl Motif {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn columns(&self) -> &[MotifColumn] {
        &self.columns
    }
}

/// Picks the most frequent symbol per column; the placeholder participates in
/// counting and sorts lowest on ties, and columns it wins are dropped from
/// the motif text.
pub fn build_motif(m: &SubstitutionMatrix) -> Motif {
    let mut text = String::new();
    let mut columns = Vec::with_capacity(m.width());
    for c in 0..m.width() {
        let mut counts: HashMap<Option<char>, usize> = HashMap::new();
        for sym in m.column(c) {
            *counts.entry(sym).or_insert(0) += 1;
        }
        let (&symbol, &count) = counts
            .iter()
            .min_by_key(|&(&sym, &cnt)| (Reverse(cnt), sym))
            .expect("matrix has rows");
        if let Some(ch) = symbol {
            text.push(ch);
        }
        columns.push(MotifColumn { column: c, symbol, count });
    }
    Motif { text, columns }
}

/// Everything the alignment pipeline produces for one candidate pool.
pub struct ClusterPipeline {
    pub tree: GuideTree,
    pub matrix: SubstitutionMatrix,
    pub motif: Motif,
    pub sp_score: i64,
    /// Edit distance from each candidate to the motif text, in member order.
    pub motif_distances: Vec<usize>,
}

/// Runs guide tree, progressive alignment and motif extraction over a pool.
pub fn cluster_pipeline(candidates: &CandidateSet, corpus: &Corpus) -> ClusterPipeline {
    let d = build_distance_matrix(candidates, corpus);
    let texts = candidates.texts(corpus);
    let tree = build_guide_tree(&d);
    let matrix = progressive_align(&tree, &texts);
    let motif = build_motif(&matrix);
    let sp = sp_score(&matrix);
    let motif_chars: Vec<char> = motif.text().chars().collect();
    let motif_distances = texts
        .iter()
        .map(|t| {
            let chars: Vec<char> = t.chars().collect();
            edit_distance_chars(&chars, &motif_chars)
        })
        .collect();
    ClusterPipeline { tree, matrix, motif, sp_score: sp, motif_distances }
}

/// The full pipeline: relaxation, alignment, motif, farthest-from-motif
/// selection.
pub fn gen_cluster(
    query: &str,
    params: &SearchParams,
    index: &InvertedIndex,
    corpus: &Corpus,
) -> Result<SearchOutcome> {
    let candidates = relax(query, params, index, corpus)?;
    if candidates.is_empty() {
        return Err(Error::EmptySet("relaxation produced no candidates"));
    }
    let pipeline = cluster_pipeline(&candidates, corpus);

    let n = candidates.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Farthest from the motif first; ties by lowest record id.
    order.sort_by_key(|&i| (Reverse(pipeline.motif_distances[i]), candidates.members()[i].0));
    let target = (n as f64 / (1.0 + params.lambda))
        .round()
        .max(0.0) as usize;
    let target = target.clamp(params.k_min, params.k_max).min(n);

    let members: Vec<ResultMember> = order
        .into_iter()
        .take(target)
        .map(|i| {
            let (id, dist) = candidates.members()[i];
            ResultMember { id, text: corpus.text(id).to_string(), dist_to_query: dist }
        })
        .collect();
    let result = ResultSet::from_members(query, members)?;
    let report = QualityReport::evaluate(&result, params)?;
    Ok(SearchOutcome {
        exhausted: result.len() < params.k_min,
        epsilon_final: Some(candidates.epsilon_final()),
        sp_score: Some(pipeline.sp_score),
        result,
        report,
    })
}
