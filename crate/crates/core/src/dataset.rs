//! Dataset ingestion and synthetic corpus generation.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qgram::Corpus;

/// Shape class of a dataset, recorded for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceLabel {
    ConferenceLike,
    ProteinLike,
    MammalLike,
    RandomLike,
}

/// Seeded random-corpus recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub alphabet: String,
    pub seed: u64,
}

/// Where the records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSource {
    Path(PathBuf),
    Generate(RandomSpec),
}

/// How file lines become records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum IngestMode {
    /// One record per non-empty line, verbatim.
    RawLine,
    /// Lowercase, split on whitespace, drop stop tokens, re-join with single
    /// spaces.
    WordMode { stop_tokens: Vec<String> },
}

impl Default for IngestMode {
    fn default() -> Self {
        IngestMode::RawLine
    }
}

/// Default stop tokens for word-mode ingestion.
pub fn default_stop_tokens() -> Vec<String> {
    vec!["the".to_string(), "a".to_string()]
}

/// A dataset description: source, ingestion mode and limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub source: DatasetSource,
    #[serde(default)]
    pub mode: IngestMode,
    /// Records longer than this many chars are rejected and counted.
    #[serde(default = "default_max_record_len")]
    pub max_record_len: usize,
    /// Keep only the first N ingested records; used by size sweeps.
    #[serde(default)]
    pub record_limit: Option<usize>,
    #[serde(default)]
    pub label: Option<ProvenanceLabel>,
}

pub fn default_max_record_len() -> usize {
    4096
}

impl DatasetSpec {
    pub fn from_path(path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            source: DatasetSource::Path(path.into()),
            mode: IngestMode::RawLine,
            max_record_len: default_max_record_len(),
            record_limit: None,
            label: None,
        }
    }

    pub fn from_generator(spec: RandomSpec) -> Self {
        DatasetSpec {
            source: DatasetSource::Generate(spec),
            mode: IngestMode::RawLine,
            max_record_len: default_max_record_len(),
            record_limit: None,
            label: Some(ProvenanceLabel::RandomLike),
        }
    }
}

/// What ingestion did with the input lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestSummary {
    pub loaded: usize,
    pub skipped_blank: usize,
    pub rejected_long: usize,
}

/// Loads a corpus per the spec. Errors on unreadable files and on inputs
/// that yield zero records.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Corpus, IngestSummary)> {
    let mut summary = IngestSummary::default();
    let mut records: Vec<String> = Vec::new();

    let lines: Box<dyn Iterator<Item = std::io::Result<String>>> = match &spec.source {
        DatasetSource::Path(path) => {
            let file = File::open(path)?;
            Box::new(BufReader::new(file).lines())
        }
        DatasetSource::Generate(random) => {
            let corpus = generate_random_dataset(
                random.n,
                random.min_len,
                random.max_len,
                &random.alphabet,
                random.seed,
            )?;
            Box::new(corpus.iter().map(|(_, t)| Ok(t.to_string())).collect::<Vec<_>>().into_iter())
        }
    };

    for line in lines {
        let line = line?;
        if let Some(limit) = spec.record_limit {
            if records.len() >= limit {
                break;
            }
        }
        let record = match &spec.mode {
            IngestMode::RawLine => line,
            IngestMode::WordMode { stop_tokens } => {
                let lowered = line.to_lowercase();
                lowered
                    .split_whitespace()
                    .filter(|w| !stop_tokens.iter().any(|s| s == w))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        if record.is_empty() {
            summary.skipped_blank += 1;
            continue;
        }
        if record.chars().count() > spec.max_record_len {
            summary.rejected_long += 1;
            continue;
        }
        records.push(record);
    }

    if records.is_empty() {
        return Err(Error::Dataset("input yielded zero records".into()));
    }
    summary.loaded = records.len();
    Ok((Corpus::from_texts(records), summary))
}

/// Seeded random corpus: lengths uniform in `[min_len, max_len]`, chars
/// uniform over the alphabet.
pub fn generate_random_dataset(
    n: usize,
    min_len: usize,
    max_len: usize,
    alphabet: &str,
    seed: u64,
) -> Result<Corpus> {
    if min_len > max_len {
        return Err(Error::InvalidParams(format!(
            "min_len ({min_len}) must not exceed max_len ({max_len})"
        )));
    }
    let chars: Vec<char> = alphabet.chars().collect();
    if chars.is_empty() {
        return Err(Error::InvalidParams("alphabet must not be empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(min_len..=max_len);
        let text: String = (0..len).map(|_| chars[rng.gen_range(0..chars.len())]).collect();
        texts.push(text);
    }
    Ok(Corpus::from_texts(texts))
}

/// Queries for benchmarks: seeded corpus picks, each perturbed with a few
/// random single-char edits so relaxation has work to do.
pub fn perturbed_queries(corpus: &Corpus, count: usize, mutations: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(count);
    for _ in 0..count {
        let pick = rng.gen_range(0..corpus.len());
        let mut chars: Vec<char> = corpus.text(crate::qgram::RecordId(pick as u32)).chars().collect();
        for _ in 0..mutations {
            let sub = (b'a' + rng.gen_range(0..26u8)) as char;
            match rng.gen_range(0..3u8) {
                0 if !chars.is_empty() => {
                    let at = rng.gen_range(0..chars.len());
                    chars[at] = sub;
                }
                1 if !chars.is_empty() => {
                    let at = rng.gen_range(0..chars.len());
                    chars.remove(at);
                }
                _ => {
                    let at = rng.gen_range(0..=chars.len());
                    chars.insert(at, sub);
                }
            }
        }
        queries.push(chars.into_iter().collect());
    }
    queries
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn three_line_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpha\nbeta\ngamma").unwrap();
        let spec = DatasetSpec::from_path(f.path());
        let (corpus, summary) = load_dataset(&spec).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.text(crate::qgram::RecordId(0)), "alpha");
        assert_eq!(corpus.text(crate::qgram::RecordId(2)), "gamma");
        assert_eq!(summary.loaded, 3);
    }

    #[test]
    fn blank_lines_skipped() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "alpha\n\nbeta").unwrap();
        let (corpus, summary) = load_dataset(&DatasetSpec::from_path(f.path())).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(summary.skipped_blank, 1);
    }

    #[test]
    fn word_mode_lowercases_and_strips() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "the Cat").unwrap();
        let mut spec = DatasetSpec::from_path(f.path());
        spec.mode = IngestMode::WordMode { stop_tokens: vec!["the".into()] };
        let (corpus, _) = load_dataset(&spec).unwrap();
        assert_eq!(corpus.text(crate::qgram::RecordId(0)), "cat");
    }

    #[test]
    fn ingestion_is_idempotent() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "one\ntwo\nthree\n").unwrap();
        let spec = DatasetSpec::from_path(f.path());
        let (a, _) = load_dataset(&spec).unwrap();
        let (b, _) = load_dataset(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_records_rejected_with_count() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "short\n{}", "x".repeat(50)).unwrap();
        let mut spec = DatasetSpec::from_path(f.path());
        spec.max_record_len = 10;
        let (corpus, summary) = load_dataset(&spec).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(summary.rejected_long, 1);
    }

    #[test]
    fn empty_input_errors() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(
            load_dataset(&DatasetSpec::from_path(f.path())),
            Err(Error::Dataset(_))
        ));
    }

    #[test]
    fn generator_reproducible() {
        let a = generate_random_dataset(50, 5, 15, "abcdef", 9).unwrap();
        let b = generate_random_dataset(50, 5, 15, "abcdef", 9).unwrap();
        assert_eq!(a, b);
        for (_, t) in a.iter() {
            let len = t.chars().count();
            assert!((5..=15).contains(&len));
            assert!(t.chars().all(|c| "abcdef".contains(c)));
        }
    }

    #[test]
    fn generator_zero_records_surfaces_downstream() {
        let corpus = generate_random_dataset(0, 1, 5, "ab", 0).unwrap();
        assert!(corpus.is_empty());
        assert!(crate::qgram::InvertedIndex::build(&corpus, 2).is_err());
    }

    #[test]
    fn generator_validation() {
        assert!(generate_random_dataset(1, 5, 4, "ab", 0).is_err());
        assert!(generate_random_dataset(1, 1, 5, "", 0).is_err());
    }

    #[test]
    fn perturbed_queries_are_seeded() {
        let corpus = generate_random_dataset(30, 10, 20, "abcdefgh", 3).unwrap();
        let a = perturbed_queries(&corpus, 5, 3, 7);
        let b = perturbed_queries(&corpus, 5, 3, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
    }
}
