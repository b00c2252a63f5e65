//! Benchmark runner: parameter sweeps over the three algorithms, emitting one
//! row per (algorithm, query, parameter point) as CSV plus a JSON twin.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cb2s::{cb2s_search, ClusterModel, ModelConfig};
use crate::cluster::gen_cluster;
use crate::dataset::{load_dataset, perturbed_queries, DatasetSpec};
use crate::error::Result;
use crate::greedy::gen_greedy;
use crate::metrics::SearchParams;
use crate::oracle::brute_force_neighbors;
use crate::qgram::{candidate_lookup, verify_candidates, Corpus, InvertedIndex};
use crate::SearchOutcome;

/// Which search algorithm a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Greedy,
    Cluster,
    Cb2s,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Greedy => "greedy",
            AlgorithmKind::Cluster => "cluster",
            AlgorithmKind::Cb2s => "cb2s",
        }
    }

    fn needs_index(self) -> bool {
        matches!(self, AlgorithmKind::Greedy | AlgorithmKind::Cluster)
    }
}

/// How benchmark queries are drawn: seeded corpus picks with a few random
/// edits applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub count: usize,
    pub seed: u64,
    pub mutations: usize,
}

impl Default for QuerySpec {
    fn default() -> Self {
        QuerySpec { count: 10, seed: 42, mutations: 3 }
    }
}

/// The parameter point sweeps vary around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultParams {
    pub lambda: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub epsilon0: usize,
    pub sigma: f64,
    pub omega: f64,
    pub gram_len: usize,
}

impl Default for DefaultParams {
    fn default() -> Self {
        let p = SearchParams::default();
        DefaultParams {
            lambda: p.lambda,
            k_min: p.k_min,
            k_max: p.k_max,
            epsilon0: p.epsilon0,
            sigma: p.sigma,
            omega: p.omega,
            gram_len: p.gram_len,
        }
    }
}

impl DefaultParams {
    pub fn to_params(&self) -> Result<SearchParams> {
        SearchParams::new(self.lambda, self.k_min, self.k_max, self.epsilon0)?
            .with_sigma(self.sigma)?
            .with_omega(self.omega)?
            .with_gram_len(self.gram_len)
    }
}

fn all_algorithms() -> Vec<AlgorithmKind> {
    vec![AlgorithmKind::Greedy, AlgorithmKind::Cluster, AlgorithmKind::Cb2s]
}

fn default_repeats() -> usize {
    3
}

fn default_true() -> bool {
    true
}

fn default_dataset_label() -> String {
    "dataset".to_string()
}

/// Full benchmark configuration; sweeps are present only when configured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_dataset_label")]
    pub dataset_label: String,
    #[serde(default = "all_algorithms")]
    pub algorithms: Vec<AlgorithmKind>,
    #[serde(default)]
    pub queries: QuerySpec,
    #[serde(default)]
    pub params: DefaultParams,
    #[serde(default)]
    pub lambda_sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub k_sweep: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub epsilon_sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub size_sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub index_vs_scan_epsilon: Option<usize>,
    #[serde(default = "default_true")]
    pub result_count_table: bool,
    /// Timing repeats per point; `query_ms` is their median.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Seed for the diversification filter's sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: ModelConfig,
}

/// One benchmark measurement. Quality columns are empty on error rows.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub sweep: String,
    pub algorithm: String,
    pub dataset: String,
    pub data_size: usize,
    pub query_index: usize,
    pub lambda: f64,
    pub epsilon: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub result_count: Option<usize>,
    pub arg_sim: Option<f64>,
    pub arg_div: Option<f64>,
    pub f_value: Option<f64>,
    pub query_ms: Option<f64>,
    pub preprocess_ms: Option<f64>,
    pub exhausted: Option<bool>,
    pub error: Option<String>,
}

/// All rows a benchmark produced.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
}

impl BenchmarkReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        for row in &self.rows {
            csv.serialize(row).map_err(|e| crate::error::Error::Dataset(e.to_string()))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.rows)
            .map_err(|e| crate::error::Error::Dataset(e.to_string()))?;
        Ok(())
    }

    /// Writes `report.csv` and `report.json` under `out_dir`.
    pub fn write_files(&self, out_dir: impl AsRef<Path>) -> Result<()> {
        let dir = out_dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("report.csv"))?)?;
        self.write_json(std::fs::File::create(dir.join("report.json"))?)?;
        Ok(())
    }
}

/// Median of wall-clock samples; even counts average the two middles.
pub fn median_ms(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Prebuilt per-corpus structures with their build times.
struct Prepared {
    index: Option<InvertedIndex>,
    model: Option<ClusterModel>,
    index_ms: f64,
    model_ms: f64,
}

fn prepare(corpus: &Corpus, config: &BenchConfig) -> Result<Prepared> {
    let needs_index = config.algorithms.iter().any(|a| a.needs_index())
        || config.index_vs_scan_epsilon.is_some();
    let needs_model = config.algorithms.contains(&AlgorithmKind::Cb2s);

    let mut prepared = Prepared { index: None, model: None, index_ms: 0.0, model_ms: 0.0 };
    if needs_index {
        let t = Instant::now();
        prepared.index = Some(InvertedIndex::build(corpus, config.params.gram_len)?);
        prepared.index_ms = t.elapsed().as_secs_f64() * 1000.0;
    }
    if needs_model {
        let t = Instant::now();
        prepared.model = Some(ClusterModel::build(corpus, &config.model)?);
        prepared.model_ms = t.elapsed().as_secs_f64() * 1000.0;
    }
    Ok(prepared)
}

fn run_algorithm(
    algo: AlgorithmKind,
    query: &str,
    params: &SearchParams,
    prepared: &Prepared,
    corpus: &Corpus,
    seed: u64,
) -> Result<SearchOutcome> {
    match algo {
        AlgorithmKind::Greedy => {
            gen_greedy(query, params, prepared.index.as_ref().expect("index built"), corpus, seed)
        }
        AlgorithmKind::Cluster => {
            gen_cluster(query, params, prepared.index.as_ref().expect("index built"), corpus)
        }
        AlgorithmKind::Cb2s => {
            cb2s_search(query, params, prepared.model.as_ref().expect("model built"), corpus)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn measure_point(
    rows: &mut Vec<BenchRow>,
    sweep: &str,
    algo: AlgorithmKind,
    queries: &[String],
    params: &SearchParams,
    prepared: &Prepared,
    corpus: &Corpus,
    config: &BenchConfig,
) {
    let preprocess = match algo {
        AlgorithmKind::Cb2s => prepared.model_ms,
        _ => prepared.index_ms,
    };
    for (query_index, query) in queries.iter().enumerate() {
        let mut samples = Vec::with_capacity(config.repeats.max(1));
        let mut outcome: Option<Result<SearchOutcome>> = None;
        for _ in 0..config.repeats.max(1) {
            let t = Instant::now();
            let out = run_algorithm(algo, query, params, prepared, corpus, config.seed);
            samples.push(t.elapsed().as_secs_f64() * 1000.0);
            outcome = Some(out);
        }
        let query_ms = median_ms(&mut samples);
        let mut row = BenchRow {
            sweep: sweep.to_string(),
            algorithm: algo.name().to_string(),
            dataset: config.dataset_label.clone(),
            data_size: corpus.len(),
            query_index,
            lambda: params.lambda,
            epsilon: params.epsilon0,
            k_min: params.k_min,
            k_max: params.k_max,
            result_count: None,
            arg_sim: None,
            arg_div: None,
            f_value: None,
            query_ms: Some(query_ms),
            preprocess_ms: Some(preprocess),
            exhausted: None,
            error: None,
        };
        match outcome.expect("at least one repeat") {
            Ok(out) => {
                row.result_count = Some(out.report.result_count);
                row.arg_sim = Some(out.report.arg_sim);
                row.arg_div = Some(out.report.arg_div);
                row.f_value = Some(out.report.f_value);
                row.exhausted = Some(out.exhausted);
                debug_assert!(
                    (out.report.f_value
                        - (params.lambda * out.report.arg_div
                            - (1.0 - params.lambda) * out.report.arg_sim))
                        .abs()
                        < 1e-9
                );
            }
            Err(e) => {
                row.error = Some(e.to_string());
                row.query_ms = None;
            }
        }
        rows.push(row);
    }
}

/// Runs every configured sweep; per-run failures become error rows instead of
/// aborting the sweep.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchmarkReport> {
    let (corpus, _) = load_dataset(&config.dataset)?;
    let queries = perturbed_queries(
        &corpus,
        config.queries.count,
        config.queries.mutations,
        config.queries.seed,
    );
    let prepared = prepare(&corpus, config)?;
    let base = config.params.to_params()?;
    let mut rows = Vec::new();

    if config.result_count_table {
        for &algo in &config.algorithms {
            measure_point(&mut rows, "result-count", algo, &queries, &base, &prepared, &corpus, config);
        }
    }

    if let Some(grid) = &config.lambda_sweep {
        for &lambda in grid {
            let params = SearchParams { lambda, ..base.clone() };
            for &algo in &config.algorithms {
                measure_point(&mut rows, "lambda", algo, &queries, &params, &prepared, &corpus, config);
            }
        }
    }

    if let Some(grid) = &config.k_sweep {
        for &[k_min, k_max] in grid {
            let params = SearchParams { k_min, k_max, ..base.clone() };
            for &algo in &config.algorithms {
                measure_point(&mut rows, "k", algo, &queries, &params, &prepared, &corpus, config);
            }
        }
    }

    if let Some(grid) = &config.epsilon_sweep {
        for &epsilon0 in grid {
            let params = SearchParams { epsilon0, ..base.clone() };
            for &algo in &config.algorithms {
                measure_point(&mut rows, "epsilon", algo, &queries, &params, &prepared, &corpus, config);
            }
        }
    }

    if let Some(sizes) = &config.size_sweep {
        for &size in sizes {
            let size = size.min(corpus.len());
            let sub = Corpus::from_texts(
                corpus.iter().take(size).map(|(_, t)| t.to_string()).collect(),
            );
            let sub_prepared = prepare(&sub, config)?;
            for &algo in &config.algorithms {
                measure_point(&mut rows, "size", algo, &queries, &base, &sub_prepared, &sub, config);
            }
        }
    }

    if let Some(epsilon) = config.index_vs_scan_epsilon {
        let index = prepared.index.as_ref().expect("index built for index-vs-scan");
        for (query_index, query) in queries.iter().enumerate() {
            let mut indexed = Vec::new();
            let mut scan = Vec::new();
            let mut indexed_count = 0usize;
            let mut scan_count = 0usize;
            for _ in 0..config.repeats.max(1) {
                let t = Instant::now();
                let ids: Vec<_> =
                    candidate_lookup(index, query, epsilon).into_iter().map(|(id, _)| id).collect();
                let verified = verify_candidates(&corpus, query, &ids, epsilon);
                indexed.push(t.elapsed().as_secs_f64() * 1000.0);
                indexed_count = verified.len();

                let t = Instant::now();
                let neighbors = brute_force_neighbors(&corpus, query, epsilon);
                scan.push(t.elapsed().as_secs_f64() * 1000.0);
                scan_count = neighbors.len();
            }
            for (algorithm, samples, count) in [
                ("indexed", &mut indexed, indexed_count),
                ("scan", &mut scan, scan_count),
            ] {
                rows.push(BenchRow {
                    sweep: "index-vs-scan".to_string(),
                    algorithm: algorithm.to_string(),
                    dataset: config.dataset_label.clone(),
                    data_size: corpus.len(),
                    query_index,
                    lambda: base.lambda,
                    epsilon,
                    k_min: base.k_min,
                    k_max: base.k_max,
                    result_count: Some(count),
                    arg_sim: None,
                    arg_div: None,
                    f_value: None,
                    query_ms: Some(median_ms(samples)),
                    preprocess_ms: Some(prepared.index_ms),
                    exhausted: None,
                    error: None,
                });
            }
        }
    }

    Ok(BenchmarkReport { rows })
}
