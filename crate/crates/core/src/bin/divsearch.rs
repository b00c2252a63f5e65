//! Command-line surface: dataset ingestion, index/model persistence, queries
//! and the benchmark runner.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 exhausted corpus
//! (the partial result is still printed).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use divsearch::bench::{run_benchmark, BenchConfig};
use divsearch::cb2s::{cb2s_search, ClusterModel, ModelConfig};
use divsearch::cluster::gen_cluster;
use divsearch::dataset::{
    default_max_record_len, default_stop_tokens, generate_random_dataset, load_dataset,
    DatasetSpec, IngestMode,
};
use divsearch::greedy::gen_greedy;
use divsearch::metrics::SearchParams;
use divsearch::persist::{load_index, load_model, save_index, save_model};
use divsearch::qgram::{Corpus, InvertedIndex};
use divsearch::{Error, SearchOutcome};

#[derive(Parser)]
#[command(name = "divsearch", version, about = "Similarity search with relaxed, diversified results")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inverted-index artifacts.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Cluster-model artifacts.
    Model {
        #[command(subcommand)]
        command: ModelCommand,
    },
    /// Run one query against a dataset.
    Query(QueryArgs),
    /// Run the benchmark sweeps described by a config file.
    Bench(BenchArgs),
    /// Generate a random dataset file.
    GenRandom(GenRandomArgs),
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Build and persist an inverted index.
    Build(IndexBuildArgs),
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Build and persist a cluster model.
    Build(ModelBuildArgs),
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Line-oriented UTF-8 dataset file.
    #[arg(long)]
    dataset: PathBuf,
    /// Lowercase records and strip stop tokens.
    #[arg(long)]
    word_mode: bool,
    /// Stop token for word mode; repeatable. Defaults to "the" and "a".
    #[arg(long = "stop-word")]
    stop_words: Vec<String>,
    /// Reject records longer than this many chars.
    #[arg(long, default_value_t = default_max_record_len())]
    max_record_len: usize,
}

impl DatasetArgs {
    fn to_spec(&self) -> DatasetSpec {
        let mut spec = DatasetSpec::from_path(&self.dataset);
        if self.word_mode {
            let stop_tokens = if self.stop_words.is_empty() {
                default_stop_tokens()
            } else {
                self.stop_words.clone()
            };
            spec.mode = IngestMode::WordMode { stop_tokens };
        }
        spec.max_record_len = self.max_record_len;
        spec
    }

    fn load(&self) -> divsearch::Result<Corpus> {
        let (corpus, summary) = load_dataset(&self.to_spec())?;
        if summary.rejected_long > 0 {
            eprintln!(
                "warning: rejected {} record(s) longer than {} chars",
                summary.rejected_long, self.max_record_len
            );
        }
        Ok(corpus)
    }
}

#[derive(Args)]
struct IndexBuildArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Gram length for the count filter.
    #[arg(long, default_value_t = 2)]
    gram_len: usize,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelBuildArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Feature dimension.
    #[arg(long, default_value_t = 64)]
    dims: usize,
    /// Cluster count; sized from the corpus when omitted.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of records sampled into the KNN training set.
    #[arg(long, default_value_t = 0.05)]
    sample_rate: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Neighbors consulted to classify a query.
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Algo {
    Greedy,
    Cluster,
    Cb2s,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    algo: Algo,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Prebuilt index file (greedy/cluster); built in memory when omitted.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Prebuilt model file (cb2s); built in memory when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// The query string.
    #[arg(long = "q")]
    query: String,
    #[arg(long = "kmin", default_value_t = 25)]
    k_min: usize,
    #[arg(long = "kmax", default_value_t = 55)]
    k_max: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Initial edit-distance threshold for relaxation.
    #[arg(long, default_value_t = 40)]
    epsilon: usize,
    #[arg(long, default_value_t = 0.25)]
    sigma: f64,
    #[arg(long, default_value_t = 0.75)]
    omega: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the result as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON benchmark configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.csv and report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenRandomArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    min_len: usize,
    #[arg(long)]
    max_len: usize,
    #[arg(long, default_value = "abcdefghijklmnopqrstuvwxyz")]
    alphabet: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version are not usage errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad parameters, 2 for data problems.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParams(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> divsearch::Result<ExitCode> {
    match cli.command {
        Command::Index { command: IndexCommand::Build(args) } => {
            let corpus = args.dataset.load()?;
            let index = InvertedIndex::build(&corpus, args.gram_len)?;
            save_index(&index, &args.out)?;
            println!(
                "indexed {} records ({} grams) -> {}",
                corpus.len(),
                index.gram_count(),
                args.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Model { command: ModelCommand::Build(args) } => {
            let corpus = args.dataset.load()?;
            let config = ModelConfig {
                dims: args.dims,
                clusters: args.clusters,
                seed: args.seed,
                max_iters: args.max_iters,
                sample_rate: args.sample_rate,
                knn_k: args.knn_k,
            };
            let model = ClusterModel::build(&corpus, &config)?;
            for &c in model.oversized_clusters() {
                eprintln!("warning: cluster {c} exceeds the 64MB block limit");
            }
            save_model(&model, &args.out)?;
            println!(
                "clustered {} records into {} clusters -> {}",
                corpus.len(),
                model.cluster_count(),
                args.out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Query(args) => run_query(args),
        Command::Bench(args) => {
            let file = std::fs::File::open(&args.config)?;
            let config: BenchConfig = serde_json::from_reader(file)
                .map_err(|e| Error::Dataset(format!("bad bench config: {e}")))?;
            let report = run_benchmark(&config)?;
            report.write_files(&args.out_dir)?;
            println!(
                "wrote {} rows to {}/report.{{csv,json}}",
                report.rows.len(),
                args.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::GenRandom(args) => {
            let corpus =
                generate_random_dataset(args.n, args.min_len, args.max_len, &args.alphabet, args.seed)?;
            let mut out = String::new();
            for (_, text) in corpus.iter() {
                out.push_str(text);
                out.push('\n');
            }
            std::fs::write(&args.out, out)?;
            println!("wrote {} records to {}", corpus.len(), args.out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_query(args: QueryArgs) -> divsearch::Result<ExitCode> {
    let corpus = args.dataset.load()?;
    let params = SearchParams::new(args.lambda, args.k_min, args.k_max, args.epsilon)?
        .with_sigma(args.sigma)?
        .with_omega(args.omega)?;

    let outcome = match args.algo {
        Algo::Greedy | Algo::Cluster => {
            let index = match &args.index {
                Some(path) => load_index(path, &corpus)?,
                None => InvertedIndex::build(&corpus, params.gram_len)?,
            };
            if args.algo == Algo::Greedy {
                gen_greedy(&args.query, &params, &index, &corpus, args.seed)?
            } else {
                gen_cluster(&args.query, &params, &index, &corpus)?
            }
        }
        Algo::Cb2s => {
            let model = match &args.model {
                Some(path) => load_model(path, &corpus)?,
                None => ClusterModel::build(
                    &corpus,
                    &ModelConfig { seed: args.seed, ..Default::default() },
                )?,
            };
            cb2s_search(&args.query, &params, &model, &corpus)?
        }
    };

    print_outcome(&args, &outcome)?;
    Ok(if outcome.exhausted { ExitCode::from(3) } else { ExitCode::SUCCESS })
}

fn print_outcome(args: &QueryArgs, outcome: &SearchOutcome) -> divsearch::Result<()> {
    if args.json {
        let algo = match args.algo {
            Algo::Greedy => "greedy",
            Algo::Cluster => "cluster",
            Algo::Cb2s => "cb2s",
        };
        let value = serde_json::json!({
            "algorithm": algo,
            "query": args.query,
            "result": outcome.result.members(),
            "report": outcome.report,
            "exhausted": outcome.exhausted,
            "epsilon_final": outcome.epsilon_final,
            "sp_score": outcome.sp_score,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
        return Ok(());
    }

    for m in outcome.result.members() {
        println!("{}\t{}\t{}", m.id, m.dist_to_query, m.text);
    }
    let r = &outcome.report;
    println!(
        "# result_count={} arg_sim={:.4} arg_div={:.4} f_value={:.4}",
        r.result_count, r.arg_sim, r.arg_div, r.f_value
    );
    if let Some(eps) = outcome.epsilon_final {
        println!("# epsilon_final={eps}");
    }
    if let Some(sp) = outcome.sp_score {
        println!("# sp_score={sp}");
    }
    if outcome.exhausted {
        println!("# exhausted=true (result below k_min)");
    }
    Ok(())
}
