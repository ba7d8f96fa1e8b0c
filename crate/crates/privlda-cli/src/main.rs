use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use privlda_cli::commands::{self, OracleOptions};
use privlda_cli::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "privlda",
    about = "LDA training with privacy measurement, local sanitization, and a noise baseline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw bag-of-words file, split train/test, prune the vocabulary.
    Ingest(CommonArgs),
    /// Train a model (mechanism from config/flags; defaults to plain).
    Train(CommonArgs),
    /// Train via local perturbation and server-side reconstruction.
    LpTrain(CommonArgs),
    /// Train the Laplace-noise baseline.
    BaselineTrain(CommonArgs),
    /// Score a serialized model on a test corpus.
    Eval(EvalArgs),
    /// Run one mechanism over a list of privacy values and seeds.
    Sweep(CommonArgs),
    /// Compare the per-sampling bound against the exhaustive partition search.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training corpus in bag-of-words format.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test corpus in bag-of-words format.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Explicit vocabulary file (one word per line).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Stopword file (one word per line), applied during ingest.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Keep only this many of the most frequent word types during ingest.
    #[arg(long)]
    top_v: Option<usize>,
    /// Documents to split off as the test set during ingest.
    #[arg(long)]
    n_test: Option<usize>,
    /// Topic count K.
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Training sweeps.
    #[arg(long)]
    iters: Option<usize>,
    /// Fold-in sweeps per test document during evaluation.
    #[arg(long)]
    fold_in_iters: Option<usize>,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// plain | monitored-word | monitored-doc | lp | laplace
    #[arg(long)]
    mechanism: Option<String>,
    /// Flip probability for the lp mechanism.
    #[arg(long)]
    f: Option<f64>,
    /// Privacy budget (lp: local epsilon; laplace: noise budget).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Monitoring level for monitored mechanisms: word | doc.
    #[arg(long)]
    level: Option<String>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep values (comma separated): flip probabilities for lp, budgets for laplace.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Sweep seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

impl CommonArgs {
    fn resolve(&self, force_mechanism: Option<&str>) -> anyhow::Result<RunConfig> {
        let overrides = Overrides {
            train: self.train.clone(),
            test: self.test.clone(),
            vocab: self.vocab.clone(),
            stopwords: self.stopwords.clone(),
            top_v: self.top_v,
            n_test: self.n_test,
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iters: self.iters,
            fold_in_iters: self.fold_in_iters,
            seed: self.seed,
            mechanism: force_mechanism
                .map(String::from)
                .or_else(|| self.mechanism.clone()),
            f: self.f,
            epsilon: self.epsilon,
            level: self.level.clone(),
            out: self.out.clone(),
            values: self.values.clone(),
            seeds: self.seeds.clone(),
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Serialized model (CSV; its .json metadata sidecar must sit alongside).
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct OracleArgs {
    /// Topics per random instance.
    #[arg(long, default_value_t = 3)]
    topics: usize,
    /// Vocabulary size per random instance.
    #[arg(long, default_value_t = 6)]
    vocab: usize,
    /// Removed token mass (the neighboring-dataset size difference).
    #[arg(long, default_value_t = 2)]
    removed: usize,
    /// Number of random instances to check.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    /// Largest count per matrix entry in random instances.
    #[arg(long, default_value_t = 20)]
    max_count: u32,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file describing one instance instead of random generation.
    #[arg(long)]
    instance: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => {
            let cfg = args.resolve(None)?;
            let artifacts = commands::cmd_ingest(&cfg)?;
            println!("wrote {}", artifacts.stats_json.display());
        }
        Command::Train(args) => {
            let cfg = args.resolve(None)?;
            let artifacts = commands::cmd_train(&cfg)?;
            println!("wrote {}", artifacts.model_csv.display());
        }
        Command::LpTrain(args) => {
            let cfg = args.resolve(Some("lp"))?;
            let artifacts = commands::cmd_train(&cfg)?;
            println!("wrote {}", artifacts.model_csv.display());
        }
        Command::BaselineTrain(args) => {
            let cfg = args.resolve(Some("laplace"))?;
            let artifacts = commands::cmd_train(&cfg)?;
            println!("wrote {}", artifacts.model_csv.display());
        }
        Command::Eval(args) => {
            let cfg = args.common.resolve(None)?;
            let report = commands::cmd_eval(&cfg, &args.model)?;
            println!("wrote {}", report.display());
        }
        Command::Sweep(args) => {
            let cfg = args.resolve(None)?;
            let artifacts = commands::cmd_sweep(&cfg)?;
            println!("wrote {}", artifacts.medians_csv.display());
        }
        Command::Oracle(args) => {
            let opts = OracleOptions {
                topics: args.topics,
                vocab: args.vocab,
                removed: args.removed,
                instances: args.instances,
                max_count: args.max_count,
                alpha: args.alpha,
                beta: args.beta,
                seed: args.seed,
                instance_file: args.instance,
            };
            commands::cmd_oracle(&opts)?;
        }
    }
    Ok(())
}
