use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use linforest::dot::export_dot;
use linforest::oracle::{timing_probe, write_timing_csv, Strategy};
use linforest::presets::ParamOverrides;
use linforest::synth::{gen_train_test, generate, SynthKind, SynthSpec};
use linforest::tree::audit_tree;
use linforest::{Dataset, Error, Forest, HyperParams};

#[derive(Parser)]
#[command(name = "linforest", version, about = "Random forests with ridge-regression leaves")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Cmd {
    /// Train a forest and write it as a .lrf model file.
    Train(TrainArgs),
    /// Write one prediction per input row.
    Predict(PredictArgs),
    /// Report RMSE of a model on a labelled CSV.
    Eval(EvalArgs),
    /// Generate a synthetic design as CSV.
    Synth(SynthArgs),
    /// Time single split sweeps and print a CSV table.
    Bench(BenchArgs),
    /// Render one tree of a model as Graphviz DOT.
    ExportDot(DotArgs),
    /// Summarize the trees of a model.
    Audit(AuditArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Response column.
    #[arg(long)]
    target: String,
    /// Columns to read as categorical.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with hyperparameters; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named set of tuned hyperparameters, e.g. "Step 1024".
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    ntree: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    /// Ridge penalty on leaf slopes.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, conflicts_with = "log_min_split_gain")]
    min_split_gain: Option<f64>,
    /// Natural log of the minimum split gain.
    #[arg(long, allow_negative_numbers = true)]
    log_min_split_gain: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    nodesize_spl: Option<usize>,
    #[arg(long)]
    sample_fraction: Option<f64>,
    #[arg(long)]
    splitratio: Option<f64>,
    /// Grow structure and fit leaves on disjoint row sets.
    #[arg(long)]
    honest: bool,
    /// Numeric columns used in leaf models (default: all numeric columns).
    #[arg(long, value_delimiter = ',')]
    lin: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Args)]
struct Threads {
    /// Worker threads for training and prediction.
    #[arg(long, env = "LINFOREST_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    threads: Threads,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Linear,
    Step,
    Mixed,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    n: usize,
    /// Pieces of the step surface.
    #[arg(long, default_value_t = 50)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write test rows drawn from the same surface.
    #[arg(long, requires = "n_test")]
    test_out: Option<PathBuf>,
    #[arg(long, requires = "test_out")]
    n_test: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchStrategy {
    Fast,
    Exhaustive,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "both")]
    strategy: BenchStrategy,
    /// Node sizes, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    dlin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    tree: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

fn io_fail(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

/// A reader that closed the pipe early (`| head`) is not an error.
fn stdout_fail(e: io::Error) -> Outcome {
    match e.kind() {
        io::ErrorKind::BrokenPipe => Ok(()),
        _ => Err(Failure::Data(format!("stdout: {e}"))),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Train(a) => train(a),
        Cmd::Predict(a) => predict(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Synth(a) => synth(a),
        Cmd::Bench(a) => bench(a),
        Cmd::ExportDot(a) => dot(a),
        Cmd::Audit(a) => audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("linforest: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("linforest: {m}");
            ExitCode::from(1)
        }
    }
}

/// Runs `f` on a pool of `threads` workers, or the default pool.
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Failure::Usage(format!("thread pool: {e}"))),
        None => Ok(f()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn params_for(a: &TrainArgs) -> Result<HyperParams, Failure> {
    let file = match &a.config {
        Some(p) => ParamOverrides::load(p)?,
        None => ParamOverrides::default(),
    };
    let flags = ParamOverrides {
        preset: a.preset.clone(),
        ntree: a.ntree,
        mtry: a.mtry,
        lambda: a.lambda,
        min_split_gain: a.min_split_gain,
        log_min_split_gain: a.log_min_split_gain,
        folds: a.folds,
        nodesize_spl: a.nodesize_spl,
        sample_fraction: a.sample_fraction,
        splitratio: a.splitratio,
        honest: a.honest.then_some(true),
        lin: a.lin.clone(),
        seed: a.seed,
    };
    Ok(file.merge(flags).apply(&HyperParams::default())?)
}

fn train(a: TrainArgs) -> Outcome {
    let params = params_for(&a)?;
    let ds = Dataset::load_csv(&a.data, &a.target, &a.categorical)?;
    params.validate(ds.n_features())?;
    let forest = Forest::train_with_threads(&ds, &params, a.threads.threads)?;
    forest.save(&a.out)?;
    eprintln!(
        "trained {} trees on {} rows x {} features -> {}",
        forest.ntree(),
        ds.n_rows(),
        ds.n_features(),
        a.out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Outcome {
    let forest = Forest::load(&a.model)?;
    let rows = forest.schema.encode_csv(&a.data)?;
    let pred = with_threads(a.threads.threads, || forest.predict_encoded(&rows))??;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "prediction")?;
        for p in &pred {
            writeln!(w, "{p}")?;
        }
        w.flush()
    };
    match &a.out {
        Some(path) => write(&mut create(path)?).map_err(|e| io_fail(path, e)),
        None => write(&mut io::stdout().lock()).or_else(stdout_fail),
    }
}

fn eval(a: EvalArgs) -> Outcome {
    let forest = Forest::load(&a.model)?;
    let ds = Dataset::load_csv(&a.data, &forest.schema.response, &forest.schema.categorical_names())?;
    let m = with_threads(a.threads.threads, || forest.evaluate(&ds))??;
    println!("n,rmse,mse");
    println!("{},{},{}", m.n, m.rmse, m.mse);
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let kind = match a.kind {
        Kind::Linear => SynthKind::Linear,
        Kind::Step => SynthKind::Step { levels: a.levels },
        Kind::Mixed => SynthKind::Mixed { levels: a.levels },
    };
    if a.n == 0 {
        return Err(Failure::Usage("--n must be positive".into()));
    }
    if !matches!(kind, SynthKind::Linear) && !(1..=a.n).contains(&a.levels) {
        return Err(Failure::Usage(format!("--levels must be in [1, {}]", a.n)));
    }
    let spec = SynthSpec { kind, n: a.n, seed: a.seed };
    match (&a.test_out, a.n_test) {
        (Some(test_path), Some(n_test)) => {
            let (train, test) = gen_train_test(&spec, n_test);
            train.save_csv(&a.out)?;
            test.save_csv(test_path)?;
        }
        _ => generate(&spec).0.save_csv(&a.out)?,
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Outcome {
    if a.n.windows(2).any(|w| w[0] >= w[1]) || a.n.contains(&0) {
        return Err(Failure::Usage("--n values must be positive and ascending".into()));
    }
    if a.dlin == 0 {
        return Err(Failure::Usage("--dlin must be positive".into()));
    }
    let strategies: &[Strategy] = match a.strategy {
        BenchStrategy::Fast => &[Strategy::Fast],
        BenchStrategy::Exhaustive => &[Strategy::Exhaustive],
        BenchStrategy::Both => &[Strategy::Fast, Strategy::Exhaustive],
    };
    let rows: Vec<_> = strategies
        .iter()
        .flat_map(|&s| timing_probe(&a.n, a.dlin, s, a.seed))
        .collect();
    match &a.out {
        Some(path) => write_timing_csv(&rows, create(path)?).map_err(|e| io_fail(path, e)),
        None => write_timing_csv(&rows, io::stdout().lock()).or_else(stdout_fail),
    }
}

fn dot(a: DotArgs) -> Outcome {
    let forest = Forest::load(&a.model)?;
    let tree = forest.trees.get(a.tree).ok_or_else(|| {
        Failure::Data(format!("tree index {} out of range (model has {} trees)", a.tree, forest.ntree()))
    })?;
    let text = export_dot(&tree.root, &forest.schema, &forest.lin);
    match &a.out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_fail(path, e)),
        None => io::stdout().write_all(text.as_bytes()).or_else(stdout_fail),
    }
}

fn audit(a: AuditArgs) -> Outcome {
    let forest = Forest::load(&a.model)?;
    let write = |w: &mut dyn Write| -> io::Result<()> {
        writeln!(w, "tree,depth,nodes,leaves,aggregation_rows,fallback_leaves,min_gain")?;
        for (i, t) in forest.trees.iter().enumerate() {
            let s = audit_tree(&t.root);
            let fallback = s.leaves.iter().filter(|l| l.fallback).count();
            let min_gain = s.min_gain.map_or(String::new(), |g| g.to_string());
            writeln!(
                w,
                "{i},{},{},{},{},{fallback},{min_gain}",
                s.depth,
                s.node_count,
                s.leaf_count,
                s.aggregation_rows()
            )?;
        }
        w.flush()
    };
    write(&mut io::stdout().lock()).or_else(stdout_fail)
}
