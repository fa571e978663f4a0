//! The `lse` command line. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use lse_core::autoencoder::{
    train, train_multitask, AutoencoderConfig, AutoencoderModel, Checkpoint, TaskTarget, TrainConfig,
    DEFAULT_LATENT_DIM,
};
use lse_core::data::{join_embeddings, load_csv, vertical_split, Dataset, JoinMode, ScalerParams, Task, VerticalSpec};
use lse_core::downstream::{labels_from, random_search_cv, LearnerSpec, LogisticParams, Metric, Predictions, SearchSpace};
use lse_core::exchange::{read_embedding_file, send, write_embedding_file, Server, DEFAULT_PORT};
use lse_core::gradcheck;
use lse_core::metrics;
use lse_core::numeric::{Activation, Matrix, Rng};
use lse_core::scenario::{emit_report, parse_json_report, run_scenario, ExperimentManifest, ReportFormat};
use lse_core::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lse", version, about = "Latent-space embedding exchange: autoencoders, peer transfer and scenario runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a CSV's feature columns between two peers.
    Split(SplitArgs),
    /// Train an autoencoder on a CSV and save a checkpoint.
    TrainAe(TrainAeArgs),
    /// Encode a CSV with a trained checkpoint into an embedding file.
    Embed(EmbedArgs),
    /// Send or receive embedding files between peers.
    Exchange {
        #[command(subcommand)]
        command: ExchangeCommand,
    },
    /// Join two embedding files by observation ID into one CSV.
    Join(JoinArgs),
    /// Fit a downstream learner on a CSV and save it as JSON.
    TrainDownstream(TrainDownstreamArgs),
    /// Run one scenario from a JSON manifest.
    RunScenario(RunScenarioArgs),
    /// Combine JSON reports into a text, CSV or JSON table.
    Report(ReportArgs),
    /// Verify backpropagation against finite differences on random small networks.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding observation IDs.
    #[arg(long, default_value = "id")]
    id_column: String,
    /// Target column, excluded from the features.
    #[arg(long)]
    target_column: Option<String>,
    #[arg(long, value_enum, default_value = "regression")]
    task: TaskArg,
}

impl InputArgs {
    fn load(&self) -> lse_core::Result<Dataset> {
        load_csv(&self.input, &self.id_column, self.target_column.as_deref(), self.task.into())
    }
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Share of the columns given to peer A (columns shuffled by seed).
    #[arg(long, conflicts_with_all = ["peer_a", "peer_b"])]
    fraction: Option<f64>,
    /// Explicit peer A columns, comma separated.
    #[arg(long, value_delimiter = ',', requires = "peer_b")]
    peer_a: Vec<String>,
    /// Explicit peer B columns, comma separated.
    #[arg(long, value_delimiter = ',', requires = "peer_a")]
    peer_b: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_a: PathBuf,
    #[arg(long)]
    out_b: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputActivationArg {
    Identity,
    Relu,
}

#[derive(Args)]
struct TrainAeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_LATENT_DIM)]
    latent_dim: usize,
    /// Activation of the reconstruction layer.
    #[arg(long, value_enum, default_value = "identity")]
    output_activation: OutputActivationArg,
    /// Add a task head trained on the target column.
    #[arg(long, requires = "target_column")]
    multitask: bool,
    /// Task-loss weight for --multitask.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Checkpoint written by train-ae.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Embedding file to write (LSE1 binary).
    #[arg(long)]
    out: PathBuf,
    /// Source tag stored in the file.
    #[arg(long, default_value = "")]
    tag: String,
    /// Also write the embeddings as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExchangeCommand {
    /// Receive one embedding file and store it in a directory.
    Serve {
        #[arg(long, default_value_t = format!("0.0.0.0:{DEFAULT_PORT}"))]
        bind: String,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Send an embedding file to a listening peer.
    Send {
        #[arg(long)]
        host: String,
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum JoinModeArg {
    Strict,
    Inner,
}

#[derive(Args)]
struct JoinArgs {
    /// Peer A embedding file; its row order is kept.
    #[arg(long)]
    a: PathBuf,
    /// Peer B embedding file.
    #[arg(long)]
    b: PathBuf,
    #[arg(long, value_enum, default_value = "strict")]
    mode: JoinModeArg,
    /// CSV providing a target column to append, matched by ID.
    #[arg(long, requires = "target_column")]
    labels: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    id_column: String,
    #[arg(long)]
    target_column: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Ridge,
    Logistic,
}

#[derive(Args)]
struct TrainDownstreamArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    learner: LearnerArg,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// Tune hyperparameters with randomized-search CV instead.
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = 20)]
    n_samples: usize,
    #[arg(long, default_value_t = 3)]
    n_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fitted model path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Where to write the CV table when --search is given.
    #[arg(long)]
    cv_table: Option<PathBuf>,
}

#[derive(Args)]
struct RunScenarioArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Override the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// report.json files produced by run-scenario.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 50)]
    nets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// The clap definition, for help rendering and tests.
pub fn command() -> clap::Command {
    Cli::command()
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { EXIT_DATA } else { EXIT_RUNTIME })
        }
    }
}

fn dispatch(command: Command) -> lse_core::Result<ExitCode> {
    match command {
        Command::Split(a) => split(a),
        Command::TrainAe(a) => train_ae(a),
        Command::Embed(a) => embed(a),
        Command::Exchange { command } => exchange(command),
        Command::Join(a) => join(a),
        Command::TrainDownstream(a) => train_downstream(a),
        Command::RunScenario(a) => run_manifest(a),
        Command::Report(a) => report(a),
        Command::Gradcheck(a) => return grad(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn split(a: SplitArgs) -> lse_core::Result<()> {
    let ds = a.input.load()?;
    let spec = match a.fraction {
        Some(f) => VerticalSpec::Fraction(f),
        None if !a.peer_a.is_empty() => VerticalSpec::Explicit {
            peer_a: a.peer_a,
            peer_b: a.peer_b,
        },
        None => VerticalSpec::Fraction(0.5),
    };
    let (pa, pb) = vertical_split(&ds, &spec, a.seed)?;
    pa.write_csv(&a.out_a, &a.input.id_column)?;
    pb.write_csv(&a.out_b, &a.input.id_column)?;
    println!("peer A: {} columns -> {}", pa.d(), a.out_a.display());
    println!("peer B: {} columns -> {}", pb.d(), a.out_b.display());
    Ok(())
}

fn train_ae(a: TrainAeArgs) -> lse_core::Result<()> {
    let ds = a.input.load()?;
    let all: Vec<usize> = (0..ds.n()).collect();
    let scaler = ScalerParams::fit(ds.features(), &all)?;
    let x = scaler.transform_matrix(ds.features())?;
    let output = match a.output_activation {
        OutputActivationArg::Relu => Activation::Relu,
        OutputActivationArg::Identity => Activation::Identity,
    };
    let mut cfg = AutoencoderConfig::new(ds.d(), a.latent_dim).with_output_activation(output);
    if a.multitask {
        let classes = match ds.task() {
            Task::Regression => 1,
            Task::Classification => ds.n_classes()?,
        };
        cfg = cfg.with_multitask(ds.task(), classes, a.lambda);
    }
    let mut model = AutoencoderModel::build(cfg, &mut Rng::derive(a.seed, 0))?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.learning_rate,
        seed: Rng::derive(a.seed, 1).next_u64(),
        shuffle: true,
    };
    let history = if a.multitask {
        let y = ds.target().expect("--multitask requires a target column");
        match ds.task() {
            Task::Regression => train_multitask(&mut model, &x, TaskTarget::Regression(y), None, &tc)?,
            Task::Classification => train_multitask(&mut model, &x, TaskTarget::Classes(&labels_from(y)?), None, &tc)?,
        }
    } else {
        train(&mut model, &x, None, &tc)?
    };
    Checkpoint::new(model, ds.feature_names().to_vec(), Some(scaler)).save(&a.out)?;
    println!(
        "trained {} epochs: loss {:.6} -> {:.6}; checkpoint {}",
        history.train.len(),
        history.train.first().copied().unwrap_or(f64::NAN),
        history.train.last().copied().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn embed(a: EmbedArgs) -> lse_core::Result<()> {
    let ckpt = Checkpoint::load(&a.model)?;
    let ds = a.input.load()?.select_features(&ckpt.feature_names)?;
    let x = match &ckpt.scaler {
        Some(s) => s.transform_matrix(ds.features())?,
        None => ds.features().clone(),
    };
    let table = ckpt.model.encode(ds.ids(), &x, &a.tag)?;
    write_embedding_file(&table, &a.out)?;
    if let Some(csv) = &a.csv {
        table.write_csv(csv)?;
    }
    println!("{} x {} embeddings -> {}", table.len(), table.dim(), a.out.display());
    Ok(())
}

fn exchange(command: ExchangeCommand) -> lse_core::Result<()> {
    match command {
        ExchangeCommand::Serve { bind, out_dir } => {
            fs::create_dir_all(&out_dir)?;
            let server = Server::bind(&bind)?;
            println!("listening on {}", server.local_addr()?);
            let got = server.accept_one(&out_dir)?;
            println!("received {} bytes from {} -> {}", got.bytes, got.peer, got.path.display());
        }
        ExchangeCommand::Send { host, port, file } => {
            let s = send((host.as_str(), port), &file)?;
            println!("sent {} bytes in {} chunks ({:.3} s)", s.bytes, s.chunks, s.duration.as_secs_f64());
        }
    }
    Ok(())
}

fn join(a: JoinArgs) -> lse_core::Result<()> {
    let ta = read_embedding_file(&a.a)?;
    let tb = read_embedding_file(&a.b)?;
    let mode = match a.mode {
        JoinModeArg::Strict => JoinMode::Strict,
        JoinModeArg::Inner => JoinMode::Inner,
    };
    let joined = join_embeddings(&ta, &tb, mode)?;
    let mut names: Vec<String> = (0..ta.dim()).map(|i| format!("a_m{i}")).collect();
    names.extend((0..tb.dim()).map(|i| format!("b_m{i}")));
    let mut target = None;
    if let (Some(path), Some(col)) = (&a.labels, &a.target_column) {
        let labels = load_csv(path, &a.id_column, Some(col), Task::Regression)?;
        let y = labels.target().expect("target column requested");
        let index: std::collections::HashMap<&str, f64> =
            labels.ids().iter().map(String::as_str).zip(y.iter().copied()).collect();
        let values = joined
            .ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("id '{id}' has no row in {}", path.display())))
            })
            .collect::<lse_core::Result<Vec<f64>>>()?;
        target = Some((col.clone(), values));
    }
    write_joined(&a.out, &a.id_column, &joined.ids, &names, &joined.features, target.as_ref())?;
    println!("{} rows x {} columns -> {}", joined.ids.len(), names.len(), a.out.display());
    Ok(())
}

fn write_joined(
    path: &Path,
    id_column: &str,
    ids: &[String],
    names: &[String],
    x: &Matrix,
    target: Option<&(String, Vec<f64>)>,
) -> lse_core::Result<()> {
    let mut out = String::from(id_column);
    if let Some((name, _)) = target {
        out.push(',');
        out.push_str(name);
    }
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (r, id) in ids.iter().enumerate() {
        out.push_str(id);
        if let Some((_, y)) = target {
            out.push_str(&format!(",{}", y[r]));
        }
        for v in x.row(r) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn train_downstream(a: TrainDownstreamArgs) -> lse_core::Result<()> {
    let ds = a.input.load()?;
    let y = ds
        .target()
        .ok_or_else(|| Error::InvalidArgument("train-downstream needs --target-column".into()))?;
    let spec = if a.search {
        let (mut space, metric) = match a.learner {
            LearnerArg::Ridge => (SearchSpace::ridge(a.seed), Metric::R2),
            LearnerArg::Logistic => (SearchSpace::logistic(a.seed), Metric::Accuracy),
        };
        space.n_samples = a.n_samples;
        space.n_folds = a.n_folds;
        let out = random_search_cv(ds.features(), y, &space, metric)?;
        if let Some(p) = &a.cv_table {
            fs::write(p, out.table.to_csv_string())?;
        }
        println!("best candidate {} (mean {:.4})", out.best_index, out.table.rows[out.best_index].mean);
        out.best
    } else {
        match a.learner {
            LearnerArg::Ridge => LearnerSpec::ridge(a.l2),
            LearnerArg::Logistic => LearnerSpec::Logistic(LogisticParams {
                learning_rate: a.learning_rate,
                l2: a.l2,
                epochs: a.epochs,
                batch_size: a.batch_size,
                seed: a.seed,
            }),
        }
    };
    let model = spec.fit(ds.features(), y)?;
    match model.predict(ds.features())? {
        Predictions::Regression(p) => println!("train R2 {:.4}", metrics::r2(y, &p)?),
        Predictions::Classification { labels, .. } => {
            let truth = labels_from(y)?;
            let k = truth.iter().chain(&labels).max().map_or(1, |m| m + 1);
            println!("train accuracy {:.2}%", metrics::classification_metrics(&truth, &labels, k)?.accuracy);
        }
    }
    fs::write(&a.out, serde_json::to_string_pretty(&model)?)?;
    Ok(())
}

fn run_manifest(a: RunScenarioArgs) -> lse_core::Result<()> {
    let mut m = ExperimentManifest::load(&a.manifest)?;
    if let Some(seed) = a.seed {
        m.seed = seed;
    }
    let out = run_scenario(&m)?;
    print!("{}", emit_report(std::slice::from_ref(&out.table), a.format.into())?);
    eprintln!("artifacts in {}", out.run_dir.display());
    Ok(())
}

fn report(a: ReportArgs) -> lse_core::Result<()> {
    let mut tables = Vec::new();
    for p in &a.input {
        tables.extend(parse_json_report(&fs::read_to_string(p)?)?);
    }
    let text = emit_report(&tables, a.format.into())?;
    match &a.out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn grad(a: GradcheckArgs) -> lse_core::Result<ExitCode> {
    let r = gradcheck::run_suite(a.nets, a.seed)?;
    let retries: usize = r.nets.iter().map(|n| n.kink_retries).sum();
    println!(
        "{} networks, {} parameters, max relative error {:.3e} ({} kink retries)",
        r.nets.len(),
        r.params_checked,
        r.max_relative_error,
        retries
    );
    if r.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed: tolerance is {:.0e}", gradcheck::TOLERANCE);
        Ok(ExitCode::from(EXIT_RUNTIME))
    }
}
