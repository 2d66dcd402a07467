//! `flake`: synthetic data, federated experiments and timing benchmarks.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use flake_core::data::{gen_synthetic, load_csv, write_csv};
use flake_core::experiment::launch::{function_party_main, input_party_main, FunctionPartyArgs, InputPartyArgs, LABEL_COLUMN};
use flake_core::experiment::report::StageRecord;
use flake_core::experiment::{
    emit_report, run_experiment, run_experiment_on, run_scaling_benchmark, run_update_iterations, ExperimentConfig, Mode,
    PartyLauncher, ReportFormat,
};
use flake_core::protocol::session::{DEFAULT_CHUNK_ROWS, DEFAULT_TIMEOUT};
use flake_core::svm::Averaging;
use flake_core::KernelSpec;

#[derive(Parser)]
#[command(name = "flake", version, about = "Federated kernel SVM on masked Gram matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write balanced Gaussian blobs to CSV.
    GenData(GenDataArgs),
    /// Federated and/or naive cross-validated training.
    Run(RunArgs),
    /// Masking, Gram and training times over increasing sample counts.
    BenchScaling(BenchScalingArgs),
    /// Per-round masking and Gram extension times.
    BenchUpdate(BenchUpdateArgs),
    #[command(hide = true)]
    InputParty(InputPartyCmd),
    #[command(hide = true)]
    FunctionParty(FunctionPartyCmd),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    features: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum LauncherKind {
    Processes,
    Threads,
}

/// Overrides on top of the config file (or the defaults).
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config_file: Option<PathBuf>,
    #[arg(long)]
    parties: Option<usize>,
    #[arg(long)]
    samples_per_party: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Masked width (default 2 x features).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelKind>,
    /// Polynomial offset.
    #[arg(long)]
    offset: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    degree_grid: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    sigma_grid: Option<Vec<f64>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_enum)]
    averaging: Option<AveragingKind>,
    /// Skip dividing the Gram matrix by its mean diagonal.
    #[arg(long)]
    raw_gram: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeKind>,
    #[arg(long)]
    chunk_rows: Option<usize>,
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AveragingKind {
    Macro,
    Micro,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeKind {
    Federated,
    Naive,
    Both,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config_file {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { c.$field = v; })* };
        }
        set!(parties, samples_per_party, features, classes, c_grid, degree_grid, sigma_grid, folds, seed, separation, chunk_rows);
        if self.k.is_some() {
            c.k = self.k;
        }
        if let Some(t) = self.timeout {
            c.timeout_s = t;
        }
        if self.raw_gram {
            c.normalize_gram = false;
        }
        if let Some(a) = self.averaging {
            c.averaging = Some(match a {
                AveragingKind::Macro => Averaging::Macro,
                AveragingKind::Micro => Averaging::Micro,
            });
        }
        if let Some(m) = self.mode {
            c.mode = match m {
                ModeKind::Federated => Mode::Federated,
                ModeKind::Naive => Mode::Naive,
                ModeKind::Both => Mode::Both,
            };
        }
        let offset = self.offset.unwrap_or(match c.kernel {
            KernelSpec::Polynomial { offset, .. } => offset,
            _ => 1.0,
        });
        match self.kernel {
            Some(KernelKind::Linear) => c.kernel = KernelSpec::Linear,
            Some(KernelKind::Polynomial) => c.kernel = KernelSpec::Polynomial { offset, degree: 1 },
            Some(KernelKind::Rbf) => c.kernel = KernelSpec::Rbf { sigma: c.sigma_grid.first().copied().unwrap_or(1.0) },
            None => {
                if let KernelSpec::Polynomial { degree, .. } = c.kernel {
                    c.kernel = KernelSpec::Polynomial { offset, degree };
                }
            }
        }
        Ok(c)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Train on this CSV instead of synthetic data; rows are split evenly
    /// across the parties.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = LABEL_COLUMN)]
    label_column: String,
    #[arg(long, value_enum, default_value = "processes")]
    launcher: LauncherKind,
    /// Report file; `.jsonl` selects JSON lines, anything else CSV.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchScalingArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Per-run samples.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-stage mean and standard deviation.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BenchUpdateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Initial samples per party.
    #[arg(long, default_value_t = 1000)]
    start_n: usize,
    /// Samples each party adds per round.
    #[arg(long, default_value_t = 1000)]
    increment: usize,
    #[arg(long, default_value_t = 4)]
    rounds: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InputPartyCmd {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// One CSV per round.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, default_value_t = 0)]
    private_seed: u64,
    #[arg(long, default_value_t = DEFAULT_CHUNK_ROWS)]
    chunk_rows: usize,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FunctionPartyCmd {
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, default_value = "127.0.0.1:0")]
    listen: String,
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT.as_secs_f64())]
    timeout: f64,
    /// Grid spec JSON; training is skipped without it.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = args.config.resolve()?;
    config.output = args.output.or(config.output);
    let launcher = match args.launcher {
        LauncherKind::Threads => PartyLauncher::Threads,
        LauncherKind::Processes => PartyLauncher::Processes { exe: std::env::current_exe()? },
    };
    let report = match &args.data {
        Some(path) => {
            let data = load_csv(path, Some(&args.label_column)).with_context(|| format!("loading {}", path.display()))?;
            let parts = data.partition(config.parties);
            run_experiment_on(&config, &parts, &launcher)?
        }
        None => {
            config.validate()?;
            run_experiment(&config, &launcher)?
        }
    };
    for record in report.records() {
        println!(
            "{:<9}  mean_auc={:.6}  std_auc={:.6}  best_c={}  kernel={}{}  masking={:.6}s  gram={:.6}s  training={:.3}s",
            record.pipeline,
            record.mean_auc,
            record.std_auc,
            record.best_c,
            record.kernel,
            record.degree.map(|d| format!(" p={d}")).or(record.sigma.map(|s| format!(" sigma={s}"))).unwrap_or_default(),
            record.masking_s,
            record.gram_s,
            record.training_s,
        );
    }
    if let Some(d) = report.mean_auc_difference {
        println!("|mean auc difference| = {d:e}");
    }
    if let Some(e) = report.gram_relative_error {
        println!("gram relative error   = {e:e}");
    }
    Ok(())
}

fn cmd_bench_scaling(args: BenchScalingArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let reports = run_scaling_benchmark(&config, &args.sizes, args.repeats)?;
    let stages: Vec<StageRecord> = reports.iter().flat_map(|r| r.stage_records()).collect();
    for s in &stages {
        println!("size={:<6} {:<8} mean={:.6}s std={:.6}s (n={})", s.size, s.stage, s.mean_s, s.std_s, s.repeats);
    }
    if let Some(path) = &args.output {
        let samples: Vec<_> = reports.iter().flat_map(|r| r.samples.clone()).collect();
        emit_report(&samples, path, ReportFormat::from_path(path))?;
    }
    if let Some(path) = &args.summary {
        emit_report(&stages, path, ReportFormat::from_path(path))?;
    }
    Ok(())
}

fn cmd_bench_update(args: BenchUpdateArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let report = run_update_iterations(&config, args.start_n, args.increment, args.rounds)?;
    for r in &report.rounds {
        println!(
            "round={} new_rows={} total_rows={} masking={:.6}s gram={:.6}s recompute_err={:e}",
            r.round, r.new_rows, r.total_rows, r.masking_s, r.gram_s, r.recompute_error
        );
    }
    if let Some(worst) = report.rounds.iter().map(|r| r.recompute_error).reduce(f64::max) {
        if worst > 1e-10 {
            bail!("extended gram deviates from recomputation by {worst:e}");
        }
    }
    if let Some(path) = &args.output {
        emit_report(&report.rounds, path, ReportFormat::from_path(path))?;
    }
    Ok(())
}

fn cmd_input_party(args: InputPartyCmd) -> Result<()> {
    input_party_main(&InputPartyArgs {
        registry: args.registry,
        key: args.key,
        data: args.data,
        label_column: args.label_column,
        seed: args.seed,
        width: args.width,
        private_seed: args.private_seed,
        chunk_rows: args.chunk_rows,
        timeout: Duration::from_secs_f64(args.timeout),
        out: args.out,
    })?;
    Ok(())
}

fn cmd_function_party(args: FunctionPartyCmd) -> Result<()> {
    let fp = FunctionPartyArgs {
        registry: args.registry,
        listen: args.listen,
        rounds: args.rounds,
        timeout: Duration::from_secs_f64(args.timeout),
        grid: args.grid,
        out_dir: args.out,
    };
    function_party_main(&fp, |addr| {
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(stdout, "LISTENING {addr}");
        let _ = stdout.flush();
    })?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_synthetic(a.n, a.features, a.classes, a.separation, a.seed)
            .and_then(|data| write_csv(&data, &a.out))
            .map_err(Into::into),
        Command::Run(a) => cmd_run(a),
        Command::BenchScaling(a) => cmd_bench_scaling(a),
        Command::BenchUpdate(a) => cmd_bench_update(a),
        Command::InputParty(a) => cmd_input_party(a),
        Command::FunctionParty(a) => cmd_function_party(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
