//! Command-line interface.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otfs_core::net::ModelKind;

use crate::commands::{self, Context, GenDataArgs, Split, SweepArgs, TrainArgs, ValidateArgs};
use crate::config::{ExperimentConfig, SchemeName};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "otfs-bench", version, about = "Experiments for the OTFS delay-Doppler predictive precoder")]
pub struct Cli {
    /// TOML experiment configuration (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Monte Carlo frames per point; overrides the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub trials: Option<u64>,
    /// Fill the wall_ms column. Timings vary from run to run.
    #[arg(long, global = true)]
    pub record_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Ddcl,
    LowerBound,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory dataset.
    GenData {
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        /// Number of trajectories.
        #[arg(long)]
        count: Option<usize>,
        /// Frames per trajectory (default tau + 1).
        #[arg(long)]
        frames: Option<usize>,
        /// Output file (default <out>/<split>.traj).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Train a DDCL network or the true-CSI baseline.
    Train {
        /// Stored training set (generated from the config when omitted).
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        tau: Option<usize>,
        /// Sets K = gamma·MN and P0 = K.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        max_iters: Option<u64>,
        /// Continue from a resumable checkpoint.
        #[arg(long, value_name = "PATH")]
        resume: Option<PathBuf>,
        /// Output checkpoint (default <out>/model.ckpt).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// FER versus SNR.
    SweepSnr {
        #[command(flatten)]
        models: ModelArgs,
        /// Compare K=MN with QPSK against K=MN/2 with 16-QAM.
        #[arg(long)]
        dropping: bool,
        /// DDCL checkpoint for the K=MN/2, 16-QAM system.
        #[arg(long, value_name = "PATH")]
        dropping_checkpoint: Option<PathBuf>,
        /// Baseline checkpoint for the K=MN/2, 16-QAM system.
        #[arg(long, value_name = "PATH")]
        dropping_baseline: Option<PathBuf>,
    },
    /// FER versus the offset range bound.
    SweepZeta {
        #[command(flatten)]
        models: ModelArgs,
    },
    /// FER versus history depth; reads <checkpoints>/ddcl-tau<T>.ckpt.
    SweepTau {
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long, value_name = "DIR")]
        checkpoints: Option<PathBuf>,
    },
    /// FER versus precoder latency; reads <checkpoints>/{ddcl,lower_bound}-k<K>.ckpt.
    Tradeoff {
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        #[arg(long, value_name = "DIR")]
        checkpoints: Option<PathBuf>,
    },
    /// Compare analytic and Monte Carlo FER on fixed channels.
    ValidateFer {
        #[arg(long, hide = true)]
        corrupt_cell: Option<usize>,
    },
    /// Print the contents of a checkpoint.
    InspectCheckpoint { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Comma-separated subset of zf, mmse, ddcl, lower_bound.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// DDCL checkpoint.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// True-CSI baseline checkpoint.
    #[arg(long, value_name = "PATH")]
    pub baseline: Option<PathBuf>,
}

fn parse_schemes(s: &Option<Vec<String>>) -> Result<Option<Vec<SchemeName>>, BenchError> {
    s.as_ref().map(|v| v.iter().map(|x| SchemeName::parse(x.trim())).collect()).transpose()
}

fn sweep_args(m: &ModelArgs) -> Result<SweepArgs, BenchError> {
    Ok(SweepArgs {
        checkpoint: m.checkpoint.clone(),
        baseline: m.baseline.clone(),
        schemes: parse_schemes(&m.schemes)?,
        ..SweepArgs::default()
    })
}

/// Builds the context from the global flags.
pub fn context(cli: &Cli) -> Result<Context, BenchError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.eval.trials = t;
    }
    cfg.validate()?;
    let workers = match cli.workers {
        Some(0) => return Err(BenchError::Config("--workers must be positive".into())),
        Some(w) => w,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let mut ctx = Context::new(cfg, cli.out.clone(), workers);
    ctx.record_timing = cli.record_timing;
    Ok(ctx)
}

fn dispatch(cli: &Cli, ctx: &Context) -> Result<(), BenchError> {
    match &cli.command {
        Command::GenData { split, count, frames, output } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Test => Split::Test,
            };
            let path = commands::gen_data(ctx, &GenDataArgs { split, count: *count, frames: *frames, output: output.clone() })?;
            println!("wrote {}", path.display());
        }
        Command::Train { data, kind, tau, gamma, max_iters, resume, checkpoint } => {
            let args = TrainArgs {
                data: data.clone(),
                kind: kind.map(|k| match k {
                    KindArg::Ddcl => ModelKind::Ddcl,
                    KindArg::LowerBound => ModelKind::Baseline,
                }),
                tau: *tau,
                gamma: *gamma,
                max_iters: *max_iters,
                resume: resume.clone(),
                checkpoint: checkpoint.clone(),
            };
            let s = commands::train(ctx, &args)?;
            let last = s.losses.last().map_or(f64::NAN, |l| l.1);
            println!(
                "trained to iteration {} (last cost {last:.6e}, best validation FER {:.6e}{}); wrote {}",
                s.iterations,
                s.best_val,
                if s.stopped_early { ", stopped early" } else { "" },
                s.checkpoint.display()
            );
        }
        Command::SweepSnr { models, dropping, dropping_checkpoint, dropping_baseline } => {
            let args = SweepArgs {
                dropping: *dropping,
                dropping_checkpoint: dropping_checkpoint.clone(),
                dropping_baseline: dropping_baseline.clone(),
                ..sweep_args(models)?
            };
            let rows = commands::sweep_snr(ctx, &args)?;
            println!("{} rows", rows.len());
        }
        Command::SweepZeta { models } => {
            let rows = commands::sweep_zeta(ctx, &sweep_args(models)?)?;
            println!("{} rows", rows.len());
        }
        Command::SweepTau { models, checkpoints } => {
            let args = SweepArgs { checkpoints: checkpoints.clone(), ..sweep_args(models)? };
            let rows = commands::sweep_tau(ctx, &args)?;
            println!("{} rows", rows.len());
        }
        Command::Tradeoff { schemes, checkpoints } => {
            let args = SweepArgs { checkpoints: checkpoints.clone(), schemes: parse_schemes(schemes)?, ..SweepArgs::default() };
            let rows = commands::tradeoff(ctx, &args)?;
            println!("{} rows", rows.len());
        }
        Command::ValidateFer { corrupt_cell } => {
            let r = commands::validate_fer(ctx, &ValidateArgs { corrupt_cell: *corrupt_cell })?;
            let flagged: Vec<String> = r.cells.iter().filter(|c| !c.pass).map(|c| c.cell.to_string()).collect();
            println!(
                "{}/{} cells within 3 sd ({:.1}%): {}",
                r.cells.len() - flagged.len(),
                r.cells.len(),
                100.0 * r.pass_fraction(),
                if r.passed() { "PASS" } else { "FAIL" }
            );
            if !flagged.is_empty() {
                println!("flagged cells: {}", flagged.join(" "));
            }
        }
        Command::InspectCheckpoint { path } => print!("{}", commands::inspect_checkpoint(path)?),
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = context(&cli).and_then(|ctx| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.workers)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?;
        pool.install(|| dispatch(&cli, &ctx))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("otfs-bench: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::run;

    const TOY: &str = r#"
seed = 5
[system]
m = 4
n = 2
snr_db = [0.0, 10.0]
[channel]
l_max = 2
k_max = 1.0
[data]
train_sequences = 48
test_sequences = 12
tau = 2
[train]
max_iters = 20
eval_every = 5
hidden = 6
batch_size = 8
[eval]
trials = 1000
validate_channels = 2
"#;

    fn bench(dir: &Path, args: &[&str]) -> i32 {
        bench_with(dir, "2", args)
    }

    fn bench_with(dir: &Path, workers: &str, args: &[&str]) -> i32 {
        let config = dir.join("toy.toml");
        std::fs::write(&config, TOY).unwrap();
        let mut all = vec!["otfs-bench", "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--workers", workers];
        all.extend_from_slice(args);
        run(all)
    }

    #[test]
    fn help_and_usage_errors() {
        assert_eq!(run(["otfs-bench", "--help"]), 0);
        assert_eq!(run(["otfs-bench", "no-such-command"]), 2);
        assert_eq!(run(["otfs-bench", "train", "--kind", "resnet"]), 2);
    }

    #[test]
    fn config_errors_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.toml");
        std::fs::write(&bad, "[system]\nmm = 3\n").unwrap();
        assert_eq!(run(["otfs-bench", "--config", bad.to_str().unwrap(), "validate-fer"]), 2);
        std::fs::write(&bad, "[system]\nm = 0\n").unwrap();
        assert_eq!(run(["otfs-bench", "--config", bad.to_str().unwrap(), "validate-fer"]), 2);
        // DDCL requested without a checkpoint
        assert_eq!(bench(dir.path(), &["sweep-snr", "--schemes", "ddcl"]), 2);
        assert_eq!(bench(dir.path(), &["train", "--gamma", "2"]), 2);
    }

    #[test]
    fn io_errors_exit_4() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.ckpt");
        assert_eq!(bench(dir.path(), &["inspect-checkpoint", missing.to_str().unwrap()]), 4);
        assert_eq!(bench(dir.path(), &["sweep-snr", "--checkpoint", missing.to_str().unwrap()]), 4);
        assert_eq!(run(["otfs-bench", "--config", missing.to_str().unwrap(), "validate-fer"]), 4);
    }

    #[test]
    fn gen_data_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.traj"), dir.path().join("b.traj"));
        assert_eq!(bench(dir.path(), &["gen-data", "--count", "7", "--output", a.to_str().unwrap()]), 0);
        assert_eq!(bench_with(dir.path(), "1", &["gen-data", "--count", "7", "--output", b.to_str().unwrap()]), 0);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let file = crate::data::load(&a).unwrap();
        assert_eq!(file.records.len(), 7);
        assert!(file.records.iter().all(|r| r.frames.len() == 3));
        assert!(dir.path().join("gen-data-train.config.toml").exists());
    }

    fn losses(path: &Path) -> Vec<String> {
        std::fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_owned).collect()
    }

    #[test]
    fn resumed_training_matches_unbroken_run() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let ck = |name: &str| d.join(name).to_string_lossy().into_owned();
        assert_eq!(bench(d, &["train", "--checkpoint", &ck("full.ckpt")]), 0);
        assert_eq!(bench(d, &["train", "--max-iters", "10", "--checkpoint", &ck("half.ckpt")]), 0);
        assert_eq!(bench(d, &["train", "--resume", &ck("half.resume.ckpt"), "--checkpoint", &ck("rest.ckpt")]), 0);

        let full = losses(&d.join("full.loss.csv"));
        let mut joined = losses(&d.join("half.loss.csv"));
        assert_eq!(joined.len(), 10);
        joined.extend(losses(&d.join("rest.loss.csv")));
        assert_eq!(full.len(), 20);
        assert_eq!(joined, full);
        assert_eq!(std::fs::read(d.join("full.ckpt")).unwrap(), std::fs::read(d.join("rest.ckpt")).unwrap());
    }

    #[test]
    fn corrupted_cell_is_flagged() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(bench(dir.path(), &["validate-fer", "--corrupt-cell", "3"]), 0);
        let text = std::fs::read_to_string(dir.path().join("validate.csv")).unwrap();
        let mut rows = csv::Reader::from_reader(text.as_bytes());
        let header = rows.headers().unwrap().clone();
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let records: Vec<csv::StringRecord> = rows.records().map(Result::unwrap).collect();
        assert_eq!(records.len(), 2 * 2 * 4);
        let bad = &records[3];
        assert_eq!(&bad[col("cell")], "3");
        assert_eq!(&bad[col("pass")], "false");
        assert!(bad[col("z")].parse::<f64>().unwrap().abs() > 3.0);
    }
}
