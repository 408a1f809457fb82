//! Subcommand implementations. Each writes its outputs under the context's
//! output directory, together with the resolved configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use otfs_core::link::{EqualizerKind, McEstimate};
use otfs_core::net::{
    load_checkpoint, save_checkpoint, Checkpoint, ModelKind, NetConfig, NetworkParams, TrainError, Trainer,
    TrajectorySource,
};
use otfs_core::rng::{stream, stream_index};
use serde::Serialize;

use crate::config::{ExperimentConfig, SchemeName};
use crate::data::{self, TEST_TAG, TRAIN_TAG, VALIDATE_TAG};
use crate::eval::{cell_rows, group_rows, run_cell, scheme_equalizer, scheme_links, CellResult, Link};
use crate::output::{write_csv, write_svg, ResultRow};
use crate::BenchError;

const INIT_TAG: u64 = 0x696e_6974;
const SNR_TAG: u64 = 0x736e_72;
const ZETA_TAG: u64 = 0x7a65_7461;
const TAU_TAG: u64 = 0x7461_75;
const TRADEOFF_TAG: u64 = 0x7472_6164_65;
const CELL_TAG: u64 = 0x6365_6c6c;
/// Cell index used for history-free schemes in the ζ and τ sweeps.
const ONCE: u64 = u64::MAX;

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
    /// Fill the `wall_ms` column.
    pub record_timing: bool,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: PathBuf, workers: usize) -> Self {
        Self { cfg, out, workers: workers.max(1), record_timing: false }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare(&self, stem: &str, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        std::fs::create_dir_all(&self.out).map_err(|e| BenchError::Io(format!("{}: {e}", self.out.display())))?;
        write_text(&self.path(&format!("{stem}.config.toml")), &cfg.resolved_toml())
    }

    fn emit(&self, stem: &str, rows: &[ResultRow], title: &str) -> Result<(), BenchError> {
        write_csv(&self.path(&format!("{stem}.csv")), rows)?;
        write_svg(&self.path(&format!("{stem}.svg")), rows, title)
    }

    fn cell_seed(&self, parts: &[u64]) -> u64 {
        let mut all = vec![self.cfg.seed, CELL_TAG];
        all.extend_from_slice(parts);
        stream_index(&all)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

fn write_records<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a checkpoint and checks it against the configured network.
pub fn load_model(path: &Path, want: &NetConfig) -> Result<NetworkParams, BenchError> {
    let ck = load_checkpoint(path).map_err(|e| match e {
        otfs_core::net::CheckpointError::Mismatch(_) => BenchError::from(e),
        other => BenchError::Io(format!("{}: {other}", path.display())),
    })?;
    ck.ensure_matches(want, None).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    Ok(ck.params)
}

/// `τ_P = (1/γ − 1)·τ_F`.
pub fn precoder_latency(gamma: f64, frame_duration: f64) -> f64 {
    (1.0 / gamma - 1.0) * frame_duration
}

fn test_records(cfg: &ExperimentConfig, frames: usize) -> Vec<otfs_core::channel::PathTrajectory> {
    data::generate_records(&cfg.channel_config(), cfg.data.test_sequences, frames, cfg.seed, TEST_TAG)
}

fn needs_model(schemes: &[SchemeName], s: SchemeName, have: bool, flag: &str) -> Result<(), BenchError> {
    if schemes.contains(&s) && !have {
        return Err(BenchError::Config(format!("scheme {} needs {flag}", s.as_str())));
    }
    Ok(())
}

// ---------------------------------------------------------------- gen-data

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct GenDataArgs {
    pub split: Split,
    /// Defaults to `data.train_sequences` or `data.test_sequences`.
    pub count: Option<usize>,
    /// Defaults to `τ + 1`.
    pub frames: Option<usize>,
    /// Defaults to `<out>/train.traj` or `<out>/test.traj`.
    pub output: Option<PathBuf>,
}

pub fn gen_data(ctx: &Context, args: &GenDataArgs) -> Result<PathBuf, BenchError> {
    let cfg = &ctx.cfg;
    let (tag, name, count) = match args.split {
        Split::Train => (TRAIN_TAG, "train", cfg.data.train_sequences),
        Split::Test => (TEST_TAG, "test", cfg.data.test_sequences),
    };
    let count = args.count.unwrap_or(count);
    let frames = args.frames.unwrap_or(cfg.data.tau + 1);
    if frames == 0 {
        return Err(BenchError::Config("frames must be positive".into()));
    }
    ctx.prepare(&format!("gen-data-{name}"), cfg)?;
    let file = data::generate_file(&cfg.channel_config(), count, frames, cfg.seed, tag);
    let path = args.output.clone().unwrap_or_else(|| ctx.path(&format!("{name}.traj")));
    data::save(&path, &file)?;
    Ok(path)
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    /// Stored training set; generated from the configuration when absent.
    pub data: Option<PathBuf>,
    pub kind: Option<ModelKind>,
    pub tau: Option<usize>,
    pub gamma: Option<f64>,
    pub max_iters: Option<u64>,
    pub resume: Option<PathBuf>,
    /// Defaults to `<out>/model.ckpt`.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub iterations: u64,
    pub losses: Vec<(u64, f64)>,
    pub validation: Vec<(u64, f64)>,
    pub best_val: f64,
    pub stopped_early: bool,
}

/// Applies the training overrides to a copy of the configuration.
pub fn train_config_for(cfg: &ExperimentConfig, args: &TrainArgs) -> Result<ExperimentConfig, BenchError> {
    let mut c = match args.gamma {
        Some(g) => cfg.with_gamma(g)?,
        None => cfg.clone(),
    };
    if let Some(k) = args.kind {
        c.train.kind = k.name().into();
    }
    if let Some(t) = args.tau {
        c.data.tau = t;
    }
    if let Some(n) = args.max_iters {
        c.train.max_iters = n;
    }
    c.validate()?;
    Ok(c)
}

/// Freshly initialized network for `kind`, as `train` starts from.
pub fn initial_params(cfg: &ExperimentConfig, kind: ModelKind) -> Result<NetworkParams, BenchError> {
    Ok(NetworkParams::init(cfg.net_config(kind), &mut stream(cfg.seed, INIT_TAG))?)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn train(ctx: &Context, args: &TrainArgs) -> Result<TrainSummary, BenchError> {
    let cfg = train_config_for(&ctx.cfg, args)?;
    let kind = cfg.model_kind()?;
    let net = cfg.net_config(kind);
    let tcfg = cfg.train_config()?;
    let checkpoint = args.checkpoint.clone().unwrap_or_else(|| ctx.path("model.ckpt"));
    if let Some(dir) = checkpoint.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::create_dir_all(&ctx.out)?;
    write_text(&sibling(&checkpoint, "config.toml"), &cfg.resolved_toml())?;

    let channel = cfg.channel_config();
    let frames = if kind == ModelKind::Ddcl { cfg.data.tau + 1 } else { 1 };
    let records = match &args.data {
        Some(p) => {
            let f = data::load(p)?;
            data::check_compatible(&f, &channel, frames)?;
            f.records
        }
        None => data::generate_records(&channel, cfg.data.train_sequences, cfg.data.tau + 1, cfg.seed, TRAIN_TAG),
    };
    let source = TrajectorySource { channel: &channel, records: &records, kind, tau: net.tau };

    let mut trainer = match &args.resume {
        Some(p) => {
            let ck = load_checkpoint(p).map_err(|e| BenchError::Io(format!("{}: {e}", p.display())))?;
            ck.ensure_matches(&net, Some(cfg.seed)).map_err(|e| BenchError::Config(format!("{}: {e}", p.display())))?;
            let state = ck
                .into_trainer_state()
                .ok_or_else(|| BenchError::Config(format!("{} holds no optimizer state", p.display())))?;
            Trainer::resume(&source, tcfg, state)?
        }
        None => {
            Trainer::new(&source, tcfg, initial_params(&cfg, kind)?)?
        }
    };

    let mut losses = Vec::new();
    let result = trainer.run(|it, cost| losses.push((it, cost)));
    let resume_path = sibling(&checkpoint, "resume.ckpt");
    write_records(&sibling(&checkpoint, "loss.csv"), &["iteration", "cost"], &losses)?;
    let report = match result {
        Ok(r) => r,
        Err(TrainError::NonFinite { iteration, detail, last_good }) => {
            save_checkpoint(&resume_path, &Checkpoint::resumable(&last_good, cfg.seed))?;
            return Err(BenchError::Numeric(format!(
                "training diverged at iteration {iteration}: {detail}; last good state saved to {}",
                resume_path.display()
            )));
        }
        Err(e) => return Err(e.into()),
    };
    write_records(&sibling(&checkpoint, "validation.csv"), &["iteration", "validation_fer"], &report.validation)?;
    let state = trainer.into_state();
    save_checkpoint(&resume_path, &Checkpoint::resumable(&state, cfg.seed))?;
    save_checkpoint(&checkpoint, &Checkpoint::model(state.best.clone(), cfg.seed, state.iteration))?;
    Ok(TrainSummary {
        checkpoint,
        iterations: state.iteration,
        losses,
        validation: report.validation,
        best_val: state.best_val,
        stopped_early: report.stopped_early,
    })
}

// --------------------------------------------------------------- sweep-snr

/// Learned models for a sweep; unused entries may be `None`.
#[derive(Debug, Clone, Default)]
pub struct Models {
    pub ddcl: Option<NetworkParams>,
    pub baseline: Option<NetworkParams>,
}

impl Models {
    pub fn load(cfg: &ExperimentConfig, ddcl: Option<&Path>, baseline: Option<&Path>) -> Result<Self, BenchError> {
        Ok(Self {
            ddcl: ddcl.map(|p| load_model(p, &cfg.net_config(ModelKind::Ddcl))).transpose()?,
            baseline: baseline.map(|p| load_model(p, &cfg.net_config(ModelKind::Baseline))).transpose()?,
        })
    }

    fn get(&self, s: SchemeName) -> Option<&NetworkParams> {
        match s {
            SchemeName::Ddcl => self.ddcl.as_ref(),
            SchemeName::LowerBound => self.baseline.as_ref(),
            _ => None,
        }
    }

    fn check(&self, schemes: &[SchemeName], ddcl_flag: &str, baseline_flag: &str) -> Result<(), BenchError> {
        needs_model(schemes, SchemeName::Ddcl, self.ddcl.is_some(), ddcl_flag)?;
        needs_model(schemes, SchemeName::LowerBound, self.baseline.is_some(), baseline_flag)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub checkpoint: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    /// Overrides `eval.schemes`.
    pub schemes: Option<Vec<SchemeName>>,
    pub dropping: bool,
    pub dropping_checkpoint: Option<PathBuf>,
    pub dropping_baseline: Option<PathBuf>,
    /// Directory of per-τ or per-K checkpoints (`sweep-tau`, `tradeoff`).
    pub checkpoints: Option<PathBuf>,
}

impl SweepArgs {
    fn schemes(&self, cfg: &ExperimentConfig) -> Result<Vec<SchemeName>, BenchError> {
        match &self.schemes {
            Some(s) => Ok(s.clone()),
            None => cfg.schemes(),
        }
    }
}

fn modulation_name(order: usize) -> String {
    if order == 4 { "qpsk".into() } else { format!("{order}qam") }
}

pub fn sweep_snr(ctx: &Context, args: &SweepArgs) -> Result<Vec<ResultRow>, BenchError> {
    let base = &ctx.cfg;
    let schemes = args.schemes(base)?;
    let mut variants: Vec<(String, ExperimentConfig, Models)> = Vec::new();
    if args.dropping {
        let mn = base.mn();
        for (k, order, ck, bl) in [
            (mn, 4, &args.checkpoint, &args.baseline),
            (mn / 2, 16, &args.dropping_checkpoint, &args.dropping_baseline),
        ] {
            let mut c = base.clone();
            c.system.k = Some(k);
            c.system.p0 = Some(k as f64);
            c.system.modulation = order;
            c.validate()?;
            let models = Models::load(&c, ck.as_deref(), bl.as_deref())?;
            let (fa, fb) = if order == 4 { ("--checkpoint", "--baseline") } else { ("--dropping-checkpoint", "--dropping-baseline") };
            models.check(&schemes, fa, fb)?;
            variants.push((format!("-k{k}-{}", modulation_name(order)), c, models));
        }
    } else {
        let models = Models::load(base, args.checkpoint.as_deref(), args.baseline.as_deref())?;
        models.check(&schemes, "--checkpoint", "--baseline")?;
        variants.push((String::new(), base.clone(), models));
    }
    let stem = if args.dropping { "sweep-snr-dropping" } else { "sweep-snr" };
    ctx.prepare(stem, base)?;
    let records = test_records(base, base.data.tau + 1);
    let trials = base.eval.trials;
    let mut cells = Vec::new();
    for (v, (suffix, cfg, models)) in variants.iter().enumerate() {
        for &s in &schemes {
            let links = scheme_links(s, cfg, &records, models.get(s))?;
            let eq = scheme_equalizer(s, cfg)?;
            let name = format!("{}{suffix}", s.as_str());
            for (j, &snr) in base.system.snr_db.iter().enumerate() {
                let r = run_cell(&links, cfg.noise_var(snr), eq, cfg, trials, ctx.cell_seed(&[SNR_TAG, v as u64, j as u64]), ctx.workers)?;
                cells.push(cell_rows(&name, "snr_db", snr, &r, ctx.record_timing));
            }
        }
    }
    let rows = group_rows(cells);
    ctx.emit(stem, &rows, "FER versus SNR")?;
    Ok(rows)
}

// ------------------------------------------------------- sweep-zeta / -tau

/// Evaluates every history-free scheme once; the rows are repeated for each
/// sweep value.
fn once_cells(
    ctx: &Context,
    cfg: &ExperimentConfig,
    schemes: &[SchemeName],
    records: &[otfs_core::channel::PathTrajectory],
    models: &Models,
    tag: u64,
) -> Result<Vec<(SchemeName, CellResult)>, BenchError> {
    let snr = cfg.eval.fixed_snr_db;
    let mut out = Vec::new();
    for &s in schemes.iter().filter(|s| **s != SchemeName::Ddcl) {
        let links = scheme_links(s, cfg, records, models.get(s))?;
        let r = run_cell(&links, cfg.noise_var(snr), scheme_equalizer(s, cfg)?, cfg, cfg.eval.trials, ctx.cell_seed(&[tag, ONCE]), ctx.workers)?;
        out.push((s, r));
    }
    Ok(out)
}

fn ddcl_cell(ctx: &Context, cfg: &ExperimentConfig, links: &[Link], tag: u64, idx: usize) -> Result<CellResult, BenchError> {
    let snr = cfg.eval.fixed_snr_db;
    run_cell(links, cfg.noise_var(snr), scheme_equalizer(SchemeName::Ddcl, cfg)?, cfg, cfg.eval.trials, ctx.cell_seed(&[tag, idx as u64]), ctx.workers)
}

fn assemble(
    schemes: &[SchemeName],
    once: &[(SchemeName, CellResult)],
    ddcl: &[CellResult],
    sweep: &str,
    xs: &[f64],
    timing: bool,
) -> Vec<ResultRow> {
    let mut cells = Vec::new();
    for &s in schemes {
        for (i, &x) in xs.iter().enumerate() {
            let r = if s == SchemeName::Ddcl { &ddcl[i] } else { &once.iter().find(|(o, _)| *o == s).expect("evaluated").1 };
            cells.push(cell_rows(s.as_str(), sweep, x, r, timing));
        }
    }
    group_rows(cells)
}

pub fn sweep_zeta(ctx: &Context, args: &SweepArgs) -> Result<Vec<ResultRow>, BenchError> {
    let cfg = &ctx.cfg;
    let schemes = args.schemes(cfg)?;
    let models = Models::load(cfg, args.checkpoint.as_deref(), args.baseline.as_deref())?;
    models.check(&schemes, "--checkpoint", "--baseline")?;
    ctx.prepare("sweep-zeta", cfg)?;
    let frames = cfg.data.tau + 1;
    let once = once_cells(ctx, cfg, &schemes, &test_records(cfg, frames), &models, ZETA_TAG)?;
    let mut ddcl = Vec::new();
    if schemes.contains(&SchemeName::Ddcl) {
        for (i, &z) in cfg.eval.zeta_values.iter().enumerate() {
            let mut c = cfg.clone();
            c.channel.zeta = z;
            let links = scheme_links(SchemeName::Ddcl, &c, &test_records(&c, frames), models.ddcl.as_ref())?;
            ddcl.push(ddcl_cell(ctx, &c, &links, ZETA_TAG, i)?);
        }
    }
    let rows = assemble(&schemes, &once, &ddcl, "zeta", &cfg.eval.zeta_values, ctx.record_timing);
    ctx.emit("sweep-zeta", &rows, "FER versus offset range")?;
    Ok(rows)
}

pub fn tau_checkpoint(dir: &Path, tau: usize) -> PathBuf {
    dir.join(format!("ddcl-tau{tau}.ckpt"))
}

pub fn sweep_tau(ctx: &Context, args: &SweepArgs) -> Result<Vec<ResultRow>, BenchError> {
    let cfg = &ctx.cfg;
    let schemes = args.schemes(cfg)?;
    let models = Models::load(cfg, None, args.baseline.as_deref())?;
    needs_model(&schemes, SchemeName::LowerBound, models.baseline.is_some(), "--baseline")?;
    let dir = args.checkpoints.as_deref();
    let mut ddcl_models = Vec::new();
    if schemes.contains(&SchemeName::Ddcl) {
        let dir = dir.ok_or_else(|| BenchError::Config("scheme ddcl needs --checkpoints DIR".into()))?;
        for &t in &cfg.eval.tau_values {
            let mut c = cfg.clone();
            c.data.tau = t;
            ddcl_models.push(load_model(&tau_checkpoint(dir, t), &c.net_config(ModelKind::Ddcl))?);
        }
    }
    ctx.prepare("sweep-tau", cfg)?;
    let tau_max = cfg.eval.tau_values.iter().copied().max().unwrap_or(cfg.data.tau);
    let records = test_records(cfg, tau_max + 1);
    let once = once_cells(ctx, cfg, &schemes, &records, &models, TAU_TAG)?;
    let mut ddcl = Vec::new();
    for (i, m) in ddcl_models.iter().enumerate() {
        let links = scheme_links(SchemeName::Ddcl, cfg, &records, Some(m))?;
        ddcl.push(ddcl_cell(ctx, cfg, &links, TAU_TAG, i)?);
    }
    let xs: Vec<f64> = cfg.eval.tau_values.iter().map(|&t| t as f64).collect();
    let rows = assemble(&schemes, &once, &ddcl, "tau", &xs, ctx.record_timing);
    ctx.emit("sweep-tau", &rows, "FER versus history depth")?;
    Ok(rows)
}

// ---------------------------------------------------------------- tradeoff

pub fn gamma_checkpoint(dir: &Path, kind: ModelKind, k: usize) -> PathBuf {
    dir.join(format!("{}-k{k}.ckpt", kind.name()))
}

#[derive(Debug, Clone, Serialize)]
struct LatencyRow {
    gamma: f64,
    k: usize,
    tau_p_s: f64,
}

pub fn tradeoff(ctx: &Context, args: &SweepArgs) -> Result<Vec<ResultRow>, BenchError> {
    let base = &ctx.cfg;
    let schemes = args.schemes(base)?;
    let mut variants = Vec::new();
    for &g in &base.eval.gamma_values {
        let c = base.with_gamma(g)?;
        let mut models = Models::default();
        for (s, kind) in [(SchemeName::Ddcl, ModelKind::Ddcl), (SchemeName::LowerBound, ModelKind::Baseline)] {
            if schemes.contains(&s) {
                let dir = args.checkpoints.as_deref().ok_or_else(|| {
                    BenchError::Config(format!("scheme {} needs --checkpoints DIR", s.as_str()))
                })?;
                let m = load_model(&gamma_checkpoint(dir, kind, c.k()), &c.net_config(kind))?;
                match s {
                    SchemeName::Ddcl => models.ddcl = Some(m),
                    _ => models.baseline = Some(m),
                }
            }
        }
        variants.push((g, c, models));
    }
    ctx.prepare("tradeoff", base)?;
    let tau_f = base.frame_duration();
    let latency: Vec<LatencyRow> =
        variants.iter().map(|(g, c, _)| LatencyRow { gamma: *g, k: c.k(), tau_p_s: precoder_latency(*g, tau_f) }).collect();
    write_records(&ctx.path("latency.csv"), &["gamma", "k", "tau_p_s"], &latency)?;

    let records = test_records(base, base.data.tau + 1);
    let mut cells = Vec::new();
    for &s in &schemes {
        let mut per_gamma = Vec::new();
        for (g, c, models) in &variants {
            per_gamma.push((precoder_latency(*g, tau_f), c, scheme_links(s, c, &records, models.get(s))?));
        }
        for (j, &snr) in base.eval.tradeoff_snr_db.iter().enumerate() {
            let sweep = format!("tau_p_s@{snr}dB");
            for (gi, (x, c, links)) in per_gamma.iter().enumerate() {
                let seed = ctx.cell_seed(&[TRADEOFF_TAG, gi as u64, j as u64]);
                let r = run_cell(links, c.noise_var(snr), scheme_equalizer(s, c)?, c, c.eval.trials, seed, ctx.workers)?;
                cells.push(cell_rows(s.as_str(), &sweep, *x, &r, ctx.record_timing));
            }
        }
    }
    let rows = group_rows(cells);
    ctx.emit("tradeoff", &rows, "Reliability versus precoder latency")?;
    Ok(rows)
}

// ------------------------------------------------------------ validate-fer

#[derive(Debug, Clone, Default)]
pub struct ValidateArgs {
    /// Test hook: shifts the analytic value of this cell so it must fail.
    pub corrupt_cell: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCell {
    pub cell: usize,
    pub channel: usize,
    pub equalizer: &'static str,
    pub snr_db: f64,
    pub analytic: f64,
    pub mc_fer: f64,
    pub ci_half: f64,
    pub n_trials: u64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub cells: Vec<ValidationCell>,
}

impl ValidationReport {
    pub fn pass_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.pass).count() as f64 / self.cells.len().max(1) as f64
    }

    /// At least 95% of cells within three standard deviations.
    pub fn passed(&self) -> bool {
        self.pass_fraction() >= 0.95
    }
}

/// Analytic FER against Monte Carlo on fixed channels with perfect CSI and
/// the identity precoder. Writes `validate.csv`.
pub fn validate_fer(ctx: &Context, args: &ValidateArgs) -> Result<ValidationReport, BenchError> {
    let cfg = &ctx.cfg;
    ctx.prepare("validate", cfg)?;
    let records = data::generate_records(&cfg.channel_config(), cfg.eval.validate_channels, 1, cfg.seed, VALIDATE_TAG);
    let ch = cfg.channel_config();
    let p = otfs_core::link::Precoder::identity(cfg.mn(), cfg.k(), cfg.p0())?;
    let mut cells = Vec::new();
    for (c, rec) in records.iter().enumerate() {
        let h = rec.materialize(&ch).frames.pop().expect("one frame").h_true;
        let link = [Link { h_true: h.clone(), h_est: h, precoder: p.matrix().clone() }];
        for kind in [EqualizerKind::Zf, EqualizerKind::Mmse] {
            for &snr in &cfg.eval.validate_snr_db {
                let idx = cells.len();
                let r = run_cell(&link, cfg.noise_var(snr), kind, cfg, cfg.eval.trials, ctx.cell_seed(&[VALIDATE_TAG, idx as u64]), ctx.workers)?;
                let mut analytic = r.analytic;
                if args.corrupt_cell == Some(idx) {
                    analytic = if analytic > 0.5 { analytic - 0.4 } else { analytic + 0.4 };
                }
                let est = McEstimate::from_counts(r.errors, r.trials);
                let z = est.z_score(analytic);
                cells.push(ValidationCell {
                    cell: idx,
                    channel: c,
                    equalizer: kind.name(),
                    snr_db: snr,
                    analytic,
                    mc_fer: r.mc_fer,
                    ci_half: r.ci_half,
                    n_trials: r.trials,
                    z,
                    pass: z.abs() <= 3.0,
                });
            }
        }
    }
    write_records(
        &ctx.path("validate.csv"),
        &["cell", "channel", "equalizer", "snr_db", "analytic", "mc_fer", "ci_half", "n_trials", "z", "pass"],
        &cells,
    )?;
    Ok(ValidationReport { cells })
}

// ------------------------------------------------------ inspect-checkpoint

pub fn inspect_checkpoint(path: &Path) -> Result<String, BenchError> {
    let ck = load_checkpoint(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let c = &ck.params.config;
    let mut s = String::new();
    let _ = writeln!(s, "file        {}", path.display());
    let _ = writeln!(s, "kind        {}", c.kind.name());
    let _ = writeln!(s, "grid        M={} N={} K={} tau={}", c.m, c.n, c.k, c.tau);
    let _ = writeln!(s, "hidden      {}", c.hidden);
    let _ = writeln!(s, "modulation  {}", c.modulation);
    let _ = writeln!(s, "p0          {}", c.p0);
    let _ = writeln!(s, "seed        {}", ck.seed);
    let _ = writeln!(s, "iteration   {}", ck.iteration);
    let _ = writeln!(s, "parameters  {}", ck.params.num_parameters());
    match &ck.trainer {
        Some(t) => {
            let _ = writeln!(s, "resumable   yes (adam step {}, best validation {:e})", t.adam.t, t.best_val);
        }
        None => {
            let _ = writeln!(s, "resumable   no");
        }
    }
    for (name, t) in ck.params.names().iter().zip(&ck.params.tensors) {
        let norm = t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let _ = writeln!(s, "  {name:<12} {:<16} l2={norm:.6e}", format!("{:?}", t.shape()));
    }
    Ok(s)
}
