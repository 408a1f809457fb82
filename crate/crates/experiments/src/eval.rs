//! Per-scheme link construction and FER cells.

use std::time::Instant;

use otfs_core::channel::PathTrajectory;
use otfs_core::linalg::CMatrix;
use otfs_core::link::{analytic_fer, monte_carlo_fer_pooled, EqualizerKind, LinkSimulator, Precoder};
use otfs_core::net::{predict, Example, HistoryTensor, ModelKind, NetworkParams};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SchemeName};
use crate::output::ResultRow;
use crate::BenchError;

/// What one test frame looks like to a scheme.
#[derive(Debug, Clone)]
pub struct Link {
    pub h_true: CMatrix,
    /// Channel the receiver equalizes with.
    pub h_est: CMatrix,
    pub precoder: CMatrix,
}

const PREDICT_CHUNK: usize = 64;

/// Builds the links of `scheme` on the final frame of every record.
///
/// `zf` and `mmse` use `[I_K; 0]` and the estimated channel. `ddcl` predicts
/// from the `τ` previous estimates; `lower_bound` predicts from the true
/// current channel and equalizes with it.
pub fn scheme_links(
    scheme: SchemeName,
    cfg: &ExperimentConfig,
    records: &[PathTrajectory],
    model: Option<&NetworkParams>,
) -> Result<Vec<Link>, BenchError> {
    let channel = cfg.channel_config();
    match scheme {
        SchemeName::Zf | SchemeName::Mmse => {
            let p = Precoder::identity(cfg.mn(), cfg.k(), cfg.p0())?;
            Ok(records
                .par_iter()
                .map(|r| {
                    let t = r.materialize(&channel).frames.pop().expect("record has frames");
                    Link { h_true: t.h_true, h_est: t.h_est, precoder: p.matrix().clone() }
                })
                .collect())
        }
        SchemeName::Ddcl | SchemeName::LowerBound => {
            let params = model.ok_or_else(|| BenchError::Config(format!("scheme {} needs a checkpoint", scheme.as_str())))?;
            let kind = if scheme == SchemeName::Ddcl { ModelKind::Ddcl } else { ModelKind::Baseline };
            let tau = params.config.tau;
            let chunks: Vec<Result<Vec<Link>, BenchError>> = records
                .par_chunks(PREDICT_CHUNK)
                .map(|chunk| {
                    let examples =
                        chunk.iter().map(|r| Example::from_trajectory(r, &channel, kind, tau)).collect::<Result<Vec<_>, _>>()?;
                    let inputs: Vec<&HistoryTensor> = examples.iter().map(|e| &e.input).collect();
                    let ps = predict(params, &inputs, PREDICT_CHUNK)?;
                    Ok(examples
                        .into_iter()
                        .zip(ps)
                        .map(|(e, p)| Link { h_true: e.h_true, h_est: e.h_est, precoder: p })
                        .collect())
                })
                .collect();
            let mut out = Vec::with_capacity(records.len());
            for c in chunks {
                out.extend(c?);
            }
            Ok(out)
        }
    }
}

/// Equalizer a scheme uses at the receiver.
pub fn scheme_equalizer(scheme: SchemeName, cfg: &ExperimentConfig) -> Result<EqualizerKind, BenchError> {
    match scheme {
        SchemeName::Zf => Ok(EqualizerKind::Zf),
        SchemeName::Mmse => Ok(EqualizerKind::Mmse),
        SchemeName::Ddcl | SchemeName::LowerBound => cfg.equalizer(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub mc_fer: f64,
    pub errors: u64,
    pub ci_half: f64,
    pub trials: u64,
    pub analytic: f64,
    pub wall_ms: u64,
}

/// Mean analytic FER over `links`.
pub fn analytic_mean(
    links: &[Link],
    noise_var: f64,
    kind: EqualizerKind,
    cfg: &ExperimentConfig,
) -> Result<f64, BenchError> {
    let c = cfg.constellation();
    let fers: Vec<Result<f64, BenchError>> = links
        .par_iter()
        .map(|l| Ok(analytic_fer(&l.h_true, &l.h_est, &l.precoder, noise_var, kind, &c)?.fer))
        .collect();
    let mut total = 0.0;
    for f in fers {
        total += f?;
    }
    Ok(total / links.len().max(1) as f64)
}

/// Monte Carlo over the links, round-robin, plus the analytic mean.
/// `cell_seed` keys the cell's noise; frames are split into batches that
/// `workers` threads share.
pub fn run_cell(
    links: &[Link],
    noise_var: f64,
    kind: EqualizerKind,
    cfg: &ExperimentConfig,
    trials: u64,
    cell_seed: u64,
    workers: usize,
) -> Result<CellResult, BenchError> {
    if links.is_empty() {
        return Err(BenchError::Config("no test channels".into()));
    }
    let start = Instant::now();
    let c = cfg.constellation();
    let sims: Vec<Result<LinkSimulator, BenchError>> = links
        .par_iter()
        .map(|l| Ok(LinkSimulator::new(&l.h_true, &l.h_est, &l.precoder, noise_var, kind, c.clone())?))
        .collect();
    let sims = sims.into_iter().collect::<Result<Vec<_>, _>>()?;
    let est = monte_carlo_fer_pooled(&sims, trials as usize, cell_seed, workers);
    let analytic = analytic_mean(links, noise_var, kind, cfg)?;
    Ok(CellResult {
        mc_fer: est.fer,
        errors: est.errors,
        ci_half: est.ci_half,
        trials: est.frames,
        analytic,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// The Monte Carlo row and the analytic row of one cell.
pub fn cell_rows(scheme: &str, sweep: &str, x: f64, r: &CellResult, timing: bool) -> [ResultRow; 2] {
    [
        ResultRow {
            scheme: scheme.into(),
            sweep: sweep.into(),
            x,
            fer: r.mc_fer,
            ci_half: Some(r.ci_half),
            n_trials: Some(r.trials),
            wall_ms: timing.then_some(r.wall_ms),
        },
        ResultRow {
            scheme: format!("{scheme}-analytic"),
            sweep: sweep.into(),
            x,
            fer: r.analytic,
            ci_half: None,
            n_trials: None,
            wall_ms: None,
        },
    ]
}

/// Orders rows as all Monte Carlo rows of each scheme, then its analytic rows.
pub fn group_rows(rows: Vec<[ResultRow; 2]>) -> Vec<ResultRow> {
    let mut mc = Vec::new();
    let mut an = Vec::new();
    let mut out = Vec::new();
    let mut current: Option<String> = None;
    for [m, a] in rows {
        if current.as_deref() != Some(m.scheme.as_str()) {
            out.append(&mut mc);
            out.append(&mut an);
            current = Some(m.scheme.clone());
        }
        mc.push(m);
        an.push(a);
    }
    out.append(&mut mc);
    out.append(&mut an);
    out
}
