//! Unsupervised training: minimize the mean analytic FER of the predicted
//! precoders over minibatches with Adam.
//!
//! Every random choice is keyed on the seed: the train/validation split on
//! `(seed, split)`, the minibatch of iteration `i` on `(seed, i)`. Resuming
//! from a saved [`TrainerState`] therefore replays an unbroken run exactly.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::model::{forward_batch, predict, ParamVars};
use super::{pack_history, HistoryTensor, ModelKind, NetError, NetworkParams};
use crate::autodiff::{AdError, Tape, Tensor};
use crate::channel::{ChannelConfig, PathTrajectory};
use crate::linalg::CMatrix;
use crate::link::{analytic_fer, batch_mean_fer_tape, EqualizerKind, LinkError};
use crate::modem::Constellation;
use crate::rng::{stream, stream_index};

const SPLIT_TAG: u64 = 0x5350_4c49_54;
const BATCH_TAG: u64 = 0x4241_5443_48;

/// One training or evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Network input: past estimates (DDCL) or the current true channel
    /// (baseline).
    pub input: HistoryTensor,
    pub h_true: CMatrix,
    /// What the receiver uses to build its equalizer.
    pub h_est: CMatrix,
}

impl Example {
    /// Builds the sample for `kind` from a materialized record: the `tau`
    /// estimates before the last frame, and the last frame as target.
    pub fn from_trajectory(
        record: &PathTrajectory,
        channel: &ChannelConfig,
        kind: ModelKind,
        tau: usize,
    ) -> Result<Self, NetError> {
        let traj = record.materialize(channel);
        let target = traj.target();
        match kind {
            ModelKind::Ddcl => {
                let hist = traj.history();
                if hist.len() < tau {
                    return Err(NetError::Shape(format!(
                        "record has {} history frames, network needs {tau}",
                        hist.len()
                    )));
                }
                Ok(Self {
                    input: pack_history(&hist[hist.len() - tau..])?,
                    h_true: target.h_true.clone(),
                    h_est: target.h_est.clone(),
                })
            }
            ModelKind::Baseline => Ok(Self {
                input: pack_history(&[&target.h_true])?,
                h_true: target.h_true.clone(),
                h_est: target.h_true.clone(),
            }),
        }
    }
}

/// Random access to samples, materialized on demand.
pub trait ExampleSource {
    fn len(&self) -> usize;

    fn example(&self, index: usize) -> Result<Example, NetError>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ExampleSource for [Example] {
    fn len(&self) -> usize {
        <[Example]>::len(self)
    }

    fn example(&self, index: usize) -> Result<Example, NetError> {
        Ok(self[index].clone())
    }
}

/// Stored path trajectories viewed as samples for one network kind.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySource<'a> {
    pub channel: &'a ChannelConfig,
    pub records: &'a [PathTrajectory],
    pub kind: ModelKind,
    pub tau: usize,
}

impl ExampleSource for TrajectorySource<'_> {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn example(&self, index: usize) -> Result<Example, NetError> {
        Example::from_trajectory(&self.records[index], self.channel, self.kind, self.tau)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iters: u64,
    /// Stop after this many evaluations without improvement; 0 disables.
    pub patience: u32,
    pub validation_fraction: f64,
    /// Iterations between validation passes.
    pub eval_every: u64,
    pub seed: u64,
    pub noise_var: f64,
    pub equalizer: EqualizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-3,
            max_iters: 3000,
            patience: 10,
            validation_fraction: 0.1,
            eval_every: 100,
            seed: 0,
            noise_var: 0.01,
            equalizer: EqualizerKind::Mmse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |s: String| Err(TrainError::Config(s));
        if self.batch_size == 0 || self.eval_every == 0 {
            return bad("batch_size and eval_every must be positive".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} must lie in [0, 1)", self.validation_fraction));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return bad(format!("noise variance {} must be finite and >= 0", self.noise_var));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("numeric failure at iteration {iteration}: {detail}")]
    NonFinite {
        iteration: u64,
        detail: String,
        /// State after the last successful step.
        last_good: Box<TrainerState>,
    },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[&Tensor]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                *w -= self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Everything needed to continue training where it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub params: NetworkParams,
    pub adam: Adam,
    /// Completed iterations.
    pub iteration: u64,
    pub best: NetworkParams,
    pub best_val: f64,
    pub bad_evals: u32,
}

impl TrainerState {
    pub fn fresh(params: NetworkParams, lr: f64) -> Self {
        Self {
            adam: Adam::new(lr, &params.tensors),
            best: params.clone(),
            params,
            iteration: 0,
            best_val: f64::INFINITY,
            bad_evals: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Minibatch cost per iteration performed in this run.
    pub losses: Vec<f64>,
    /// `(iteration, mean validation FER)` per evaluation.
    pub validation: Vec<(u64, f64)>,
    pub stopped_early: bool,
}

pub struct Trainer<'a, S: ExampleSource + ?Sized> {
    source: &'a S,
    cfg: TrainConfig,
    constellation: Constellation,
    train_idx: Vec<usize>,
    val_idx: Vec<usize>,
    state: TrainerState,
}

fn is_numeric(e: &NetError) -> bool {
    matches!(
        e,
        NetError::Autodiff(AdError::NonFinite { .. } | AdError::Singular { .. })
            | NetError::Link(LinkError::Autodiff(AdError::NonFinite { .. } | AdError::Singular { .. }))
            | NetError::DegenerateNormalization
    )
}

impl<'a, S: ExampleSource + ?Sized> Trainer<'a, S> {
    pub fn new(source: &'a S, cfg: TrainConfig, params: NetworkParams) -> Result<Self, TrainError> {
        let lr = cfg.learning_rate;
        Self::resume(source, cfg, TrainerState::fresh(params, lr))
    }

    pub fn resume(source: &'a S, cfg: TrainConfig, state: TrainerState) -> Result<Self, TrainError> {
        cfg.validate()?;
        state.params.config.validate()?;
        let constellation = Constellation::new(state.params.config.modulation)
            .map_err(|e| TrainError::Config(e.to_string()))?;
        let mut order: Vec<usize> = (0..source.len()).collect();
        order.shuffle(&mut stream(cfg.seed, SPLIT_TAG));
        let n_val = ((source.len() as f64 * cfg.validation_fraction).round() as usize).min(source.len().saturating_sub(1));
        let val_idx = order[..n_val].to_vec();
        let train_idx = order[n_val..].to_vec();
        if train_idx.is_empty() {
            return Err(TrainError::Config("training set is empty".into()));
        }
        let mut state = state;
        state.adam.lr = cfg.learning_rate;
        Ok(Self { source, cfg, constellation, train_idx, val_idx, state })
    }

    pub fn state(&self) -> &TrainerState {
        &self.state
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn validation_indices(&self) -> &[usize] {
        &self.val_idx
    }

    fn batch(&self, iteration: u64) -> Result<Vec<Example>, NetError> {
        let mut rng = stream(self.cfg.seed, stream_index(&[BATCH_TAG, iteration]));
        (0..self.cfg.batch_size)
            .map(|_| self.source.example(self.train_idx[rng.random_range(0..self.train_idx.len())]))
            .collect()
    }

    /// Minibatch cost and parameter gradients at the current parameters.
    fn cost_and_grads(&self, batch: &[Example]) -> Result<(f64, Vec<Tensor>), NetError> {
        let tape = Tape::new();
        let pv = ParamVars::leaves(&tape, &self.state.params);
        let inputs: Vec<&HistoryTensor> = batch.iter().map(|e| &e.input).collect();
        let precoders = forward_batch(&pv, &inputs)?;
        let frames: Vec<(&CMatrix, &CMatrix)> = batch.iter().map(|e| (&e.h_true, &e.h_est)).collect();
        let cost = batch_mean_fer_tape(&frames, &precoders, self.cfg.noise_var, self.cfg.equalizer, &self.constellation)?;
        let grads = tape.backward(cost)?;
        let g = pv.vars().iter().map(|v| grads.wrt(*v).clone()).collect();
        Ok((cost.item(), g))
    }

    /// Runs one iteration and returns its minibatch cost.
    pub fn step(&mut self) -> Result<f64, TrainError> {
        let it = self.state.iteration;
        let batch = self.batch(it)?;
        let numeric = |detail: String, state: &TrainerState| TrainError::NonFinite {
            iteration: it,
            detail,
            last_good: Box::new(state.clone()),
        };
        let (cost, grads) = match self.cost_and_grads(&batch) {
            Ok(v) => v,
            Err(e) if is_numeric(&e) => return Err(numeric(e.to_string(), &self.state)),
            Err(e) => return Err(e.into()),
        };
        if !cost.is_finite() || !grads.iter().all(Tensor::is_finite) {
            return Err(numeric(format!("cost {cost} or its gradient is not finite"), &self.state));
        }
        let refs: Vec<&Tensor> = grads.iter().collect();
        self.state.adam.step(&mut self.state.params.tensors, &refs);
        if !self.state.params.is_finite() {
            return Err(numeric("parameters became non-finite".into(), &self.state));
        }
        self.state.iteration += 1;
        Ok(cost)
    }

    /// Mean analytic FER of the current parameters on the validation split.
    pub fn validation_cost(&self) -> Result<f64, TrainError> {
        let fers = example_fers(
            &self.state.params,
            self.source,
            &self.val_idx,
            self.cfg.noise_var,
            self.cfg.equalizer,
        )?;
        Ok(fers.iter().sum::<f64>() / fers.len() as f64)
    }

    /// Trains until `max_iters` or early stopping; `on_iter` sees every
    /// `(iteration, cost)`.
    pub fn run(&mut self, mut on_iter: impl FnMut(u64, f64)) -> Result<TrainReport, TrainError> {
        let mut report = TrainReport::default();
        while self.state.iteration < self.cfg.max_iters {
            let cost = self.step()?;
            on_iter(self.state.iteration, cost);
            report.losses.push(cost);
            let it = self.state.iteration;
            if self.val_idx.is_empty() {
                self.state.best = self.state.params.clone();
                continue;
            }
            if it % self.cfg.eval_every == 0 || it == self.cfg.max_iters {
                let val = self.validation_cost()?;
                report.validation.push((it, val));
                if val < self.state.best_val {
                    self.state.best_val = val;
                    self.state.best = self.state.params.clone();
                    self.state.bad_evals = 0;
                } else {
                    self.state.bad_evals += 1;
                    if self.cfg.patience > 0 && self.state.bad_evals >= self.cfg.patience {
                        report.stopped_early = true;
                        break;
                    }
                }
            }
        }
        Ok(report)
    }

    pub fn into_state(self) -> TrainerState {
        self.state
    }
}

/// Trains from `params` and returns the best-validation parameters.
pub fn train<S: ExampleSource + ?Sized>(
    source: &S,
    cfg: TrainConfig,
    params: NetworkParams,
) -> Result<(NetworkParams, TrainReport), TrainError> {
    let mut trainer = Trainer::new(source, cfg, params)?;
    let report = trainer.run(|_, _| {})?;
    Ok((trainer.into_state().best, report))
}

/// Analytic FER of the network's precoder on each selected example.
pub fn example_fers<S: ExampleSource + ?Sized>(
    params: &NetworkParams,
    source: &S,
    indices: &[usize],
    noise_var: f64,
    equalizer: EqualizerKind,
) -> Result<Vec<f64>, NetError> {
    let constellation =
        Constellation::new(params.config.modulation).map_err(|e| NetError::Shape(e.to_string()))?;
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(64) {
        let examples = chunk.iter().map(|&i| source.example(i)).collect::<Result<Vec<_>, _>>()?;
        let inputs: Vec<&HistoryTensor> = examples.iter().map(|e| &e.input).collect();
        let precoders = predict(params, &inputs, 64)?;
        for (e, p) in examples.iter().zip(&precoders) {
            out.push(analytic_fer(&e.h_true, &e.h_est, p, noise_var, equalizer, &constellation)?.fer);
        }
    }
    Ok(out)
}

/// Mean of [`example_fers`] over the whole source.
pub fn evaluate_mean_fer<S: ExampleSource + ?Sized>(
    params: &NetworkParams,
    source: &S,
    noise_var: f64,
    equalizer: EqualizerKind,
) -> Result<f64, NetError> {
    let idx: Vec<usize> = (0..source.len()).collect();
    let fers = example_fers(params, source, &idx, noise_var, equalizer)?;
    Ok(fers.iter().sum::<f64>() / fers.len().max(1) as f64)
}
