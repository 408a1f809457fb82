//! The conv-LSTM predictive precoder and its perfect-CSI CNN baseline.
//!
//! Per history step the estimated channel, split into real and imaginary
//! planes, goes through a 3×3 convolution (2 filters, size-preserving
//! padding), ReLU and 2×2 max pooling. The flattened features feed two
//! stacked LSTM layers; the last hidden state of the second one is mapped by
//! an affine layer to `2·K·MN` numbers, reshaped to `2MN×K`, scaled to
//! Frobenius norm `√P0` and read as `[Re P; Im P]`.
//!
//! The baseline sees only the current true channel and skips the recurrent
//! layers.

mod checkpoint;
mod model;
mod train;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{AdError, Tensor};
use crate::linalg::CMatrix;
use crate::link::LinkError;
use crate::rng::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, CheckpointError, TrainerExtras};
pub use model::{forward, forward_batch, lstm_cell, predict, LstmVars, ParamVars};
pub use train::{
    evaluate_mean_fer, example_fers, train, Adam, Example, ExampleSource, TrainConfig, TrainError, TrainReport, Trainer,
    TrainerState, TrajectorySource,
};

pub const CONV_FILTERS: usize = 2;
pub const CONV_KERNEL: usize = 3;
pub const POOL: usize = 2;
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("pre-normalization output is all zeros; cannot scale to the power budget")]
    DegenerateNormalization,
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// History of estimates through CNN and two LSTM layers.
    Ddcl,
    /// Current true channel through a single CNN stage.
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ddcl => "ddcl",
            Self::Baseline => "lower_bound",
        }
    }
}

/// Everything that fixes the parameter shapes and the output scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub kind: ModelKind,
    pub m: usize,
    pub n: usize,
    /// Data symbols per frame.
    pub k: usize,
    /// History depth; always 1 for the baseline.
    pub tau: usize,
    pub hidden: usize,
    /// QAM order the network was trained for.
    pub modulation: usize,
    pub p0: f64,
}

impl NetConfig {
    pub fn ddcl(m: usize, n: usize, k: usize, tau: usize) -> Self {
        Self { kind: ModelKind::Ddcl, m, n, k, tau, hidden: DEFAULT_HIDDEN, modulation: 4, p0: k as f64 }
    }

    pub fn baseline(m: usize, n: usize, k: usize) -> Self {
        Self { kind: ModelKind::Baseline, tau: 1, ..Self::ddcl(m, n, k, 1) }
    }

    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    pub fn pooled(&self) -> usize {
        self.mn() / POOL
    }

    /// Length of the flattened conv features of one step.
    pub fn flatten(&self) -> usize {
        CONV_FILTERS * self.pooled() * self.pooled()
    }

    pub fn output_len(&self) -> usize {
        2 * self.k * self.mn()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let err = |s: String| Err(NetError::Shape(s));
        if self.mn() < POOL {
            return err(format!("MN={} is too small for {POOL}x{POOL} pooling", self.mn()));
        }
        if self.k == 0 || self.k > self.mn() {
            return err(format!("K={} must lie in 1..=MN={}", self.k, self.mn()));
        }
        if self.tau == 0 || self.hidden == 0 {
            return err(format!("tau={} and hidden={} must be positive", self.tau, self.hidden));
        }
        if self.kind == ModelKind::Baseline && self.tau != 1 {
            return err(format!("baseline takes a single frame, got tau={}", self.tau));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return err(format!("P0={} must be positive", self.p0));
        }
        Ok(())
    }

    /// Parameter names and shapes, in storage order.
    ///
    /// LSTM weights are laid out gate-major: rows `[0,H)` input gate,
    /// `[H,2H)` forget gate, `[2H,3H)` candidate, `[3H,4H)` output gate.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let h = self.hidden;
        let conv = vec![
            ("conv.weight", vec![CONV_FILTERS, 2, CONV_KERNEL, CONV_KERNEL]),
            ("conv.bias", vec![CONV_FILTERS]),
        ];
        let fc_in = match self.kind {
            ModelKind::Ddcl => h,
            ModelKind::Baseline => self.flatten(),
        };
        let fc = vec![("fc.weight", vec![self.output_len(), fc_in]), ("fc.bias", vec![self.output_len(), 1])];
        match self.kind {
            ModelKind::Baseline => conv.into_iter().chain(fc).collect(),
            ModelKind::Ddcl => conv
                .into_iter()
                .chain([
                    ("lstm1.w_x", vec![4 * h, self.flatten()]),
                    ("lstm1.w_h", vec![4 * h, h]),
                    ("lstm1.bias", vec![4 * h, 1]),
                    ("lstm2.w_x", vec![4 * h, h]),
                    ("lstm2.w_h", vec![4 * h, h]),
                    ("lstm2.bias", vec![4 * h, 1]),
                ])
                .chain(fc)
                .collect(),
        }
    }
}

/// Trainable tensors of one network, in [`NetConfig::layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub tensors: Vec<Tensor>,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
    pub fn init(config: NetConfig, rng: &mut ChaCha8Rng) -> Result<Self, NetError> {
        config.validate()?;
        let h = config.hidden;
        let tensors = config
            .layout()
            .into_iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let data = if name.ends_with("bias") {
                    let mut b = vec![0.0; len];
                    if name.starts_with("lstm") {
                        b[h..2 * h].fill(1.0);
                    }
                    b
                } else {
                    let (fan_in, fan_out) = if shape.len() == 4 {
                        let rf = shape[2] * shape[3];
                        (shape[1] * rf, shape[0] * rf)
                    } else {
                        (shape[1], shape[0])
                    };
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
                };
                Tensor::new(shape, data).expect("layout shapes are positive")
            })
            .collect();
        Ok(Self { config, tensors })
    }

    /// All-zero parameters (including biases).
    pub fn zeros(config: NetConfig) -> Result<Self, NetError> {
        config.validate()?;
        let tensors = config.layout().into_iter().map(|(_, s)| Tensor::zeros(s)).collect();
        Ok(Self { config, tensors })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.config.layout().into_iter().map(|(n, _)| n).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names().iter().position(|n| *n == name).map(|i| &self.tensors[i])
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Checks that `tensors` match the layout of `config`.
    pub fn from_tensors(config: NetConfig, tensors: Vec<Tensor>) -> Result<Self, NetError> {
        config.validate()?;
        let layout = config.layout();
        if layout.len() != tensors.len() {
            return Err(NetError::Shape(format!("expected {} tensors, got {}", layout.len(), tensors.len())));
        }
        for ((name, shape), t) in layout.iter().zip(&tensors) {
            if t.shape() != &shape[..] {
                return Err(NetError::Shape(format!("{name}: expected {shape:?}, got {:?}", t.shape())));
            }
        }
        Ok(Self { config, tensors })
    }
}

/// `τ` channel matrices as a real `[τ, MN, MN, 2]` array; plane 0 holds the
/// real part, plane 1 the imaginary part, oldest frame first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTensor(Tensor);

impl HistoryTensor {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn steps(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn mn(&self) -> usize {
        self.0.shape()[1]
    }

    /// Step `t` as a channels-first `[2, MN, MN]` array.
    pub fn step_planes(&self, t: usize) -> Tensor {
        let mn = self.mn();
        let base = &self.0.data()[t * mn * mn * 2..(t + 1) * mn * mn * 2];
        let mut data = vec![0.0; 2 * mn * mn];
        for (idx, pair) in base.chunks_exact(2).enumerate() {
            data[idx] = pair[0];
            data[mn * mn + idx] = pair[1];
        }
        Tensor::new([2, mn, mn], data).expect("non-empty history")
    }

    pub fn unpack(&self) -> Vec<CMatrix> {
        let mn = self.mn();
        self.0
            .data()
            .chunks_exact(mn * mn * 2)
            .map(|step| {
                let re: Vec<f64> = step.iter().step_by(2).copied().collect();
                let im: Vec<f64> = step.iter().skip(1).step_by(2).copied().collect();
                CMatrix::from_parts(mn, mn, &re, &im)
            })
            .collect()
    }
}

/// Packs square channel matrices, oldest first.
pub fn pack_history(estimates: &[&CMatrix]) -> Result<HistoryTensor, NetError> {
    let Some(first) = estimates.first() else {
        return Err(NetError::Shape("empty history".into()));
    };
    let (mn, cols) = first.shape();
    if mn != cols || mn == 0 {
        return Err(NetError::Shape(format!("history matrices must be square, got {mn}x{cols}")));
    }
    let mut data = Vec::with_capacity(estimates.len() * mn * mn * 2);
    for (t, h) in estimates.iter().enumerate() {
        if h.shape() != (mn, mn) {
            return Err(NetError::Shape(format!("step {t} is {:?}, expected {mn}x{mn}", h.shape())));
        }
        for z in h.data() {
            data.push(z.re);
            data.push(z.im);
        }
    }
    Ok(HistoryTensor(Tensor::new([estimates.len(), mn, mn, 2], data).expect("checked shape")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian, stream};

    #[test]
    fn layout_sizes_for_default_system() {
        let c = NetConfig::ddcl(8, 4, 32, 5);
        assert_eq!(c.flatten(), 512);
        let p = NetworkParams::init(c, &mut stream(1, 0)).unwrap();
        assert_eq!(p.get("lstm1.w_x").unwrap().shape(), &[128, 512]);
        assert_eq!(p.get("fc.weight").unwrap().shape(), &[2048, 32]);
        let b = NetworkParams::init(NetConfig::baseline(8, 4, 32), &mut stream(1, 0)).unwrap();
        assert_eq!(b.get("fc.weight").unwrap().shape(), &[2048, 512]);
        assert!(b.get("lstm1.w_x").is_none());
    }

    #[test]
    fn init_ranges_and_forget_bias() {
        let p = NetworkParams::init(NetConfig::ddcl(2, 2, 2, 2), &mut stream(2, 0)).unwrap();
        let bias = p.get("lstm1.bias").unwrap().data();
        let h = p.config.hidden;
        assert!(bias[..h].iter().all(|&v| v == 0.0));
        assert!(bias[h..2 * h].iter().all(|&v| v == 1.0));
        let w = p.get("lstm1.w_h").unwrap();
        let limit = (6.0 / (4 * h + h) as f64).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
        assert!(p.get("fc.bias").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(NetConfig::ddcl(8, 4, 33, 5).validate().is_err());
        assert!(NetConfig::ddcl(8, 4, 16, 0).validate().is_err());
        assert!(NetConfig { tau: 3, ..NetConfig::baseline(2, 2, 2) }.validate().is_err());
    }

    #[test]
    fn pack_zero_and_identity() {
        let z = CMatrix::zeros(4, 4);
        let t = pack_history(&[&z, &z]).unwrap();
        assert_eq!(t.tensor().shape(), &[2, 4, 4, 2]);
        assert!(t.tensor().data().iter().all(|&v| v == 0.0));

        let i = CMatrix::identity(4);
        let planes = pack_history(&[&i]).unwrap().step_planes(0);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(planes.data()[r * 4 + c], (r == c) as u8 as f64);
                assert_eq!(planes.data()[16 + r * 4 + c], 0.0);
            }
        }
    }

    #[test]
    fn pack_round_trip_and_order() {
        let mut rng = stream(3, 0);
        let hs: Vec<CMatrix> = (0..3).map(|_| CMatrix::from_fn(4, 4, |_, _| complex_gaussian(&mut rng, 1.0))).collect();
        let refs: Vec<&CMatrix> = hs.iter().collect();
        let packed = pack_history(&refs).unwrap();
        assert_eq!(packed.unpack(), hs);
        assert_eq!(packed.step_planes(2).data()[5], hs[2][(1, 1)].re);
    }

    #[test]
    fn pack_rejects_mismatch() {
        let a = CMatrix::zeros(4, 4);
        let b = CMatrix::zeros(3, 3);
        assert!(pack_history(&[&a, &b]).is_err());
        assert!(pack_history(&[]).is_err());
        assert!(pack_history(&[&CMatrix::zeros(2, 3)]).is_err());
    }
}
