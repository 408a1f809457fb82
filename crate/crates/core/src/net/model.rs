//! Forward passes on the tape.
//!
//! Recurrent activations are kept column-wise, `[features, batch]`, so each
//! gate block of `W·x` is a contiguous row range.

use super::{HistoryTensor, ModelKind, NetConfig, NetError, NetworkParams, CONV_KERNEL, POOL};
use crate::autodiff::{AdError, CVar, Tape, Tensor, Var};
use crate::linalg::CMatrix;

/// The tape handles of a network's parameters.
#[derive(Debug, Clone)]
pub struct ParamVars<'t> {
    config: NetConfig,
    vars: Vec<Var<'t>>,
}

/// One LSTM layer. `w_x: [4H, in]`, `w_h: [4H, H]`, `bias: [4H, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars<'t> {
    pub w_x: Var<'t>,
    pub w_h: Var<'t>,
    pub bias: Var<'t>,
}

impl<'t> ParamVars<'t> {
    /// Registers every tensor as a differentiable leaf.
    pub fn leaves(tape: &'t Tape, params: &NetworkParams) -> Self {
        let vars = params.tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        Self { config: params.config.clone(), vars }
    }

    /// Registers every tensor as a constant (inference only).
    pub fn constants(tape: &'t Tape, params: &NetworkParams) -> Self {
        let vars = params.tensors.iter().map(|t| tape.constant(t.clone())).collect();
        Self { config: params.config.clone(), vars }
    }

    /// Wraps existing handles, checking them against the layout.
    pub fn from_vars(config: NetConfig, vars: &[Var<'t>]) -> Result<Self, NetError> {
        let layout = config.layout();
        if layout.len() != vars.len() {
            return Err(NetError::Shape(format!("expected {} tensors, got {}", layout.len(), vars.len())));
        }
        for ((name, shape), v) in layout.iter().zip(vars) {
            if v.shape() != *shape {
                return Err(NetError::Shape(format!("{name}: expected {shape:?}, got {:?}", v.shape())));
            }
        }
        Ok(Self { config, vars: vars.to_vec() })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }

    fn get(&self, name: &str) -> Var<'t> {
        let idx = self.config.layout().iter().position(|(n, _)| *n == name);
        self.vars[idx.unwrap_or_else(|| panic!("no parameter {name}"))]
    }

    pub fn lstm(&self, layer: usize) -> LstmVars<'t> {
        let (w_x, w_h, bias) = match layer {
            1 => ("lstm1.w_x", "lstm1.w_h", "lstm1.bias"),
            2 => ("lstm2.w_x", "lstm2.w_h", "lstm2.bias"),
            _ => panic!("LSTM layers are numbered 1 and 2"),
        };
        LstmVars { w_x: self.get(w_x), w_h: self.get(w_h), bias: self.get(bias) }
    }
}

/// `bias: [r, 1]` repeated over `cols` columns.
fn broadcast_cols<'t>(bias: Var<'t>, cols: usize) -> Result<Var<'t>, AdError> {
    let ones = bias.tape().constant(Tensor::filled([1, cols], 1.0));
    bias.matmul(ones)
}

/// One step of a standard LSTM cell on column-wise batches.
///
/// `x: [in, B]`, `h, c: [H, B]`. Returns the new hidden state and the
/// `(h, c)` pair to carry forward.
pub fn lstm_cell<'t>(
    p: &LstmVars<'t>,
    x: Var<'t>,
    (h, c): (Var<'t>, Var<'t>),
) -> Result<(Var<'t>, (Var<'t>, Var<'t>)), AdError> {
    let hidden = h.shape()[0];
    let batch = x.shape()[1];
    let gates = p
        .w_x
        .matmul(x)?
        .add(p.w_h.matmul(h)?)?
        .add(broadcast_cols(p.bias, batch)?)?;
    let block = |i: usize| gates.rows(i * hidden, hidden);
    let input = block(0)?.sigmoid()?;
    let forget = block(1)?.sigmoid()?;
    let cand = block(2)?.tanh()?;
    let output = block(3)?.sigmoid()?;
    let c_new = forget.mul(c)?.add(input.mul(cand)?)?;
    let h_new = output.mul(c_new.tanh()?)?;
    Ok((h_new, (h_new, c_new)))
}

/// Conv, ReLU, pool and flatten of one `[2, MN, MN]` frame: `[1, F]`.
fn features<'t>(pv: &ParamVars<'t>, planes: Tensor) -> Result<Var<'t>, AdError> {
    let tape = pv.vars[0].tape();
    let x = tape.constant(planes);
    let flat = pv.config.flatten();
    x.conv2d(pv.get("conv.weight"), pv.get("conv.bias"), CONV_KERNEL / 2)?
        .relu()?
        .max_pool2d(POOL)?
        .reshape([1, flat])
}

/// Features of step `t` for every history, as `[F, B]`.
fn step_features<'t>(pv: &ParamVars<'t>, histories: &[&HistoryTensor], t: usize) -> Result<Var<'t>, AdError> {
    let feats = histories
        .iter()
        .map(|h| features(pv, h.step_planes(t)))
        .collect::<Result<Vec<_>, _>>()?;
    Var::concat(&feats, [histories.len(), pv.config.flatten()])?.transpose()
}

/// Precoders for a batch of inputs. The DDCL model expects `τ` estimated
/// frames per input, the baseline a single true frame.
pub fn forward_batch<'t>(pv: &ParamVars<'t>, histories: &[&HistoryTensor]) -> Result<Vec<CVar<'t>>, NetError> {
    let cfg = &pv.config;
    if histories.is_empty() {
        return Err(NetError::Shape("empty batch".into()));
    }
    for h in histories {
        if h.steps() != cfg.tau || h.mn() != cfg.mn() {
            return Err(NetError::Shape(format!(
                "input has {} steps of {}x{}, network expects {} of {}x{}",
                h.steps(),
                h.mn(),
                h.mn(),
                cfg.tau,
                cfg.mn(),
                cfg.mn()
            )));
        }
    }
    let tape = pv.vars[0].tape();
    let batch = histories.len();

    let last = match cfg.kind {
        ModelKind::Baseline => step_features(pv, histories, 0)?,
        ModelKind::Ddcl => {
            let zeros = || tape.constant(Tensor::zeros([cfg.hidden, batch]));
            let (l1, l2) = (pv.lstm(1), pv.lstm(2));
            let mut s1 = (zeros(), zeros());
            let mut s2 = (zeros(), zeros());
            let mut out = s2.0;
            for t in 0..cfg.tau {
                let x = step_features(pv, histories, t)?;
                let (h1, next1) = lstm_cell(&l1, x, s1)?;
                s1 = next1;
                let (h2, next2) = lstm_cell(&l2, h1, s2)?;
                s2 = next2;
                out = h2;
            }
            out
        }
    };

    let y = pv
        .get("fc.weight")
        .matmul(last)?
        .add(broadcast_cols(pv.get("fc.bias"), batch)?)?
        .transpose()?;

    let mn = cfg.mn();
    (0..batch)
        .map(|b| {
            let o = y.rows(b, 1)?.reshape([2 * mn, cfg.k])?;
            let energy = o.mul(o)?.sum()?;
            if energy.item() <= 0.0 {
                return Err(NetError::DegenerateNormalization);
            }
            let o = o.scale_by(energy.sqrt()?.recip()?)?.scale(cfg.p0.sqrt())?;
            Ok(CVar::from_parts(o.rows(0, mn)?, o.rows(mn, mn)?)?)
        })
        .collect()
}

pub fn forward<'t>(pv: &ParamVars<'t>, history: &HistoryTensor) -> Result<CVar<'t>, NetError> {
    Ok(forward_batch(pv, &[history])?.remove(0))
}

/// Evaluates a frozen network on many inputs, `chunk` at a time.
pub fn predict(params: &NetworkParams, inputs: &[&HistoryTensor], chunk: usize) -> Result<Vec<CMatrix>, NetError> {
    let mut out = Vec::with_capacity(inputs.len());
    for part in inputs.chunks(chunk.max(1)) {
        let tape = Tape::new();
        let pv = ParamVars::constants(&tape, params);
        out.extend(forward_batch(&pv, part)?.iter().map(CVar::value));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::pack_history;
    use crate::rng::{complex_gaussian, stream};

    fn history(cfg: &NetConfig, seed: u64) -> HistoryTensor {
        let mut rng = stream(seed, 0);
        let hs: Vec<CMatrix> = (0..cfg.tau)
            .map(|_| CMatrix::from_fn(cfg.mn(), cfg.mn(), |_, _| complex_gaussian(&mut rng, 0.1)))
            .collect();
        pack_history(&hs.iter().collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn output_meets_power_budget() {
        for cfg in [NetConfig::ddcl(4, 2, 6, 3), NetConfig::baseline(4, 2, 8), NetConfig::ddcl(8, 4, 32, 5)] {
            let p = NetworkParams::init(cfg.clone(), &mut stream(1, 0)).unwrap();
            let hs: Vec<HistoryTensor> = (0..3).map(|s| history(&cfg, s)).collect();
            let out = predict(&p, &hs.iter().collect::<Vec<_>>(), 2).unwrap();
            for m in out {
                assert_eq!(m.shape(), (cfg.mn(), cfg.k));
                assert!((m.frobenius_norm_sqr() - cfg.p0).abs() < 1e-9 * cfg.p0);
            }
        }
    }

    #[test]
    fn zero_parameters_are_degenerate() {
        let cfg = NetConfig::ddcl(2, 2, 2, 2);
        let p = NetworkParams::zeros(cfg.clone()).unwrap();
        assert_eq!(predict(&p, &[&history(&cfg, 1)], 1), Err(NetError::DegenerateNormalization));
    }

    #[test]
    fn forward_is_deterministic_and_batch_independent() {
        let cfg = NetConfig::ddcl(4, 2, 4, 2);
        let p = NetworkParams::init(cfg.clone(), &mut stream(2, 0)).unwrap();
        let (a, b) = (history(&cfg, 3), history(&cfg, 4));
        let together = predict(&p, &[&a, &b], 8).unwrap();
        let alone = predict(&p, &[&b], 8).unwrap();
        assert_eq!(together, predict(&p, &[&a, &b], 8).unwrap());
        assert!(together[1].max_abs_diff(&alone[0]) < 1e-14);
    }

    #[test]
    fn output_scale_invariance() {
        let cfg = NetConfig::baseline(4, 2, 4);
        let p = NetworkParams::init(cfg.clone(), &mut stream(5, 0)).unwrap();
        let mut scaled = p.clone();
        for name in ["fc.weight", "fc.bias"] {
            let i = p.names().iter().position(|n| *n == name).unwrap();
            scaled.tensors[i].data_mut().iter_mut().for_each(|v| *v *= 7.5);
        }
        let h = history(&cfg, 6);
        let a = predict(&p, &[&h], 1).unwrap();
        let b = predict(&scaled, &[&h], 1).unwrap();
        assert!(a[0].max_abs_diff(&b[0]) < 1e-12);
    }

    #[test]
    fn wrong_history_shape_is_rejected() {
        let cfg = NetConfig::ddcl(4, 2, 4, 3);
        let p = NetworkParams::init(cfg.clone(), &mut stream(7, 0)).unwrap();
        let short = history(&NetConfig { tau: 2, ..cfg }, 1);
        assert!(matches!(predict(&p, &[&short], 1), Err(NetError::Shape(_))));
    }

    #[test]
    fn lstm_cell_zero_weights_give_zero_state() {
        let tape = Tape::new();
        let (h, inp, b) = (4, 3, 2);
        let p = LstmVars {
            w_x: tape.leaf(Tensor::zeros([4 * h, inp])),
            w_h: tape.leaf(Tensor::zeros([4 * h, h])),
            bias: tape.leaf(Tensor::zeros([4 * h, 1])),
        };
        let x = tape.constant(Tensor::new([inp, b], vec![1.0, -2.0, 3.0, 0.5, 9.0, -7.0]).unwrap());
        let zero = tape.constant(Tensor::zeros([h, b]));
        let (out, (_, c)) = lstm_cell(&p, x, (zero, zero)).unwrap();
        assert!(out.value().data().iter().all(|&v| v == 0.0));
        assert!(c.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_output_is_bounded() {
        let tape = Tape::new();
        let mut rng = stream(8, 0);
        let mut t = |shape: [usize; 2], var: f64| {
            let n = shape[0] * shape[1];
            let data = (0..n).map(|_| complex_gaussian(&mut rng, var).re).collect();
            tape.leaf(Tensor::new(shape, data).unwrap())
        };
        let p = LstmVars { w_x: t([12, 5], 50.0), w_h: t([12, 3], 50.0), bias: t([12, 1], 50.0) };
        let mut state = (t([3, 2], 1.0), t([3, 2], 1.0));
        for _ in 0..5 {
            let x = t([5, 2], 100.0);
            let (out, next) = lstm_cell(&p, x, state).unwrap();
            assert!(out.value().data().iter().all(|v| v.abs() < 1.0));
            state = next;
        }
    }
}
