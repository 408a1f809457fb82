//! Binary checkpoints. The byte layout is documented in
//! `docs/checkpoint-format.md`; all integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::train::{Adam, TrainerState};
use super::{ModelKind, NetConfig, NetworkParams};
use crate::autodiff::Tensor;

pub const MAGIC: &[u8; 8] = b"DDCLCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("checkpoint does not match the requested configuration: {0}")]
    Mismatch(String),
}

/// Optimizer and early-stopping state, present when training can resume.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerExtras {
    pub adam: Adam,
    pub best: NetworkParams,
    pub best_val: f64,
    pub bad_evals: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    /// Completed training iterations.
    pub iteration: u64,
    pub params: NetworkParams,
    pub trainer: Option<TrainerExtras>,
}

impl Checkpoint {
    /// A model-only checkpoint.
    pub fn model(params: NetworkParams, seed: u64, iteration: u64) -> Self {
        Self { seed, iteration, params, trainer: None }
    }

    /// A resumable checkpoint of the current (not best) parameters.
    pub fn resumable(state: &TrainerState, seed: u64) -> Self {
        Self {
            seed,
            iteration: state.iteration,
            params: state.params.clone(),
            trainer: Some(TrainerExtras {
                adam: state.adam.clone(),
                best: state.best.clone(),
                best_val: state.best_val,
                bad_evals: state.bad_evals,
            }),
        }
    }

    pub fn into_trainer_state(self) -> Option<TrainerState> {
        let t = self.trainer?;
        Some(TrainerState {
            params: self.params,
            adam: t.adam,
            iteration: self.iteration,
            best: t.best,
            best_val: t.best_val,
            bad_evals: t.bad_evals,
        })
    }

    /// Fails unless the stored shapes and system agree with `want`.
    pub fn ensure_matches(&self, want: &NetConfig, seed: Option<u64>) -> Result<(), CheckpointError> {
        let have = &self.params.config;
        let mut diffs = Vec::new();
        let mut cmp = |name: &str, a: String, b: String| {
            if a != b {
                diffs.push(format!("{name}: checkpoint {a}, requested {b}"));
            }
        };
        cmp("kind", have.kind.name().into(), want.kind.name().into());
        cmp("M", have.m.to_string(), want.m.to_string());
        cmp("N", have.n.to_string(), want.n.to_string());
        cmp("K", have.k.to_string(), want.k.to_string());
        cmp("tau", have.tau.to_string(), want.tau.to_string());
        cmp("hidden", have.hidden.to_string(), want.hidden.to_string());
        cmp("modulation", have.modulation.to_string(), want.modulation.to_string());
        cmp("P0", format!("{:?}", have.p0), format!("{:?}", want.p0));
        if let Some(s) = seed {
            cmp("seed", self.seed.to_string(), s.to_string());
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(CheckpointError::Mismatch(diffs.join("; ")))
        }
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.f64(*x);
        }
    }
}

pub fn write_checkpoint<W: Write>(mut out: W, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let c = &ckpt.params.config;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(match c.kind {
        ModelKind::Ddcl => 0,
        ModelKind::Baseline => 1,
    });
    for v in [c.m, c.n, c.k, c.tau, c.hidden, c.modulation] {
        w.u32(v as u32);
    }
    w.f64(c.p0);
    w.u64(ckpt.seed);
    w.u64(ckpt.iteration);

    let names = ckpt.params.names();
    w.u32(names.len() as u32);
    for (name, t) in names.iter().zip(&ckpt.params.tensors) {
        w.u16(name.len() as u16);
        w.0.extend_from_slice(name.as_bytes());
        w.u8(t.shape().len() as u8);
        for &d in t.shape() {
            w.u32(d as u32);
        }
        w.f64s(t.data());
    }

    match &ckpt.trainer {
        None => w.u8(0),
        Some(tr) => {
            w.u8(1);
            w.u64(tr.adam.t);
            for v in [tr.adam.lr, tr.adam.beta1, tr.adam.beta2, tr.adam.eps] {
                w.f64(v);
            }
            for m in &tr.adam.m {
                w.f64s(m);
            }
            for v in &tr.adam.v {
                w.f64s(v);
            }
            w.f64(tr.best_val);
            w.u32(tr.bad_evals);
            for t in &tr.best.tensors {
                w.f64s(t.data());
            }
        }
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    out.write_all(&w.0)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Corrupt(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| CheckpointError::Corrupt("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Checkpoint, CheckpointError> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    if buf.len() < MAGIC.len() + 8 || &buf[..8] != MAGIC {
        return Err(CheckpointError::Corrupt("missing magic bytes".into()));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(CheckpointError::Corrupt("checksum mismatch".into()));
    }

    let mut r = Reader { buf: body, pos: 12 };
    let kind = match r.u8()? {
        0 => ModelKind::Ddcl,
        1 => ModelKind::Baseline,
        k => return Err(CheckpointError::Corrupt(format!("unknown model kind {k}"))),
    };
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [m, n, k, tau, hidden, modulation] = dims;
    let config = NetConfig { kind, m, n, k, tau, hidden, modulation, p0: r.f64()? };
    config.validate().map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let seed = r.u64()?;
    let iteration = r.u64()?;

    let layout = config.layout();
    let count = r.u32()? as usize;
    if count != layout.len() {
        return Err(CheckpointError::Corrupt(format!("{count} tensors, layout needs {}", layout.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (want_name, want_shape) in &layout {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Corrupt("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        if name != *want_name || shape != *want_shape {
            return Err(CheckpointError::Corrupt(format!(
                "tensor {name} {shape:?} where {want_name} {want_shape:?} was expected"
            )));
        }
        let data = r.f64s(shape.iter().product())?;
        tensors.push(Tensor::new(shape, data).map_err(|e| CheckpointError::Corrupt(e.to_string()))?);
    }
    let params = NetworkParams::from_tensors(config.clone(), tensors).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

    let trainer = match r.u8()? {
        0 => None,
        1 => {
            let lens: Vec<usize> = params.tensors.iter().map(Tensor::len).collect();
            let t = r.u64()?;
            let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let m = lens.iter().map(|&l| r.f64s(l)).collect::<Result<Vec<_>, _>>()?;
            let v = lens.iter().map(|&l| r.f64s(l)).collect::<Result<Vec<_>, _>>()?;
            let best_val = r.f64()?;
            let bad_evals = r.u32()?;
            let best_tensors = params
                .tensors
                .iter()
                .map(|p| r.f64s(p.len()).map(|d| Tensor::new(p.shape().to_vec(), d).expect("shape copied")))
                .collect::<Result<Vec<_>, _>>()?;
            Some(TrainerExtras {
                adam: Adam { lr, beta1, beta2, eps, t, m, v },
                best: NetworkParams { config: config.clone(), tensors: best_tensors },
                best_val,
                bad_evals,
            })
        }
        f => return Err(CheckpointError::Corrupt(format!("bad trainer flag {f}"))),
    };
    if r.pos != body.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(Checkpoint { seed, iteration, params, trainer })
}

/// Writes to a temporary sibling first, then renames over `path`.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        write_checkpoint(&mut f, ckpt)?;
        f.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    read_checkpoint(std::fs::File::open(path)?)
}
