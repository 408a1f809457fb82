//! Delay-Doppler channel generation, evolution, and materialization.
//!
//! A channel realization is a set of `P` resolvable paths, each with an
//! integer delay index, a real (possibly fractional) Doppler index and a
//! complex gain. From the paths we build the effective time-domain matrix
//!
//! ```text
//! H_T = Σ_p h_p · exp(-j2π k̃_p l_p / MN) · Δ^{k̃_p} · Π^{l_p}
//! ```
//!
//! with `Π` the forward cyclic shift and `Δ = diag(exp(j2π i/MN))`, and the
//! delay-Doppler matrix `H_DD = (F_N ⊗ I_M) H_T (F_N^H ⊗ I_M)`.
//!
//! Between frames, delay and Doppler indices drift by uniform offsets bounded
//! by `zeta` (clamped to their generation ranges) and gains follow a
//! first-order Gauss-Markov recursion with correlation `rho`.

mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::linalg::{dft_matrix, CMatrix};
use crate::rng::{complex_gaussian, stream, ChaCha8Rng};

pub use io::{read_trajectories, write_trajectories, TrajectoryFile, TrajectoryIoError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),
}

/// Parameters of the channel process.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Delay bins (subcarriers).
    pub m: usize,
    /// Doppler bins (time slots).
    pub n: usize,
    /// Number of resolvable paths `P`.
    pub paths: usize,
    pub l_max: usize,
    pub k_max: f64,
    /// Gauss-Markov correlation between consecutive frames.
    pub rho: f64,
    /// Offset range bound: delay offsets are integers in `{-⌊ζ⌋..⌊ζ⌋}`,
    /// Doppler offsets are real in `[-ζ, ζ]`.
    pub zeta: f64,
    /// Estimation error power relative to `‖H‖_F²`.
    pub nmse: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            m: 8,
            n: 4,
            paths: 4,
            l_max: 5,
            k_max: 2.0,
            rho: 0.99,
            zeta: 0.5,
            nmse: 0.01,
        }
    }
}

impl ChannelConfig {
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    /// Innovation variance `σ_h² = 1/P`.
    pub fn gain_variance(&self) -> f64 {
        1.0 / self.paths as f64
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 || self.paths == 0 {
            return bad(format!("m={}, n={}, paths={} must all be >= 1", self.m, self.n, self.paths));
        }
        if self.l_max >= self.mn() {
            return bad(format!("l_max={} must be below MN={}", self.l_max, self.mn()));
        }
        if !(self.k_max >= 0.0 && self.k_max.is_finite()) {
            return bad(format!("k_max={} must be finite and >= 0", self.k_max));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho={} must lie in [0, 1]", self.rho));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return bad(format!("zeta={} must be finite and >= 0", self.zeta));
        }
        if !(self.nmse >= 0.0 && self.nmse.is_finite()) {
            return bad(format!("nmse={} must be finite and >= 0", self.nmse));
        }
        Ok(())
    }
}

/// One resolvable path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    /// Integer delay index `l_p`.
    pub delay: usize,
    /// Doppler index `k̃_p = k_p + κ_p`.
    pub doppler: f64,
    pub gain: Complex64,
}

/// Draws a fresh set of `P` paths.
pub fn init_paths(cfg: &ChannelConfig, rng: &mut ChaCha8Rng) -> Vec<PathState> {
    (0..cfg.paths)
        .map(|_| {
            let delay = rng.random_range(0..=cfg.l_max);
            let u: f64 = rng.random();
            let doppler = cfg.k_max * (2.0 * u - 1.0);
            let gain = complex_gaussian(rng, cfg.gain_variance());
            PathState { delay, doppler, gain }
        })
        .collect()
}

/// Advances every path by one frame.
///
/// The number of random draws does not depend on `zeta` or `rho`, so two
/// configurations differing only in those values, fed the same stream, see
/// coupled trajectories.
pub fn evolve(paths: &[PathState], cfg: &ChannelConfig, rng: &mut ChaCha8Rng) -> Vec<PathState> {
    let zi = cfg.zeta.floor() as i64;
    let innov = (1.0 - cfg.rho * cfg.rho).max(0.0).sqrt();
    paths
        .iter()
        .map(|p| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let theta = complex_gaussian(rng, cfg.gain_variance());
            let offset = ((u * (2 * zi + 1) as f64).floor() as i64).min(2 * zi) - zi;
            let delay = (p.delay as i64 + offset).clamp(0, cfg.l_max as i64) as usize;
            let doppler = (p.doppler + cfg.zeta * (2.0 * v - 1.0)).clamp(-cfg.k_max, cfg.k_max);
            let gain = if cfg.rho == 1.0 { p.gain } else { p.gain * cfg.rho + theta * innov };
            PathState { delay, doppler, gain }
        })
        .collect()
}

/// Effective time-domain channel `H_T` (MN×MN).
///
/// Row `i` of `h·e^{-j2πk̃l/MN}·Δ^{k̃}·Π^{l}` holds `h·e^{j2πk̃(i-l)/MN}` in
/// column `[i-l]_{MN}`.
pub fn build_time_channel(paths: &[PathState], m: usize, n: usize) -> CMatrix {
    let mn = m * n;
    let mut h = CMatrix::zeros(mn, mn);
    for p in paths {
        for i in 0..mn {
            let col = (i + mn - p.delay % mn) % mn;
            let phase = 2.0 * PI * p.doppler * (i as f64 - p.delay as f64) / mn as f64;
            h[(i, col)] += p.gain * Complex64::from_polar(1.0, phase);
        }
    }
    h
}

/// `F_N ⊗ I_M`, the time-to-DD transform on column-major vectorized grids.
pub fn dd_transform_matrix(m: usize, n: usize) -> CMatrix {
    dft_matrix(n).kron(&CMatrix::identity(m))
}

/// `H_DD = (F_N ⊗ I_M) · H_T · (F_N^H ⊗ I_M)`.
pub fn dd_from_time(h_t: &CMatrix, m: usize, n: usize) -> CMatrix {
    let a = dd_transform_matrix(m, n);
    &(&a * h_t) * &a.adjoint()
}

pub fn build_dd_channel(paths: &[PathState], m: usize, n: usize) -> CMatrix {
    dd_from_time(&build_time_channel(paths, m, n), m, n)
}

/// Adds i.i.d. CSCG noise with per-entry variance `nmse·‖H‖_F²/(rows·cols)`.
pub fn estimate_channel(h: &CMatrix, nmse: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let energy = h.frobenius_norm_sqr();
    if nmse == 0.0 || energy == 0.0 {
        return h.clone();
    }
    let var = nmse * energy / h.data().len() as f64;
    let mut out = h.clone();
    for z in out.data_mut() {
        *z += complex_gaussian(rng, var);
    }
    out
}

/// One frame of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub paths: Vec<PathState>,
    /// True delay-Doppler channel.
    pub h_true: CMatrix,
    /// Noisy estimate of `h_true`.
    pub h_est: CMatrix,
}

/// Path states of consecutive frames plus the seed of their estimation noise.
///
/// Channel matrices are derived, so this is what gets stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrajectory {
    pub frames: Vec<Vec<PathState>>,
    pub noise_seed: u64,
}

impl PathTrajectory {
    /// Draws `length` frames: initial paths, then `length - 1` evolutions.
    pub fn generate(cfg: &ChannelConfig, length: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut frames = Vec::with_capacity(length);
        if length > 0 {
            frames.push(init_paths(cfg, rng));
        }
        while frames.len() < length {
            let next = evolve(frames.last().unwrap(), cfg, rng);
            frames.push(next);
        }
        let noise_seed = rng.random();
        Self { frames, noise_seed }
    }

    /// Builds true and estimated DD matrices for every frame.
    pub fn materialize(&self, cfg: &ChannelConfig) -> ChannelTrajectory {
        let mut noise = stream(self.noise_seed, 0);
        let frames = self
            .frames
            .iter()
            .map(|paths| {
                let h_true = build_dd_channel(paths, cfg.m, cfg.n);
                let h_est = estimate_channel(&h_true, cfg.nmse, &mut noise);
                Frame { paths: paths.clone(), h_true, h_est }
            })
            .collect();
        ChannelTrajectory { frames }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrajectory {
    pub frames: Vec<Frame>,
}

impl ChannelTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Estimated channels of every frame but the last, oldest first.
    pub fn history(&self) -> Vec<&CMatrix> {
        let n = self.frames.len().saturating_sub(1);
        self.frames[..n].iter().map(|f| &f.h_est).collect()
    }

    /// The final frame, whose precoder is being predicted.
    pub fn target(&self) -> &Frame {
        self.frames.last().expect("empty trajectory")
    }
}

/// Generates and materializes a trajectory of `length` frames.
pub fn generate_trajectory(cfg: &ChannelConfig, length: usize, rng: &mut ChaCha8Rng) -> ChannelTrajectory {
    PathTrajectory::generate(cfg, length, rng).materialize(cfg)
}
