//! Monte Carlo frame-error measurement.
//!
//! Frames are simulated in fixed batches of [`MC_BATCH`], batch `b` drawing
//! from `stream(seed, b)`. Workers only decide which thread runs which batch,
//! so the error count is identical for any worker count.

use num_complex::Complex64;
use rand::Rng;

use super::{build_equalizer, EqualizerKind, LinkError};
use crate::linalg::CMatrix;
use crate::modem::Constellation;
use crate::rng::{complex_gaussian, stream, ChaCha8Rng};

pub const MC_BATCH: usize = 1000;

/// Symbol-level simulator for one channel realization and precoder.
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    h_true: CMatrix,
    precoder: CMatrix,
    equalizer: CMatrix,
    /// `(E·Ĥ·P)_kk`, the gain the receiver believes each symbol sees.
    bias: Vec<Complex64>,
    noise_var: f64,
    constellation: Constellation,
}

impl LinkSimulator {
    pub fn new(
        h_true: &CMatrix,
        h_est: &CMatrix,
        precoder: &CMatrix,
        noise_var: f64,
        kind: EqualizerKind,
        constellation: Constellation,
    ) -> Result<Self, LinkError> {
        let equalizer = build_equalizer(h_est, precoder, noise_var, kind)?;
        let g_hat = equalizer.try_mul(&h_est.try_mul(precoder)?)?;
        let bias = (0..g_hat.rows()).map(|k| g_hat[(k, k)]).collect();
        Ok(Self {
            h_true: h_true.clone(),
            precoder: precoder.clone(),
            equalizer,
            bias,
            noise_var,
            constellation,
        })
    }

    pub fn equalizer(&self) -> &CMatrix {
        &self.equalizer
    }

    /// Sends one frame and returns the number of wrongly detected symbols.
    pub fn simulate_frame(&self, rng: &mut ChaCha8Rng) -> usize {
        let k = self.precoder.cols();
        let symbols: Vec<usize> = (0..k).map(|_| rng.random_range(0..self.constellation.order())).collect();
        let d: Vec<Complex64> = symbols.iter().map(|&s| self.constellation.map(s)).collect();
        let mut y = self.h_true.mul_vec(&self.precoder.mul_vec(&d));
        for v in &mut y {
            *v += complex_gaussian(rng, self.noise_var);
        }
        let d_hat = self.equalizer.mul_vec(&y);
        symbols
            .iter()
            .zip(&d_hat)
            .zip(&self.bias)
            .filter(|((&s, &z), &b)| self.constellation.demap(z / b) != s)
            .count()
    }
}

/// Measured frame error rate with a 95% Wilson interval half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub errors: u64,
    pub frames: u64,
    pub fer: f64,
    pub ci_half: f64,
}

impl McEstimate {
    pub fn from_counts(errors: u64, frames: u64) -> Self {
        let fer = if frames == 0 { 0.0 } else { errors as f64 / frames as f64 };
        Self { errors, frames, fer, ci_half: wilson_half_width(errors, frames) }
    }

    /// Standardized gap to a predicted rate `p` under a binomial model.
    pub fn z_score(&self, p: f64) -> f64 {
        let sd = (p * (1.0 - p) / self.frames as f64).sqrt();
        if sd == 0.0 {
            return if self.fer == p { 0.0 } else { f64::INFINITY };
        }
        (self.fer - p) / sd
    }
}

/// Half-width of the 95% Wilson score interval.
pub fn wilson_half_width(errors: u64, frames: u64) -> f64 {
    if frames == 0 {
        return 0.5;
    }
    let z = 1.959_963_984_540_054;
    let n = frames as f64;
    let p = errors as f64 / n;
    z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()
}

/// Simulates `frames` frames on up to `workers` threads.
pub fn monte_carlo_fer(sim: &LinkSimulator, frames: usize, seed: u64, workers: usize) -> McEstimate {
    monte_carlo_fer_pooled(std::slice::from_ref(sim), frames, seed, workers)
}

/// Simulates `frames` frames spread round-robin over several channel
/// realizations: frame `f` uses `sims[f % sims.len()]`.
pub fn monte_carlo_fer_pooled(sims: &[LinkSimulator], frames: usize, seed: u64, workers: usize) -> McEstimate {
    assert!(!sims.is_empty(), "no simulators");
    let batches = frames.div_ceil(MC_BATCH);
    let run = |b: usize| -> u64 {
        let mut rng = stream(seed, b as u64);
        let first = b * MC_BATCH;
        let last = frames.min(first + MC_BATCH);
        (first..last).filter(|f| sims[f % sims.len()].simulate_frame(&mut rng) > 0).count() as u64
    };
    let workers = workers.clamp(1, batches.max(1));
    let counts: Vec<u64> = if workers == 1 {
        (0..batches).map(run).collect()
    } else {
        let mut counts = vec![0; batches];
        let run = &run;
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| s.spawn(move || (w..batches).step_by(workers).map(|b| (b, run(b))).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                for (b, c) in h.join().expect("monte carlo worker panicked") {
                    counts[b] = c;
                }
            }
        });
        counts
    };
    McEstimate::from_counts(counts.iter().sum(), frames as u64)
}
