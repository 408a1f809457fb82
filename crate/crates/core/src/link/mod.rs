//! Precoded DD link: linear equalizers and closed-form error rates.
//!
//! A frame carries `K` symbols `d`, precoded to `x = P·d` with
//! `‖P‖_F² = P0`, and is received as `y = H·x + w`, `w ~ CN(0, σ²I)`. The
//! receiver only knows an estimate `Ĥ` and applies
//!
//! ```text
//! E = (ς·σ²·I_K + P^H Ĥ^H Ĥ P)^{-1} P^H Ĥ^H      ς = 0 (ZF) or 1 (MMSE)
//! ```
//!
//! With `G = E·H·P` the per-symbol SINR is `|G_kk|²` over the residual
//! interference of row `k` plus `σ²‖e_k‖²`, the SER follows the usual QAM
//! erfc approximation and the frame fails if any symbol does.

mod mc;
mod tape;

use num_complex::Complex64;
use thiserror::Error;

use crate::autodiff::AdError;
use crate::linalg::{CMatrix, LinalgError};
use crate::modem::Constellation;

pub use mc::{monte_carlo_fer, monte_carlo_fer_pooled, wilson_half_width, LinkSimulator, McEstimate, MC_BATCH};
pub use tape::{analytic_fer_tape, batch_mean_fer_tape};

/// SINR values are capped here so that error-free links stay finite.
pub const SINR_CAP: f64 = 1e12;
/// Floor inside the square root of the SER expression.
pub const SQRT_FLOOR: f64 = 1e-30;
/// Floor for the SINR denominator (an interference- and noise-free symbol).
pub const DENOM_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("{0}")]
    Shape(String),
    #[error("invalid precoder: {0}")]
    Precoder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqualizerKind {
    Zf,
    Mmse,
}

impl EqualizerKind {
    /// The regularization switch `ς`.
    pub fn varsigma(self) -> f64 {
        match self {
            Self::Zf => 0.0,
            Self::Mmse => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Zf => "zf",
            Self::Mmse => "mmse",
        }
    }
}

impl std::str::FromStr for EqualizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zf" => Ok(Self::Zf),
            "mmse" => Ok(Self::Mmse),
            _ => Err(format!("unknown equalizer '{s}' (expected zf or mmse)")),
        }
    }
}

/// Noise variance for a given SNR, defined as `P0 / (K·σ²)`.
pub fn noise_variance(snr_db: f64, p0: f64, k: usize) -> f64 {
    p0 / (k as f64 * 10f64.powf(snr_db / 10.0))
}

/// An `MN×K` precoding matrix with a fixed power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    matrix: CMatrix,
    p0: f64,
}

impl Precoder {
    /// Relative tolerance on `‖P‖_F² = P0`.
    pub const POWER_TOL: f64 = 1e-9;

    pub fn new(matrix: CMatrix, p0: f64) -> Result<Self, LinkError> {
        let (mn, k) = matrix.shape();
        if k == 0 || k > mn {
            return Err(LinkError::Precoder(format!("shape {mn}x{k} needs 1 <= K <= MN")));
        }
        let power = matrix.frobenius_norm_sqr();
        if !power.is_finite() || (power - p0).abs() > Self::POWER_TOL * p0 {
            return Err(LinkError::Precoder(format!("power {power} differs from budget {p0}")));
        }
        Ok(Self { matrix, p0 })
    }

    /// Rescales `matrix` to the budget; fails on an all-zero input.
    pub fn normalized(matrix: CMatrix, p0: f64) -> Result<Self, LinkError> {
        let norm = matrix.frobenius_norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(LinkError::Precoder(format!("cannot normalize matrix with norm {norm}")));
        }
        let matrix = matrix.scale(Complex64::new(p0.sqrt() / norm, 0.0));
        Ok(Self { matrix, p0 })
    }

    /// `[I_K; 0]` scaled to `P0`; the plain identity when `K = MN`.
    pub fn identity(mn: usize, k: usize, p0: f64) -> Result<Self, LinkError> {
        let m = CMatrix::from_fn(mn, k, |i, j| Complex64::new((i == j) as u8 as f64, 0.0));
        Self::normalized(m, p0)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn k(&self) -> usize {
        self.matrix.cols()
    }
}

/// `E = (ς·σ²·I + P^H Ĥ^H Ĥ P)^{-1} P^H Ĥ^H`, a `K×MN` matrix.
pub fn build_equalizer(
    h_est: &CMatrix,
    precoder: &CMatrix,
    noise_var: f64,
    kind: EqualizerKind,
) -> Result<CMatrix, LinkError> {
    let a = h_est.try_mul(precoder)?;
    let ah = a.adjoint();
    let mut gram = ah.try_mul(&a)?;
    let reg = kind.varsigma() * noise_var;
    for i in 0..gram.rows() {
        gram[(i, i)] += reg;
    }
    Ok(gram.inverse()?.try_mul(&ah)?)
}

/// Per-symbol SINR of `E` applied to the true channel.
pub fn sinr_per_symbol(
    h_true: &CMatrix,
    precoder: &CMatrix,
    equalizer: &CMatrix,
    noise_var: f64,
) -> Result<Vec<f64>, LinkError> {
    let g = equalizer.try_mul(&h_true.try_mul(precoder)?)?;
    let k = g.rows();
    if g.cols() != k {
        return Err(LinkError::Shape(format!("E·H·P is {}x{}, expected square", k, g.cols())));
    }
    Ok((0..k)
        .map(|i| {
            let row = g.row(i);
            let signal = row[i].norm_sqr();
            let interference: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() - signal;
            let noise = noise_var * equalizer.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
            (signal / (interference + noise).max(DENOM_FLOOR)).min(SINR_CAP)
        })
        .collect())
}

/// `α·erfc(√(β·SINR))`.
pub fn ser_from_sinr(sinr: f64, constellation: &Constellation) -> f64 {
    let x = (constellation.ser_beta() * sinr.min(SINR_CAP)).max(SQRT_FLOOR).sqrt();
    constellation.ser_alpha() * libm::erfc(x)
}

/// `1 − Π(1 − SER_k)`.
pub fn fer_from_sers(sers: &[f64]) -> f64 {
    1.0 - sers.iter().map(|s| 1.0 - s).product::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub sinr: Vec<f64>,
    pub ser: Vec<f64>,
    pub fer: f64,
}

/// Closed-form FER of one frame.
pub fn analytic_fer(
    h_true: &CMatrix,
    h_est: &CMatrix,
    precoder: &CMatrix,
    noise_var: f64,
    kind: EqualizerKind,
    constellation: &Constellation,
) -> Result<LinkMetrics, LinkError> {
    let e = build_equalizer(h_est, precoder, noise_var, kind)?;
    let sinr = sinr_per_symbol(h_true, precoder, &e, noise_var)?;
    let ser: Vec<f64> = sinr.iter().map(|&s| ser_from_sinr(s, constellation)).collect();
    let fer = fer_from_sers(&ser);
    Ok(LinkMetrics { sinr, ser, fer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_dd_channel, init_paths, ChannelConfig};
    use crate::rng::{complex_gaussian, stream};

    fn random(r: usize, c: usize, seed: u64) -> CMatrix {
        let mut rng = stream(seed, 0);
        CMatrix::from_fn(r, c, |_, _| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn noise_variance_definition() {
        assert!((noise_variance(0.0, 32.0, 32) - 1.0).abs() < 1e-15);
        assert!((noise_variance(20.0, 32.0, 32) - 0.01).abs() < 1e-15);
        assert!((noise_variance(10.0, 8.0, 4) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn precoder_power_is_checked() {
        assert!(Precoder::new(CMatrix::identity(4), 4.0).is_ok());
        assert!(Precoder::new(CMatrix::identity(4), 3.0).is_err());
        assert!(Precoder::normalized(CMatrix::zeros(4, 4), 4.0).is_err());
        let p = Precoder::normalized(random(8, 3, 1), 3.0).unwrap();
        assert!((p.matrix().frobenius_norm_sqr() - 3.0).abs() < 1e-12);
        assert_eq!(Precoder::identity(32, 32, 32.0).unwrap().matrix(), &CMatrix::identity(32));
    }

    #[test]
    fn zf_on_perfect_csi_inverts_the_channel() {
        let h = random(6, 6, 2);
        let p = CMatrix::identity(6);
        let e = build_equalizer(&h, &p, 0.1, EqualizerKind::Zf).unwrap();
        assert!((&e * &h).max_abs_diff(&CMatrix::identity(6)) < 1e-10);
    }

    #[test]
    fn zf_perfect_csi_sinr_is_power_over_noise() {
        let h = random(6, 6, 3);
        let p = CMatrix::identity(6);
        let e = build_equalizer(&h, &p, 0.1, EqualizerKind::Zf).unwrap();
        let sinr = sinr_per_symbol(&h, &p, &e, 0.1).unwrap();
        for (k, s) in sinr.iter().enumerate() {
            let norm: f64 = e.row(k).iter().map(|z| z.norm_sqr()).sum();
            assert!((s - 1.0 / (0.1 * norm)).abs() < 1e-8 * s);
        }
    }

    #[test]
    fn error_free_link_is_capped_not_infinite() {
        let h = CMatrix::identity(4);
        let m = analytic_fer(&h, &h, &h, 0.0, EqualizerKind::Zf, &Constellation::qpsk()).unwrap();
        assert!(m.sinr.iter().all(|&s| s == SINR_CAP));
        assert_eq!(m.fer, 0.0);
    }

    #[test]
    fn identity_link_matches_hand_computation() {
        // SINR = 1/σ², SER = 0.5·erfc(√(1.5/σ²)) for every symbol
        let h = CMatrix::identity(4);
        let sigma2 = 0.5;
        let m = analytic_fer(&h, &h, &h, sigma2, EqualizerKind::Zf, &Constellation::qpsk()).unwrap();
        let ser = 0.5 * libm::erfc((1.5 / sigma2).sqrt());
        assert!((m.ser[0] - ser).abs() < 1e-15);
        assert!((m.fer - (1.0 - (1.0 - ser).powi(4))).abs() < 1e-14);
    }

    #[test]
    fn ser_is_bounded_and_decreasing() {
        let c = Constellation::qpsk();
        assert!((ser_from_sinr(0.0, &c) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for s in [0.0, 0.1, 1.0, 10.0, 100.0, 1e6, 1e13] {
            let v = ser_from_sinr(s, &c);
            assert!(v >= 0.0 && v <= 0.5 && v <= prev);
            prev = v;
        }
    }

    #[test]
    fn singular_estimate_surfaces_an_error() {
        let h = CMatrix::zeros(4, 4);
        let p = CMatrix::identity(4);
        assert!(matches!(
            build_equalizer(&h, &p, 0.1, EqualizerKind::Zf),
            Err(LinkError::Linalg(LinalgError::Singular { .. }))
        ));
        assert!(build_equalizer(&h, &p, 0.1, EqualizerKind::Mmse).is_ok());
    }

    #[test]
    fn mmse_beats_zf_with_perfect_csi() {
        let cfg = ChannelConfig::default();
        let mut rng = stream(4, 0);
        let p = CMatrix::identity(cfg.mn());
        let c = Constellation::qpsk();
        for _ in 0..20 {
            let h = build_dd_channel(&init_paths(&cfg, &mut rng), cfg.m, cfg.n);
            for snr in [0.0, 10.0, 20.0] {
                let s2 = noise_variance(snr, 32.0, 32);
                let zf = analytic_fer(&h, &h, &p, s2, EqualizerKind::Zf, &c).unwrap().fer;
                let mmse = analytic_fer(&h, &h, &p, s2, EqualizerKind::Mmse, &c).unwrap().fer;
                assert!(mmse <= zf + 1e-12, "{mmse} > {zf}");
            }
        }
    }
}
