//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file (or no file) describes the
//! default 8×4 system. Unknown keys are rejected.

use std::path::Path;

use otfs_core::channel::ChannelConfig;
use otfs_core::link::{noise_variance, EqualizerKind};
use otfs_core::modem::Constellation;
use otfs_core::net::{ModelKind, NetConfig, TrainConfig, DEFAULT_HIDDEN};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub system: SystemConfig,
    pub channel: ChannelSection,
    pub data: DataConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub m: usize,
    pub n: usize,
    /// Data symbols per frame; defaults to `M·N`.
    pub k: Option<usize>,
    pub modulation: usize,
    /// Power budget; defaults to `K`.
    pub p0: Option<f64>,
    pub snr_db: Vec<f64>,
    pub subcarrier_spacing_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub paths: usize,
    pub l_max: usize,
    pub k_max: f64,
    pub rho: f64,
    pub zeta: f64,
    pub nmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_sequences: usize,
    pub test_sequences: usize,
    /// History depth `τ`.
    pub tau: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// `ddcl` or `lower_bound`.
    pub kind: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iters: u64,
    pub patience: u32,
    pub validation_fraction: f64,
    pub eval_every: u64,
    pub snr_db: f64,
    pub equalizer: String,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub schemes: Vec<String>,
    /// Monte Carlo frames per point.
    pub trials: u64,
    /// SNR of the ζ and τ sweeps.
    pub fixed_snr_db: f64,
    pub zeta_values: Vec<f64>,
    pub tau_values: Vec<usize>,
    pub gamma_values: Vec<f64>,
    pub tradeoff_snr_db: Vec<f64>,
    pub validate_channels: usize,
    pub validate_snr_db: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            system: SystemConfig::default(),
            channel: ChannelSection::default(),
            data: DataConfig::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 8,
            n: 4,
            k: None,
            modulation: 4,
            p0: None,
            snr_db: (0..=6).map(|i| 5.0 * i as f64).collect(),
            subcarrier_spacing_hz: 15e3,
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelConfig::default();
        Self { paths: c.paths, l_max: c.l_max, k_max: c.k_max, rho: c.rho, zeta: c.zeta, nmse: c.nmse }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { train_sequences: 30_000, test_sequences: 1000, tau: 5 }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            kind: "ddcl".into(),
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            max_iters: t.max_iters,
            patience: t.patience,
            validation_fraction: t.validation_fraction,
            eval_every: t.eval_every,
            snr_db: 20.0,
            equalizer: "mmse".into(),
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            schemes: ["zf", "mmse", "ddcl", "lower_bound"].map(String::from).to_vec(),
            trials: 100_000,
            fixed_snr_db: 20.0,
            zeta_values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            tau_values: vec![2, 3, 4, 5, 6],
            gamma_values: vec![1.0, 0.75, 0.5],
            tradeoff_snr_db: vec![10.0, 20.0],
            validate_channels: 20,
            validate_snr_db: vec![5.0, 10.0, 15.0, 20.0],
        }
    }
}

/// A scheme in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeName {
    Zf,
    Mmse,
    Ddcl,
    LowerBound,
}

impl SchemeName {
    pub fn parse(s: &str) -> Result<Self, BenchError> {
        match s {
            "zf" => Ok(Self::Zf),
            "mmse" => Ok(Self::Mmse),
            "ddcl" => Ok(Self::Ddcl),
            "lower_bound" => Ok(Self::LowerBound),
            _ => Err(BenchError::Config(format!(
                "unknown scheme '{s}' (expected zf, mmse, ddcl or lower_bound)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Zf => "zf",
            Self::Mmse => "mmse",
            Self::Ddcl => "ddcl",
            Self::LowerBound => "lower_bound",
        }
    }
}

fn config_err(msg: impl Into<String>) -> BenchError {
    BenchError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The configuration with every optional field filled in, as TOML.
    pub fn resolved_toml(&self) -> String {
        let mut c = self.clone();
        c.system.k = Some(self.k());
        c.system.p0 = Some(self.p0());
        toml::to_string(&c).expect("config serializes")
    }

    pub fn mn(&self) -> usize {
        self.system.m * self.system.n
    }

    pub fn k(&self) -> usize {
        self.system.k.unwrap_or(self.mn())
    }

    pub fn p0(&self) -> f64 {
        self.system.p0.unwrap_or(self.k() as f64)
    }

    pub fn noise_var(&self, snr_db: f64) -> f64 {
        noise_variance(snr_db, self.p0(), self.k())
    }

    /// `τ_F = N / Δf`, in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.system.n as f64 / self.system.subcarrier_spacing_hz
    }

    pub fn channel_config(&self) -> ChannelConfig {
        let c = &self.channel;
        ChannelConfig {
            m: self.system.m,
            n: self.system.n,
            paths: c.paths,
            l_max: c.l_max,
            k_max: c.k_max,
            rho: c.rho,
            zeta: c.zeta,
            nmse: c.nmse,
        }
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.system.modulation).expect("validated")
    }

    pub fn model_kind(&self) -> Result<ModelKind, BenchError> {
        match self.train.kind.as_str() {
            "ddcl" => Ok(ModelKind::Ddcl),
            "lower_bound" => Ok(ModelKind::Baseline),
            k => Err(config_err(format!("train.kind '{k}' must be ddcl or lower_bound"))),
        }
    }

    pub fn equalizer(&self) -> Result<EqualizerKind, BenchError> {
        self.train.equalizer.parse().map_err(config_err)
    }

    pub fn schemes(&self) -> Result<Vec<SchemeName>, BenchError> {
        self.eval.schemes.iter().map(|s| SchemeName::parse(s)).collect()
    }

    /// Network shapes for the configured system.
    pub fn net_config(&self, kind: ModelKind) -> NetConfig {
        let (m, n, k) = (self.system.m, self.system.n, self.k());
        let base = match kind {
            ModelKind::Ddcl => NetConfig::ddcl(m, n, k, self.data.tau),
            ModelKind::Baseline => NetConfig::baseline(m, n, k),
        };
        NetConfig { hidden: self.train.hidden, modulation: self.system.modulation, p0: self.p0(), ..base }
    }

    pub fn train_config(&self) -> Result<TrainConfig, BenchError> {
        let t = &self.train;
        Ok(TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            max_iters: t.max_iters,
            patience: t.patience,
            validation_fraction: t.validation_fraction,
            eval_every: t.eval_every,
            seed: self.seed,
            noise_var: self.noise_var(t.snr_db),
            equalizer: self.equalizer()?,
        })
    }

    /// The same experiment with `K = round(γ·MN)` and `P0 = K`.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, BenchError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(config_err(format!("gamma {gamma} must lie in (0, 1]")));
        }
        let k = ((gamma * self.mn() as f64).round() as usize).max(1);
        let mut c = self.clone();
        c.system.k = Some(k);
        c.system.p0 = Some(k as f64);
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let s = &self.system;
        if s.m == 0 || s.n == 0 {
            return Err(config_err("system.m and system.n must be positive"));
        }
        if self.k() == 0 || self.k() > self.mn() {
            return Err(config_err(format!("system.k = {} must lie in 1..={}", self.k(), self.mn())));
        }
        Constellation::new(s.modulation).map_err(|e| config_err(format!("system.modulation: {e}")))?;
        if !(self.p0() > 0.0 && self.p0().is_finite()) {
            return Err(config_err("system.p0 must be positive"));
        }
        if !(s.subcarrier_spacing_hz > 0.0) {
            return Err(config_err("system.subcarrier_spacing_hz must be positive"));
        }
        let finite = |name: &str, v: &[f64]| {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(config_err(format!("{name} contains a non-finite value")))
            }
        };
        finite("system.snr_db", &s.snr_db)?;
        finite("eval.tradeoff_snr_db", &self.eval.tradeoff_snr_db)?;
        finite("eval.validate_snr_db", &self.eval.validate_snr_db)?;
        finite("train.snr_db", &[self.train.snr_db])?;
        finite("eval.fixed_snr_db", &[self.eval.fixed_snr_db])?;
        self.channel_config().validate().map_err(|e| config_err(format!("channel: {e}")))?;
        if self.data.tau == 0 {
            return Err(config_err("data.tau must be positive"));
        }
        if self.eval.tau_values.contains(&0) {
            return Err(config_err("eval.tau_values must be positive"));
        }
        if let Some(z) = self.eval.zeta_values.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
            return Err(config_err(format!("eval.zeta_values contains {z}")));
        }
        for &g in &self.eval.gamma_values {
            self.with_gamma(g)?;
        }
        self.model_kind()?;
        self.schemes()?;
        self.train_config()?
            .validate()
            .map_err(|e| config_err(format!("train: {e}")))?;
        self.net_config(self.model_kind()?)
            .validate()
            .map_err(|e| config_err(format!("network: {e}")))?;
        Ok(())
    }
}
