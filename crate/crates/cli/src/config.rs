//! TOML run configuration: schema, defaults, validation and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use surrokit::eventgen::DecayConfig;
use surrokit::neural::{AdamConfig, MlpConfig, TrainConfig, VaeConfig};
use surrokit::validation::{AposterioriConfig, DetectorConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_fine: usize,
    #[serde(alias = "L")]
    pub length: f64,
    pub nu: f64,
    pub k_max: usize,
    pub amplitude: f64,
    /// Fixed fine-grid step; derived from the CFL limit of each initial field when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_fine: 1024,
            length: 2.0 * std::f64::consts::PI,
            nu: 0.01,
            k_max: 8,
            amplitude: 1.0,
            dt: None,
            cfl_safety: 0.9,
            t_end: 3.0,
            snapshot_stride: 16,
            realizations: 14,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub r: usize,
    pub discard_frac: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self { r: 8, discard_frac: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub splits: [f64; 3],
    pub balance: bool,
    pub n_bins: usize,
    pub epsilon_std: f64,
    pub augment: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            splits: [0.8, 0.1, 0.1],
            balance: true,
            n_bins: 10,
            epsilon_std: 1e-8,
            augment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub layers: Vec<usize>,
    pub slope: f64,
}

impl Default for NetSection {
    fn default() -> Self {
        Self {
            layers: vec![64, 64],
            slope: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 20,
            batch: 256,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeSection {
    pub d_z: usize,
    pub beta_kl: f64,
    pub smoothing: f64,
    pub hidden: Vec<usize>,
    pub slope: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for VaeSection {
    fn default() -> Self {
        Self {
            d_z: 4,
            beta_kl: 1e-3,
            smoothing: 1.0,
            hidden: vec![64, 64],
            slope: 0.1,
            lr: 1e-3,
            epochs: 60,
            batch: 128,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventsSection {
    #[serde(alias = "M")]
    pub parent_mass: f64,
    pub m1: f64,
    pub m2: f64,
    /// Training events for the VAE.
    pub n: usize,
    pub n_val: usize,
    /// Fresh Monte Carlo events used as the reference in `events validate`.
    pub n_truth: usize,
    pub n_generate: usize,
    pub bins: usize,
}

impl Default for EventsSection {
    fn default() -> Self {
        Self {
            parent_mass: 90.0,
            m1: 0.105,
            m2: 0.105,
            n: 20_000,
            n_val: 2_000,
            n_truth: 20_000,
            n_generate: 20_000,
            bins: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub growth_threshold: f64,
    pub blowup_factor: f64,
    pub window: usize,
    pub horizon_frac: f64,
    pub cfl_safety: f64,
    pub bench_repetitions: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        let a = AposterioriConfig::default();
        Self {
            growth_threshold: a.detector.growth_threshold,
            blowup_factor: a.detector.blowup_factor,
            window: a.detector.window,
            horizon_frac: a.horizon_frac,
            cfl_safety: a.cfl_safety,
            bench_repetitions: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub out: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self { out: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sim: SimSection,
    pub filter: FilterSection,
    pub data: DataSection,
    pub net: NetSection,
    pub train: TrainSection,
    pub vae: VaeSection,
    pub events: EventsSection,
    pub validate: ValidateSection,
    pub paths: PathsSection,
}

fn check(ok: bool, key: &str, message: impl Into<String>) -> Result<(), (String, String)> {
    if ok {
        Ok(())
    } else {
        Err((key.to_string(), message.into()))
    }
}

impl RunConfig {
    pub fn n_coarse(&self) -> usize {
        self.sim.n_fine / self.filter.r
    }

    pub fn coarse_dx(&self) -> f64 {
        self.sim.length / self.n_coarse() as f64
    }

    /// First violated constraint as `(section.key, message)`.
    pub fn check(&self) -> Result<(), (String, String)> {
        let s = &self.sim;
        check(
            s.n_fine >= 8 && s.n_fine.is_power_of_two(),
            "sim.n_fine",
            format!("n_fine must be a power of two >= 8, got {}", s.n_fine),
        )?;
        check(s.length > 0.0 && s.length.is_finite(), "sim.length", "L must be > 0")?;
        check(s.nu >= 0.0 && s.nu.is_finite(), "sim.nu", "nu must be >= 0")?;
        check(
            s.k_max >= 1 && s.k_max <= s.n_fine / 4,
            "sim.k_max",
            format!("k_max must be in [1, n_fine/4 = {}]", s.n_fine / 4),
        )?;
        check(s.amplitude >= 0.0 && s.amplitude.is_finite(), "sim.amplitude", "amplitude must be >= 0")?;
        check(s.dt.map_or(true, |d| d > 0.0), "sim.dt", "dt must be > 0")?;
        check(s.cfl_safety > 0.0 && s.cfl_safety <= 1.0, "sim.cfl_safety", "cfl_safety must be in (0, 1]")?;
        check(s.t_end > 0.0 && s.t_end.is_finite(), "sim.t_end", "t_end must be > 0")?;
        check(s.snapshot_stride >= 1, "sim.snapshot_stride", "snapshot_stride must be >= 1")?;
        check(s.realizations >= 3, "sim.realizations", "need >= 3 realizations for three splits")?;
        check(s.seed <= i64::MAX as u64, "sim.seed", "seed must fit in a signed 64-bit integer")?;

        let f = &self.filter;
        check(f.r >= 2, "filter.r", "r must be >= 2")?;
        check(s.n_fine % f.r == 0, "filter.r", "r must divide n_fine")?;
        check(s.n_fine / f.r >= 8, "filter.r", "n_fine / r must be >= 8 coarse cells")?;
        check((0.0..1.0).contains(&f.discard_frac), "filter.discard_frac", "discard_frac must be in [0, 1)")?;

        let d = &self.data;
        check(
            d.splits.iter().all(|&x| x >= 0.0) && (d.splits.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
            "data.splits",
            "splits must be >= 0 and sum to 1",
        )?;
        check(!d.balance || d.n_bins >= 2, "data.n_bins", "n_bins must be >= 2")?;
        check(d.epsilon_std > 0.0, "data.epsilon_std", "epsilon_std must be > 0")?;

        let n = &self.net;
        check(
            !n.layers.is_empty() && n.layers.iter().all(|&w| w >= 1),
            "net.layers",
            "layers must list >= 1 positive hidden width",
        )?;
        check(n.slope >= 0.0 && n.slope.is_finite(), "net.slope", "slope must be >= 0")?;

        let t = &self.train;
        check(t.lr > 0.0, "train.lr", "lr must be > 0")?;
        check((0.0..1.0).contains(&t.beta1), "train.beta1", "beta1 must be in [0, 1)")?;
        check((0.0..1.0).contains(&t.beta2), "train.beta2", "beta2 must be in [0, 1)")?;
        check(t.epsilon > 0.0, "train.epsilon", "epsilon must be > 0")?;
        check(t.batch >= 1, "train.batch", "batch must be >= 1")?;

        let v = &self.vae;
        check(v.d_z >= 1, "vae.d_z", "d_z must be >= 1")?;
        check(v.beta_kl >= 0.0, "vae.beta_kl", "beta_kl must be >= 0")?;
        check(v.smoothing >= 0.0, "vae.smoothing", "smoothing must be >= 0")?;
        check(
            !v.hidden.is_empty() && v.hidden.iter().all(|&w| w >= 1),
            "vae.hidden",
            "hidden must list >= 1 positive width",
        )?;
        check(v.lr > 0.0, "vae.lr", "lr must be > 0")?;
        check(v.batch >= 1, "vae.batch", "batch must be >= 1")?;

        let e = &self.events;
        if let Err(err) = self.decay().validate() {
            return Err(("events.parent_mass".into(), err.to_string()));
        }
        check(e.n >= 2, "events.n", "n must be >= 2")?;
        check(e.n_val >= 1, "events.n_val", "n_val must be >= 1")?;
        check(e.bins >= 2, "events.bins", "bins must be >= 2")?;
        check(e.n_truth >= e.bins.max(2), "events.n_truth", "n_truth must be >= bins")?;
        check(e.n_generate >= 1, "events.n_generate", "n_generate must be >= 1")?;

        let w = &self.validate;
        check(w.window >= 4, "validate.window", "window must be >= 4")?;
        check(w.growth_threshold.is_finite(), "validate.growth_threshold", "growth_threshold must be finite")?;
        check(w.blowup_factor > 1.0, "validate.blowup_factor", "blowup_factor must be > 1")?;
        check(
            w.horizon_frac > 0.0 && w.horizon_frac <= 1.0,
            "validate.horizon_frac",
            "horizon_frac must be in (0, 1]",
        )?;
        check(w.cfl_safety > 0.0 && w.cfl_safety <= 1.0, "validate.cfl_safety", "cfl_safety must be in (0, 1]")?;
        check(w.bench_repetitions >= 10, "validate.bench_repetitions", "bench_repetitions must be >= 10")?;
        Ok(())
    }

    pub fn decay(&self) -> DecayConfig {
        DecayConfig {
            parent_mass: self.events.parent_mass,
            m1: self.events.m1,
            m2: self.events.m2,
        }
    }

    pub fn mlp(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.net.layers.clone(),
            slope: self.net.slope,
        }
    }

    pub fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            epsilon: self.train.epsilon,
        }
    }

    pub fn closure_training(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch,
            seed,
            adam: self.adam(self.train.lr),
        }
    }

    pub fn vae_model(&self) -> VaeConfig {
        VaeConfig {
            hidden: self.vae.hidden.clone(),
            latent_dim: self.vae.d_z,
            beta_kl: self.vae.beta_kl,
            slope: self.vae.slope,
        }
    }

    pub fn vae_training(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.vae.epochs,
            batch_size: self.vae.batch,
            seed,
            adam: self.adam(self.vae.lr),
        }
    }

    pub fn aposteriori(&self) -> AposterioriConfig {
        AposterioriConfig {
            horizon_frac: self.validate.horizon_frac,
            detector: DetectorConfig {
                window: self.validate.window,
                growth_threshold: self.validate.growth_threshold,
                blowup_factor: self.validate.blowup_factor,
            },
            cfl_safety: self.validate.cfl_safety,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the effective configuration with `[paths]` left out, so moving
    /// the output directory does not change it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsSection::default();
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// 1-based line of `key` inside `[section]` in TOML source, if written there.
fn locate(source: &str, dotted: &str) -> Option<usize> {
    let (section, key) = dotted.split_once('.')?;
    let mut current = "";
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(h) = t.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                let k = k.trim();
                if k == key || (key == "length" && k == "L") || (key == "parent_mass" && k == "M") {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

pub fn parse_config(source: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(source).map_err(|e| CliError::Config {
        message: e.message().to_string(),
        key: None,
        line: e.span().map(|s| line_of(source, s.start)),
    })?;
    validate(&cfg, Some(source))?;
    Ok(cfg)
}

pub fn validate(cfg: &RunConfig, source: Option<&str>) -> Result<(), CliError> {
    cfg.check().map_err(|(key, message)| CliError::Config {
        line: source.and_then(|s| locate(s, &key)),
        key: Some(key),
        message,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let source = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        message: format!("cannot read {}: {e}", path.display()),
        key: None,
        line: None,
    })?;
    parse_config(&source)
}
