//! Training configuration and its flat `key = value` file format. Lines
//! starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use super::losses::LossWeights;
use super::optim::AdamConfig;
use crate::encoding::HashGridConfig;
use crate::field::{FieldConfig, GradientMode, DEFAULT_GRADIENT_STEP, INIT_RADIUS};
use crate::sampling::SamplingSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataLoss {
    /// L1 on contour samples, L2 on sign-disagreeing samples only.
    SymmetricDifference,
    /// L1 against the 2D label on every sample (ablation).
    L1Everywhere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_log2: u32,
    /// Regularization points per iteration; `None` means the batch size.
    pub reg_batch_log2: Option<u32>,
    pub field: FieldConfig,
    pub adam: AdamConfig,
    pub weights: LossWeights,
    pub schedule: SamplingSchedule,
    pub seed: u64,
    pub grad_mode: GradientMode,
    pub deterministic: bool,
    pub data_loss: DataLoss,
    pub init_radius: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_log2: 17,
            reg_batch_log2: None,
            field: FieldConfig::default(),
            adam: AdamConfig::default(),
            weights: LossWeights::default(),
            schedule: SamplingSchedule::default(),
            seed: 0,
            grad_mode: GradientMode::default(),
            deterministic: true,
            data_loss: DataLoss::SymmetricDifference,
            init_radius: INIT_RADIUS,
        }
    }
}

impl TrainConfig {
    /// Laptop-scale settings: smaller hash tables and batches and 100
    /// epochs.
    pub fn desk() -> Self {
        let mut c = TrainConfig { epochs: 100, batch_log2: 12, ..Default::default() };
        c.field.hash.table_size = 1 << 16;
        c
    }

    pub fn batch_size(&self) -> usize {
        1 << self.batch_log2
    }

    pub fn reg_batch_size(&self) -> usize {
        1 << self.reg_batch_log2.unwrap_or(self.batch_log2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Err(Error::Config { key: key.into(), message: message.into() });
        self.field.validate()?;
        self.schedule.validate()?;
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        if self.batch_log2 > 30 || self.reg_batch_log2.is_some_and(|r| r > 30) {
            return bad("batch_log2", "too large");
        }
        let a = &self.adam;
        if !(a.lr0 > 0.0 && a.lr0.is_finite()) {
            return bad("lr0", "must be positive");
        }
        if !(a.decay > 0.0 && a.decay <= 1.0) {
            return bad("lr_decay", "must be in (0, 1]");
        }
        if a.decay_every == 0 {
            return bad("lr_decay_every", "must be positive");
        }
        if !(a.weight_decay >= 0.0) {
            return bad("weight_decay", "must be non-negative");
        }
        let w = &self.weights;
        for (k, v) in [("lambda_eik", w.lambda_eik), ("lambda_min", w.lambda_min), ("beta_min", w.beta_min)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(k, "must be non-negative");
            }
        }
        if let GradientMode::Numerical(h) = self.grad_mode {
            if !(h > 0.0 && h.is_finite()) {
                return bad("grad_step", "must be positive");
            }
        }
        if !(self.init_radius > 0.0 && self.init_radius < 1.0) {
            return bad("init_radius", "must be in (0, 1)");
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let err = |m: String| Error::Config { key: key.into(), message: m };
        let int = || value.parse::<usize>().map_err(|e| err(format!("{value:?}: {e}")));
        let float = || value.parse::<f64>().map_err(|e| err(format!("{value:?}: {e}")));
        let log2 = || -> Result<u32> {
            let v = value.parse::<u32>().map_err(|e| err(format!("{value:?}: {e}")))?;
            if v > 31 {
                return Err(err("exponent too large".into()));
            }
            Ok(v)
        };
        let boolean = || match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(err(format!("expected a boolean, got {value:?}"))),
        };
        let h: &mut HashGridConfig = &mut self.field.hash;
        match key {
            "epochs" => self.epochs = int()?,
            "batch_log2" => self.batch_log2 = log2()?,
            "reg_batch_log2" => self.reg_batch_log2 = Some(log2()?),
            "lr0" => self.adam.lr0 = float()?,
            "lr_decay" => self.adam.decay = float()?,
            "lr_decay_every" => self.adam.decay_every = int()?,
            "weight_decay" => self.adam.weight_decay = float()?,
            "lambda_eik" => self.weights.lambda_eik = float()?,
            "lambda_min" => self.weights.lambda_min = float()?,
            "beta_min" => self.weights.beta_min = float()?,
            "beta_act" => self.field.beta_act = float()?,
            "alpha" => self.field.alpha = float()?,
            "hash_levels" => h.levels = int()?,
            "hash_nmin_log2" => h.n_min = 1 << log2()?,
            "hash_nmax_log2" => h.n_max = 1 << log2()?,
            "hash_feat" => h.features = int()?,
            "hash_table_log2" => h.table_size = 1 << log2()?,
            "rff_dim" => self.field.rff_dim = int()?,
            "rff_var" => self.field.rff_var = float()?,
            "hash_hidden" => self.field.hash_hidden = int()?,
            "rff_hidden" => self.field.rff_hidden = int()?,
            "latent_dim" => self.field.latent = int()?,
            "sdf_hidden" => self.field.sdf_hidden = int()?,
            "seed" => self.seed = value.parse().map_err(|e| err(format!("{value:?}: {e}")))?,
            "grad_mode" => {
                self.grad_mode = match value {
                    "numerical" => GradientMode::Numerical(match self.grad_mode {
                        GradientMode::Numerical(h) => h,
                        GradientMode::AnalyticForward => DEFAULT_GRADIENT_STEP,
                    }),
                    "analytic" => GradientMode::AnalyticForward,
                    _ => return Err(err(format!("expected numerical or analytic, got {value:?}"))),
                }
            }
            "grad_step" => self.grad_mode = GradientMode::Numerical(float()?),
            "deterministic" => self.deterministic = boolean()?,
            "data_loss" => {
                self.data_loss = match value {
                    "symmetric_difference" => DataLoss::SymmetricDifference,
                    "l1" => DataLoss::L1Everywhere,
                    _ => return Err(err(format!("expected symmetric_difference or l1, got {value:?}"))),
                }
            }
            "adaptive_sampler" => self.schedule.adaptive_interior = boolean()?,
            "init_radius" => self.init_radius = float()?,
            _ => return Err(err("unknown key".into())),
        }
        Ok(())
    }

    /// Parses settings on top of `base`.
    pub fn parse_onto(base: TrainConfig, text: &str, path: &Path) -> Result<Self> {
        let mut c = base;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { path: path.into(), line: i + 1, message: "expected key = value".into() });
            };
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_onto(TrainConfig::default(), text, Path::new("<config>"))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_onto(TrainConfig::default(), &std::fs::read_to_string(path)?, path)
    }

    pub fn to_config_string(&self) -> String {
        let h = &self.field.hash;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("epochs", self.epochs.to_string());
        kv("batch_log2", self.batch_log2.to_string());
        if let Some(r) = self.reg_batch_log2 {
            kv("reg_batch_log2", r.to_string());
        }
        kv("lr0", self.adam.lr0.to_string());
        kv("lr_decay", self.adam.decay.to_string());
        kv("lr_decay_every", self.adam.decay_every.to_string());
        kv("weight_decay", self.adam.weight_decay.to_string());
        kv("lambda_eik", self.weights.lambda_eik.to_string());
        kv("lambda_min", self.weights.lambda_min.to_string());
        kv("beta_min", self.weights.beta_min.to_string());
        kv("beta_act", self.field.beta_act.to_string());
        kv("alpha", self.field.alpha.to_string());
        kv("hash_levels", h.levels.to_string());
        kv("hash_nmin_log2", h.n_min.trailing_zeros().to_string());
        kv("hash_nmax_log2", h.n_max.trailing_zeros().to_string());
        kv("hash_feat", h.features.to_string());
        kv("hash_table_log2", h.table_size.trailing_zeros().to_string());
        kv("rff_dim", self.field.rff_dim.to_string());
        kv("rff_var", self.field.rff_var.to_string());
        kv("hash_hidden", self.field.hash_hidden.to_string());
        kv("rff_hidden", self.field.rff_hidden.to_string());
        kv("latent_dim", self.field.latent.to_string());
        kv("sdf_hidden", self.field.sdf_hidden.to_string());
        kv("seed", self.seed.to_string());
        match self.grad_mode {
            GradientMode::Numerical(step) => {
                kv("grad_mode", "numerical".into());
                kv("grad_step", step.to_string());
            }
            GradientMode::AnalyticForward => kv("grad_mode", "analytic".into()),
        }
        kv("deterministic", self.deterministic.to_string());
        kv(
            "data_loss",
            match self.data_loss {
                DataLoss::SymmetricDifference => "symmetric_difference".into(),
                DataLoss::L1Everywhere => "l1".into(),
            },
        );
        kv("adaptive_sampler", self.schedule.adaptive_interior.to_string());
        kv("init_radius", self.init_radius.to_string());
        s
    }
}
