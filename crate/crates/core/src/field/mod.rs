//! The neural SDF: hash-grid and Fourier branches, each through its own
//! one-hidden-layer MLP, summed, concatenated with the raw coordinates and
//! decoded by a third MLP.

mod checkpoint;
mod init;
mod network;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION, HEADER_LEN,
};
pub use init::{geometric_init, INIT_RADIUS};
pub use network::Workspace;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::encoding::{HashGrid, HashGridConfig, Rff};
use crate::geometry::NormalizationTransform;
use crate::real::Real;
use crate::{Error, Result, Vec3};

/// Half the finest hash cell, `2 / (2 * n_max)` for the default grid.
pub const DEFAULT_GRADIENT_STEP: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub hash: HashGridConfig,
    pub rff_dim: usize,
    pub rff_var: f64,
    pub hash_hidden: usize,
    pub rff_hidden: usize,
    pub latent: usize,
    pub sdf_hidden: usize,
    pub alpha: f64,
    pub beta_act: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            hash: HashGridConfig::default(),
            rff_dim: 64,
            rff_var: 1.0,
            hash_hidden: 128,
            rff_hidden: 128,
            latent: 128,
            sdf_hidden: 256,
            alpha: 0.1,
            beta_act: 100.0,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        self.hash.validate()?;
        let bad = |key: &str, message: &str| Err(Error::Config { key: key.into(), message: message.into() });
        if self.rff_dim == 0 || self.rff_dim % 2 != 0 {
            return bad("rff_dim", "must be a positive even number");
        }
        if !(self.rff_var > 0.0 && self.rff_var.is_finite()) {
            return bad("rff_var", "must be positive");
        }
        if self.hash_hidden == 0 || self.rff_hidden == 0 || self.latent == 0 || self.sdf_hidden == 0 {
            return bad("width", "layer widths must be positive");
        }
        if !self.alpha.is_finite() {
            return bad("alpha", "must be finite");
        }
        if !(self.beta_act > 0.0 && self.beta_act.is_finite()) {
            return bad("beta_act", "must be positive");
        }
        Ok(())
    }

    pub fn layout(&self) -> MlpLayout {
        MlpLayout::new(self)
    }

    /// Total learnable and frozen scalars, in checkpoint order.
    pub fn param_count(&self) -> usize {
        self.hash.param_count() + self.rff_dim / 2 * 3 + self.layout().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: usize,
    pub bias: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight..self.weight + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias..self.bias + self.fan_out
    }
}

pub const LAYER_NAMES: [&str; 6] = ["m_hash.0", "m_hash.1", "m_rff.0", "m_rff.1", "m_sdf.0", "m_sdf.1"];

/// Offsets of the six dense layers inside the flat MLP parameter vector.
/// Each layer stores its weight as a row-major `fan_in x fan_out` matrix
/// followed by its bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpLayout {
    pub layers: [LayerShape; 6],
    len: usize,
}

impl MlpLayout {
    fn new(c: &FieldConfig) -> Self {
        let dims = [
            (c.hash.output_dim(), c.hash_hidden),
            (c.hash_hidden, c.latent),
            (c.rff_dim, c.rff_hidden),
            (c.rff_hidden, c.latent),
            (c.latent + 3, c.sdf_hidden),
            (c.sdf_hidden, 1),
        ];
        let mut at = 0;
        let layers = dims.map(|(fan_in, fan_out)| {
            let weight = at;
            let bias = weight + fan_in * fan_out;
            at = bias + fan_out;
            LayerShape { fan_in, fan_out, weight, bias }
        });
        MlpLayout { layers, len: at }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True for entries that are weights rather than biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for l in &self.layers {
            mask[l.weight_range()].iter_mut().for_each(|m| *m = true);
        }
        mask
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    Numerical(f64),
    AnalyticForward,
}

impl Default for GradientMode {
    fn default() -> Self {
        GradientMode::Numerical(DEFAULT_GRADIENT_STEP)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldParams<T> {
    config: FieldConfig,
    layout: MlpLayout,
    pub grid: HashGrid<T>,
    pub rff: Rff<T>,
    pub mlp: Vec<T>,
    pub normalization: NormalizationTransform,
}

impl<T: Real> FieldParams<T> {
    /// Zeroed MLPs and hash tables with freshly drawn frequencies.
    pub fn zeros<R: Rng>(config: FieldConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        Ok(FieldParams {
            config,
            layout,
            grid: HashGrid::zeros(config.hash)?,
            rff: Rff::new(config.rff_dim, config.rff_var, rng)?,
            mlp: vec![T::zero(); layout.len()],
            normalization: NormalizationTransform::identity(),
        })
    }

    /// Standard random initialization: hash tables uniform in ±1e-4 and
    /// every layer uniform in ±1/sqrt(fan_in).
    pub fn new<R: Rng>(config: FieldConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(config, rng)?;
        p.grid = HashGrid::new(config.hash, rng)?;
        for l in p.layout.layers {
            let k = 1.0 / (l.fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-k, k).expect("valid range");
            for v in &mut p.mlp[l.weight..l.bias + l.fan_out] {
                *v = T::lit(dist.sample(rng));
            }
        }
        Ok(p)
    }

    pub fn from_parts(config: FieldConfig, grid: HashGrid<T>, rff: Rff<T>, mlp: Vec<T>) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let check = |field: &'static str, found: usize, expected: usize| {
            if found != expected {
                Err(Error::ShapeMismatch { field, found: found as u64, expected: expected as u64 })
            } else {
                Ok(())
            }
        };
        check("hash_tables", grid.tables.len(), config.hash.param_count())?;
        check("rff_dim", rff.output_dim(), config.rff_dim)?;
        check("mlp", mlp.len(), layout.len())?;
        Ok(FieldParams { config, layout, grid, rff, mlp, normalization: NormalizationTransform::identity() })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn layer(&self, i: usize) -> (&[T], &[T]) {
        let l = self.layout.layers[i];
        (&self.mlp[l.weight_range()], &self.mlp[l.bias_range()])
    }

    pub fn layer_mut(&mut self, i: usize) -> (&mut [T], &mut [T]) {
        let l = self.layout.layers[i];
        let (w, b) = self.mlp[l.weight..l.bias + l.fan_out].split_at_mut(l.fan_in * l.fan_out);
        (w, b)
    }

    pub fn param_count(&self) -> usize {
        self.grid.tables.len() + self.rff.b.len() + self.mlp.len()
    }

    pub fn convert<U: Real>(&self) -> FieldParams<U> {
        let cast = |v: &[T]| v.iter().map(|x| U::lit(x.to_f64().expect("finite"))).collect::<Vec<U>>();
        let mut grid = HashGrid::zeros(self.config.hash).expect("validated config");
        grid.tables = cast(&self.grid.tables);
        FieldParams {
            config: self.config,
            layout: self.layout,
            grid,
            rff: Rff { b: cast(&self.rff.b) },
            mlp: cast(&self.mlp),
            normalization: self.normalization,
        }
    }

    /// Names the first tensor holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        let bad = |v: &[T]| v.iter().any(|x| !x.is_finite());
        for l in 0..self.config.hash.levels {
            let end = if l + 1 < self.config.hash.levels { self.grid.level_offset(l + 1) } else { self.grid.tables.len() };
            if bad(&self.grid.tables[self.grid.level_offset(l)..end]) {
                return Err(Error::NonFiniteParameter(format!("hash_tables.level{l}")));
            }
        }
        if bad(&self.rff.b) {
            return Err(Error::NonFiniteParameter("rff.b".into()));
        }
        for (i, name) in LAYER_NAMES.iter().enumerate() {
            let (w, b) = self.layer(i);
            if bad(w) {
                return Err(Error::NonFiniteParameter(format!("{name}.weight")));
            }
            if bad(b) {
                return Err(Error::NonFiniteParameter(format!("{name}.bias")));
            }
        }
        Ok(())
    }

    /// Field values for many points, evaluated in fixed-size chunks.
    pub fn eval_batch(&self, xs: &[Vec3]) -> Vec<T> {
        use rayon::prelude::*;
        xs.par_chunks(network::EVAL_CHUNK)
            .flat_map_iter(|chunk| {
                let mut ws = Workspace::new();
                ws.forward(self, chunk, false);
                ws.values().to_vec()
            })
            .collect()
    }

    pub fn eval(&self, x: &Vec3) -> T {
        let mut ws = Workspace::new();
        ws.forward(self, std::slice::from_ref(x), false);
        ws.values()[0]
    }

    pub fn input_gradient(&self, x: &Vec3, mode: GradientMode) -> Vec3 {
        match mode {
            GradientMode::Numerical(h) => {
                let mut pts = Vec::with_capacity(6);
                for d in 0..3 {
                    let mut e = Vec3::zeros();
                    e[d] = h;
                    pts.push(x + e);
                    pts.push(x - e);
                }
                let f = self.eval_batch(&pts);
                Vec3::from_fn(|d, _| (f[2 * d] - f[2 * d + 1]).to_f64().expect("finite") / (2.0 * h))
            }
            GradientMode::AnalyticForward => {
                let mut ws = Workspace::new();
                ws.forward(self, std::slice::from_ref(x), true);
                let g = ws.gradient(0);
                Vec3::from_fn(|d, _| g[d].to_f64().expect("finite"))
            }
        }
    }
}

/// Checked batch evaluation: fails if any parameter is non-finite.
pub fn field_forward<T: Real>(xs: &[Vec3], params: &FieldParams<T>) -> Result<Vec<T>> {
    params.check_finite()?;
    Ok(params.eval_batch(xs))
}

pub fn input_gradient<T: Real>(x: &Vec3, params: &FieldParams<T>, mode: GradientMode) -> Vec3 {
    params.input_gradient(x, mode)
}
