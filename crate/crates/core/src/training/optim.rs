use super::objective::FieldGrads;
use crate::field::FieldParams;
use crate::real::Real;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr0: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to MLP weights only.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr0: 5e-4, decay: 0.9, decay_every: 10, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 2e-3 }
    }
}

impl AdamConfig {
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub step: u64,
    m_tables: Vec<T>,
    v_tables: Vec<T>,
    m_mlp: Vec<T>,
    v_mlp: Vec<T>,
    weight_mask: Vec<bool>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &FieldParams<T>) -> Self {
        OptimizerState {
            step: 0,
            m_tables: vec![T::zero(); params.grid.tables.len()],
            v_tables: vec![T::zero(); params.grid.tables.len()],
            m_mlp: vec![T::zero(); params.mlp.len()],
            v_mlp: vec![T::zero(); params.mlp.len()],
            weight_mask: params.layout().weight_mask(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<T: Real>(
    theta: &mut [T],
    g: &[T],
    m: &mut [T],
    v: &mut [T],
    decay_mask: Option<&[bool]>,
    c: &AdamConfig,
    lr: f64,
    step: u64,
) -> bool {
    let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
    let c1 = T::lit(1.0 / (1.0 - c.beta1.powi(step as i32)));
    let c2 = T::lit(1.0 / (1.0 - c.beta2.powi(step as i32)));
    let eps = T::lit(c.eps);
    let lr_t = T::lit(lr);
    let wd = T::lit(lr * c.weight_decay);
    let mut finite = true;
    for i in 0..theta.len() {
        let gi = g[i];
        m[i] = b1 * m[i] + one_b1 * gi;
        v[i] = b2 * v[i] + one_b2 * gi * gi;
        let mut t = theta[i] - lr_t * (m[i] * c1) / ((v[i] * c2).sqrt() + eps);
        if decay_mask.is_some_and(|mask| mask[i]) {
            t -= wd * theta[i];
        }
        finite &= t.is_finite();
        theta[i] = t;
    }
    finite
}

/// One bias-corrected Adam step at learning rate `lr`. The frequency
/// matrix is frozen and never touched.
pub fn adam_step<T: Real>(
    params: &mut FieldParams<T>,
    grads: &FieldGrads<T>,
    state: &mut OptimizerState<T>,
    config: &AdamConfig,
    lr: f64,
) -> Result<()> {
    if grads.tables.len() != params.grid.tables.len() || grads.mlp.len() != params.mlp.len() {
        return Err(Error::InvalidInput("gradient shapes do not match parameters".into()));
    }
    state.step += 1;
    let ok_t = update(&mut params.grid.tables, &grads.tables, &mut state.m_tables, &mut state.v_tables, None, config, lr, state.step);
    let ok_m = update(
        &mut params.mlp,
        &grads.mlp,
        &mut state.m_mlp,
        &mut state.v_mlp,
        Some(&state.weight_mask),
        config,
        lr,
        state.step,
    );
    if !(ok_t && ok_m) {
        params.check_finite()?;
    }
    Ok(())
}
