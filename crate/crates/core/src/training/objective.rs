//! The full objective and its exact gradient. Data samples get one
//! value-only pass to classify them; only samples with a non-zero loss
//! derivative are then run forward and backward. Regularization points are
//! processed in shards that hold each point together with its six
//! finite-difference neighbours. Shard results are reduced in shard order,
//! so gradients do not depend on the number of workers.

use rayon::prelude::*;

use super::config::DataLoss;
use super::losses::{
    classify_symmetric_difference, loss_eikonal, loss_l1, loss_min_surface, loss_off, loss_on, LossWeights, SampleClass,
};
use crate::field::{FieldParams, GradientMode, Workspace};
use crate::real::Real;
use crate::sampling::LabeledSample;
use crate::{Error, Result, Vec3};

pub const DATA_SHARD: usize = 1024;
pub const REG_SHARD: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrads<T> {
    pub tables: Vec<T>,
    pub mlp: Vec<T>,
}

impl<T: Real> FieldGrads<T> {
    pub fn zeros_like(p: &FieldParams<T>) -> Self {
        FieldGrads { tables: vec![T::zero(); p.grid.tables.len()], mlp: vec![T::zero(); p.mlp.len()] }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub on: f64,
    pub off: f64,
    pub eik: f64,
    pub min: f64,
    pub n_on: usize,
    pub n_off: usize,
    pub n_offcontour: usize,
    pub n_reg: usize,
}

impl LossBreakdown {
    /// Share of non-contour batch samples in the symmetric difference.
    pub fn off_fraction(&self) -> f64 {
        if self.n_offcontour == 0 {
            0.0
        } else {
            self.n_off as f64 / self.n_offcontour as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub weights: LossWeights,
    pub mode: GradientMode,
    pub data_loss: DataLoss,
}

impl Default for Objective {
    fn default() -> Self {
        Objective { weights: LossWeights::default(), mode: GradientMode::default(), data_loss: DataLoss::SymmetricDifference }
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn f64_of<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

enum Shard<'a, T> {
    Data { xs: Vec<Vec3>, df: Vec<T> },
    Reg { centers: &'a [Vec3] },
}

struct ShardOut<T> {
    mlp: Vec<T>,
    ws: Workspace<T>,
    reg_f: Vec<f64>,
    reg_g: Vec<Vec3>,
}

struct RegScale {
    count: f64,
    lambda_eik: f64,
    lambda_min: f64,
    beta: f64,
}

fn run_shard<T: Real>(p: &FieldParams<T>, shard: &Shard<'_, T>, mode: GradientMode, rs: &RegScale) -> ShardOut<T> {
    let mut mlp = vec![T::zero(); p.mlp.len()];
    let mut ws = Workspace::new();
    match shard {
        Shard::Data { xs, df } => {
            ws.forward(p, xs, false);
            ws.backward(p, df, None, &mut mlp);
            ShardOut { mlp, ws, reg_f: Vec::new(), reg_g: Vec::new() }
        }
        Shard::Reg { centers } => {
            let m = centers.len();
            let min_df = |f: f64| -> f64 {
                rs.lambda_min * (-rs.beta * sgn(f) * (-rs.beta * f.abs()).exp()) / rs.count
            };
            let eik_scale = |g: &Vec3| -> f64 {
                let n = g.norm();
                if n > 0.0 {
                    rs.lambda_eik * 2.0 * (n - 1.0) / n / rs.count
                } else {
                    0.0
                }
            };
            match mode {
                GradientMode::Numerical(h) => {
                    let mut pts = Vec::with_capacity(7 * m);
                    pts.extend_from_slice(centers);
                    for c in centers.iter() {
                        for d in 0..3 {
                            let mut e = Vec3::zeros();
                            e[d] = h;
                            pts.push(c + e);
                            pts.push(c - e);
                        }
                    }
                    ws.forward(p, &pts, false);
                    let v: Vec<f64> = ws.values().iter().map(|&x| f64_of(x)).collect();
                    let mut df = vec![T::zero(); 7 * m];
                    let mut reg_g = Vec::with_capacity(m);
                    for j in 0..m {
                        let g = Vec3::from_fn(|d, _| (v[m + 6 * j + 2 * d] - v[m + 6 * j + 2 * d + 1]) / (2.0 * h));
                        df[j] = T::lit(min_df(v[j]));
                        let s = eik_scale(&g);
                        for d in 0..3 {
                            let dd = s * g[d] / (2.0 * h);
                            df[m + 6 * j + 2 * d] = T::lit(dd);
                            df[m + 6 * j + 2 * d + 1] = T::lit(-dd);
                        }
                        reg_g.push(g);
                    }
                    ws.backward(p, &df, None, &mut mlp);
                    ShardOut { mlp, ws, reg_f: v[..m].to_vec(), reg_g }
                }
                GradientMode::AnalyticForward => {
                    ws.forward(p, centers, true);
                    let v: Vec<f64> = ws.values().iter().map(|&x| f64_of(x)).collect();
                    let mut df = vec![T::zero(); m];
                    let mut dg = vec![T::zero(); 3 * m];
                    let mut reg_g = Vec::with_capacity(m);
                    for j in 0..m {
                        let gt = ws.gradient(j);
                        let g = Vec3::new(f64_of(gt[0]), f64_of(gt[1]), f64_of(gt[2]));
                        df[j] = T::lit(min_df(v[j]));
                        let s = eik_scale(&g);
                        for d in 0..3 {
                            dg[3 * j + d] = T::lit(s * g[d]);
                        }
                        reg_g.push(g);
                    }
                    ws.backward(p, &df, Some(&dg), &mut mlp);
                    ShardOut { mlp, ws, reg_f: v, reg_g }
                }
            }
        }
    }
}

/// Loss value and gradients of every learnable tensor for one batch of
/// labeled samples and one set of regularization points.
pub fn total_loss_and_grads<T: Real>(
    params: &FieldParams<T>,
    batch: &[LabeledSample],
    reg: &[Vec3],
    objective: &Objective,
) -> Result<(LossBreakdown, FieldGrads<T>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty training batch".into()));
    }
    let w = objective.weights;
    let xs: Vec<Vec3> = batch.iter().map(|s| s.x).collect();
    let f: Vec<f64> = params.eval_batch(&xs).into_iter().map(f64_of).collect();
    let classes = classify_symmetric_difference(batch, &f);

    let n_on = classes.iter().filter(|c| **c == SampleClass::On).count();
    let n_off = classes.iter().filter(|c| **c == SampleClass::Off).count();
    let (on, off, active): (f64, f64, Vec<(usize, f64)>) = match objective.data_loss {
        DataLoss::SymmetricDifference => {
            let f_on: Vec<f64> = (0..batch.len()).filter(|&i| classes[i] == SampleClass::On).map(|i| f[i]).collect();
            let pairs: Vec<(f64, f64)> =
                (0..batch.len()).filter(|&i| classes[i] == SampleClass::Off).map(|i| (f[i], batch[i].f2d)).collect();
            let active = (0..batch.len())
                .filter_map(|i| match classes[i] {
                    SampleClass::On => Some((i, sgn(f[i]) / n_on as f64)),
                    SampleClass::Off => Some((i, 2.0 * (f[i] - batch[i].f2d) / n_off as f64)),
                    SampleClass::Agree => None,
                })
                .collect();
            (loss_on(&f_on), loss_off(&pairs), active)
        }
        DataLoss::L1Everywhere => {
            let pairs: Vec<(f64, f64)> = (0..batch.len()).map(|i| (f[i], batch[i].f2d)).collect();
            let n = batch.len() as f64;
            let active = (0..batch.len())
                .map(|i| {
                    let r = f[i] - batch[i].f2d;
                    (i, sgn(r) / n)
                })
                .collect();
            (loss_l1(&pairs), 0.0, active)
        }
    };

    let mut shards: Vec<Shard<'_, T>> = active
        .chunks(DATA_SHARD)
        .map(|c| Shard::Data { xs: c.iter().map(|&(i, _)| batch[i].x).collect(), df: c.iter().map(|&(_, d)| T::lit(d)).collect() })
        .collect();
    shards.extend(reg.chunks(REG_SHARD).map(|centers| Shard::Reg { centers }));

    let rs = RegScale { count: reg.len().max(1) as f64, lambda_eik: w.lambda_eik, lambda_min: w.lambda_min, beta: w.beta_min };
    let mut grads = FieldGrads::zeros_like(params);
    let mut reg_f = Vec::with_capacity(reg.len());
    let mut reg_g = Vec::with_capacity(reg.len());
    let group = rayon::current_num_threads().max(1) * 2;
    for chunk in shards.chunks(group) {
        let outs: Vec<ShardOut<T>> = chunk.par_iter().map(|s| run_shard(params, s, objective.mode, &rs)).collect();
        for o in outs {
            for (g, v) in grads.mlp.iter_mut().zip(&o.mlp) {
                *g += *v;
            }
            o.ws.scatter_hash_grads(params, &mut grads.tables);
            reg_f.extend(o.reg_f);
            reg_g.extend(o.reg_g);
        }
    }

    let eik = loss_eikonal(&reg_g);
    let min = loss_min_surface(&reg_f, w.beta_min);
    let total = on + off + w.lambda_eik * eik + w.lambda_min * min;
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss { on, off, eik, min });
    }
    let breakdown = LossBreakdown {
        total,
        on,
        off,
        eik,
        min,
        n_on,
        n_off,
        n_offcontour: batch.len() - n_on,
        n_reg: reg.len(),
    };
    Ok((breakdown, grads))
}
