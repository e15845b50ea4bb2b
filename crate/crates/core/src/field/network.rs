//! Batched forward and reverse passes. With tangents enabled every point
//! also carries three forward-mode tangent rows (one per input axis), so
//! the batch matrices hold `n` primal rows followed by `3n` tangent rows
//! and the output tangent rows are the spatial gradient.

use super::{FieldParams, LayerShape};
use crate::real::Real;
use crate::Vec3;

pub(crate) const EVAL_CHUNK: usize = 1024;

#[derive(Debug, Default, Clone)]
pub struct Workspace<T> {
    n: usize,
    tangents: bool,
    idx: Vec<u32>,
    w: Vec<T>,
    dw: Vec<T>,
    enc_h: Vec<T>,
    enc_r: Vec<T>,
    pre_h: Vec<T>,
    act_h: Vec<T>,
    sig_h: Vec<T>,
    zh: Vec<T>,
    pre_r: Vec<T>,
    act_r: Vec<T>,
    sig_r: Vec<T>,
    zr: Vec<T>,
    zf: Vec<T>,
    pre_s: Vec<T>,
    act_s: Vec<T>,
    sig_s: Vec<T>,
    out: Vec<T>,
    d_enc_h: Vec<T>,
}

fn fit<T: Real>(v: &mut Vec<T>, len: usize) {
    v.clear();
    v.resize(len, T::zero());
}

fn dense_forward<T: Real>(rows: usize, n: usize, fan_in: usize, fan_out: usize, x: &[T], w: &[T], b: &[T], y: &mut [T]) {
    T::gemm(rows, fan_in, fan_out, T::one(), x, false, w, false, T::zero(), y);
    for row in y[..n * fan_out].chunks_exact_mut(fan_out) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dense_backward<T: Real>(
    rows: usize,
    n: usize,
    fan_in: usize,
    fan_out: usize,
    x: &[T],
    w: &[T],
    dy: &[T],
    grad_w: &mut [T],
    grad_b: &mut [T],
    dx: Option<&mut Vec<T>>,
) {
    T::gemm(fan_in, rows, fan_out, T::one(), x, true, dy, false, T::one(), grad_w);
    for row in dy[..n * fan_out].chunks_exact(fan_out) {
        for (g, &d) in grad_b.iter_mut().zip(row) {
            *g += d;
        }
    }
    if let Some(dx) = dx {
        fit(dx, rows * fan_in);
        T::gemm(rows, fan_out, fan_in, T::one(), dy, false, w, true, T::zero(), dx);
    }
}

fn layer_grad<T>(g: &mut [T], layers: [LayerShape; 6], i: usize) -> (&mut [T], &mut [T]) {
    let l = layers[i];
    g[l.weight..l.bias + l.fan_out].split_at_mut(l.fan_in * l.fan_out)
}

fn softplus_forward<T: Real>(beta: T, n: usize, rows: usize, width: usize, pre: &[T], act: &mut Vec<T>, sig: &mut Vec<T>) {
    fit(act, rows * width);
    fit(sig, n * width);
    T::softplus(beta, &pre[..n * width], &mut act[..n * width], sig);
    let primal = n * width;
    for t in 1..rows / n.max(1) {
        let (block, pre_t) = (&mut act[t * primal..(t + 1) * primal], &pre[t * primal..(t + 1) * primal]);
        for ((a, &p), &s) in block.iter_mut().zip(pre_t).zip(sig.iter()) {
            *a = s * p;
        }
    }
}

// Turns the gradient w.r.t. activations into the gradient w.r.t.
// pre-activations, in place.
fn softplus_backward<T: Real>(beta: T, n: usize, rows: usize, width: usize, pre: &[T], sig: &[T], d: &mut [T]) {
    let primal = n * width;
    let blocks = rows / n.max(1);
    let (head, tail) = d.split_at_mut(primal);
    for (i, (dv, &s)) in head.iter_mut().zip(sig).enumerate() {
        let mut acc = *dv * s;
        if blocks > 1 {
            let curv = beta * s * (T::one() - s);
            for t in 1..blocks {
                let j = (t - 1) * primal + i;
                acc += tail[j] * pre[t * primal + i] * curv;
            }
        }
        *dv = acc;
    }
    for t in 1..blocks {
        for (dv, &s) in tail[(t - 1) * primal..t * primal].iter_mut().zip(sig) {
            *dv *= s;
        }
    }
}

impl<T: Real> Workspace<T> {
    pub fn new() -> Self {
        Workspace::default()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Field values of the last forward pass.
    pub fn values(&self) -> &[T] {
        &self.out[..self.n]
    }

    /// Analytic spatial gradient of point `i`; requires a tangent pass.
    pub fn gradient(&self, i: usize) -> [T; 3] {
        assert!(self.tangents, "forward pass ran without tangents");
        [self.out[self.n + i], self.out[2 * self.n + i], self.out[3 * self.n + i]]
    }

    pub fn forward(&mut self, p: &FieldParams<T>, xs: &[Vec3], tangents: bool) {
        let c = *p.config();
        let n = xs.len();
        let rows = if tangents { 4 * n } else { n };
        self.n = n;
        self.tangents = tangents;
        let (levels, feat) = (c.hash.levels, c.hash.features);
        let dh = levels * feat;
        let dr = c.rff_dim;
        let beta = T::lit(c.beta_act);
        let alpha = T::lit(c.alpha);

        self.idx.clear();
        self.idx.resize(n * levels * 8, 0);
        fit(&mut self.w, n * levels * 8);
        fit(&mut self.enc_h, rows * dh);
        fit(&mut self.enc_r, rows * dr);
        for (i, x) in xs.iter().enumerate() {
            let (ii, ww) = (&mut self.idx[i * levels * 8..(i + 1) * levels * 8], &mut self.w[i * levels * 8..(i + 1) * levels * 8]);
            p.grid.encode_into(x, &mut self.enc_h[i * dh..(i + 1) * dh], Some((ii, ww)));
            p.rff.encode_into(x, &mut self.enc_r[i * dr..(i + 1) * dr]);
        }
        if tangents {
            fit(&mut self.dw, n * levels * 24);
            let mut jac = vec![T::zero(); dr * 3];
            for (i, x) in xs.iter().enumerate() {
                let dw = &mut self.dw[i * levels * 24..(i + 1) * levels * 24];
                p.grid.weight_gradients(x, dw);
                for l in 0..levels {
                    for corner in 0..8 {
                        let slot = (i * levels + l) * 8 + corner;
                        let off = self.idx[slot] as usize;
                        for k in 0..3 {
                            let g = dw[(l * 8 + corner) * 3 + k];
                            let row = (1 + k) * n + i;
                            for j in 0..feat {
                                self.enc_h[row * dh + l * feat + j] += g * p.grid.tables[off + j];
                            }
                        }
                    }
                }
                p.rff.jacobian_into(x, &mut jac);
                for k in 0..3 {
                    let row = (1 + k) * n + i;
                    for j in 0..dr {
                        self.enc_r[row * dr + j] = jac[j * 3 + k];
                    }
                }
            }
        }

        let ly = p.layout().layers;
        let (w0, b0) = p.layer(0);
        fit(&mut self.pre_h, rows * ly[0].fan_out);
        dense_forward(rows, n, dh, ly[0].fan_out, &self.enc_h, w0, b0, &mut self.pre_h);
        softplus_forward(beta, n, rows, ly[0].fan_out, &self.pre_h, &mut self.act_h, &mut self.sig_h);
        let (w1, b1) = p.layer(1);
        fit(&mut self.zh, rows * c.latent);
        dense_forward(rows, n, ly[1].fan_in, c.latent, &self.act_h, w1, b1, &mut self.zh);

        let (w2, b2) = p.layer(2);
        fit(&mut self.pre_r, rows * ly[2].fan_out);
        dense_forward(rows, n, dr, ly[2].fan_out, &self.enc_r, w2, b2, &mut self.pre_r);
        softplus_forward(beta, n, rows, ly[2].fan_out, &self.pre_r, &mut self.act_r, &mut self.sig_r);
        let (w3, b3) = p.layer(3);
        fit(&mut self.zr, rows * c.latent);
        dense_forward(rows, n, ly[3].fan_in, c.latent, &self.act_r, w3, b3, &mut self.zr);

        let zw = c.latent + 3;
        fit(&mut self.zf, rows * zw);
        for r in 0..rows {
            let dst = &mut self.zf[r * zw..(r + 1) * zw];
            for j in 0..c.latent {
                dst[j] = self.zh[r * c.latent + j] + alpha * self.zr[r * c.latent + j];
            }
            if r < n {
                for d in 0..3 {
                    dst[c.latent + d] = T::lit(xs[r][d]);
                }
            } else {
                dst[c.latent + (r / n - 1)] = T::one();
            }
        }

        let (w4, b4) = p.layer(4);
        fit(&mut self.pre_s, rows * c.sdf_hidden);
        dense_forward(rows, n, zw, c.sdf_hidden, &self.zf, w4, b4, &mut self.pre_s);
        softplus_forward(beta, n, rows, c.sdf_hidden, &self.pre_s, &mut self.act_s, &mut self.sig_s);
        let (w5, b5) = p.layer(5);
        fit(&mut self.out, rows);
        dense_forward(rows, n, c.sdf_hidden, 1, &self.act_s, w5, b5, &mut self.out);
    }

    /// Reverse pass for upstream gradients `df` on the values and, after a
    /// tangent pass, `dg` (row-major `n x 3`) on the spatial gradients.
    /// MLP gradients accumulate into `grad_mlp`; the gradient w.r.t. the
    /// hash encoding is kept for [`Workspace::scatter_hash_grads`].
    pub fn backward(&mut self, p: &FieldParams<T>, df: &[T], dg: Option<&[T]>, grad_mlp: &mut [T]) {
        let c = *p.config();
        let n = self.n;
        let rows = if self.tangents { 4 * n } else { n };
        let beta = T::lit(c.beta_act);
        let alpha = T::lit(c.alpha);
        let ly = p.layout().layers;
        assert_eq!(df.len(), n);
        assert_eq!(grad_mlp.len(), p.layout().len());

        let mut d_out = vec![T::zero(); rows];
        d_out[..n].copy_from_slice(df);
        if let (true, Some(dg)) = (self.tangents, dg) {
            for i in 0..n {
                for k in 0..3 {
                    d_out[(1 + k) * n + i] = dg[i * 3 + k];
                }
            }
        }

        let mut d_act_s = Vec::new();
        let (gw, gb) = layer_grad(grad_mlp, ly, 5);
        dense_backward(rows, n, c.sdf_hidden, 1, &self.act_s, p.layer(5).0, &d_out, gw, gb, Some(&mut d_act_s));
        softplus_backward(beta, n, rows, c.sdf_hidden, &self.pre_s, &self.sig_s, &mut d_act_s);
        let zw = c.latent + 3;
        let mut d_zf = Vec::new();
        let (gw, gb) = layer_grad(grad_mlp, ly, 4);
        dense_backward(rows, n, zw, c.sdf_hidden, &self.zf, p.layer(4).0, &d_act_s, gw, gb, Some(&mut d_zf));

        let mut d_zh = vec![T::zero(); rows * c.latent];
        let mut d_zr = vec![T::zero(); rows * c.latent];
        for r in 0..rows {
            for j in 0..c.latent {
                let v = d_zf[r * zw + j];
                d_zh[r * c.latent + j] = v;
                d_zr[r * c.latent + j] = alpha * v;
            }
        }

        let mut d_act_r = Vec::new();
        let (gw, gb) = layer_grad(grad_mlp, ly, 3);
        dense_backward(rows, n, ly[3].fan_in, c.latent, &self.act_r, p.layer(3).0, &d_zr, gw, gb, Some(&mut d_act_r));
        softplus_backward(beta, n, rows, ly[2].fan_out, &self.pre_r, &self.sig_r, &mut d_act_r);
        let (gw, gb) = layer_grad(grad_mlp, ly, 2);
        dense_backward(rows, n, c.rff_dim, ly[2].fan_out, &self.enc_r, p.layer(2).0, &d_act_r, gw, gb, None);

        let mut d_act_h = Vec::new();
        let (gw, gb) = layer_grad(grad_mlp, ly, 1);
        dense_backward(rows, n, ly[1].fan_in, c.latent, &self.act_h, p.layer(1).0, &d_zh, gw, gb, Some(&mut d_act_h));
        softplus_backward(beta, n, rows, ly[0].fan_out, &self.pre_h, &self.sig_h, &mut d_act_h);
        let (gw, gb) = layer_grad(grad_mlp, ly, 0);
        let mut d_enc = std::mem::take(&mut self.d_enc_h);
        dense_backward(rows, n, ly[0].fan_in, ly[0].fan_out, &self.enc_h, p.layer(0).0, &d_act_h, gw, gb, Some(&mut d_enc));
        self.d_enc_h = d_enc;
    }

    /// Adds this batch's hash-table gradient into `grad_tables`, walking
    /// points in order so the result is reproducible.
    pub fn scatter_hash_grads(&self, p: &FieldParams<T>, grad_tables: &mut [T]) {
        let c = p.config().hash;
        let (levels, feat) = (c.levels, c.features);
        let dh = levels * feat;
        let n = self.n;
        for i in 0..n {
            for l in 0..levels {
                for corner in 0..8 {
                    let slot = (i * levels + l) * 8 + corner;
                    let off = self.idx[slot] as usize;
                    let w = self.w[slot];
                    for j in 0..feat {
                        let mut g = w * self.d_enc_h[i * dh + l * feat + j];
                        if self.tangents {
                            for k in 0..3 {
                                g += self.dw[slot * 3 + k] * self.d_enc_h[((1 + k) * n + i) * dh + l * feat + j];
                            }
                        }
                        grad_tables[off + j] += g;
                    }
                }
            }
        }
    }
}
