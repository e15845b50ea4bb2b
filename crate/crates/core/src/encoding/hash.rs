use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::{Error, Result, Vec3};

pub const HASH_PRIMES: [u64; 3] = [1, 2_654_435_761, 805_459_861];

const INIT_RANGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub features: usize,
    pub table_size: usize,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig { levels: 16, n_min: 1 << 5, n_max: 1 << 10, features: 4, table_size: 1 << 22 }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| Err(Error::Config { key: key.into(), message: message.into() });
        if self.levels == 0 {
            return bad("hash_levels", "must be positive");
        }
        if self.n_min == 0 || self.n_max < self.n_min {
            return bad("hash_nmax_log2", "need 0 < n_min <= n_max");
        }
        if self.features == 0 {
            return bad("hash_feat", "must be positive");
        }
        if self.table_size == 0 || self.table_size > u32::MAX as usize {
            return bad("hash_table_log2", "table size out of range");
        }
        Ok(())
    }

    pub fn growth(&self) -> f64 {
        if self.levels < 2 {
            return 1.0;
        }
        ((self.n_max as f64).ln() - (self.n_min as f64).ln()).exp().powf(1.0 / (self.levels - 1) as f64)
    }

    /// Lattice resolution of level `l`. A tiny slack absorbs rounding so
    /// that the top level lands on `n_max` exactly.
    pub fn resolution(&self, level: usize) -> usize {
        (self.n_min as f64 * self.growth().powi(level as i32) + 1e-9).floor() as usize
    }

    pub fn is_dense(&self, level: usize) -> bool {
        let side = (self.resolution(level) + 1) as u128;
        side * side * side <= self.table_size as u128
    }

    /// Number of feature vectors stored for a level.
    pub fn level_entries(&self, level: usize) -> usize {
        let side = self.resolution(level) + 1;
        if self.is_dense(level) {
            side * side * side
        } else {
            self.table_size
        }
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features
    }

    pub fn param_count(&self) -> usize {
        (0..self.levels).map(|l| self.level_entries(l)).sum::<usize>() * self.features
    }
}

/// Table index of a lattice vertex. Coarse levels whose lattice fits the
/// table are indexed densely; the rest use the XOR-of-products hash.
pub fn hash_index(cell: [u32; 3], resolution: usize, table_size: usize) -> usize {
    let side = (resolution + 1) as u64;
    if (side as u128).pow(3) <= table_size as u128 {
        (cell[2] as u64 * side * side + cell[1] as u64 * side + cell[0] as u64) as usize
    } else {
        let h = (cell[0] as u64).wrapping_mul(HASH_PRIMES[0])
            ^ (cell[1] as u64).wrapping_mul(HASH_PRIMES[1])
            ^ (cell[2] as u64).wrapping_mul(HASH_PRIMES[2]);
        ((h & 0xffff_ffff) % table_size as u64) as usize
    }
}

/// Corner table offsets (already scaled by the feature count) and
/// trilinear weights for one point, `levels x 8` each.
#[derive(Debug, Clone, Default)]
pub struct HashCorners<T> {
    pub index: Vec<u32>,
    pub weight: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid<T> {
    config: HashGridConfig,
    resolutions: Vec<usize>,
    dense: Vec<bool>,
    offsets: Vec<usize>,
    pub tables: Vec<T>,
}

struct Cell<T> {
    base: [u32; 3],
    frac: [T; 3],
    scale: T,
}

impl<T: Real> HashGrid<T> {
    pub fn zeros(config: HashGridConfig) -> Result<Self> {
        config.validate()?;
        let resolutions: Vec<usize> = (0..config.levels).map(|l| config.resolution(l)).collect();
        let mut offsets = Vec::with_capacity(config.levels + 1);
        let mut total = 0;
        for l in 0..config.levels {
            offsets.push(total);
            total += config.level_entries(l) * config.features;
        }
        offsets.push(total);
        let dense = (0..config.levels).map(|l| config.is_dense(l)).collect();
        Ok(HashGrid { config, resolutions, dense, offsets, tables: vec![T::zero(); total] })
    }

    pub fn new<R: Rng>(config: HashGridConfig, rng: &mut R) -> Result<Self> {
        let mut grid = Self::zeros(config)?;
        let dist = Uniform::new(-INIT_RANGE, INIT_RANGE).expect("valid range");
        for v in grid.tables.iter_mut() {
            *v = T::lit(dist.sample(rng));
        }
        Ok(grid)
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.config
    }

    pub fn resolutions(&self) -> &[usize] {
        &self.resolutions
    }

    /// Start of each level's block in `tables`.
    pub fn level_offset(&self, level: usize) -> usize {
        self.offsets[level]
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    fn cell(&self, level: usize, x: &Vec3) -> Cell<T> {
        let n = self.resolutions[level];
        let mut base = [0u32; 3];
        let mut frac = [T::zero(); 3];
        for d in 0..3 {
            let u = (x[d].clamp(-1.0, 1.0) + 1.0) * 0.5;
            let p = u * n as f64;
            // p >= 0, so truncation is floor
            let c = (p as usize).min(n - 1);
            base[d] = c as u32;
            frac[d] = T::lit(p - c as f64);
        }
        Cell { base, frac, scale: T::lit(n as f64 * 0.5) }
    }

    /// Table offsets (scaled by the feature count) of the 8 corners of the
    /// cell with lower corner `base`, in corner order x fastest.
    fn corner_offsets(&self, level: usize, base: [u32; 3]) -> [usize; 8] {
        let n = self.resolutions[level];
        let side = (n + 1) as u64;
        let f = self.config.features;
        let start = self.offsets[level];
        let mut out = [0usize; 8];
        if self.dense[level] {
            let b = base[2] as u64 * side * side + base[1] as u64 * side + base[0] as u64;
            let steps = [0, 1, side, side + 1, side * side, side * side + 1, side * side + side, side * side + side + 1];
            for c in 0..8 {
                out[c] = start + (b + steps[c]) as usize * f;
            }
        } else {
            let t = self.config.table_size as u64;
            let mask = if t.is_power_of_two() { t - 1 } else { 0 };
            let hx = [base[0] as u64 * HASH_PRIMES[0], (base[0] as u64 + 1) * HASH_PRIMES[0]];
            let hy = [base[1] as u64 * HASH_PRIMES[1], (base[1] as u64 + 1) * HASH_PRIMES[1]];
            let hz = [base[2] as u64 * HASH_PRIMES[2], (base[2] as u64 + 1) * HASH_PRIMES[2]];
            for c in 0..8 {
                let h = (hx[c & 1] ^ hy[(c >> 1) & 1] ^ hz[(c >> 2) & 1]) & 0xffff_ffff;
                let slot = if mask != 0 { h & mask } else { h % t };
                out[c] = start + slot as usize * f;
            }
        }
        out
    }

    /// Encodes one point, writing `levels * features` values into `out` and,
    /// when given, the corner offsets and weights used.
    pub fn encode_into(&self, x: &Vec3, out: &mut [T], mut corners: Option<(&mut [u32], &mut [T])>) {
        if x.iter().any(|c| c.abs() > 1.0) {
            log::trace!("hash encoding clamped out-of-domain point {x:?}");
        }
        let f = self.config.features;
        for l in 0..self.config.levels {
            let cell = self.cell(l, x);
            let offs = self.corner_offsets(l, cell.base);
            let one = T::one();
            let wx = [one - cell.frac[0], cell.frac[0]];
            let wy = [one - cell.frac[1], cell.frac[1]];
            let wz = [one - cell.frac[2], cell.frac[2]];
            let o = &mut out[l * f..(l + 1) * f];
            o.iter_mut().for_each(|v| *v = T::zero());
            for c in 0..8 {
                let w = wx[c & 1] * wy[(c >> 1) & 1] * wz[(c >> 2) & 1];
                let feats = &self.tables[offs[c]..offs[c] + f];
                for (v, &t) in o.iter_mut().zip(feats) {
                    *v += w * t;
                }
                if let Some((idx, wt)) = corners.as_mut() {
                    idx[l * 8 + c] = offs[c] as u32;
                    wt[l * 8 + c] = w;
                }
            }
        }
    }

    pub fn encode(&self, x: &Vec3) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_dim()];
        self.encode_into(x, &mut out, None);
        out
    }

    /// Derivative of the trilinear weight of `corner` along axis `axis`,
    /// in lattice units.
    fn weight_derivative(frac: &[T; 3], corner: usize, axis: usize) -> T {
        let mut w = T::one();
        for d in 0..3 {
            let hi = (corner >> d) & 1 == 1;
            w *= if d == axis {
                if hi { T::one() } else { -T::one() }
            } else if hi {
                frac[d]
            } else {
                T::one() - frac[d]
            };
        }
        w
    }

    /// Corner weight derivatives w.r.t. world coordinates, `levels x 8 x 3`.
    /// On a cell face the derivative is one-sided, taken from the cell the
    /// point was assigned to.
    pub fn weight_gradients(&self, x: &Vec3, out: &mut [T]) {
        for l in 0..self.config.levels {
            let cell = self.cell(l, x);
            for c in 0..8 {
                for d in 0..3 {
                    let inside = x[d].abs() <= 1.0;
                    let g = if inside { Self::weight_derivative(&cell.frac, c, d) * cell.scale } else { T::zero() };
                    out[(l * 8 + c) * 3 + d] = g;
                }
            }
        }
    }

    /// Jacobian of the encoding, row-major `(levels * features) x 3`.
    pub fn jacobian(&self, x: &Vec3) -> Vec<T> {
        let f = self.config.features;
        let mut dw = vec![T::zero(); self.config.levels * 24];
        self.weight_gradients(x, &mut dw);
        let mut jac = vec![T::zero(); self.output_dim() * 3];
        for l in 0..self.config.levels {
            let cell = self.cell(l, x);
            let offs = self.corner_offsets(l, cell.base);
            for c in 0..8 {
                let off = offs[c];
                for k in 0..f {
                    let t = self.tables[off + k];
                    for d in 0..3 {
                        jac[(l * f + k) * 3 + d] += dw[(l * 8 + c) * 3 + d] * t;
                    }
                }
            }
        }
        jac
    }
}

pub fn encode_hash<T: Real>(x: &Vec3, grid: &HashGrid<T>) -> Vec<T> {
    grid.encode(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::{prop_assert, proptest};

    fn tiny() -> HashGridConfig {
        HashGridConfig { levels: 2, n_min: 4, n_max: 8, features: 2, table_size: 1 << 6 }
    }

    fn grid(config: HashGridConfig, seed: u64) -> HashGrid<f64> {
        let mut g = HashGrid::<f64>::new(config, &mut rng::stream(&[99, seed])).unwrap();
        // larger features make interpolation errors visible
        g.tables.iter_mut().for_each(|v| *v *= 1e4);
        g
    }

    #[test]
    fn default_levels() {
        let c = HashGridConfig::default();
        assert!((c.growth() - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        let res: Vec<usize> = (0..16).map(|l| c.resolution(l)).collect();
        assert_eq!(res[0], 32);
        assert_eq!(res[3], 64);
        assert_eq!(res[15], 1024);
        assert!(res.windows(2).all(|w| w[0] <= w[1]));
        assert!(c.is_dense(0));
        assert!(!c.is_dense(15));
    }

    #[test]
    fn dense_level_zero_is_row_major_bijection() {
        let t = 1usize << 22;
        let mut seen = vec![false; 33 * 33 * 33];
        for z in 0..33u32 {
            for y in 0..33u32 {
                for x in 0..33u32 {
                    let i = hash_index([x, y, z], 32, t);
                    assert_eq!(i, (z * 33 * 33 + y * 33 + x) as usize);
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(hash_index([0, 0, 0], 1024, t), 0);
    }

    proptest! {
        #[test]
        fn hashed_index_in_range(x in 0u32..2000, y in 0u32..2000, z in 0u32..2000, t in 1usize..100_000) {
            prop_assert!(hash_index([x, y, z], 1024, t) < t);
        }
    }

    #[test]
    fn lattice_vertex_returns_stored_features() {
        let g = grid(tiny(), 1);
        let n = g.resolutions()[1];
        let v = [3u32, 1, 5];
        let x = Vec3::from_fn(|d, _| v[d] as f64 / n as f64 * 2.0 - 1.0);
        let out = g.encode(&x);
        let off = g.level_offset(1) + hash_index(v, n, 64) * 2;
        assert_eq!(&out[2..4], &g.tables[off..off + 2]);
    }

    #[test]
    fn edge_midpoint_averages() {
        let g = grid(tiny(), 2);
        let n = g.resolutions()[0] as f64;
        let to_x = |i: f64| i / n * 2.0 - 1.0;
        let x = Vec3::new(to_x(1.5), to_x(2.0), to_x(3.0));
        let out = g.encode(&x);
        let fa = g.level_offset(0) + hash_index([1, 2, 3], 4, 64) * 2;
        let fb = g.level_offset(0) + hash_index([2, 2, 3], 4, 64) * 2;
        for k in 0..2 {
            assert!((out[k] - 0.5 * (g.tables[fa + k] + g.tables[fb + k])).abs() < 1e-12);
        }
    }

    // Materializes every lattice vertex's features and interpolates by
    // definition.
    fn dense_oracle(g: &HashGrid<f64>, x: &Vec3) -> Vec<f64> {
        let c = g.config();
        let mut out = Vec::new();
        for l in 0..c.levels {
            let n = g.resolutions()[l];
            let side = n + 1;
            let mut lattice = vec![vec![0.0; c.features]; side * side * side];
            for z in 0..side {
                for y in 0..side {
                    for xi in 0..side {
                        let off = g.level_offset(l) + hash_index([xi as u32, y as u32, z as u32], n, c.table_size) * c.features;
                        lattice[(z * side + y) * side + xi] = g.tables[off..off + c.features].to_vec();
                    }
                }
            }
            let p: Vec<f64> = (0..3).map(|d| (x[d] + 1.0) * 0.5 * n as f64).collect();
            let mut acc = vec![0.0; c.features];
            for z in 0..side {
                for y in 0..side {
                    for xi in 0..side {
                        let hat = |i: usize, q: f64| (1.0 - (q - i as f64).abs()).max(0.0);
                        let w = hat(xi, p[0]) * hat(y, p[1]) * hat(z, p[2]);
                        for k in 0..c.features {
                            acc[k] += w * lattice[(z * side + y) * side + xi][k];
                        }
                    }
                }
            }
            out.extend(acc);
        }
        out
    }

    #[test]
    fn matches_dense_lattice_oracle() {
        // table of 64 entries: level 0 (5^3 = 125) already hashes
        for config in [tiny(), HashGridConfig { table_size: 1 << 10, ..tiny() }] {
            let g = grid(config, 3);
            let mut r = rng::stream(&[5]);
            for _ in 0..200 {
                let x = Vec3::from_fn(|_, _| r.random_range(-1.0..1.0));
                let a = g.encode(&x);
                let b = dense_oracle(&g, &x);
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-12, "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn continuous_across_faces() {
        let g = grid(HashGridConfig { table_size: 1 << 12, ..HashGridConfig::default() }, 4);
        let mut r = rng::stream(&[6]);
        for _ in 0..10_000 {
            let l = r.random_range(0..g.config().levels);
            let n = g.resolutions()[l];
            let axis = r.random_range(0..3);
            let mut x = Vec3::from_fn(|_, _| r.random_range(-0.99..0.99));
            let face = r.random_range(1..n) as f64;
            x[axis] = face / n as f64 * 2.0 - 1.0;
            let mut lo = x;
            let mut hi = x;
            lo[axis] -= 1e-13;
            hi[axis] += 1e-13;
            let (a, b) = (g.encode(&lo), g.encode(&hi));
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_of_domain_is_clamped() {
        let g = grid(tiny(), 7);
        assert_eq!(g.encode(&Vec3::new(1.5, -3.0, 0.2)), g.encode(&Vec3::new(1.0, -1.0, 0.2)));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = grid(HashGridConfig { table_size: 1 << 12, ..HashGridConfig::default() }, 8);
        let mut r = rng::stream(&[9]);
        let h = 1e-5;
        let mut checked = 0;
        while checked < 100 {
            let x = Vec3::from_fn(|_, _| r.random_range(-0.95..0.95));
            // skip points within h of a face at any level
            let near_face = g.resolutions().iter().any(|&n| {
                (0..3).any(|d| {
                    let p = (x[d] + 1.0) * 0.5 * n as f64;
                    let fr = p - p.floor();
                    fr < 1e-2 || fr > 1.0 - 1e-2
                })
            });
            if near_face {
                continue;
            }
            checked += 1;
            let jac = g.jacobian(&x);
            for d in 0..3 {
                let mut a = x;
                let mut b = x;
                a[d] += h;
                b[d] -= h;
                let (fa, fb) = (g.encode(&a), g.encode(&b));
                for k in 0..g.output_dim() {
                    let fd = (fa[k] - fb[k]) / (2.0 * h);
                    let an = jac[k * 3 + d];
                    assert!((fd - an).abs() <= 1e-4 * an.abs().max(1.0), "{fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn constant_tables_have_zero_jacobian() {
        let mut g = HashGrid::<f64>::zeros(tiny()).unwrap();
        g.tables.iter_mut().for_each(|v| *v = 0.7);
        let jac = g.jacobian(&Vec3::new(0.13, -0.4, 0.77));
        assert!(jac.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn init_is_small_and_deterministic() {
        let c = HashGridConfig { table_size: 1 << 10, ..HashGridConfig::default() };
        let a = HashGrid::<f32>::new(c, &mut rng::stream(&[1, 2])).unwrap();
        let b = HashGrid::<f32>::new(c, &mut rng::stream(&[1, 2])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tables.len(), c.param_count());
        assert!(a.tables.iter().all(|v| v.abs() <= 1e-4));
    }
}
