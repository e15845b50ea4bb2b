//! Binary checkpoint format, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `CSDF` |
//! | 2 | version (u16) |
//! | 40 | u32: levels, n_min, n_max, features, table_size, rff_dim, hash_hidden, rff_hidden, latent, sdf_hidden |
//! | 24 | f64: rff_var, alpha, beta_act |
//! | 32 | f64: normalization center x, y, z, scale |
//! | 8 | u64: parameter count |
//! | 4 per parameter | f32 blob: hash tables level-major, frequency matrix, then each layer's weight and bias for m_hash, m_rff, m_sdf |

use std::path::Path;

use super::{FieldConfig, FieldParams};
use crate::encoding::{HashGrid, HashGridConfig, Rff};
use crate::geometry::NormalizationTransform;
use crate::real::Real;
use crate::{Error, Result, Vec3};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CSDF";
pub const CHECKPOINT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 40 + 24 + 32 + 8;

const SHAPE_FIELDS: [&str; 10] = [
    "hash_levels",
    "hash_nmin",
    "hash_nmax",
    "hash_feat",
    "hash_table_size",
    "rff_dim",
    "hash_hidden",
    "rff_hidden",
    "latent",
    "sdf_hidden",
];

fn shape_values(c: &FieldConfig) -> [usize; 10] {
    [
        c.hash.levels,
        c.hash.n_min,
        c.hash.n_max,
        c.hash.features,
        c.hash.table_size,
        c.rff_dim,
        c.hash_hidden,
        c.rff_hidden,
        c.latent,
        c.sdf_hidden,
    ]
}

pub fn encode_checkpoint<T: Real>(p: &FieldParams<T>) -> Vec<u8> {
    let c = p.config();
    let count = p.param_count();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * count);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in shape_values(c) {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let n = &p.normalization;
    for v in [c.rff_var, c.alpha, c.beta_act, n.center.x, n.center.y, n.center.z, n.scale] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for v in p.grid.tables.iter().chain(&p.rff.b).chain(&p.mlp) {
        out.extend_from_slice(&v.to_f32().expect("finite parameter").to_le_bytes());
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self, total: usize) -> Result<[u8; N]> {
        let end = self.at + N;
        if end > self.data.len() {
            return Err(Error::Truncated { expected: total.max(end), found: self.data.len() });
        }
        let mut b = [0u8; N];
        b.copy_from_slice(&self.data[self.at..end]);
        self.at = end;
        Ok(b)
    }
}

pub fn decode_checkpoint<T: Real>(data: &[u8], expected: Option<&FieldConfig>) -> Result<FieldParams<T>> {
    if data.len() < 4 {
        return Err(Error::Truncated { expected: HEADER_LEN, found: data.len() });
    }
    if &data[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic);
    }
    let mut r = Reader { data, at: 4 };
    let version = u16::from_le_bytes(r.take(HEADER_LEN)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let mut shape = [0usize; 10];
    for s in shape.iter_mut() {
        *s = u32::from_le_bytes(r.take(HEADER_LEN)?) as usize;
    }
    let mut floats = [0f64; 7];
    for f in floats.iter_mut() {
        *f = f64::from_le_bytes(r.take(HEADER_LEN)?);
    }
    let count = u64::from_le_bytes(r.take(HEADER_LEN)?);

    if let Some(exp) = expected {
        for ((name, &found), want) in SHAPE_FIELDS.iter().zip(&shape).zip(shape_values(exp)) {
            if found != want {
                return Err(Error::ShapeMismatch { field: name, found: found as u64, expected: want as u64 });
            }
        }
    }
    let config = FieldConfig {
        hash: HashGridConfig { levels: shape[0], n_min: shape[1], n_max: shape[2], features: shape[3], table_size: shape[4] },
        rff_dim: shape[5],
        hash_hidden: shape[6],
        rff_hidden: shape[7],
        latent: shape[8],
        sdf_hidden: shape[9],
        rff_var: floats[0],
        alpha: floats[1],
        beta_act: floats[2],
    };
    config.validate()?;
    let want = config.param_count() as u64;
    if count != want {
        return Err(Error::ShapeMismatch { field: "param_count", found: count, expected: want });
    }
    let total = HEADER_LEN + 4 * count as usize;
    if data.len() < total {
        return Err(Error::Truncated { expected: total, found: data.len() });
    }
    if data.len() > total {
        return Err(Error::InvalidInput(format!("{} trailing bytes after checkpoint", data.len() - total)));
    }
    let mut blob = data[HEADER_LEN..].chunks_exact(4).map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64));
    let mut grid = HashGrid::zeros(config.hash)?;
    grid.tables.iter_mut().for_each(|v| *v = blob.next().expect("length checked"));
    let rff = Rff { b: blob.by_ref().take(config.rff_dim / 2 * 3).collect() };
    let mlp: Vec<T> = blob.collect();
    let mut p = FieldParams::from_parts(config, grid, rff, mlp)?;
    p.normalization = NormalizationTransform { center: Vec3::new(floats[3], floats[4], floats[5]), scale: floats[6] };
    Ok(p)
}

pub fn save_checkpoint<T: Real>(p: &FieldParams<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(p))?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<FieldParams<T>> {
    decode_checkpoint(&std::fs::read(path)?, None)
}

/// Loads a checkpoint, rejecting it if any shape field differs from
/// `expected`.
pub fn load_checkpoint_expecting<T: Real>(path: impl AsRef<Path>, expected: &FieldConfig) -> Result<FieldParams<T>> {
    decode_checkpoint(&std::fs::read(path)?, Some(expected))
}
