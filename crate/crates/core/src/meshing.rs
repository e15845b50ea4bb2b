//! Marching-cubes extraction of the zero level set.
//!
//! The 256-case triangle table is generated rather than transcribed: on every
//! cube face the inside corners are cut off one run at a time, which
//! separates diagonally opposite inside corners on ambiguous faces. Both
//! cubes sharing a face see the same sign pattern, so neighbouring cubes
//! always produce matching edges and the surface is watertight.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::field::FieldParams;
use crate::geometry::{NormalizationTransform, TriMesh, Vec3};
use crate::real::Real;
use crate::{Error, Result};

/// Corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Face corners in counter-clockwise order seen from outside the cube.
const FACES: [[usize; 4]; 6] = [
    [0, 2, 3, 1], // z = 0
    [4, 5, 7, 6], // z = 1
    [0, 1, 5, 4], // y = 0
    [2, 6, 7, 3], // y = 1
    [0, 4, 6, 2], // x = 0
    [1, 3, 7, 5], // x = 1
];

fn edge_between(a: usize, b: usize) -> usize {
    EDGES.iter().position(|&(p, q)| (p, q) == (a.min(b), a.max(b))).expect("corners share an edge")
}

fn case_triangles(case: usize) -> Vec<[usize; 3]> {
    let inside = |c: usize| case >> c & 1 == 1;
    // Directed segments: entry edge of an inside run -> exit edge.
    let mut next: [Option<usize>; 12] = [None; 12];
    for face in FACES {
        for i in 0..4 {
            let (prev, cur) = (face[(i + 3) % 4], face[i]);
            if inside(prev) || !inside(cur) {
                continue;
            }
            let mut j = i;
            while inside(face[(j + 1) % 4]) {
                j = (j + 1) % 4;
            }
            let exit = edge_between(face[j], face[(j + 1) % 4]);
            next[edge_between(prev, cur)] = Some(exit);
        }
    }
    let mut seen = [false; 12];
    let mut tris = Vec::new();
    for start in 0..12 {
        if seen[start] || next[start].is_none() {
            continue;
        }
        let mut ring = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            ring.push(e);
            e = next[e].expect("closed loop");
        }
        for k in 1..ring.len() - 1 {
            tris.push([ring[0], ring[k], ring[k + 1]]);
        }
    }
    tris
}

fn case_table() -> &'static [Vec<[usize; 3]>] {
    static TABLE: OnceLock<Vec<Vec<[usize; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(case_triangles).collect())
}

/// Grid and domain for extraction. `resolution` counts cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionConfig {
    pub resolution: usize,
    pub bounds: (Vec3, Vec3),
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig::with_resolution(256)
    }
}

impl ExtractionConfig {
    pub fn with_resolution(resolution: usize) -> Self {
        ExtractionConfig { resolution, bounds: (Vec3::repeat(-1.0), Vec3::repeat(1.0)) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::InvalidInput(format!("resolution must be at least 8, got {}", self.resolution)));
        }
        let (lo, hi) = self.bounds;
        if !(0..3).all(|d| lo[d].is_finite() && hi[d].is_finite() && hi[d] > lo[d]) {
            return Err(Error::InvalidInput("extraction bounds must be finite and non-empty".into()));
        }
        Ok(())
    }

    /// Edge length of one cell along each axis.
    pub fn cell(&self) -> Vec3 {
        (self.bounds.1 - self.bounds.0) / self.resolution as f64
    }

    fn point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.bounds.0 + self.cell().component_mul(&Vec3::new(i as f64, j as f64, k as f64))
    }
}

/// Extracts `{f = 0}` from a batch evaluator, with negative values inside.
/// A field that never changes sign gives an empty mesh.
pub fn marching_cubes<F>(eval: F, config: &ExtractionConfig) -> Result<TriMesh>
where
    F: Fn(&[Vec3]) -> Vec<f64>,
{
    config.validate()?;
    let r = config.resolution;
    let s = r + 1;
    let mut values = Vec::with_capacity(s * s * s);
    for k in 0..s {
        let layer: Vec<Vec3> = (0..s * s).map(|ij| config.point(ij % s, ij / s, k)).collect();
        let v = eval(&layer);
        if v.len() != layer.len() {
            return Err(Error::InvalidInput("evaluator returned the wrong number of values".into()));
        }
        values.extend(v);
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        let (i, j, k) = (bad % s, bad / s % s, bad / (s * s));
        return Err(Error::InvalidInput(format!("non-finite field value at grid point ({i}, {j}, {k})")));
    }
    let at = |i: usize, j: usize, k: usize| values[(k * s + j) * s + i];
    // Global id of the lattice edge leaving grid point (i, j, k) along `axis`.
    let edge_id = |i: usize, j: usize, k: usize, axis: usize| (((k * s + j) * s + i) * 3 + axis) as u64;
    let table = case_table();

    let layers: Vec<Vec<[u64; 3]>> = (0..r)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            for j in 0..r {
                for i in 0..r {
                    let corner = |c: usize| (i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1));
                    let mut case = 0;
                    for c in 0..8 {
                        let (a, b, cc) = corner(c);
                        if at(a, b, cc) < 0.0 {
                            case |= 1 << c;
                        }
                    }
                    if case == 0 || case == 255 {
                        continue;
                    }
                    let gid = |e: usize| {
                        let (p, q) = EDGES[e];
                        let (a, b, c) = corner(p);
                        edge_id(a, b, c, (p ^ q).trailing_zeros() as usize)
                    };
                    for t in &table[case] {
                        tris.push([gid(t[0]), gid(t[1]), gid(t[2])]);
                    }
                }
            }
            tris
        })
        .collect();

    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut mesh = TriMesh::default();
    for tri in layers.into_iter().flatten() {
        let mut out = [0u32; 3];
        for (slot, &e) in out.iter_mut().zip(&tri) {
            *slot = *ids.entry(e).or_insert_with(|| {
                let axis = (e % 3) as usize;
                let g = (e / 3) as usize;
                let (i, j, k) = (g % s, g / s % s, g / (s * s));
                let mut n = [i, j, k];
                n[axis] += 1;
                let (v0, v1) = (at(i, j, k), at(n[0], n[1], n[2]));
                let t = v0 / (v0 - v1);
                let (p0, p1) = (config.point(i, j, k), config.point(n[0], n[1], n[2]));
                mesh.vertices.push(p0 + (p1 - p0) * t);
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(out);
    }
    mesh.weld(1e-7);
    Ok(mesh)
}

/// Marching cubes over a pointwise function.
pub fn extract_fn<F>(f: F, config: &ExtractionConfig) -> Result<TriMesh>
where
    F: Fn(&Vec3) -> f64 + Sync,
{
    marching_cubes(|xs: &[Vec3]| xs.par_iter().map(&f).collect(), config)
}

/// Extracts the zero set of a trained field and maps it back to input
/// coordinates.
pub fn extract_mesh<T: Real>(params: &FieldParams<T>, config: &ExtractionConfig) -> Result<TriMesh> {
    params.check_finite()?;
    let mut mesh = marching_cubes(
        |xs: &[Vec3]| params.eval_batch(xs).into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        config,
    )?;
    denormalize(&mut mesh, &params.normalization);
    Ok(mesh)
}

pub fn denormalize(mesh: &mut TriMesh, t: &NormalizationTransform) {
    mesh.map_vertices(|v| t.inverse(v));
}
