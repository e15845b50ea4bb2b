//! Evaluation metrics: sampled Chamfer and Hausdorff distances, connected
//! components, 2D IoU on held-out slices, volume IoU, and the held-out
//! slice split.
//!
//! Chamfer distance is the two-way mean of unsquared nearest-neighbour
//! distances, halved. Hausdorff distance is the larger of the two one-way
//! maxima over the same samples.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{point_in_contours, Section, TriMesh, Vec2, Vec3};
use crate::rng::{self, TAG_SURFACE};
use crate::{Error, Result};

pub const DEFAULT_SURFACE_SAMPLES: usize = 100_000;

/// `n` points distributed uniformly by area over the mesh surface. The
/// stream depends only on `seed`, so two meshes sampled with the same seed
/// always get the same random numbers.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    let areas: Vec<f64> = (0..mesh.triangles.len()).map(|t| 0.5 * mesh.face_cross(t).norm()).collect();
    let total: f64 = areas.iter().sum();
    if mesh.triangles.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a;
        cdf.push(acc);
    }
    let mut r = rng::stream(&[TAG_SURFACE, seed]);
    Ok((0..n)
        .map(|_| {
            let pick = r.random::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= pick).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (mut u, mut v) = (r.random::<f64>(), r.random::<f64>());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect())
}

/// Static 3D kd-tree answering exact nearest-neighbour distance queries.
pub struct KdTree {
    points: Vec<Vec3>,
    // implicit balanced tree over `points`; split axis per node
    axes: Vec<u8>,
}

const LEAF: usize = 8;

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut points = points.to_vec();
        let mut axes = vec![0u8; points.len()];
        Self::build(&mut points, &mut axes);
        KdTree { points, axes }
    }

    fn build(pts: &mut [Vec3], axes: &mut [u8]) {
        if pts.len() <= LEAF {
            return;
        }
        let (lo, hi) = pts.iter().fold((Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)), |(l, h), p| {
            (l.inf(p), h.sup(p))
        });
        let axis = (hi - lo).imax();
        let mid = pts.len() / 2;
        pts.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
        axes[mid] = axis as u8;
        let (left, rest) = pts.split_at_mut(mid);
        let (la, ra) = axes.split_at_mut(mid);
        Self::build(left, la);
        Self::build(&mut rest[1..], &mut ra[1..]);
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to the nearest stored point.
    pub fn nearest_squared(&self, q: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), q, &mut best);
        best
    }

    pub fn nearest(&self, q: &Vec3) -> f64 {
        self.nearest_squared(q).sqrt()
    }

    fn search(&self, lo: usize, hi: usize, q: &Vec3, best: &mut f64) {
        let n = hi - lo;
        if n <= LEAF {
            for p in &self.points[lo..hi] {
                let d = (p - q).norm_squared();
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = lo + n / 2;
        let axis = self.axes[mid] as usize;
        let p = &self.points[mid];
        let d = (p - q).norm_squared();
        if d < *best {
            *best = d;
        }
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, q, best);
        if delta * delta <= *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

/// Nearest-neighbour distance from every query point to `targets`.
pub fn nearest_distances(queries: &[Vec3], targets: &[Vec3]) -> Vec<f64> {
    let tree = KdTree::new(targets);
    queries.par_iter().map(|q| tree.nearest(q)).collect()
}

/// Quadratic reference for [`nearest_distances`].
pub fn nearest_distances_brute_force(queries: &[Vec3], targets: &[Vec3]) -> Vec<f64> {
    queries
        .iter()
        .map(|q| targets.iter().map(|t| (t - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

/// Chamfer and Hausdorff distances between two point sets.
pub fn point_set_distances(a: &[Vec3], b: &[Vec3]) -> (f64, f64) {
    let ab = nearest_distances(a, b);
    let ba = nearest_distances(b, a);
    combine(&ab, &ba)
}

fn combine(ab: &[f64], ba: &[f64]) -> (f64, f64) {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    (0.5 * (mean(ab) + mean(ba)), max(ab).max(max(ba)))
}

/// Brute-force reference for [`point_set_distances`].
pub fn point_set_distances_brute_force(a: &[Vec3], b: &[Vec3]) -> (f64, f64) {
    combine(&nearest_distances_brute_force(a, b), &nearest_distances_brute_force(b, a))
}

/// Chamfer and Hausdorff distances between two surfaces from `n` samples
/// on each.
pub fn surface_distances(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<(f64, f64)> {
    let sa = sample_surface(a, n, seed)?;
    let sb = sample_surface(b, n, seed)?;
    Ok(point_set_distances(&sa, &sb))
}

pub fn chamfer(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64> {
    Ok(surface_distances(a, b, n, seed)?.0)
}

pub fn hausdorff(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64> {
    Ok(surface_distances(a, b, n, seed)?.1)
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

/// Per-triangle component labels (0-based, in order of first appearance)
/// and the component count. Triangles are connected when they share a
/// vertex index.
pub fn component_labels(mesh: &TriMesh) -> (Vec<usize>, usize) {
    let mut parent: Vec<u32> = (0..mesh.vertices.len() as u32).collect();
    for t in &mesh.triangles {
        let r0 = find(&mut parent, t[0]);
        for &v in &t[1..] {
            let r = find(&mut parent, v);
            if r != r0 {
                parent[r as usize] = r0;
            }
        }
    }
    let mut ids = std::collections::HashMap::new();
    let labels = mesh
        .triangles
        .iter()
        .map(|t| {
            let root = find(&mut parent, t[0]);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect();
    (labels, ids.len())
}

pub fn connected_components(mesh: &TriMesh) -> usize {
    component_labels(mesh).1
}

/// Splits a mesh into its connected pieces.
pub fn split_components(mesh: &TriMesh) -> Vec<TriMesh> {
    let (labels, count) = component_labels(mesh);
    let mut parts: Vec<TriMesh> = vec![TriMesh::default(); count];
    let mut remap: Vec<Option<(usize, u32)>> = vec![None; mesh.vertices.len()];
    for (t, &c) in mesh.triangles.iter().zip(&labels) {
        let mut out = [0u32; 3];
        for (o, &v) in out.iter_mut().zip(t) {
            let id = match remap[v as usize] {
                Some((_, id)) => id,
                None => {
                    parts[c].vertices.push(mesh.vertices[v as usize]);
                    let id = (parts[c].vertices.len() - 1) as u32;
                    remap[v as usize] = Some((c, id));
                    id
                }
            };
            *o = id;
        }
        parts[c].triangles.push(out);
    }
    parts
}

/// Intersection over union of two occupancy masks of equal length. Two
/// empty masks count as a perfect match.
pub fn mask_iou(a: &[bool], b: &[bool]) -> f64 {
    assert_eq!(a.len(), b.len(), "masks must have the same size");
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Square raster window on a plane, in plane coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub center: Vec2,
    pub half: f64,
}

impl Window {
    /// Half-width 1 around the projection of the origin, which covers the
    /// normalized domain's cross-section on axis-aligned planes.
    pub fn domain(section: &Section) -> Self {
        Window { center: section.plane.to_plane(&Vec3::zeros()), half: 1.0 }
    }

    fn pixel(&self, i: usize, j: usize, resolution: usize) -> Vec2 {
        let step = 2.0 * self.half / resolution as f64;
        self.center + Vec2::new(-self.half + (i as f64 + 0.5) * step, -self.half + (j as f64 + 0.5) * step)
    }

    pub fn pixels(&self, resolution: usize) -> Vec<Vec2> {
        (0..resolution * resolution).map(|k| self.pixel(k % resolution, k / resolution, resolution)).collect()
    }
}

/// Interior mask of the section's contours at pixel centres.
pub fn rasterize_contours(section: &Section, window: &Window, resolution: usize) -> Vec<bool> {
    window.pixels(resolution).par_iter().map(|p| point_in_contours(p, &section.contours)).collect()
}

/// IoU between the predicted interior `{f < 0}` and the section's contour
/// interior, rasterized at pixel centres. `eval` maps world points to field
/// values in the same frame as the section.
pub fn iou_2d<F>(eval: F, section: &Section, window: &Window, resolution: usize) -> f64
where
    F: Fn(&[Vec3]) -> Vec<f64>,
{
    let pts: Vec<Vec3> = window.pixels(resolution).iter().map(|p| section.plane.to_world(p)).collect();
    let pred: Vec<bool> = eval(&pts).into_iter().map(|v| v < 0.0).collect();
    mask_iou(&pred, &rasterize_contours(section, window, resolution))
}

/// Boolean voxel grid; voxel `(i, j, k)` is occupied when its centre is.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    pub resolution: usize,
    pub bounds: (Vec3, Vec3),
    pub cells: Vec<bool>,
}

impl Occupancy {
    fn centers(bounds: (Vec3, Vec3), resolution: usize) -> impl Fn(usize, usize, usize) -> Vec3 {
        let step = (bounds.1 - bounds.0) / resolution as f64;
        move |i, j, k| bounds.0 + step.component_mul(&Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5))
    }

    /// Occupancy of `{f < 0}`; `eval` is called once per z-layer.
    pub fn from_field<F>(eval: F, bounds: (Vec3, Vec3), resolution: usize) -> Self
    where
        F: Fn(&[Vec3]) -> Vec<f64>,
    {
        let c = Self::centers(bounds, resolution);
        let r = resolution;
        let mut cells = Vec::with_capacity(r * r * r);
        for k in 0..r {
            let layer: Vec<Vec3> = (0..r * r).map(|ij| c(ij % r, ij / r, k)).collect();
            cells.extend(eval(&layer).into_iter().map(|v| v < 0.0));
        }
        Occupancy { resolution, bounds, cells }
    }

    /// Inside test by ray parity along +z through each voxel column. An odd
    /// number of crossings in a column means the mesh is not watertight.
    pub fn from_mesh(mesh: &TriMesh, bounds: (Vec3, Vec3), resolution: usize) -> Result<Self> {
        let r = resolution;
        let c = Self::centers(bounds, resolution);
        let step = (bounds.1 - bounds.0) / r as f64;
        // Nudge rays off lattice-aligned geometry so they never graze edges.
        let nudge = Vec2::new(step.x * 1.234_567e-7, step.y * 7.654_321e-8);
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); r * r];
        for t in 0..mesh.triangles.len() {
            let [a, b, cc] = mesh.triangle(t);
            let lo = a.inf(&b).inf(&cc);
            let hi = a.sup(&b).sup(&cc);
            let range = |d: usize| {
                let f = |v: f64| (v - bounds.0[d]) / step[d] - 0.5;
                let i0 = f(lo[d]).ceil().max(0.0) as usize;
                let i1 = f(hi[d]).floor().min(r as f64 - 1.0);
                (i0, if i1 < 0.0 { None } else { Some(i1 as usize) })
            };
            let ((i0, i1), (j0, j1)) = (range(0), range(1));
            let (Some(i1), Some(j1)) = (i1, j1) else { continue };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let p = c(i, j, 0);
                    let q = Vec2::new(p.x, p.y) + nudge;
                    if let Some(z) = ray_hit_z(&q, &a, &b, &cc) {
                        columns[j * r + i].push(z);
                    }
                }
            }
        }
        let mut cells = vec![false; r * r * r];
        for (col, hits) in columns.iter_mut().enumerate() {
            if hits.len() % 2 == 1 {
                return Err(Error::ParityFailure { i: col % r, j: col / r });
            }
            hits.sort_by(f64::total_cmp);
            for pair in hits.chunks_exact(2) {
                for k in 0..r {
                    let z = c(0, 0, k).z;
                    if z > pair[0] && z < pair[1] {
                        cells[k * r * r + col] = true;
                    }
                }
            }
        }
        Ok(Occupancy { resolution, bounds, cells })
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }
}

fn ray_hit_z(q: &Vec2, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let orient = |p: &Vec3, r: &Vec3| (r.x - p.x) * (q.y - p.y) - (r.y - p.y) * (q.x - p.x);
    let (w0, w1, w2) = (orient(b, c), orient(c, a), orient(a, b));
    let inside = (w0 > 0.0 && w1 > 0.0 && w2 > 0.0) || (w0 < 0.0 && w1 < 0.0 && w2 < 0.0);
    if !inside {
        return None;
    }
    let s = w0 + w1 + w2;
    Some((w0 * a.z + w1 * b.z + w2 * c.z) / s)
}

pub fn iou_volume(a: &Occupancy, b: &Occupancy) -> Result<f64> {
    if a.resolution != b.resolution || a.bounds != b.bounds {
        return Err(Error::InvalidInput("occupancy grids must share resolution and bounds".into()));
    }
    Ok(mask_iou(&a.cells, &b.cells))
}

/// Volume IoU of two closed meshes over their common bounding box.
pub fn iou_volume_meshes(a: &TriMesh, b: &TriMesh, resolution: usize) -> Result<f64> {
    let (la, ha) = a.bounding_box().ok_or(Error::EmptyMesh)?;
    let (lb, hb) = b.bounding_box().ok_or(Error::EmptyMesh)?;
    let (lo, hi) = (la.inf(&lb), ha.sup(&hb));
    let pad = (hi - lo) * 0.01;
    let bounds = (lo - pad, hi + pad);
    iou_volume(&Occupancy::from_mesh(a, bounds, resolution)?, &Occupancy::from_mesh(b, bounds, resolution)?)
}

/// Every `n / 10`-th item (starting with the first) goes to evaluation.
pub fn heldout_split<T: Clone>(items: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = items.len();
    if n < 10 {
        return Err(Error::TooFewSlices(n));
    }
    let k = n / 10;
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for (i, item) in items.iter().enumerate() {
        if i % k == 0 {
            eval.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, eval))
}

/// Unit normal of every vertex, averaged over incident faces by area.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut n = vec![Vec3::zeros(); mesh.vertices.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let c = mesh.face_cross(t);
        for &v in tri {
            n[v as usize] += c;
        }
    }
    n.into_iter().map(|v| v.try_normalize(0.0).unwrap_or_else(Vec3::zeros)).collect()
}

/// Angles (radians) between the mesh's vertex normals and a reference
/// normal field, for vertices accepted by `keep`.
pub fn normal_angle_errors<N, K>(mesh: &TriMesh, reference: N, keep: K) -> Vec<f64>
where
    N: Fn(&Vec3) -> Vec3,
    K: Fn(&Vec3) -> bool,
{
    vertex_normals(mesh)
        .iter()
        .zip(&mesh.vertices)
        .filter(|(n, v)| keep(v) && n.norm() > 0.0)
        .map(|(n, v)| {
            let r = reference(v).normalize();
            n.dot(&r).clamp(-1.0, 1.0).acos()
        })
        .collect()
}

/// Evaluation summary. Distances are reported ×100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cd_x100: f64,
    pub hd_x100: f64,
    pub cc: usize,
    pub iou2d: Option<f64>,
    pub iou_vol: Option<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "cd_x100,hd_x100,cc,iou2d,iou_vol,sample_count,seed";

    pub fn new(cd: f64, hd: f64, cc: usize, sample_count: usize, seed: u64) -> Self {
        MetricsReport { cd_x100: cd * 100.0, hd_x100: hd * 100.0, cc, iou2d: None, iou_vol: None, sample_count, seed }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.cd_x100,
            self.hd_x100,
            self.cc,
            opt(self.iou2d),
            opt(self.iou_vol),
            self.sample_count,
            self.seed
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row()))?;
        Ok(())
    }
}
