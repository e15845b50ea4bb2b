use std::collections::HashMap;

use crate::error::{Error, Result};

use super::contour::Contour2D;
use super::mesh::TriMesh;
use super::plane::{Plane, Vec2, Vec3};

/// Consecutive contour points closer than this are merged.
pub const SNAP_TOL: f64 = 1e-9;

/// Cuts a closed mesh with a plane and returns the cross-section contours in
/// plane coordinates.
///
/// Vertices lying exactly on the plane are treated as lying on its positive
/// side, so every triangle is cut by zero or two of its edges. Crossing
/// points are keyed by the mesh edge they lie on, which stitches segments
/// from neighbouring triangles exactly.
pub fn slice_mesh(mesh: &TriMesh, plane: &Plane) -> Result<Vec<Contour2D>> {
    let (vertices, triangles) = exact_weld(mesh);
    let dist: Vec<f64> = vertices.iter().map(|v| plane.signed_distance(v)).collect();
    let above: Vec<bool> = dist.iter().map(|&d| d >= 0.0).collect();

    let mut points: HashMap<(u32, u32), Vec3> = HashMap::new();
    let mut adjacency: HashMap<(u32, u32), Vec<(u32, u32)>> = HashMap::new();
    for t in &triangles {
        let mut cut = [(0u32, 0u32); 2];
        let mut n = 0;
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if above[a as usize] != above[b as usize] {
                let key = (a.min(b), a.max(b));
                points.entry(key).or_insert_with(|| {
                    let (i, j) = (key.0 as usize, key.1 as usize);
                    let s = dist[i] / (dist[i] - dist[j]);
                    vertices[i] + (vertices[j] - vertices[i]) * s
                });
                cut[n] = key;
                n += 1;
            }
        }
        if n == 2 {
            adjacency.entry(cut[0]).or_default().push(cut[1]);
            adjacency.entry(cut[1]).or_default().push(cut[0]);
        }
    }

    let mut open: Vec<[f64; 3]> = adjacency
        .iter()
        .filter(|(_, nb)| nb.len() != 2)
        .map(|(k, _)| points[k].into())
        .collect();
    if !open.is_empty() {
        open.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return Err(Error::OpenContours { endpoints: open });
    }

    // Deterministic traversal order.
    let mut keys: Vec<(u32, u32)> = adjacency.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: HashMap<(u32, u32), bool> = keys.iter().map(|k| (*k, false)).collect();
    let mut contours = Vec::new();
    for start in keys {
        if visited[&start] {
            continue;
        }
        let mut chain = Vec::new();
        let mut prev: Option<(u32, u32)> = None;
        let mut cur = start;
        loop {
            visited.insert(cur, true);
            chain.push(plane.to_plane(&points[&cur]));
            let nb = &adjacency[&cur];
            let next = match prev {
                Some(p) if nb[0] == p => nb[1],
                _ => nb[0],
            };
            if next == start || visited[&next] {
                break;
            }
            prev = Some(cur);
            cur = next;
        }
        let cleaned = snap_chain(&chain);
        if cleaned.len() < 3 {
            continue;
        }
        contours.push(Contour2D::from_polyline(&cleaned, SNAP_TOL)?);
    }
    Ok(contours)
}

fn snap_chain(chain: &[Vec2]) -> Vec<Vec2> {
    let snap = |p: &Vec2| Vec2::new((p.x / SNAP_TOL).round() * SNAP_TOL, (p.y / SNAP_TOL).round() * SNAP_TOL);
    let mut out: Vec<Vec2> = Vec::with_capacity(chain.len());
    for p in chain {
        let q = snap(p);
        if out.last() != Some(&q) {
            out.push(q);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Merges bitwise-identical vertex positions so meshes exported without
/// shared indices still slice into closed loops.
fn exact_weld(mesh: &TriMesh) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = mesh
        .vertices
        .iter()
        .map(|v| {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            *ids.entry(key).or_insert_with(|| {
                vertices.push(*v);
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
        .collect();
    (vertices, triangles)
}

/// Fraction of the extent left free at each end when spacing planes.
pub const SLICE_INSET: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceLayout {
    /// `count` parallel planes perpendicular to `axis`.
    Aligned { count: usize, axis: usize },
    /// `ceil(count / 2)` parallel planes plus `floor(count / 2)` planes
    /// containing the axis line through the box centre, at evenly spaced
    /// angles.
    NonAligned { count: usize, axis: usize },
}

/// Offsets of `count` evenly spaced planes across `[lo, hi]`, inset by
/// [`SLICE_INSET`] of the extent at both ends.
pub fn plane_offsets(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let inset = SLICE_INSET * (hi - lo);
    let (a, b) = (lo + inset, hi - inset);
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect(),
    }
}

pub fn slicing_planes(bbox: (Vec3, Vec3), layout: SliceLayout) -> Result<Vec<Plane>> {
    let (lo, hi) = bbox;
    let (count, axis, rotated) = match layout {
        SliceLayout::Aligned { count, axis } => (count, axis, 0),
        SliceLayout::NonAligned { count, axis } => (count.div_ceil(2), axis, count / 2),
    };
    if axis > 2 {
        return Err(Error::InvalidInput(format!("axis {axis} out of range")));
    }
    let mut planes: Vec<Plane> =
        plane_offsets(lo[axis], hi[axis], count).into_iter().map(|o| Plane::axis_aligned(axis, o)).collect();
    let center = (lo + hi) * 0.5;
    let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
    for k in 0..rotated {
        let theta = std::f64::consts::PI * k as f64 / rotated as f64;
        let mut u = Vec3::zeros();
        u[b] = theta.cos();
        u[c] = theta.sin();
        let mut v = Vec3::zeros();
        v[axis] = 1.0;
        planes.push(Plane::new(center, u, v)?);
    }
    Ok(planes)
}

/// Slices a closed mesh with every plane. Planes that miss the mesh give
/// empty sections.
pub fn slice_into_sections(mesh: &TriMesh, planes: &[Plane]) -> Result<Vec<super::Section>> {
    planes
        .iter()
        .map(|plane| Ok(super::Section { plane: plane.clone(), contours: slice_mesh(mesh, plane)? }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    /// Cross-section area from independent per-triangle segments via Green's
    /// theorem; each segment is oriented using the face normal, so no
    /// stitching is involved.
    fn oracle_section_area(mesh: &TriMesh, plane: &Plane) -> f64 {
        let n = plane.normal();
        let mut area = 0.0;
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangle(t);
            let d: Vec<f64> = tri.iter().map(|v| plane.signed_distance(v)).collect();
            let mut pts = Vec::new();
            for k in 0..3 {
                let (i, j) = (k, (k + 1) % 3);
                if (d[i] >= 0.0) != (d[j] >= 0.0) {
                    let s = d[i] / (d[i] - d[j]);
                    pts.push(tri[i] + (tri[j] - tri[i]) * s);
                }
            }
            if pts.len() != 2 {
                continue;
            }
            let dir = n.cross(&mesh.face_cross(t));
            let (a, b) = if (pts[1] - pts[0]).dot(&dir) >= 0.0 { (pts[0], pts[1]) } else { (pts[1], pts[0]) };
            let (a, b) = (plane.to_plane(&a), plane.to_plane(&b));
            area += 0.5 * (a.x * b.y - b.x * a.y);
        }
        area
    }

    #[test]
    fn unit_cube_mid_slice() {
        let cube = shapes::cube(0.5);
        let plane = Plane::axis_aligned(2, 0.0);
        let cs = slice_mesh(&cube, &plane).unwrap();
        assert_eq!(cs.len(), 1);
        let oracle = oracle_section_area(&cube, &plane);
        assert!((oracle - 1.0).abs() < 1e-9);
        assert!((cs[0].area() - 1.0).abs() < 1e-9);
        assert_eq!(cs[0].len(), 4);
    }

    #[test]
    fn plane_missing_the_mesh_gives_nothing() {
        let cube = shapes::cube(0.5);
        assert!(slice_mesh(&cube, &Plane::axis_aligned(2, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn plane_through_cube_face_and_vertices() {
        let cube = shapes::cube(0.5);
        let cs = slice_mesh(&cube, &Plane::axis_aligned(2, 0.5)).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].area() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oblique_cube_slice_matches_oracle() {
        let cube = shapes::cube(0.5);
        let plane = Plane::from_normal(Vec3::new(0.05, -0.1, 0.02), Vec3::new(0.3, 0.2, 1.0)).unwrap();
        let cs = slice_mesh(&cube, &plane).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].area() - oracle_section_area(&cube, &plane)).abs() < 1e-9);
    }

    #[test]
    fn sphere_slice_is_a_circle() {
        let r = 0.5;
        let sphere = shapes::icosphere(r, 4);
        let chord = shapes::icosphere_max_edge(r, 4);
        // sagitta of the longest edge bounds the radial error
        let sag = r - (r * r - chord * chord / 4.0).sqrt();
        for &z in &[0.3, -0.1, 0.0, 0.45] {
            let cs = slice_mesh(&sphere, &Plane::axis_aligned(2, z)).unwrap();
            assert_eq!(cs.len(), 1, "z = {z}");
            let rc = (r * r - z * z).sqrt();
            // in-plane radius of a point at 3D radius r - sag
            let lower = ((r - sag).powi(2) - z * z).sqrt();
            for p in cs[0].vertices() {
                assert!(p.norm() <= rc + 1e-9 && p.norm() >= lower - 1e-9, "z={z} |p|={}", p.norm());
            }
            let per = cs[0].perimeter();
            let tau = 2.0 * std::f64::consts::PI;
            assert!(per <= tau * rc + 1e-9 && per >= tau * lower * 0.99, "z={z} per={per}");
        }
    }

    #[test]
    fn plane_layouts() {
        let offs = plane_offsets(-1.0, 1.0, 5);
        assert_eq!(offs.len(), 5);
        assert!((offs[0] + 0.96).abs() < 1e-12 && (offs[4] - 0.96).abs() < 1e-12);
        assert!((offs[2]).abs() < 1e-12);
        let bbox = (Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0));
        let p = slicing_planes(bbox, SliceLayout::NonAligned { count: 4, axis: 2 }).unwrap();
        assert_eq!(p.len(), 4);
        assert!((p[0].normal() - Vec3::z()).norm() < 1e-12);
        for q in &p[2..] {
            assert!(q.normal().z.abs() < 1e-12);
        }
        assert!(p[2].normal().dot(&p[3].normal()).abs() < 1e-12);
        let p = slicing_planes(bbox, SliceLayout::NonAligned { count: 5, axis: 0 }).unwrap();
        assert_eq!(p.len(), 5);
        let sections = slice_into_sections(&crate::shapes::cube(0.5), &slicing_planes((Vec3::new(-0.5, -0.5, -0.5), Vec3::new(0.5, 0.5, 0.5)), SliceLayout::Aligned { count: 5, axis: 2 }).unwrap()).unwrap();
        assert_eq!(sections.len(), 5);
        for s in &sections {
            assert_eq!(s.contours.len(), 1);
            assert!((s.contours[0].area() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn open_mesh_reports_endpoints() {
        let mut cube = shapes::cube(0.5);
        cube.triangles.truncate(cube.triangles.len() - 2);
        let err = slice_mesh(&cube, &Plane::axis_aligned(2, 0.0)).unwrap_err();
        match err {
            Error::OpenContours { endpoints } => assert!(!endpoints.is_empty()),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unwelded_mesh_still_closes() {
        let cube = shapes::cube(0.5);
        let mut soup = TriMesh::default();
        for t in 0..cube.triangles.len() {
            let tri = cube.triangle(t);
            let base = soup.vertices.len() as u32;
            soup.vertices.extend_from_slice(&tri);
            soup.triangles.push([base, base + 1, base + 2]);
        }
        let cs = slice_mesh(&soup, &Plane::axis_aligned(1, 0.1)).unwrap();
        assert_eq!(cs.len(), 1);
        assert!((cs[0].area() - 1.0).abs() < 1e-9);
    }
}
