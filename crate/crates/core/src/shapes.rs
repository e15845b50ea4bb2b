//! Closed test solids used by fixtures, examples and the CLI.

use std::collections::HashMap;

use crate::geometry::{TriMesh, Vec3};

/// Axis-aligned cube `[-h, h]^3` with outward-facing triangles.
pub fn cube(h: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(8);
    for i in 0..8 {
        let s = |bit: usize| if i & bit != 0 { h } else { -h };
        vertices.push(Vec3::new(s(1), s(2), s(4)));
    }
    let quads = [
        [0, 2, 3, 1], // z-
        [4, 5, 7, 6], // z+
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    let mut triangles = Vec::with_capacity(12);
    for q in quads {
        triangles.push([q[0], q[1], q[2]]);
        triangles.push([q[0], q[2], q[3]]);
    }
    TriMesh { vertices, triangles }
}

/// Regular tetrahedron centred at `c`.
pub fn tetrahedron(c: Vec3, size: f64) -> TriMesh {
    let vertices = vec![
        c + Vec3::new(1.0, 1.0, 1.0) * size,
        c + Vec3::new(1.0, -1.0, -1.0) * size,
        c + Vec3::new(-1.0, 1.0, -1.0) * size,
        c + Vec3::new(-1.0, -1.0, 1.0) * size,
    ];
    let triangles = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh { vertices, triangles }
}

/// Sphere of the given radius built by recursively subdividing an
/// icosahedron.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                (vertices.len() - 1) as u32
            })
        };
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriMesh { vertices, triangles }
}

/// Longest edge of [`icosphere`]`(radius, subdivisions)`.
pub fn icosphere_max_edge(radius: f64, subdivisions: usize) -> f64 {
    let m = icosphere(radius, subdivisions);
    m.edge_incidence()
        .keys()
        .map(|&(a, b)| (m.vertices[a as usize] - m.vertices[b as usize]).norm())
        .fold(0.0, f64::max)
}

/// Closed prism approximating a cylinder along +z, with `segments`
/// sides, from `base` to `base + length * z`. Vertices sit on the circle.
pub fn cylinder(base: Vec3, radius: f64, length: f64, segments: usize) -> TriMesh {
    let n = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * n + 2);
    for z in [0.0, length] {
        for k in 0..n {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            vertices.push(base + Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    vertices.push(base);
    vertices.push(base + Vec3::new(0.0, 0.0, length));
    let (bottom, top) = ((2 * n) as u32, (2 * n + 1) as u32);
    let mut triangles = Vec::with_capacity(4 * n);
    for k in 0..n {
        let (a, b) = (k as u32, ((k + 1) % n) as u32);
        let (c, d) = (a + n as u32, b + n as u32);
        triangles.push([a, b, d]);
        triangles.push([a, d, c]);
        triangles.push([bottom, b, a]);
        triangles.push([top, c, d]);
    }
    TriMesh { vertices, triangles }
}
