use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::plane::Vec3;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidMesh(format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Area-weighted (unnormalized) face normal, i.e. twice the area.
    pub fn face_cross(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * self.face_cross(t).norm()).sum()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    pub fn map_vertices(&mut self, f: impl Fn(&Vec3) -> Vec3) {
        for v in &mut self.vertices {
            *v = f(v);
        }
    }

    /// Merges vertices that fall in the same cell of a `tol` grid, then drops
    /// triangles that became degenerate and vertices no longer referenced.
    pub fn weld(&mut self, tol: f64) {
        let mut remap = Vec::with_capacity(self.vertices.len());
        let mut cells: HashMap<[i64; 3], u32> = HashMap::new();
        let mut merged = Vec::new();
        for v in &self.vertices {
            let key = [(v.x / tol).round() as i64, (v.y / tol).round() as i64, (v.z / tol).round() as i64];
            let id = *cells.entry(key).or_insert_with(|| {
                merged.push(*v);
                (merged.len() - 1) as u32
            });
            remap.push(id);
        }
        self.vertices = merged;
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                *i = remap[*i as usize];
            }
        }
        self.remove_degenerate();
    }

    /// Drops triangles with repeated indices or zero area and compacts the
    /// vertex list.
    pub fn remove_degenerate(&mut self) {
        let verts = &self.vertices;
        self.triangles.retain(|&[a, b, c]| {
            a != b && b != c && a != c && {
                let (pa, pb, pc) = (verts[a as usize], verts[b as usize], verts[c as usize]);
                (pb - pa).cross(&(pc - pa)).norm_squared() > 0.0
            }
        });
        let mut used = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for t in &mut self.triangles {
            for i in t.iter_mut() {
                if used[*i as usize] == u32::MAX {
                    used[*i as usize] = vertices.len() as u32;
                    vertices.push(self.vertices[*i as usize]);
                }
                *i = used[*i as usize];
            }
        }
        self.vertices = vertices;
    }

    /// Number of triangles incident to each undirected edge.
    pub fn edge_incidence(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge has exactly two incident triangles.
    pub fn is_closed(&self) -> bool {
        !self.triangles.is_empty() && self.edge_incidence().values().all(|&c| c == 2)
    }

    pub fn euler_characteristic(&self) -> i64 {
        let e = self.edge_incidence().len() as i64;
        self.vertices.len() as i64 - e + self.triangles.len() as i64
    }

    pub fn append(&mut self, other: &TriMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    }

    /// Parses the `v` and `f` records of an ASCII OBJ file. Polygons are
    /// fan-triangulated; texture/normal indices and other records are ignored.
    pub fn from_obj_str(text: &str, source: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("v") => {
                    let mut c = [0.0; 3];
                    for slot in &mut c {
                        let t = tok.next().ok_or_else(|| parse_err(lineno, "vertex needs 3 coordinates".into()))?;
                        *slot = t.parse().map_err(|_| parse_err(lineno, format!("bad coordinate `{t}`")))?;
                    }
                    vertices.push(Vec3::from(c));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for t in tok {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| parse_err(lineno, format!("bad face index `{t}`")))?;
                        let resolved = if i > 0 {
                            i - 1
                        } else if i < 0 {
                            vertices.len() as i64 + i
                        } else {
                            return Err(parse_err(lineno, "face index 0".into()));
                        };
                        if resolved < 0 || resolved >= vertices.len() as i64 {
                            return Err(parse_err(lineno, format!("face index {i} out of range")));
                        }
                        idx.push(resolved as u32);
                    }
                    if idx.len() < 3 {
                        return Err(parse_err(lineno, "face needs at least 3 vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::with_capacity(self.vertices.len() * 40 + self.triangles.len() * 24);
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn read_obj(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_obj_str(&text, path)
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }
}
