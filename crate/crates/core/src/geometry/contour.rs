use crate::error::{Error, Result};

use super::plane::Vec2;

/// Points closer than this to a contour edge count as lying on it.
pub const ON_EDGE_TOL: f64 = 1e-12;

/// A closed, simple polygon in plane coordinates. The closing edge from the
/// last vertex back to the first is implicit. Vertices are stored in
/// counter-clockwise order; orientation carries no inside/outside meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour2D {
    vertices: Vec<Vec2>,
}

impl Contour2D {
    /// Validates and canonicalizes a closed polyline.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidContour(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidContour("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(Error::InvalidContour(format!("zero-length edge at vertex {i}")));
            }
        }
        if let Some((i, j)) = first_self_intersection(&vertices) {
            return Err(Error::InvalidContour(format!(
                "self-intersection between edges {i} and {j}"
            )));
        }
        if shoelace(&vertices) < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Cleans a raw closed polyline (merging duplicate points within `tol`
    /// and dropping collinear interior vertices) before validating it.
    pub fn from_polyline(points: &[Vec2], tol: f64) -> Result<Self> {
        Self::new(simplify_closed(points, tol))
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as `(start, end)` pairs, including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Enclosed area (positive; the contour is stored counter-clockwise).
    pub fn area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).sum()
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for p in &self.vertices {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Uniformly scales the plane coordinates.
    pub(crate) fn scaled(&self, s: f64) -> Self {
        Self {
            vertices: self.vertices.iter().map(|p| p * s).collect(),
        }
    }
}

fn shoelace(v: &[Vec2]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

/// Returns the first pair of edges that intersect (other than adjacent edges
/// meeting at their shared vertex), or `None` for a simple polygon.
fn first_self_intersection(v: &[Vec2]) -> Option<(usize, usize)> {
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // Adjacent edge folding back over this one.
        let c = v[(i + 2) % n];
        if cross(&a, &b, &c) == 0.0 && (c - b).dot(&(a - b)) > 0.0 {
            return Some((i, (i + 1) % n));
        }
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (v[j], v[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn simplify_closed(points: &[Vec2], tol: f64) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
    for p in points {
        if pts.last().is_none_or(|q: &Vec2| (p - q).norm() > tol) {
            pts.push(*p);
        }
    }
    while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() <= tol {
        pts.pop();
    }
    // Drop vertices whose neighbours continue in the same direction.
    let mut changed = true;
    while changed && pts.len() > 3 {
        changed = false;
        let n = pts.len();
        let mut keep = Vec::with_capacity(n);
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let ab = b - a;
            let bc = c - b;
            let straight = (ab.x * bc.y - ab.y * bc.x).abs() <= 1e-12 * ab.norm() * bc.norm() && ab.dot(&bc) > 0.0;
            if straight && keep.len() + (n - i) > 3 {
                changed = true;
            } else {
                keep.push(b);
            }
        }
        pts = keep;
    }
    pts
}

fn segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Unsigned distance from `p` to the nearest contour edge.
pub fn distance_to_contours(p: &Vec2, contours: &[Contour2D]) -> f64 {
    let mut best = f64::INFINITY;
    for c in contours {
        for (a, b) in c.edges() {
            best = best.min(segment_distance(p, &a, &b));
        }
    }
    best
}

fn crossing_parity(p: &Vec2, contours: &[Contour2D]) -> bool {
    let mut inside = false;
    for c in contours {
        for (a, b) in c.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

/// Even-odd interior test over every contour on a plane. Points on an edge
/// are interior.
pub fn point_in_contours(p: &Vec2, contours: &[Contour2D]) -> bool {
    distance_to_contours(p, contours) <= ON_EDGE_TOL || crossing_parity(p, contours)
}

/// Signed 2D distance to the contours: negative inside, positive outside.
/// Nested contours carve holes via even-odd parity.
pub fn sdf2d_eval(p: &Vec2, contours: &[Contour2D]) -> Result<f64> {
    if contours.is_empty() {
        return Err(Error::NoContours);
    }
    let d = distance_to_contours(p, contours);
    let inside = d <= ON_EDGE_TOL || crossing_parity(p, contours);
    Ok(if inside { -d } else { d })
}
