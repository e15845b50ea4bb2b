use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

const BASIS_TOL: f64 = 1e-9;

/// A slicing plane with an orthonormal in-plane frame.
///
/// The 2D coordinate `(a, b)` maps to `origin + a * u + b * v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
}

impl Plane {
    /// Builds a plane from an explicit frame. `u` and `v` must already be
    /// orthonormal to within 1e-9.
    pub fn new(origin: Vec3, u: Vec3, v: Vec3) -> Result<Self> {
        if !(origin.iter().chain(u.iter()).chain(v.iter())).all(|c| c.is_finite()) {
            return Err(Error::InvalidPlane("non-finite component".into()));
        }
        if (u.norm() - 1.0).abs() > BASIS_TOL || (v.norm() - 1.0).abs() > BASIS_TOL {
            return Err(Error::InvalidPlane(format!(
                "axes must be unit length (|u| = {}, |v| = {})",
                u.norm(),
                v.norm()
            )));
        }
        if u.dot(&v).abs() > BASIS_TOL {
            return Err(Error::InvalidPlane(format!(
                "axes must be orthogonal (u.v = {})",
                u.dot(&v)
            )));
        }
        Ok(Self { origin, u, v })
    }

    /// Like [`Plane::new`] but re-orthonormalizes nearly-orthonormal axes
    /// first, which is what text formats with limited precision need.
    pub fn orthonormalized(origin: Vec3, u: Vec3, v: Vec3) -> Result<Self> {
        let nu = u.norm();
        if !(nu > 1e-12) {
            return Err(Error::InvalidPlane("degenerate u axis".into()));
        }
        let u = u / nu;
        let v = v - u * u.dot(&v);
        let nv = v.norm();
        if !(nv > 1e-12) {
            return Err(Error::InvalidPlane("v axis parallel to u".into()));
        }
        Self::new(origin, u, v / nv)
    }

    /// Plane through `origin` with the given normal; the in-plane frame is
    /// chosen deterministically so that `u x v` points along the normal.
    pub fn from_normal(origin: Vec3, normal: Vec3) -> Result<Self> {
        let n = normal.try_normalize(1e-12).ok_or_else(|| Error::InvalidPlane("zero normal".into()))?;
        // Pick the world axis least aligned with the normal as a seed.
        let seed = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u = (seed - n * n.dot(&seed)).normalize();
        let v = n.cross(&u);
        Self::new(origin, u, v)
    }

    /// Axis-aligned plane `x[axis] = offset`, with the remaining two axes
    /// taken in cyclic order so the frame is right-handed.
    pub fn axis_aligned(axis: usize, offset: f64) -> Self {
        let mut origin = Vec3::zeros();
        origin[axis] = offset;
        let mut u = Vec3::zeros();
        let mut v = Vec3::zeros();
        u[(axis + 1) % 3] = 1.0;
        v[(axis + 2) % 3] = 1.0;
        Self { origin, u, v }
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn u(&self) -> &Vec3 {
        &self.u
    }

    pub fn v(&self) -> &Vec3 {
        &self.v
    }

    pub fn normal(&self) -> Vec3 {
        self.u.cross(&self.v)
    }

    pub fn to_world(&self, p: &Vec2) -> Vec3 {
        self.origin + self.u * p.x + self.v * p.y
    }

    pub fn to_plane(&self, x: &Vec3) -> Vec2 {
        let d = x - self.origin;
        Vec2::new(d.dot(&self.u), d.dot(&self.v))
    }

    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        (x - self.origin).dot(&self.normal())
    }

    /// Applies `x -> (x - center) * scale` to the plane; the in-plane frame
    /// is unchanged, so plane coordinates scale by the same factor.
    pub(crate) fn transformed(&self, center: &Vec3, scale: f64) -> Self {
        Self {
            origin: (self.origin - center) * scale,
            u: self.u,
            v: self.v,
        }
    }
}
