//! Synthetic scenes with known ground truth: a sphere, a bundle of thin
//! tubes and a two-lobed "figure eight". All are rotationally symmetric or
//! prismatic along z, so their slices are exact polygonised circles.

use crate::geometry::{plane_offsets, Contour2D, CrossSectionSet, Plane, Section, TriMesh, Vec2, Vec3};
use crate::shapes;
use crate::Result;

/// A scene in world coordinates: training sections, held-out sections and
/// the true surface where one is available.
#[derive(Clone, Debug)]
pub struct Scene {
    pub sections: CrossSectionSet,
    pub heldout: Vec<Section>,
    pub truth: Option<TriMesh>,
}

/// Regular `segments`-gon inscribed in a circle, counter-clockwise.
pub fn circle(center: Vec2, radius: f64, segments: usize) -> Result<Contour2D> {
    Contour2D::new(
        (0..segments)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / segments as f64;
                center + Vec2::new(a.cos(), a.sin()) * radius
            })
            .collect(),
    )
}

fn z_section(z: f64, circles: &[(Vec2, f64)], segments: usize) -> Result<Section> {
    let contours = circles
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(c, r)| circle(c, r, segments))
        .collect::<Result<Vec<_>>>()?;
    Ok(Section { plane: Plane::axis_aligned(2, z), contours })
}

pub const SPHERE_SEGMENTS: usize = 48;
pub const HELDOUT_SEGMENTS: usize = 256;

/// Sphere of radius `r` at the origin cut by `slices` evenly spaced z-planes.
/// The two held-out planes sit halfway between training planes at roughly
/// a quarter and three quarters of the height.
pub fn sphere_scene(r: f64, slices: usize) -> Result<Scene> {
    let zs = plane_offsets(-r, r, slices);
    let ring = |z: f64| (r * r - z * z).max(0.0).sqrt();
    let sections = zs
        .iter()
        .map(|&z| z_section(z, &[(Vec2::zeros(), ring(z))], SPHERE_SEGMENTS))
        .collect::<Result<Vec<_>>>()?;
    let mut heldout = Vec::new();
    if slices >= 4 {
        for i in [slices / 4, slices - 1 - slices / 4] {
            let j = i.min(slices - 2);
            let z = 0.5 * (zs[j] + zs[j + 1]);
            heldout.push(z_section(z, &[(Vec2::zeros(), ring(z))], HELDOUT_SEGMENTS)?);
        }
    }
    Ok(Scene {
        sections: CrossSectionSet::raw(sections),
        heldout,
        truth: Some(shapes::icosphere(r, 5)),
    })
}

/// Layout of the thin-tube scene.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeLayout {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub radius: f64,
    pub length: f64,
    pub slices: usize,
    pub segments: usize,
}

impl Default for TubeLayout {
    fn default() -> Self {
        TubeLayout { rows: 4, cols: 5, spacing: 0.2, radius: 0.02, length: 1.0, slices: 40, segments: 8 }
    }
}

impl TubeLayout {
    /// Axis positions `(x, y)` of every tube, centred on the origin.
    pub fn axes(&self) -> Vec<Vec2> {
        let (ox, oy) = (0.5 * (self.cols - 1) as f64, 0.5 * (self.rows - 1) as f64);
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| Vec2::new(j as f64 - ox, i as f64 - oy)))
            .map(|p| p * self.spacing)
            .collect()
    }

    /// z-range covered by the slicing planes.
    pub fn sliced_span(&self) -> (f64, f64) {
        let zs = plane_offsets(-0.5 * self.length, 0.5 * self.length, self.slices);
        (zs[0], zs[zs.len() - 1])
    }
}

/// Parallel tubes along z, sliced by z-planes.
pub fn tubes_scene(layout: &TubeLayout) -> Result<Scene> {
    let axes = layout.axes();
    let circles: Vec<(Vec2, f64)> = axes.iter().map(|&c| (c, layout.radius)).collect();
    let sections = plane_offsets(-0.5 * layout.length, 0.5 * layout.length, layout.slices)
        .into_iter()
        .map(|z| z_section(z, &circles, layout.segments))
        .collect::<Result<Vec<_>>>()?;
    let mut truth = TriMesh::default();
    for c in &axes {
        truth.append(&shapes::cylinder(Vec3::new(c.x, c.y, -0.5 * layout.length), layout.radius, layout.length, 32));
    }
    Ok(Scene { sections: CrossSectionSet::raw(sections), heldout: Vec::new(), truth: Some(truth) })
}

/// Two spheres on the z axis joined by a smooth union.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FigureEight {
    pub radius: f64,
    pub offset: f64,
    pub blend: f64,
}

impl Default for FigureEight {
    fn default() -> Self {
        FigureEight { radius: 0.45, offset: 0.35, blend: 0.1 }
    }
}

impl FigureEight {
    pub fn sdf(&self, x: &Vec3) -> f64 {
        let rho = x.x.hypot(x.y);
        self.sdf_rz(rho, x.z)
    }

    fn sdf_rz(&self, rho: f64, z: f64) -> f64 {
        let a = rho.hypot(z - self.offset) - self.radius;
        let b = rho.hypot(z + self.offset) - self.radius;
        let k = self.blend;
        let h = (k - (a - b).abs()).max(0.0) / k;
        a.min(b) - h * h * k * 0.25
    }

    /// Central-difference gradient of [`FigureEight::sdf`].
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        let h = 1e-6;
        Vec3::from_fn(|d, _| {
            let mut e = Vec3::zeros();
            e[d] = h;
            (self.sdf(&(x + e)) - self.sdf(&(x - e))) / (2.0 * h)
        })
    }

    /// Half height of the shape along z.
    pub fn half_height(&self) -> f64 {
        self.offset + self.radius
    }

    /// Radius of the cross-section at height `z`, 0 outside the shape. The
    /// field increases with distance from the axis, so bisection suffices.
    pub fn ring_radius(&self, z: f64) -> f64 {
        if self.sdf_rz(0.0, z) >= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, self.radius + self.blend);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.sdf_rz(mid, z) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn scene(&self, slices: usize) -> Result<Scene> {
        let hz = self.half_height();
        let sections = plane_offsets(-hz, hz, slices)
            .into_iter()
            .map(|z| z_section(z, &[(Vec2::zeros(), self.ring_radius(z))], SPHERE_SEGMENTS))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene { sections: CrossSectionSet::raw(sections), heldout: Vec::new(), truth: None })
    }
}
