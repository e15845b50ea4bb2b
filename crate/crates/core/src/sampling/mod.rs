//! Labeled in-plane samples and volumetric regularization points.
//!
//! Four sample families are drawn on every plane: points on each contour
//! edge, a pair of points at a fixed distance either side of each of those,
//! uniform points over the plane window, and rejection-sampled interior
//! points per contour so small contours are never under-represented.

mod cache;

use log::warn;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{point_in_contours, sdf2d_eval, Contour2D, CrossSectionSet, Plane, Vec2, Vec3};
use crate::rng;

pub use cache::{read_bank, write_bank, BANK_MAGIC, BANK_VERSION};

/// Label assigned to uniform samples on planes without contours.
pub const FAR_LABEL: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SampleTag {
    OnContour = 0,
    FixedRadius = 1,
    Uniform = 2,
    AdaptiveInterior = 3,
}

impl SampleTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::OnContour),
            1 => Some(Self::FixedRadius),
            2 => Some(Self::Uniform),
            3 => Some(Self::AdaptiveInterior),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledSample {
    /// Position in normalized world coordinates.
    pub x: Vec3,
    /// Signed 2D distance to the plane's contours.
    pub f2d: f64,
    pub tag: SampleTag,
    pub plane_id: u32,
}

/// When labels are regenerated and with which fixed radius, plus the
/// per-family sample counts.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingSchedule {
    pub relabel_epochs: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub per_edge: usize,
    pub uniform_per_plane: usize,
    pub min_interior_per_contour: usize,
    pub attempt_cap: usize,
    /// Disables the per-contour interior family (ablation only).
    pub adaptive_interior: bool,
}

impl Default for SamplingSchedule {
    fn default() -> Self {
        Self {
            relabel_epochs: vec![0, 50, 100, 200, 300],
            epsilons: vec![2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7), 2f64.powi(-8), 2f64.powi(-8)],
            per_edge: 25,
            uniform_per_plane: 10_000,
            min_interior_per_contour: 50,
            attempt_cap: 1_000_000,
            adaptive_interior: true,
        }
    }
}

impl SamplingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.relabel_epochs.is_empty() || self.relabel_epochs.len() != self.epsilons.len() {
            return Err(Error::InvalidInput("relabel epochs and epsilons must have equal, nonzero length".into()));
        }
        if self.epsilons.windows(2).any(|w| w[1] > w[0]) || self.epsilons.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidInput("epsilons must be positive and non-increasing".into()));
        }
        if self.relabel_epochs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("relabel epochs must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Stage whose bank is active during `epoch`.
    pub fn stage_for_epoch(&self, epoch: usize) -> usize {
        self.relabel_epochs.iter().rposition(|&e| e <= epoch).unwrap_or(0)
    }
}

/// Interior rejection sampling for one contour stopped at the attempt cap.
#[derive(Clone, Debug, PartialEq)]
pub struct CapWarning {
    pub plane_id: u32,
    pub contour_id: usize,
    pub found: usize,
    pub attempts: usize,
}

#[derive(Clone, Debug)]
pub struct SampleBank {
    pub samples: Vec<LabeledSample>,
    pub stage: usize,
    pub rng_seed: u64,
    pub warnings: Vec<CapWarning>,
}

impl SampleBank {
    pub fn count(&self, tag: SampleTag) -> usize {
        self.samples.iter().filter(|s| s.tag == tag).count()
    }
}

/// A point on a contour edge with the edge's outward unit normal.
#[derive(Clone, Copy, Debug)]
pub struct ContourPoint {
    pub p: Vec2,
    pub normal: Vec2,
}

/// `per_edge` points per edge, evenly spaced in arc length starting at the
/// edge's first vertex.
pub fn contour_points(contour: &Contour2D, per_edge: usize) -> Vec<ContourPoint> {
    let mut out = Vec::with_capacity(contour.len() * per_edge);
    for (a, b) in contour.edges() {
        let d = b - a;
        // stored counter-clockwise, so the right-hand normal points outward
        let normal = Vec2::new(d.y, -d.x) / d.norm();
        for k in 0..per_edge {
            let t = k as f64 / per_edge as f64;
            out.push(ContourPoint { p: a + d * t, normal });
        }
    }
    out
}

pub fn sample_on_contour(contour: &Contour2D, plane: &Plane, plane_id: u32, per_edge: usize) -> Vec<LabeledSample> {
    contour_points(contour, per_edge)
        .into_iter()
        .map(|cp| LabeledSample {
            x: plane.to_world(&cp.p),
            f2d: 0.0,
            tag: SampleTag::OnContour,
            plane_id,
        })
        .collect()
}

/// Two samples per contour point at `+eps` and `-eps` along the edge normal,
/// labeled with the true 2D distance rather than the nominal offset.
pub fn sample_fixed_radius(
    on: &[ContourPoint],
    plane: &Plane,
    plane_id: u32,
    contours: &[Contour2D],
    eps: f64,
) -> Result<Vec<LabeledSample>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("fixed radius must be positive, got {eps}")));
    }
    let mut out = Vec::with_capacity(on.len() * 2);
    for cp in on {
        for sign in [1.0, -1.0] {
            let q = cp.p + cp.normal * (sign * eps);
            out.push(LabeledSample {
                x: plane.to_world(&q),
                f2d: sdf2d_eval(&q, contours)?,
                tag: SampleTag::FixedRadius,
                plane_id,
            });
        }
    }
    Ok(out)
}

/// Bounds, in plane coordinates, of the plane's intersection with `[-1, 1]^3`.
fn plane_window(plane: &Plane) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for i in 0..8 {
        let c = Vec3::new(
            if i & 1 != 0 { 1.0 } else { -1.0 },
            if i & 2 != 0 { 1.0 } else { -1.0 },
            if i & 4 != 0 { 1.0 } else { -1.0 },
        );
        let p = plane.to_plane(&c);
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    (lo, hi)
}

fn in_domain(x: &Vec3) -> bool {
    x.iter().all(|c| c.abs() <= 1.0 + 1e-12)
}

/// `count` points uniform over the plane's intersection with `[-1, 1]^3`,
/// labeled by the 2D SDF (or [`FAR_LABEL`] on contour-free planes).
pub fn sample_uniform_plane<R: Rng>(
    plane: &Plane,
    plane_id: u32,
    contours: &[Contour2D],
    count: usize,
    rng: &mut R,
) -> Result<Vec<LabeledSample>> {
    let (lo, hi) = plane_window(plane);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = count.saturating_mul(1000).max(1_000_000);
    while out.len() < count {
        attempts += 1;
        if attempts > cap {
            warn!("plane {plane_id} barely intersects the domain; kept {} uniform samples", out.len());
            break;
        }
        let q = Vec2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        let x = plane.to_world(&q);
        if !in_domain(&x) {
            continue;
        }
        let f2d = if contours.is_empty() { FAR_LABEL } else { sdf2d_eval(&q, contours)? };
        out.push(LabeledSample {
            x,
            f2d,
            tag: SampleTag::Uniform,
            plane_id,
        });
    }
    Ok(out)
}

/// True when `contours[id]` bounds a hole, i.e. it lies inside an odd
/// number of the plane's other contours. Its enclosed region is exterior,
/// so the interior family skips it.
pub fn is_hole(contours: &[Contour2D], id: usize) -> bool {
    let probe = contours[id].vertices()[0];
    let others: Vec<Contour2D> = contours
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != id)
        .map(|(_, c)| c.clone())
        .collect();
    !others.is_empty() && point_in_contours(&probe, &others)
}

/// Rejection-samples the bounding box of `contours[contour_id]` until
/// `target` interior points (by even-odd parity over all of the plane's
/// contours) are found or `cap` attempts have been spent.
pub fn sample_adaptive_interior<R: Rng>(
    contour_id: usize,
    plane: &Plane,
    plane_id: u32,
    contours: &[Contour2D],
    target: usize,
    cap: usize,
    rng: &mut R,
) -> Result<(Vec<LabeledSample>, Option<CapWarning>)> {
    let (lo, hi) = contours[contour_id].bounding_box();
    let mut out = Vec::with_capacity(target);
    let mut attempts = 0;
    while out.len() < target && attempts < cap {
        attempts += 1;
        let q = Vec2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        let f2d = sdf2d_eval(&q, contours)?;
        if f2d < 0.0 {
            out.push(LabeledSample {
                x: plane.to_world(&q),
                f2d,
                tag: SampleTag::AdaptiveInterior,
                plane_id,
            });
        }
    }
    let warning = (out.len() < target).then(|| {
        warn!(
            "interior sampling of plane {plane_id} contour {contour_id} hit the attempt cap ({} of {target} found)",
            out.len()
        );
        CapWarning {
            plane_id,
            contour_id,
            found: out.len(),
            attempts,
        }
    });
    Ok((out, warning))
}

/// All four families for every plane at the given schedule stage. Planes are
/// processed in parallel with independent random streams and concatenated in
/// plane order, so the result depends only on `(sections, schedule, stage, seed)`.
pub fn build_sample_bank(
    sections: &CrossSectionSet,
    schedule: &SamplingSchedule,
    stage: usize,
    seed: u64,
) -> Result<SampleBank> {
    schedule.validate()?;
    if stage >= schedule.relabel_epochs.len() {
        return Err(Error::InvalidInput(format!(
            "stage {stage} out of range for a {}-stage schedule",
            schedule.relabel_epochs.len()
        )));
    }
    let eps = schedule.epsilons[stage];
    let per_plane: Vec<Result<(Vec<LabeledSample>, Vec<CapWarning>)>> = sections
        .sections
        .par_iter()
        .enumerate()
        .map(|(pid, section)| {
            let plane_id = pid as u32;
            let plane = &section.plane;
            let contours = &section.contours;
            let mut rng = rng::stream(&[rng::TAG_BANK, seed, stage as u64, pid as u64]);
            let mut samples = Vec::new();
            let mut warnings = Vec::new();
            let points: Vec<Vec<ContourPoint>> =
                contours.iter().map(|c| contour_points(c, schedule.per_edge)).collect();
            for c in contours {
                samples.extend(sample_on_contour(c, plane, plane_id, schedule.per_edge));
            }
            for pts in &points {
                samples.extend(sample_fixed_radius(pts, plane, plane_id, contours, eps)?);
            }
            samples.extend(sample_uniform_plane(plane, plane_id, contours, schedule.uniform_per_plane, &mut rng)?);
            if schedule.adaptive_interior {
                for cid in (0..contours.len()).filter(|&c| !is_hole(contours, c)) {
                    let (s, w) = sample_adaptive_interior(
                        cid,
                        plane,
                        plane_id,
                        contours,
                        schedule.min_interior_per_contour,
                        schedule.attempt_cap,
                        &mut rng,
                    )?;
                    samples.extend(s);
                    warnings.extend(w);
                }
            }
            Ok((samples, warnings))
        })
        .collect();
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    for r in per_plane {
        let (s, w) = r?;
        samples.extend(s);
        warnings.extend(w);
    }
    Ok(SampleBank {
        samples,
        stage,
        rng_seed: seed,
        warnings,
    })
}

/// `count` i.i.d. uniform points in `[-1, 1]^3`, reproducible from
/// `(seed, iteration)`.
pub fn sample_regularization_batch(count: usize, seed: u64, iteration: u64) -> Vec<Vec3> {
    let mut rng = rng::stream(&[rng::TAG_REG, seed, iteration]);
    (0..count)
        .map(|_| {
            Vec3::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests;
