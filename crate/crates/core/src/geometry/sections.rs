use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::contour::Contour2D;
use super::plane::{Plane, Vec2, Vec3};

/// Longest side of the normalized bounding box.
pub const NORMALIZED_EXTENT: f64 = 1.8;

/// Maps input coordinates to the normalized scene: `y = (x - center) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl Default for NormalizationTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn forward(&self, x: &Vec3) -> Vec3 {
        (x - self.center) * self.scale
    }

    pub fn inverse(&self, y: &Vec3) -> Vec3 {
        y / self.scale + self.center
    }

    /// Maps a section given in input coordinates into the normalized frame.
    pub fn apply_to_section(&self, section: &Section) -> Section {
        Section {
            plane: section.plane.transformed(&self.center, self.scale),
            contours: section.contours.iter().map(|c| c.scaled(self.scale)).collect(),
        }
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &NormalizationTransform) -> NormalizationTransform {
        NormalizationTransform {
            center: first.center + self.center / first.scale,
            scale: first.scale * self.scale,
        }
    }
}

/// One slicing plane and the contours on it. A plane with no contours is
/// valid and marks a section that lies entirely outside the object.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub plane: Plane,
    pub contours: Vec<Contour2D>,
}

/// The full supervision signal: every section plus the transform that was
/// applied to bring it into the normalized domain.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossSectionSet {
    pub sections: Vec<Section>,
    pub normalization: NormalizationTransform,
}

impl CrossSectionSet {
    /// An un-normalized set; the transform is the identity.
    pub fn raw(sections: Vec<Section>) -> Self {
        Self {
            sections,
            normalization: NormalizationTransform::identity(),
        }
    }

    pub fn contour_count(&self) -> usize {
        self.sections.iter().map(|s| s.contours.len()).sum()
    }

    /// World-space vertices of every contour.
    pub fn world_vertices(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.sections
            .iter()
            .flat_map(|s| s.contours.iter().flat_map(move |c| c.vertices().iter().map(move |p| s.plane.to_world(p))))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: SectionsDoc = serde_json::from_str(text)?;
        let mut sections = Vec::with_capacity(doc.planes.len());
        for (i, p) in doc.planes.into_iter().enumerate() {
            let plane = Plane::orthonormalized(Vec3::from(p.origin), Vec3::from(p.u), Vec3::from(p.v))
                .map_err(|e| Error::InvalidInput(format!("plane {i}: {e}")))?;
            let contours = p
                .contours
                .into_iter()
                .enumerate()
                .map(|(j, c)| {
                    Contour2D::new(c.into_iter().map(|[a, b]| Vec2::new(a, b)).collect())
                        .map_err(|e| Error::InvalidInput(format!("plane {i} contour {j}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            sections.push(Section { plane, contours });
        }
        Ok(Self::raw(sections))
    }

    pub fn to_json_string(&self) -> Result<String> {
        let doc = SectionsDoc {
            planes: self
                .sections
                .iter()
                .map(|s| PlaneDoc {
                    origin: s.plane.origin().clone().into(),
                    u: s.plane.u().clone().into(),
                    v: s.plane.v().clone().into(),
                    contours: s
                        .contours
                        .iter()
                        .map(|c| c.vertices().iter().map(|p| [p.x, p.y]).collect())
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SectionsDoc {
    planes: Vec<PlaneDoc>,
}

#[derive(Serialize, Deserialize)]
struct PlaneDoc {
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
    #[serde(default)]
    contours: Vec<Vec<[f64; 2]>>,
}

/// Centers the contour bounding box at the origin and scales it uniformly so
/// its longest side is [`NORMALIZED_EXTENT`]. Flat scenes take the scale from
/// the largest extent; axes are never scaled independently.
pub fn normalize_scene(raw: &CrossSectionSet) -> Result<CrossSectionSet> {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut any = false;
    for x in raw.world_vertices() {
        lo = lo.inf(&x);
        hi = hi.sup(&x);
        any = true;
    }
    if !any {
        return Err(Error::NoContours);
    }
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::InvalidInput("contour vertices span zero extent".into()));
    }
    let center = (lo + hi) * 0.5;
    let scale = NORMALIZED_EXTENT / extent;
    let step = NormalizationTransform { center, scale };
    let sections = raw.sections.iter().map(|s| step.apply_to_section(s)).collect();
    Ok(CrossSectionSet {
        sections,
        normalization: step.compose(&raw.normalization),
    })
}
