use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::contour::Contour2D;
use super::plane::{Plane, Vec2, Vec3};
use super::sections::{CrossSectionSet, Section};

/// Row-major binary image; `true` marks the object's interior.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(col, row));
            }
        }
        Self { width, height, data }
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Reads a binary (P5) PGM; pixels above half of maxval are set.
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::parse_pgm(&bytes, path)
    }

    pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |m: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: m.to_string(),
        };
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated PGM header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| err("non-ascii header"))?.to_string());
        }
        if fields[0] != "P5" {
            return Err(err("not a binary PGM (P5)"));
        }
        let width: usize = fields[1].parse().map_err(|_| err("bad width"))?;
        let height: usize = fields[2].parse().map_err(|_| err("bad height"))?;
        let maxval: usize = fields[3].parse().map_err(|_| err("bad maxval"))?;
        if maxval == 0 || maxval > 255 {
            return Err(err("only 8-bit PGM is supported"));
        }
        pos += 1; // single whitespace after maxval
        let need = width * height;
        if bytes.len() < pos + need {
            return Err(err("truncated PGM pixel data"));
        }
        let data = bytes[pos..pos + need].iter().map(|&b| 2 * b as usize > maxval).collect();
        Ok(Self { width, height, data })
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm())?;
        Ok(())
    }
}

/// Extracts closed isolines of a binary mask with marching squares.
///
/// Output coordinates are in pixel units: pixel `(col, row)` covers
/// `[col, col + 1] x [row, row + 1]` and its value is sampled at the pixel
/// centre. The grid has `resolution` cells along the longer image side
/// (sampled nearest-neighbour) and is padded with background so every
/// isoline closes. Saddle cells keep their two interior corners separated.
pub fn contours_from_mask(mask: &BinaryMask, resolution: usize) -> Result<Vec<Contour2D>> {
    if resolution == 0 {
        return Err(Error::InvalidInput("resolution must be positive".into()));
    }
    if mask.width == 0 || mask.height == 0 {
        return Ok(Vec::new());
    }
    let step = mask.width.max(mask.height) as f64 / resolution as f64;
    let nx = ((mask.width as f64 / step).round() as usize).max(1);
    let ny = ((mask.height as f64 / step).round() as usize).max(1);
    // padded sample grid: index 0 and n+1 are background
    let gw = nx + 2;
    let gh = ny + 2;
    let mut grid = vec![false; gw * gh];
    for j in 0..ny {
        for i in 0..nx {
            let x = (i as f64 + 0.5) * step;
            let y = (j as f64 + 0.5) * step;
            let col = (x as usize).min(mask.width - 1);
            let row = (y as usize).min(mask.height - 1);
            grid[(j + 1) * gw + i + 1] = mask.get(col, row);
        }
    }
    let at = |i: usize, j: usize| grid[j * gw + i];
    // sample (i, j) of the padded grid sits at ((i - 0.5) * step, (j - 0.5) * step)
    let pos = |i: f64, j: f64| Vec2::new((i - 0.5) * step, (j - 0.5) * step);

    // Edge ids: horizontal edge (i,j)-(i+1,j) -> 2*(j*gw+i), vertical (i,j)-(i,j+1) -> 2*(j*gw+i)+1.
    let h_edge = |i: usize, j: usize| 2 * (j * gw + i);
    let v_edge = |i: usize, j: usize| 2 * (j * gw + i) + 1;
    let edge_point = |e: usize| {
        let cell = e / 2;
        let (i, j) = ((cell % gw) as f64, (cell / gw) as f64);
        if e % 2 == 0 {
            pos(i + 0.5, j)
        } else {
            pos(i, j + 0.5)
        }
    };

    // Directed segments with the interior on the left.
    let mut next: HashMap<usize, usize> = HashMap::new();
    for j in 0..gh - 1 {
        for i in 0..gw - 1 {
            let c0 = at(i, j) as u8;
            let c1 = at(i + 1, j) as u8;
            let c2 = at(i + 1, j + 1) as u8;
            let c3 = at(i, j + 1) as u8;
            let case = c0 | c1 << 1 | c2 << 2 | c3 << 3;
            let bottom = h_edge(i, j);
            let right = v_edge(i + 1, j);
            let top = h_edge(i, j + 1);
            let left = v_edge(i, j);
            let segs: &[(usize, usize)] = match case {
                0 | 15 => &[],
                1 => &[(bottom, left)],
                2 => &[(right, bottom)],
                3 => &[(right, left)],
                4 => &[(top, right)],
                5 => &[(bottom, left), (top, right)],
                6 => &[(top, bottom)],
                7 => &[(top, left)],
                8 => &[(left, top)],
                9 => &[(bottom, top)],
                10 => &[(right, bottom), (left, top)],
                11 => &[(right, top)],
                12 => &[(left, right)],
                13 => &[(bottom, right)],
                14 => &[(left, bottom)],
                _ => unreachable!(),
            };
            for &(a, b) in segs {
                next.insert(a, b);
            }
        }
    }

    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used = std::collections::HashSet::new();
    let mut contours = Vec::new();
    for s in starts {
        if used.contains(&s) {
            continue;
        }
        let mut pts = Vec::new();
        let mut e = s;
        loop {
            used.insert(e);
            pts.push(edge_point(e));
            e = next[&e];
            if e == s {
                break;
            }
        }
        contours.push(Contour2D::from_polyline(&pts, 1e-12)?);
    }
    Ok(contours)
}

/// Sidecar describing where each mask slice sits in space. Pixel `(col, row)`
/// maps to plane coordinates `(col * pixel_size, row * pixel_size)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskSidecar {
    pub slices: Vec<MaskSlice>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskSlice {
    pub mask: PathBuf,
    pub origin: [f64; 3],
    pub u: [f64; 3],
    pub v: [f64; 3],
    pub pixel_size: f64,
}

/// Loads every mask listed in a sidecar JSON (paths relative to the sidecar)
/// and converts them into a raw cross-section set.
pub fn sections_from_masks(sidecar_path: &Path, resolution: usize) -> Result<CrossSectionSet> {
    let sidecar: MaskSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)?;
    let base = sidecar_path.parent().unwrap_or(Path::new("."));
    let mut sections = Vec::new();
    for s in &sidecar.slices {
        if !(s.pixel_size > 0.0) {
            return Err(Error::InvalidInput(format!("{}: pixel_size must be positive", s.mask.display())));
        }
        let plane = Plane::orthonormalized(Vec3::from(s.origin), Vec3::from(s.u), Vec3::from(s.v))?;
        let mask = BinaryMask::read_pgm(&base.join(&s.mask))?;
        let contours = contours_from_mask(&mask, resolution)?
            .into_iter()
            .map(|c| Contour2D::new(c.vertices().iter().map(|p| p * s.pixel_size).collect()))
            .collect::<Result<Vec<_>>>()?;
        sections.push(Section { plane, contours });
    }
    Ok(CrossSectionSet::raw(sections))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize, r: f64) -> BinaryMask {
        let c = n as f64 / 2.0;
        BinaryMask::from_fn(n, n, |col, row| {
            let dx = col as f64 + 0.5 - c;
            let dy = row as f64 + 0.5 - c;
            dx * dx + dy * dy <= r * r
        })
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(contours_from_mask(&BinaryMask::new(64, 64), 64).unwrap().is_empty());
    }

    #[test]
    fn full_mask_traces_frame() {
        let m = BinaryMask::from_fn(20, 10, |_, _| true);
        let cs = contours_from_mask(&m, 20).unwrap();
        assert_eq!(cs.len(), 1);
        // marching squares chamfers each corner by half a pixel
        assert_eq!(cs[0].len(), 8);
        assert!((cs[0].area() - 199.5).abs() < 1e-9);
        let (lo, hi) = cs[0].bounding_box();
        assert!((lo - Vec2::new(0.0, 0.0)).norm() < 1e-12);
        assert!((hi - Vec2::new(20.0, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn disk_area_matches_pixel_count() {
        let m = disk(512, 100.0);
        let cs = contours_from_mask(&m, 512).unwrap();
        assert_eq!(cs.len(), 1);
        let pixel_area = m.count() as f64;
        let analytic = std::f64::consts::PI * 100.0 * 100.0;
        assert!((cs[0].area() - analytic).abs() / analytic < 0.02);
        assert!((cs[0].area() - pixel_area).abs() / pixel_area < 0.01);
    }

    #[test]
    fn disk_error_shrinks_with_resolution() {
        let mut last = f64::INFINITY;
        for n in [32usize, 64, 128, 256] {
            let r = n as f64 * 0.3;
            let m = disk(n, r);
            let cs = contours_from_mask(&m, n).unwrap();
            let err = (cs[0].area() / (n * n) as f64 - m.count() as f64 / (n * n) as f64).abs();
            assert!(err <= last + 1e-12, "n={n} err={err} last={last}");
            last = err;
        }
    }

    #[test]
    fn ring_gives_outer_and_hole() {
        let c = 32.0;
        let m = BinaryMask::from_fn(64, 64, |col, row| {
            let d = ((col as f64 + 0.5 - c).powi(2) + (row as f64 + 0.5 - c).powi(2)).sqrt();
            (10.0..20.0).contains(&d)
        });
        let cs = contours_from_mask(&m, 64).unwrap();
        assert_eq!(cs.len(), 2);
        assert!(!crate::geometry::point_in_contours(&Vec2::new(c, c), &cs));
        assert!(crate::geometry::point_in_contours(&Vec2::new(c + 15.0, c), &cs));
    }

    #[test]
    fn saddle_cells_separate_diagonal_pixels() {
        let m = BinaryMask::from_fn(2, 2, |col, row| col == row);
        let cs = contours_from_mask(&m, 2).unwrap();
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn pgm_round_trip() {
        let m = disk(17, 5.0);
        let back = BinaryMask::parse_pgm(&m.to_pgm(), Path::new("x.pgm")).unwrap();
        assert_eq!(back, m);
        assert!(BinaryMask::parse_pgm(b"P2\n1 1\n255\n0", Path::new("x.pgm")).is_err());
    }
}
