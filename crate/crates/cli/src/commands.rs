use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use crosssdf::field::{load_checkpoint, save_checkpoint, FieldParams};
use crosssdf::geometry::{normalize_scene, slice_into_sections, slicing_planes, CrossSectionSet, SliceLayout, TriMesh};
use crosssdf::meshing::{extract_mesh, ExtractionConfig};
use crosssdf::metrics::{connected_components, heldout_split, iou_2d, iou_volume_meshes, surface_distances, MetricsReport, Window};
use crosssdf::training::{train_with, TrainConfig, TrainHooks};
use crosssdf::{Error, Vec3};

use crate::{EvalArgs, ExtractArgs, SliceArgs, SplitArgs, TrainArgs};

/// Bad flags or unusable input files.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 0 ok, 1 usage or input, 2 data or format, 3 numerical failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::NonFiniteLoss { .. } | Error::NonFiniteParameter(_) | Error::InitVerification { .. }) => 3,
        Some(Error::Config { .. } | Error::TooFewSlices(_) | Error::Io(_)) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn input(path: &Path) -> Result<&Path> {
    if !path.exists() {
        return Err(usage(format!("no such file: {}", path.display())));
    }
    Ok(path)
}

fn parse_axis(s: &str) -> Result<usize> {
    match s {
        "x" | "X" | "0" => Ok(0),
        "y" | "Y" | "1" => Ok(1),
        "z" | "Z" | "2" => Ok(2),
        _ => Err(usage(format!("axis must be x, y or z, got {s:?}"))),
    }
}

fn parse_layout(a: &SliceArgs) -> Result<SliceLayout> {
    let count = |n: usize| if n == 0 { Err(usage("plane count must be at least 1")) } else { Ok(n) };
    if let Some(spec) = &a.planes {
        let parts: Vec<&str> = spec.split(':').collect();
        let axis = parse_axis(parts.get(2).copied().unwrap_or(&a.axis))?;
        let n: usize = parts
            .get(1)
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| usage(format!("bad plane spec {spec:?}; expected aligned:N[:AXIS] or nonaligned:N[:AXIS]")))?;
        return match parts[0] {
            "aligned" if parts.len() <= 3 => Ok(SliceLayout::Aligned { count: count(n)?, axis }),
            "nonaligned" if parts.len() <= 3 => Ok(SliceLayout::NonAligned { count: count(n)?, axis }),
            _ => Err(usage(format!("bad plane spec {spec:?}"))),
        };
    }
    let axis = parse_axis(&a.axis)?;
    match (a.aligned, a.nonaligned) {
        (Some(n), None) => Ok(SliceLayout::Aligned { count: count(n)?, axis }),
        (None, Some(n)) => Ok(SliceLayout::NonAligned { count: count(n)?, axis }),
        _ => Err(usage("one of --planes, --aligned or --nonaligned is required")),
    }
}

pub fn slice(a: SliceArgs) -> Result<()> {
    let layout = parse_layout(&a)?;
    let mesh = TriMesh::read_obj(input(&a.mesh)?)?;
    let bbox = mesh.bounding_box().ok_or(Error::EmptyMesh)?;
    let planes = slicing_planes(bbox, layout)?;
    let sections = slice_into_sections(&mesh, &planes)?;
    let set = CrossSectionSet::raw(sections);
    log::info!("{} planes, {} contours", set.sections.len(), set.contour_count());
    set.write_json(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let raw = CrossSectionSet::read_json(input(&a.sections)?)?;
    let base = if a.desk { TrainConfig::desk() } else { TrainConfig::default() };
    let mut config = match &a.config {
        Some(path) => TrainConfig::parse_onto(base, &std::fs::read_to_string(input(path)?)?, path)?,
        None => base,
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(epochs) = a.epochs {
        config.epochs = epochs;
    }
    config.deterministic |= a.deterministic;
    config.validate()?;
    log::info!("seed {}, {} epochs, batch {}", config.seed, config.epochs, config.batch_size());

    let sections = normalize_scene(&raw)?;
    let last_good = with_extension(&a.out_checkpoint, ".last_good");
    let mut hooks = TrainHooks { on_epoch: None, last_good_path: Some(last_good.clone()) };
    let out = match train_with(&sections, &config, &mut hooks) {
        Ok(out) => out,
        Err(e) => {
            if matches!(e, Error::NonFiniteLoss { .. } | Error::NonFiniteParameter(_)) && last_good.exists() {
                eprintln!("last good checkpoint: {}", last_good.display());
            }
            return Err(e.into());
        }
    };
    save_checkpoint(&out.params, &a.out_checkpoint)?;
    let log_path = a.log.unwrap_or_else(|| a.out_checkpoint.with_extension("csv"));
    out.log.write_csv(&log_path)?;
    if let Some(last) = out.log.rows.last() {
        log::info!("final loss {:.6}, off fraction {:.4}", last.loss_total, last.off_fraction);
    }
    Ok(())
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    if a.res < 8 {
        return Err(usage("--res must be at least 8"));
    }
    let params: FieldParams<f32> = load_checkpoint(input(&a.checkpoint)?)?;
    let mesh = extract_mesh(&params, &ExtractionConfig::with_resolution(a.res))?;
    if mesh.triangles.is_empty() {
        log::warn!("the field has no zero crossing in the domain; writing an empty mesh");
    } else {
        log::info!("{} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    }
    mesh.write_obj(&a.out_mesh)?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let pred = TriMesh::read_obj(input(&a.pred)?)?;
    let gt = TriMesh::read_obj(input(&a.gt)?)?;
    if pred.triangles.is_empty() || gt.triangles.is_empty() {
        return Err(Error::EmptyMesh.into());
    }
    let (cd, hd) = surface_distances(&pred, &gt, a.samples, a.seed)?;
    let mut report = MetricsReport::new(cd, hd, connected_components(&pred), a.samples, a.seed);

    if let (Some(field), Some(heldout)) = (&a.field, &a.heldout) {
        let params: FieldParams<f32> = load_checkpoint(input(field)?)?;
        let sections = CrossSectionSet::read_json(input(heldout)?)?;
        if sections.sections.is_empty() {
            bail!(Error::InvalidInput("held-out file has no sections".into()));
        }
        let eval = |xs: &[Vec3]| params.eval_batch(xs).into_iter().map(f64::from).collect::<Vec<f64>>();
        let ious: Vec<f64> = sections
            .sections
            .iter()
            .map(|s| {
                let s = params.normalization.apply_to_section(s);
                iou_2d(eval, &s, &Window::domain(&s), a.iou_res)
            })
            .collect();
        report.iou2d = Some(ious.iter().sum::<f64>() / ious.len() as f64);
    }
    if let Some(res) = a.volume_res {
        report.iou_vol = Some(iou_volume_meshes(&pred, &gt, res).map_err(|e| anyhow!(e).context("volume IoU"))?);
    }

    let csv = a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        report.write_csv(&a.out)?;
    } else {
        report.write_json(&a.out)?;
    }
    log::info!("cd x100 {:.4}, hd x100 {:.4}, cc {}", report.cd_x100, report.hd_x100, report.cc);
    Ok(())
}

pub fn split(a: SplitArgs) -> Result<()> {
    let set = CrossSectionSet::read_json(input(&a.sections)?)?;
    let (train, heldout) = heldout_split(&set.sections)?;
    log::info!("{} training slices, {} held out", train.len(), heldout.len());
    CrossSectionSet::raw(train).write_json(&a.train_out)?;
    CrossSectionSet::raw(heldout).write_json(&a.heldout_out)?;
    Ok(())
}
