use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crosssdf::field::{geometric_init, save_checkpoint, FieldConfig};
use crosssdf::fixtures::sphere_scene;
use crosssdf::geometry::{CrossSectionSet, TriMesh};
use crosssdf::metrics::connected_components;
use crosssdf::shapes;
use crosssdf::training::TrainLog;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crosssdf"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }

    fn mesh(&self, name: &str, mesh: &TriMesh) -> PathBuf {
        let p = self.path(name);
        mesh.write_obj(&p).unwrap();
        p
    }
}

fn small_field() -> FieldConfig {
    let mut c = FieldConfig { rff_dim: 16, hash_hidden: 16, rff_hidden: 16, latent: 16, sdf_hidden: 32, ..Default::default() };
    c.hash.levels = 4;
    c.hash.n_min = 8;
    c.hash.n_max = 64;
    c.hash.features = 2;
    c.hash.table_size = 1 << 12;
    c
}

const SMALL_CONFIG: &str = "# small model for tests
epochs = 2
batch_log2 = 10
reg_batch_log2 = 6
hash_levels = 4
hash_nmin_log2 = 3
hash_nmax_log2 = 6
hash_feat = 2
hash_table_log2 = 12
rff_dim = 16
hash_hidden = 16
rff_hidden = 16
latent_dim = 16
sdf_hidden = 32
lr0 = 0.002
";

#[test]
fn slice_aligned_cube() {
    let d = Dir::new();
    let mesh = d.mesh("cube.obj", &shapes::cube(0.5));
    let out = d.path("cube.json");
    let o = run(&["slice", "--mesh", s(&mesh), "--aligned", "5", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let set = CrossSectionSet::read_json(&out).unwrap();
    assert_eq!(set.sections.len(), 5);
    for sec in &set.sections {
        assert_eq!(sec.contours.len(), 1);
        assert_eq!(sec.contours[0].vertices().len(), 4);
        assert!((sec.contours[0].area().abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn slice_nonaligned_sphere() {
    let d = Dir::new();
    let mesh = d.mesh("sphere.obj", &shapes::icosphere(0.5, 3));
    let out = d.path("sphere.json");
    let o = run(&["slice", "--mesh", s(&mesh), "--nonaligned", "4", "--axis", "z", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let set = CrossSectionSet::read_json(&out).unwrap();
    let normals: Vec<_> = set.sections.iter().map(|sec| sec.plane.normal()).collect();
    assert_eq!(normals.len(), 4);
    assert_eq!(normals.iter().filter(|n| n.z.abs() > 1.0 - 1e-9).count(), 2);
    assert_eq!(normals.iter().filter(|n| n.z.abs() < 1e-9).count(), 2);

    let spec = d.path("spec.json");
    let o = run(&["slice", "--mesh", s(&mesh), "--planes", "nonaligned:4:z", "--out", s(&spec)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&spec).unwrap());
}

#[test]
fn slice_errors() {
    let d = Dir::new();
    let out = d.path("x.json");
    let o = run(&["slice", "--mesh", s(&d.path("missing.obj")), "--aligned", "3", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no such file"), "{}", stderr(&o));

    let mut open = shapes::cube(0.5);
    open.triangles.truncate(open.triangles.len() - 2);
    let mesh = d.mesh("open.obj", &open);
    // the missing x+ face is crossed by every z-plane
    let o = run(&["slice", "--mesh", s(&mesh), "--aligned", "3", "--axis", "z", "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("open"), "{}", stderr(&o));

    let cube = d.mesh("cube.obj", &shapes::cube(0.5));
    assert_eq!(code(&run(&["slice", "--mesh", s(&cube), "--out", s(&out)])), 1);
    assert_eq!(code(&run(&["slice", "--mesh", s(&cube), "--planes", "diagonal:3", "--out", s(&out)])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

fn sphere_sections(d: &Dir) -> PathBuf {
    let p = d.path("sections.json");
    sphere_scene(0.5, 5).unwrap().sections.write_json(&p).unwrap();
    p
}

#[test]
fn train_writes_checkpoint_and_log() {
    let d = Dir::new();
    let sections = sphere_sections(&d);
    let cfg = d.path("small.cfg");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let (a, b) = (d.path("a.ckpt"), d.path("b.ckpt"));
    for ckpt in [&a, &b] {
        let o = run(&["train", "--sections", s(&sections), "--config", s(&cfg), "--out-checkpoint", s(ckpt), "--seed", "7", "--deterministic"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let rows = TrainLog::read_csv(a.with_extension("csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![0, 1]);

    let c = d.path("c.ckpt");
    let log = d.path("c_log.csv");
    let o = run(&["train", "--sections", s(&sections), "--config", s(&cfg), "--out-checkpoint", s(&c), "--log", s(&log), "--epochs", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(TrainLog::read_csv(&log).unwrap().len(), 1);

    // the trained field extracts to a closed surface
    let mesh = d.path("c.obj");
    let o = run(&["extract", "--checkpoint", s(&c), "--out-mesh", s(&mesh), "--res", "48"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(TriMesh::read_obj(&mesh).unwrap().is_closed());
}

#[test]
fn train_config_errors() {
    let d = Dir::new();
    let sections = sphere_sections(&d);
    let cfg = d.path("bad.cfg");
    std::fs::write(&cfg, "epochs = 2\nlearning_rate = 0.1\n").unwrap();
    let ckpt = d.path("x.ckpt");
    let o = run(&["train", "--sections", s(&sections), "--config", s(&cfg), "--out-checkpoint", s(&ckpt)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
    assert!(!ckpt.exists());

    std::fs::write(&cfg, "epochs = many\n").unwrap();
    let o = run(&["train", "--sections", s(&sections), "--config", s(&cfg), "--out-checkpoint", s(&ckpt)]);
    assert_eq!(code(&o), 1);

    let empty = d.path("empty.json");
    CrossSectionSet::raw(vec![]).write_json(&empty).unwrap();
    let o = run(&["train", "--sections", s(&empty), "--out-checkpoint", s(&ckpt)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn train_divergence_exits_3_with_last_good_checkpoint() {
    let d = Dir::new();
    let sections = sphere_sections(&d);
    let cfg = d.path("hot.cfg");
    std::fs::write(&cfg, format!("{SMALL_CONFIG}lr0 = 1e30\n")).unwrap();
    let ckpt = d.path("hot.ckpt");
    let o = run(&["train", "--sections", s(&sections), "--config", s(&cfg), "--out-checkpoint", s(&ckpt)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("last good checkpoint"), "{}", stderr(&o));
    assert!(!ckpt.exists());
}

#[test]
fn extract_cases() {
    let d = Dir::new();
    let fresh = d.path("fresh.ckpt");
    let mut p = geometric_init::<f32>(small_field(), 0.5, 0).unwrap();
    save_checkpoint(&p, &fresh).unwrap();

    let mesh = d.path("fresh.obj");
    let o = run(&["extract", "--checkpoint", s(&fresh), "--out-mesh", s(&mesh), "--res", "64"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = TriMesh::read_obj(&mesh).unwrap();
    assert_eq!(connected_components(&m), 1);
    assert!(m.vertices.iter().all(|v| (v.norm() - 0.5).abs() < 0.05));

    let o = run(&["extract", "--checkpoint", s(&fresh), "--out-mesh", s(&mesh), "--res", "8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!TriMesh::read_obj(&mesh).unwrap().triangles.is_empty());

    p.layer_mut(5).1[0] = 5.0;
    let positive = d.path("positive.ckpt");
    save_checkpoint(&p, &positive).unwrap();
    let o = run(&["extract", "--checkpoint", s(&positive), "--out-mesh", s(&mesh), "--res", "16"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(TriMesh::read_obj(&mesh).unwrap().triangles.is_empty());

    let mut bytes = std::fs::read(&fresh).unwrap();
    bytes[4] = 99;
    let future = d.path("future.ckpt");
    std::fs::write(&future, bytes).unwrap();
    let o = run(&["extract", "--checkpoint", s(&future), "--out-mesh", s(&mesh)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("version"), "{}", stderr(&o));
}

#[test]
fn eval_reports() {
    let d = Dir::new();
    let a = d.mesh("a.obj", &shapes::icosphere(0.5, 4));
    let b = d.mesh("b.obj", &shapes::icosphere(0.6, 4));
    let out = d.path("same.json");
    let o = run(&["eval", "--pred", s(&a), "--gt", s(&a), "--out", s(&out), "--samples", "20000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r["cd_x100"].as_f64().unwrap() < 1e-9);
    assert!(r["hd_x100"].as_f64().unwrap() < 1e-9);
    assert_eq!(r["cc"], 1);
    assert!(r["iou2d"].is_null());

    let out = d.path("pair.json");
    let o = run(&["eval", "--pred", s(&a), "--gt", s(&b), "--out", s(&out), "--samples", "20000", "--volume-res", "64"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((r["cd_x100"].as_f64().unwrap() - 10.0).abs() < 0.5, "{r}");
    let vol = r["iou_vol"].as_f64().unwrap();
    assert!((vol - 0.125 / 0.216).abs() < 0.03, "{vol}");

    let csv = d.path("pair.csv");
    let o = run(&["eval", "--pred", s(&a), "--gt", s(&b), "--out", s(&csv), "--samples", "1000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("cd_x100,hd_x100,cc"));

    let empty = d.path("empty.obj");
    std::fs::write(&empty, "").unwrap();
    let o = run(&["eval", "--pred", s(&empty), "--gt", s(&a), "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn eval_heldout_iou() {
    let d = Dir::new();
    let scene = sphere_scene(0.5, 15).unwrap();
    let heldout = d.path("heldout.json");
    CrossSectionSet::raw(scene.heldout.clone()).write_json(&heldout).unwrap();
    // an untrained field is a sphere of radius 0.5 in the normalized frame
    let mut p = geometric_init::<f32>(small_field(), 0.5, 0).unwrap();
    p.normalization.scale = 1.0;
    let field = d.path("field.ckpt");
    save_checkpoint(&p, &field).unwrap();
    let truth = d.mesh("truth.obj", scene.truth.as_ref().unwrap());
    let out = d.path("r.json");
    let o = run(&[
        "eval", "--pred", s(&truth), "--gt", s(&truth), "--field", s(&field), "--heldout", s(&heldout), "--out", s(&out), "--samples", "1000",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let iou = r["iou2d"].as_f64().unwrap();
    assert!(iou > 0.9, "{iou}");

    let o = run(&["eval", "--pred", s(&truth), "--gt", s(&truth), "--field", s(&field), "--out", s(&out)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn split_withholds_every_nth_slice() {
    let d = Dir::new();
    let all = d.path("all.json");
    sphere_scene(0.5, 61).unwrap().sections.write_json(&all).unwrap();
    let (train, held) = (d.path("train.json"), d.path("held.json"));
    let o = run(&["split", "--sections", s(&all), "--train-out", s(&train), "--heldout-out", s(&held)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = CrossSectionSet::read_json(&train).unwrap();
    let h = CrossSectionSet::read_json(&held).unwrap();
    assert_eq!((t.sections.len(), h.sections.len()), (50, 11));

    let few = d.path("few.json");
    sphere_scene(0.5, 5).unwrap().sections.write_json(&few).unwrap();
    let o = run(&["split", "--sections", s(&few), "--train-out", s(&train), "--heldout-out", s(&held)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn threads_flag_and_env() {
    let d = Dir::new();
    let a = d.mesh("a.obj", &shapes::icosphere(0.5, 2));
    let out = d.path("r.json");
    let o = run(&["--threads", "2", "eval", "--pred", s(&a), "--gt", s(&a), "--out", s(&out), "--samples", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_crosssdf"))
        .args(["eval", "--pred", s(&a), "--gt", s(&a), "--out", s(&out), "--samples", "100"])
        .env("CROSSSDF_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_crosssdf"))
        .args(["eval", "--pred", s(&a), "--gt", s(&a), "--out", s(&out)])
        .env("CROSSSDF_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}
