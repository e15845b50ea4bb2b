use super::*;
use crate::geometry::{normalize_scene, point_in_contours, CrossSectionSet, Section};

fn square(h: f64) -> Contour2D {
    Contour2D::new(vec![Vec2::new(-h, -h), Vec2::new(h, -h), Vec2::new(h, h), Vec2::new(-h, h)]).unwrap()
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Contour2D {
    Contour2D::new(vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]).unwrap()
}

fn z_plane(z: f64) -> Plane {
    Plane::axis_aligned(2, z)
}

#[test]
fn on_contour_counts_and_labels() {
    let p = z_plane(0.0);
    let sq = square(0.5);
    let s = sample_on_contour(&sq, &p, 0, 25);
    assert_eq!(s.len(), 100);
    assert!(s.iter().all(|x| x.f2d == 0.0 && x.tag == SampleTag::OnContour));
    for x in &s {
        let q = p.to_plane(&x.x);
        assert!(sdf2d_eval(&q, std::slice::from_ref(&sq)).unwrap().abs() < 1e-9);
    }
    let tri = Contour2D::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
    assert_eq!(sample_on_contour(&tri, &p, 0, 25).len(), 75);
}

#[test]
fn fixed_radius_labels_are_true_distances() {
    let p = z_plane(0.0);
    let sq = square(0.5);
    let cs = vec![sq.clone()];
    let eps = 2f64.powi(-5);
    let pts = contour_points(&sq, 25);
    let s = sample_fixed_radius(&pts, &p, 0, &cs, eps).unwrap();
    assert_eq!(s.len(), 2 * pts.len());
    // sample 12 of the first edge sits near its midpoint
    let mid = &s[2 * 12..2 * 12 + 2];
    assert!((mid[0].f2d - eps).abs() < 1e-15);
    assert!((mid[1].f2d + eps).abs() < 1e-15);
    for x in &s {
        assert!(x.f2d.abs() <= eps + 1e-15);
    }
}

#[test]
fn thin_strip_inward_offset_is_labeled_exterior() {
    let p = z_plane(0.0);
    let strip = rect(-0.5, -0.005, 0.5, 0.005);
    let cs = vec![strip.clone()];
    let eps = 2f64.powi(-5);
    let pts = contour_points(&strip, 25);
    // a point in the middle of the long bottom edge
    let idx = 12;
    let s = sample_fixed_radius(&pts[idx..idx + 1], &p, 0, &cs, eps).unwrap();
    let inward = s[1];
    // oracle: the inward point is at y = -0.005 + eps, which lies above the strip
    let q = p.to_plane(&inward.x);
    assert!((q.y - (-0.005 + eps)).abs() < 1e-12);
    let oracle = q.y - 0.005;
    assert!(inward.f2d > 0.0);
    assert!((inward.f2d - oracle).abs() < 1e-12);
}

#[test]
fn uniform_interior_fraction_matches_area_ratio() {
    let p = z_plane(0.25);
    let cs = vec![square(0.5)];
    let mut r = rng::stream(&[1]);
    let s = sample_uniform_plane(&p, 0, &cs, 10_000, &mut r).unwrap();
    assert_eq!(s.len(), 10_000);
    let inside = s.iter().filter(|x| x.f2d < 0.0).count() as f64 / 10_000.0;
    let expect: f64 = 1.0 / 4.0;
    let sigma = (expect * (1.0 - expect) / 10_000.0).sqrt();
    assert!((inside - expect).abs() < 3.0 * sigma, "{inside}");
    for x in &s {
        assert!(p.signed_distance(&x.x).abs() < 1e-9);
        assert!(x.x.amax() <= 1.0 + 1e-12);
        let q = p.to_plane(&x.x);
        assert!((sdf2d_eval(&q, &cs).unwrap() - x.f2d).abs() < 1e-9);
    }
}

#[test]
fn oblique_plane_window_stays_in_domain() {
    let p = Plane::from_normal(Vec3::new(0.2, 0.1, 0.0), Vec3::new(1.0, 1.0, 0.5)).unwrap();
    let mut r = rng::stream(&[2]);
    let s = sample_uniform_plane(&p, 3, &[], 2_000, &mut r).unwrap();
    assert_eq!(s.len(), 2_000);
    assert!(s.iter().all(|x| x.x.amax() <= 1.0 + 1e-12 && x.f2d == FAR_LABEL && x.plane_id == 3));
}

#[test]
fn adaptive_interior_hits_threshold() {
    let p = z_plane(0.0);
    let cs = vec![square(0.5)];
    let mut r = rng::stream(&[3]);
    let (s, w) = sample_adaptive_interior(0, &p, 0, &cs, 50, 1_000_000, &mut r).unwrap();
    assert!(w.is_none());
    assert_eq!(s.len(), 50);
    assert!(s.iter().all(|x| x.f2d < 0.0));
}

#[test]
fn adaptive_interior_handles_slivers() {
    // a thin diagonal triangle covering ~1e-4 of its bounding box
    let p = z_plane(0.0);
    let sliver = Contour2D::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0 - 2e-4)]).unwrap();
    let (lo, hi) = sliver.bounding_box();
    let frac = sliver.area() / ((hi.x - lo.x) * (hi.y - lo.y));
    assert!((frac - 1e-4).abs() < 1e-6);
    let cs = vec![sliver];
    let mut r = rng::stream(&[4]);
    let (s, w) = sample_adaptive_interior(0, &p, 0, &cs, 50, 1_000_000, &mut r).unwrap();
    assert!(w.is_none());
    assert_eq!(s.len(), 50);
}

#[test]
fn adaptive_interior_cap_warns() {
    let p = z_plane(0.0);
    let sliver = Contour2D::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0 - 2e-7)]).unwrap();
    let cs = vec![sliver];
    let mut r = rng::stream(&[5]);
    let (s, w) = sample_adaptive_interior(0, &p, 0, &cs, 50, 10_000, &mut r).unwrap();
    let w = w.expect("cap warning");
    assert_eq!(w.found, s.len());
    assert_eq!(w.attempts, 10_000);
    assert!(s.len() < 50);
}

#[test]
fn adaptive_interior_avoids_holes() {
    let p = z_plane(0.0);
    let cs = vec![square(0.5), square(0.4)];
    assert!(!is_hole(&cs, 0));
    assert!(is_hole(&cs, 1));
    let mut r = rng::stream(&[6]);
    let (s, _) = sample_adaptive_interior(0, &p, 0, &cs, 50, 1_000_000, &mut r).unwrap();
    assert_eq!(s.len(), 50);
    for x in &s {
        let q = p.to_plane(&x.x);
        // parity oracle: inside the outer square and outside the inner one
        assert!(q.amax() <= 0.5 && q.amax() >= 0.4, "{q:?}");
        assert!(point_in_contours(&q, &cs));
    }
    // an island inside the hole bounds solid again
    let island = vec![square(0.5), square(0.4), square(0.1)];
    assert!(!is_hole(&island, 2));
}

fn one_square_scene() -> CrossSectionSet {
    CrossSectionSet::raw(vec![Section {
        plane: z_plane(0.0),
        contours: vec![square(0.5)],
    }])
}

#[test]
fn bank_counts_sum_in_closed_form() {
    let sched = SamplingSchedule::default();
    let bank = build_sample_bank(&one_square_scene(), &sched, 0, 7).unwrap();
    assert_eq!(bank.samples.len(), 100 + 200 + 10_000 + 50);
    assert_eq!(bank.count(SampleTag::OnContour), 100);
    assert_eq!(bank.count(SampleTag::FixedRadius), 200);
    assert_eq!(bank.count(SampleTag::Uniform), 10_000);
    assert_eq!(bank.count(SampleTag::AdaptiveInterior), 50);
}

#[test]
fn bank_is_deterministic_and_stage_dependent() {
    let sched = SamplingSchedule::default();
    let scene = one_square_scene();
    let a = build_sample_bank(&scene, &sched, 0, 11).unwrap();
    let b = build_sample_bank(&scene, &sched, 0, 11).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = build_sample_bank(&scene, &sched, 4, 11).unwrap();
    assert_eq!(c.samples.len(), a.samples.len());
    // on-contour samples are identical, fixed-radius ones moved to eps = 2^-8
    assert_eq!(a.samples[..100], c.samples[..100]);
    let eps4 = 2f64.powi(-8);
    assert_eq!(sched.epsilons[4], eps4);
    assert!(c.samples[100..300].iter().all(|s| s.f2d.abs() <= eps4 + 1e-15));
    assert!(c.samples[100..300].iter().any(|s| (s.f2d.abs() - eps4).abs() < 1e-15));
    assert!(build_sample_bank(&scene, &sched, 5, 11).is_err());
}

#[test]
fn every_label_matches_the_2d_sdf() {
    let raw = CrossSectionSet::raw(vec![
        Section {
            plane: z_plane(0.0),
            contours: vec![square(0.5), square(0.2)],
        },
        Section {
            plane: Plane::from_normal(Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.2, 0.0, 1.0)).unwrap(),
            contours: vec![rect(-0.4, -0.1, 0.3, 0.05)],
        },
        Section {
            plane: z_plane(0.3),
            contours: vec![],
        },
    ]);
    let scene = normalize_scene(&raw).unwrap();
    let bank = build_sample_bank(&scene, &SamplingSchedule::default(), 1, 3).unwrap();
    for s in &bank.samples {
        let sec = &scene.sections[s.plane_id as usize];
        assert!(sec.plane.signed_distance(&s.x).abs() < 1e-9);
        if sec.contours.is_empty() {
            assert_eq!(s.f2d, FAR_LABEL);
            continue;
        }
        let q = sec.plane.to_plane(&s.x);
        let f = sdf2d_eval(&q, &sec.contours).unwrap();
        assert!((f - s.f2d).abs() < 1e-9);
        match s.tag {
            SampleTag::OnContour => assert_eq!(s.f2d, 0.0),
            SampleTag::FixedRadius => assert!(s.f2d.abs() <= 2f64.powi(-6) + 1e-12),
            SampleTag::AdaptiveInterior => assert!(s.f2d < 0.0),
            SampleTag::Uniform => {}
        }
    }
    // two solid-bounding contours get the interior threshold; the hole does not
    assert_eq!(bank.count(SampleTag::AdaptiveInterior), 100);
    assert!(bank.warnings.is_empty());
}

#[test]
fn ablation_switch_drops_interior_family() {
    let sched = SamplingSchedule {
        adaptive_interior: false,
        ..SamplingSchedule::default()
    };
    let bank = build_sample_bank(&one_square_scene(), &sched, 0, 7).unwrap();
    assert_eq!(bank.count(SampleTag::AdaptiveInterior), 0);
    assert_eq!(bank.samples.len(), 10_300);
}

#[test]
fn schedule_stage_lookup() {
    let s = SamplingSchedule::default();
    assert!(s.validate().is_ok());
    assert_eq!(s.stage_for_epoch(0), 0);
    assert_eq!(s.stage_for_epoch(49), 0);
    assert_eq!(s.stage_for_epoch(50), 1);
    assert_eq!(s.stage_for_epoch(199), 2);
    assert_eq!(s.stage_for_epoch(499), 4);
    let bad = SamplingSchedule {
        epsilons: vec![0.1, 0.2, 0.1, 0.1, 0.1],
        ..SamplingSchedule::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn regularization_batches() {
    let n = 1 << 17;
    let a = sample_regularization_batch(n, 9, 0);
    assert!(a.iter().all(|x| x.amax() <= 1.0));
    let mean = a.iter().fold(Vec3::zeros(), |acc, x| acc + x) / n as f64;
    // per-coordinate sd of U(-1,1) is 1/sqrt(3)
    let sigma = (1.0 / 3.0f64).sqrt() / (n as f64).sqrt();
    assert!(mean.amax() < 3.0 * sigma, "{mean:?}");
    assert_eq!(sample_regularization_batch(64, 9, 5), sample_regularization_batch(64, 9, 5));
    assert_ne!(sample_regularization_batch(64, 9, 5), sample_regularization_batch(64, 9, 6));
}
