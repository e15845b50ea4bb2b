use crate::sampling::{LabeledSample, SampleTag};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_eik: f64,
    pub lambda_min: f64,
    pub beta_min: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_eik: 1e-3, lambda_min: 5e-2, beta_min: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleClass {
    On,
    Off,
    Agree,
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// On-contour samples by tag; the rest split by whether the field's sign
/// disagrees with the label's.
pub fn classify_symmetric_difference(batch: &[LabeledSample], f: &[f64]) -> Vec<SampleClass> {
    batch
        .iter()
        .zip(f)
        .map(|(s, &v)| {
            if s.tag == SampleTag::OnContour {
                SampleClass::On
            } else if sign(v) != sign(s.f2d) {
                SampleClass::Off
            } else {
                SampleClass::Agree
            }
        })
        .collect()
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean absolute field value over on-contour samples; 0 when empty.
pub fn loss_on(f_on: &[f64]) -> f64 {
    mean(f_on.iter().map(|v| v.abs()))
}

/// Mean squared error over `(f, f2d)` pairs; 0 when empty.
pub fn loss_off(pairs: &[(f64, f64)]) -> f64 {
    mean(pairs.iter().map(|(f, g)| (f - g) * (f - g)))
}

/// Mean absolute error over `(f, f2d)` pairs, used by the direct
/// regression ablation.
pub fn loss_l1(pairs: &[(f64, f64)]) -> f64 {
    mean(pairs.iter().map(|(f, g)| (f - g).abs()))
}

pub fn loss_eikonal(gradients: &[Vec3]) -> f64 {
    mean(gradients.iter().map(|g| (g.norm() - 1.0).powi(2)))
}

pub fn loss_min_surface(f: &[f64], beta: f64) -> f64 {
    mean(f.iter().map(|v| (-beta * v.abs()).exp()))
}
