//! Floating-point abstraction for the network code. Training runs in `f32`;
//! gradient checks run the identical code path in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + MulAssign + Sum + Default + Debug + Send + Sync + 'static
{
    /// `c = alpha * op(a) * op(b) + beta * c` for row-major buffers, where
    /// `op(a)` is `m x k` and `op(b)` is `k x n`. With `ta` set, `a` is
    /// stored as `k x m`; likewise `tb` means `b` is stored as `n x k`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]);

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable literal")
    }

    /// Softplus with sharpness `beta` and its derivative `sigmoid(beta * x)`.
    /// Above `beta * x > 20` the activation is taken as exactly linear.
    fn softplus(beta: Self, pre: &[Self], act: &mut [Self], sig: &mut [Self]) {
        let twenty = Self::lit(20.0);
        for ((&x, a), s) in pre.iter().zip(act.iter_mut()).zip(sig.iter_mut()) {
            let z = beta * x;
            if z > twenty {
                *a = x;
                *s = Self::one();
                continue;
            }
            let e = (-z.abs()).exp();
            *a = (z.max(Self::zero()) + e.ln_1p()) / beta;
            *s = if z >= Self::zero() { Self::one() / (Self::one() + e) } else { e / (Self::one() + e) };
        }
    }
}

fn strides(rows: usize, cols: usize, transposed: bool) -> (isize, isize) {
    // logical element (i, j) of a rows x cols operand
    if transposed {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_real {
    ($t:ty, $f:path $(, $sp:path)?) => {
        impl Real for $t {
            $(
                fn softplus(beta: Self, pre: &[Self], act: &mut [Self], sig: &mut [Self]) {
                    $sp(beta, pre, act, sig)
                }
            )?

            fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = strides(m, k, ta);
                let (rsb, csb) = strides(k, n, tb);
                // SAFETY: bounds checked above; strides describe dense row-major buffers.
                unsafe {
                    $f(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm, fast_softplus);
impl_real!(f64, matrixmultiply::dgemm);

// exp(-a), branch-free so the loop vectorizes; a is capped at 40 so that
// nothing downstream goes subnormal
#[inline(always)]
fn exp_neg(a: f32) -> f32 {
    const LOG2E: f32 = std::f32::consts::LOG2_E;
    const LN2_HI: f32 = 0.693_359_4;
    const LN2_LO: f32 = -2.121_944_4e-4;
    let a = a.min(40.0);
    // a >= 0 and bounded, so truncation is floor and cannot overflow
    let n = unsafe { (a * LOG2E + 0.5).to_int_unchecked::<i32>() };
    let nf = n as f32;
    let r = (nf * LN2_HI - a) + nf * LN2_LO;
    let p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6.0 + r * (1.0 / 24.0 + r * (1.0 / 120.0 + r * (1.0 / 720.0))))));
    p * f32::from_bits(((127 - n) << 23) as u32)
}

// ln(1 + e) for e in [0, 1] via the atanh series
#[inline(always)]
fn ln_1p_unit(e: f32) -> f32 {
    let s = e / (2.0 + e);
    let q = s * s;
    let poly = 1.0
        + q * (1.0 / 3.0 + q * (1.0 / 5.0 + q * (1.0 / 7.0 + q * (1.0 / 9.0 + q * (1.0 / 11.0 + q * (1.0 / 13.0))))));
    2.0 * s * poly
}

#[inline(always)]
fn softplus_kernel(beta: f32, pre: &[f32], act: &mut [f32], sig: &mut [f32]) {
    let inv = 1.0 / beta;
    for ((&x, a), s) in pre.iter().zip(act.iter_mut()).zip(sig.iter_mut()) {
        let z = beta * x;
        let e = exp_neg(z.abs());
        let soft = (z.max(0.0) + ln_1p_unit(e)) * inv;
        let r = 1.0 / (1.0 + e);
        let sg = if z >= 0.0 { r } else { e * r };
        *a = if z > 20.0 { x } else { soft };
        *s = if z > 20.0 { 1.0 } else { sg };
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn softplus_avx2(beta: f32, pre: &[f32], act: &mut [f32], sig: &mut [f32]) {
    softplus_kernel(beta, pre, act, sig)
}

fn fast_softplus(beta: f32, pre: &[f32], act: &mut [f32], sig: &mut [f32]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        return unsafe { softplus_avx2(beta, pre, act, sig) };
    }
    softplus_kernel(beta, pre, act, sig)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool) -> Vec<f64> {
        let at = |i: usize, p: usize| if ta { a[p * m + i] } else { a[i * k + p] };
        let bt = |p: usize, j: usize| if tb { b[j * k + p] } else { b[p * n + j] };
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| at(i, p) * bt(p, j)).sum();
            }
        }
        c
    }

    #[test]
    fn fast_softplus_matches_reference() {
        let beta = 100.0;
        let xs: Vec<f64> = (-4000..4000).map(|i| i as f64 * 1e-4 + 3.7e-6).collect();
        let x32: Vec<f32> = xs.iter().map(|&v| v as f32).collect();
        let (mut a64, mut s64) = (vec![0.0; xs.len()], vec![0.0; xs.len()]);
        let (mut a32, mut s32) = (vec![0.0f32; xs.len()], vec![0.0f32; xs.len()]);
        f64::softplus(beta, &xs, &mut a64, &mut s64);
        f32::softplus(beta as f32, &x32, &mut a32, &mut s32);
        for i in 0..xs.len() {
            assert!((a32[i] as f64 - a64[i]).abs() <= 2e-6 * a64[i].abs().max(1e-3), "{}", xs[i]);
            assert!((s32[i] as f64 - s64[i]).abs() <= 1e-6, "{}", xs[i]);
        }
    }

    #[test]
    fn softplus_limits() {
        let (mut a, mut s) = ([0.0; 3], [0.0; 3]);
        f64::softplus(100.0, &[0.0, 1.0, -1.0], &mut a, &mut s);
        assert!((a[0] - 2f64.ln() / 100.0).abs() < 1e-15 && s[0] == 0.5);
        assert_eq!((a[1], s[1]), (1.0, 1.0));
        assert!(a[2] > 0.0 && a[2] < 1e-40 && s[2] < 1e-40);
    }

    #[test]
    fn gemm_matches_naive_in_all_transpositions() {
        let (m, k, n) = (5, 7, 3);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        for ta in [false, true] {
            for tb in [false, true] {
                let mut c = vec![1.0; m * n];
                f64::gemm(m, k, n, 1.0, &a, ta, &b, tb, 0.5, &mut c);
                let r = naive(m, k, n, &a, ta, &b, tb);
                for (x, y) in c.iter().zip(&r) {
                    assert!((x - (y + 0.5)).abs() < 1e-12);
                }
            }
        }
    }
}
