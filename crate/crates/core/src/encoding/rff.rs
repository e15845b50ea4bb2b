use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::real::Real;
use crate::{Error, Result, Vec3};

/// Random Fourier features with a frozen `d/2 x 3` frequency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rff<T> {
    pub b: Vec<T>,
}

impl<T: Real> Rff<T> {
    pub fn new<R: Rng>(dim: usize, variance: f64, rng: &mut R) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Config { key: "rff_dim".into(), message: "must be a positive even number".into() });
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Config { key: "rff_var".into(), message: "must be positive".into() });
        }
        let normal = Normal::new(0.0, variance.sqrt()).expect("valid normal");
        let b = (0..dim / 2 * 3).map(|_| T::lit(normal.sample(rng))).collect();
        Ok(Rff { b })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Self {
        Rff { b: rows.iter().flatten().map(|&v| T::lit(v)).collect() }
    }

    pub fn output_dim(&self) -> usize {
        self.b.len() / 3 * 2
    }

    fn phase(&self, i: usize, x: &Vec3) -> T {
        let r = &self.b[i * 3..i * 3 + 3];
        r[0] * T::lit(x[0]) + r[1] * T::lit(x[1]) + r[2] * T::lit(x[2])
    }

    pub fn encode_into(&self, x: &Vec3, out: &mut [T]) {
        for i in 0..self.b.len() / 3 {
            let (s, c) = self.phase(i, x).sin_cos();
            out[2 * i] = c;
            out[2 * i + 1] = s;
        }
    }

    pub fn encode(&self, x: &Vec3) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_dim()];
        self.encode_into(x, &mut out);
        out
    }

    /// Jacobian, row-major `d x 3`.
    pub fn jacobian(&self, x: &Vec3) -> Vec<T> {
        let mut jac = vec![T::zero(); self.output_dim() * 3];
        self.jacobian_into(x, &mut jac);
        jac
    }

    pub fn jacobian_into(&self, x: &Vec3, jac: &mut [T]) {
        for i in 0..self.b.len() / 3 {
            let (s, c) = self.phase(i, x).sin_cos();
            for d in 0..3 {
                jac[(2 * i) * 3 + d] = -s * self.b[i * 3 + d];
                jac[(2 * i + 1) * 3 + d] = c * self.b[i * 3 + d];
            }
        }
    }
}

pub fn encode_rff<T: Real>(x: &Vec3, rff: &Rff<T>) -> Vec<T> {
    rff.encode(x)
}
