//! Input encodings: the multiresolution hash grid and random Fourier
//! features.

mod hash;
mod rff;

pub use hash::{encode_hash, hash_index, HashCorners, HashGrid, HashGridConfig, HASH_PRIMES};
pub use rff::{encode_rff, Rff};

use crate::real::Real;
use crate::Vec3;

/// Jacobians of both encoders at `x`, row-major `dim x 3`.
pub fn encode_jacobians<T: Real>(x: &Vec3, grid: &HashGrid<T>, rff: &Rff<T>) -> (Vec<T>, Vec<T>) {
    (grid.jacobian(x), rff.jacobian(x))
}
