use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{FieldConfig, FieldParams};
use crate::real::Real;
use crate::rng::{self, TAG_INIT};
use crate::{Error, Result, Vec3};

pub const INIT_RADIUS: f64 = 0.5;

const ENCODER_STD: f64 = 1e-3;
const VERIFY_POINTS: usize = 4096;
const VERIFY_TOL: f64 = 0.1;

fn fibonacci_sphere(m: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

/// Builds a field whose zero level set starts as a sphere of `radius`.
///
/// The raw-coordinate inputs of the decoder's hidden layer get evenly spread
/// unit directions, so its units behave like `relu(u . x)`; averaged over the
/// sphere of directions that is `|x| / 4`, which the output layer rescales.
/// Encoder inputs to the decoder start near zero. The result is checked on
/// random points and rejected if it strays more than 0.1 from the sphere.
pub fn geometric_init<T: Real>(config: FieldConfig, radius: f64, seed: u64) -> Result<FieldParams<T>> {
    let mut rng = rng::stream(&[TAG_INIT, seed]);
    let mut p = FieldParams::<T>::new(config, &mut rng)?;
    let h = config.sdf_hidden;
    let latent = config.latent;
    let normal = Normal::new(0.0, ENCODER_STD).expect("valid normal");
    {
        let (w, b) = p.layer_mut(4);
        for v in &mut w[..latent * h] {
            *v = T::lit(normal.sample(&mut rng));
        }
        for (j, u) in fibonacci_sphere(h).iter().enumerate() {
            for d in 0..3 {
                w[(latent + d) * h + j] = T::lit(u[d]);
            }
        }
        b.iter_mut().for_each(|v| *v = T::zero());
    }
    {
        let (w, b) = p.layer_mut(5);
        w.iter_mut().for_each(|v| *v = T::lit(4.0 / h as f64));
        b[0] = T::lit(-radius);
    }

    let pts: Vec<Vec3> = (0..VERIFY_POINTS).map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..=1.0))).collect();
    let f = p.eval_batch(&pts);
    let max_deviation = pts
        .iter()
        .zip(&f)
        .map(|(x, v)| (v.to_f64().unwrap_or(f64::INFINITY) - (x.norm() - radius)).abs())
        .fold(0.0, f64::max);
    log::debug!("geometric init max deviation {max_deviation:.4}");
    if !(max_deviation <= VERIFY_TOL) {
        return Err(Error::InitVerification { max_deviation });
    }
    Ok(p)
}
