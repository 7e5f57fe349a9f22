//! Weight initialization for real and complex layers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ctensor::Tensor;
use crate::randext::rayleigh;

/// How complex kernel pairs (A, B) are drawn.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Modulus ~ Rayleigh(1/sqrt(fan_in)), phase uniform on [-pi, pi);
    /// A = r cos(phase), B = r sin(phase).
    #[default]
    RayleighPhase,
    /// A and B drawn independently from Glorot-uniform.
    GlorotUniform,
}

pub fn rayleigh_sigma(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Draw the (A, B) kernel pair of a complex layer.
pub fn init_complex_pair<R: Rng>(
    dims: &[usize],
    fan_in: usize,
    fan_out: usize,
    scheme: InitScheme,
    rng: &mut R,
) -> (Tensor, Tensor) {
    let n: usize = dims.iter().product();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    match scheme {
        InitScheme::RayleighPhase => {
            let sigma = rayleigh_sigma(fan_in);
            for _ in 0..n {
                let r = rayleigh(rng, sigma);
                let phase = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                a.push(r * phase.cos());
                b.push(r * phase.sin());
            }
        }
        InitScheme::GlorotUniform => {
            let lim = glorot_limit(fan_in, fan_out);
            for _ in 0..n {
                a.push(rng.gen_range(-lim..lim));
            }
            for _ in 0..n {
                b.push(rng.gen_range(-lim..lim));
            }
        }
    }
    (
        Tensor::from_vec(dims.to_vec(), a).expect("init shape"),
        Tensor::from_vec(dims.to_vec(), b).expect("init shape"),
    )
}

/// Glorot-uniform draw for real layers.
pub fn init_real_glorot<R: Rng>(dims: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let lim = glorot_limit(fan_in, fan_out);
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-lim..lim)).collect();
    Tensor::from_vec(dims.to_vec(), data).expect("init shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn seeded_init_is_reproducible() {
        let draw = || {
            let mut rng = ChaCha12Rng::seed_from_u64(7);
            init_complex_pair(&[4, 4], 16, 16, InitScheme::RayleighPhase, &mut rng)
        };
        let (a1, b1) = draw();
        let (a2, b2) = draw();
        assert_eq!(a1.data(), a2.data());
        assert_eq!(b1.data(), b2.data());
    }

    #[test]
    fn rayleigh_modulus_mean_matches_formula() {
        // E|W| for Rayleigh(sigma) is sigma * sqrt(pi/2); check within 2%.
        let fan_in = 64;
        let sigma = rayleigh_sigma(fan_in);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (a, b) = init_complex_pair(&[100_000], fan_in, fan_in, InitScheme::RayleighPhase, &mut rng);
        let mean_mod: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x * x + y * y).sqrt())
            .sum::<f64>()
            / a.numel() as f64;
        let expected = sigma * (std::f64::consts::PI / 2.0).sqrt();
        assert!((mean_mod - expected).abs() / expected < 0.02, "{mean_mod} vs {expected}");
    }

    #[test]
    fn sigma_scales_with_fan_in() {
        let r = rayleigh_sigma(32) / rayleigh_sigma(64);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn glorot_respects_limit() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (a, b) = init_complex_pair(&[1000], 50, 50, InitScheme::GlorotUniform, &mut rng);
        let lim = (6.0 / 100.0f64).sqrt();
        assert!(a.data().iter().chain(b.data()).all(|v| v.abs() < lim));
    }
}
