//! Small sampling helpers on top of `rand` (Box-Muller normal, Rayleigh).

use rand::Rng;

/// Standard normal draw via Box-Muller.
pub(crate) fn normal01<R: Rng>(rng: &mut R) -> f64 {
    // Guard against ln(0).
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 1e-300 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Rayleigh draw with scale `sigma` (mode of the modulus distribution).
pub(crate) fn rayleigh<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let u: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 1e-300 {
            break u;
        }
    };
    sigma * (-2.0 * u.ln()).sqrt()
}
