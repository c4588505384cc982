#![allow(dead_code)]

use std::f64::consts::PI;

use graphon_osc::continuum::{InitialProfile, TrigTerm};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// `∫_0^1 P(x) cos(2πmx) dx` for `P = p G_{1/2} + (1 − 2p) G_r`, integrated
/// piece by piece over `[0, r), [r, 1/2), (1/2, 1 − r], (1 − r, 1]`.
pub fn small_world_cosine_integral(p: f64, r: f64, m: i64) -> f64 {
    let pieces = [
        (0.0, r, p + (1.0 - 2.0 * p)),
        (r, 0.5, p),
        (0.5, 1.0 - r, p),
        (1.0 - r, 1.0, p + (1.0 - 2.0 * p)),
    ];
    pieces
        .iter()
        .map(|&(a, b, v)| {
            if m == 0 {
                v * (b - a)
            } else {
                let w = 2.0 * PI * m as f64;
                v * ((w * b).sin() - (w * a).sin()) / w
            }
        })
        .sum()
}

/// Oracle for `𝒦̂(m) − 𝒦̂(0)` of the small-world kernel.
pub fn small_world_spectral_difference(p: f64, r: f64, m: i64) -> f64 {
    small_world_cosine_integral(p, r, m) - small_world_cosine_integral(p, r, 0)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

/// Smooth random profile: offset plus modes 1..=4 with coefficients
/// decaying like `1/k²`.
pub fn random_smooth_profile(seed: u64, offset: f64, scale: f64) -> InitialProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = (1..=4)
        .map(|k| {
            let damp = scale / (k * k) as f64;
            TrigTerm {
                k,
                cos_amp: damp * uniform(&mut rng),
                sin_amp: damp * uniform(&mut rng),
            }
        })
        .collect();
    InitialProfile::Trig { offset, terms }
}

pub fn relative_spread(values: &[f64]) -> f64 {
    let first = values[0];
    values
        .iter()
        .map(|v| (v - first).abs())
        .fold(0.0, f64::max)
        / first.abs()
}
