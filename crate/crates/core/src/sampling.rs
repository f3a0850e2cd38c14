//! Small random-variate helpers shared by the samplers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rand::SeedableRng;

/// Probabilities are kept this far from 0 and 1 so that logit and log
/// terms stay finite.
pub const PROB_EPS: f64 = 1e-12;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Index drawn with probability proportional to `weights`; `None` when the
/// weights carry no mass.
#[inline]
pub fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(i);
            }
            u -= w;
            last = Some(i);
        }
    }
    last
}

/// Draw from unnormalized log-weights via the max-shift trick.
pub fn categorical_log<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    categorical(&w, rng)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Beta draw clamped into the open unit interval.
pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let d = Beta::new(a, b).expect("beta shape parameters must be positive and finite");
    clamp_prob(d.sample(rng))
}

/// Logarithm of a Gamma(shape, rate) draw.
///
/// Shapes far below one underflow a direct draw to zero, so those use
/// `G(shape) = G(shape + 1) * U^(1/shape)` evaluated on the log scale.
pub fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    assert!(shape > 0.0 && rate > 0.0, "gamma shape {shape} and rate {rate} must be positive");
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0 / rate).unwrap().sample(rng);
        return g.ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).unwrap().sample(rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    g.ln() + u.ln() / shape - rate.ln()
}

/// Independent stream number `stream` derived from a master seed.
///
/// Every stream shares the ChaCha8 key expanded from `seed` and differs only
/// in the ChaCha stream id, so streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
