//! Auxiliary-variable update of the DP concentration under a Gamma prior
//! (Escobar & West, 1995), with the sample-size dependent prior shape of
//! Murugiah & Sweeting (2012).

use rand::Rng;

use crate::sampling::{beta, ln_gamma_draw};

use super::GammaPrior;

/// `eta ~ Beta(alpha + 1, n)`.
pub fn sample_eta<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> f64 {
    assert!(alpha > 0.0 && n >= 1, "sample_eta needs alpha > 0 and n >= 1");
    beta(alpha + 1.0, n as f64, rng)
}

/// Weight of the `Gamma(a + k, b - ln eta)` component.
pub fn eta_mixing_weight(k: usize, n: usize, eta: f64, prior: GammaPrior) -> f64 {
    let shape = prior.shape + k as f64 - 1.0;
    shape / (n as f64 * (prior.rate - eta.ln()) + shape)
}

/// Draws `alpha | eta, k` from the two-component Gamma mixture.
pub fn update_alpha<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    eta: f64,
    prior: GammaPrior,
    rng: &mut R,
) -> f64 {
    assert!(k >= 1 && k <= n, "cluster count {k} outside 1..={n}");
    assert!(eta > 0.0 && eta < 1.0, "eta {eta} outside (0, 1)");
    let rate = prior.rate - eta.ln();
    let weight = eta_mixing_weight(k, n, eta, prior);
    let shape = if rng.random::<f64>() < weight {
        prior.shape + k as f64
    } else {
        prior.shape + k as f64 - 1.0
    };
    ln_gamma_draw(shape, rate, rng).exp().max(f64::MIN_POSITIVE)
}

/// `a = b = exp(-0.033 n)`: prior mean one, spread growing with `n`.
pub fn murugiah_hyperparams(n: usize) -> GammaPrior {
    assert!(n >= 1, "need at least one individual");
    let v = (-0.033 * n as f64).exp();
    GammaPrior { shape: v, rate: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn murugiah_values() {
        // exp(-0.99) and exp(-7.821) to 15 significant digits.
        let h = murugiah_hyperparams(30);
        assert_abs_diff_eq!(h.shape, 0.371_576_691_022_046, epsilon = 1e-14);
        assert_eq!(h.shape, h.rate);
        let h = murugiah_hyperparams(237);
        assert_abs_diff_eq!(h.shape, 4.012_202_618_644_758e-4, epsilon = 1e-17);
        for n in [1, 7, 30, 237, 1000, 20_000] {
            assert_eq!(murugiah_hyperparams(n).mean(), 1.0);
        }
    }

    #[test]
    fn mixing_weight_closed_form() {
        let prior = GammaPrior { shape: 1.0, rate: 1.0 };
        // 3 / (30 (1 + ln 2) + 3) = 0.0557678706377984...
        assert_abs_diff_eq!(
            eta_mixing_weight(3, 30, 0.5, prior),
            0.055_767_870_637_798_4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn eta_moments() {
        let mut rng = stream_rng(41, 0);
        for (alpha, n, expected) in [(1.0, 1, 2.0 / 3.0), (5.0, 30, 6.0 / 36.0)] {
            let draws: Vec<f64> = (0..100_000).map(|_| sample_eta(alpha, n, &mut rng)).collect();
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / draws.len() as f64;
            let se = (v / draws.len() as f64).sqrt();
            assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected}");
        }
        let m = (0..10_000).map(|_| sample_eta(1.0, 100_000, &mut rng)).sum::<f64>() / 1e4;
        assert!(m < 1e-4);
    }

    #[test]
    fn alpha_stays_positive_under_tiny_prior() {
        let mut rng = stream_rng(42, 0);
        let prior = murugiah_hyperparams(237);
        let mut alpha = 1.0;
        for _ in 0..10_000 {
            let eta = sample_eta(alpha, 237, &mut rng);
            alpha = update_alpha(1, 237, eta, prior, &mut rng);
            assert!(alpha > 0.0 && alpha.is_finite());
        }
    }
}
