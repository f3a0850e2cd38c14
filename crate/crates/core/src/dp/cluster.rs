use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hmm::{logistic, logit, Count};
use crate::sampling::{beta, clamp_prob};

use super::DpState;

/// Redraws every cluster value from its Beta posterior given the pooled
/// counts of its members. Clusters with no trials fall back to the base.
pub fn update_cluster_params_conjugate<R: Rng + ?Sized>(
    state: &mut DpState,
    counts: &[Count],
    rng: &mut R,
) {
    assert_eq!(counts.len(), state.n(), "one count per individual");
    let mut pooled = vec![Count::default(); state.k()];
    for (&c, &count) in state.assignments.iter().zip(counts) {
        pooled[c] += count;
    }
    let (a, b) = (state.base_a, state.base_b);
    for (v, p) in state.values.iter_mut().zip(&pooled) {
        *v = beta(a + p.successes as f64, b + p.failures() as f64, rng);
    }
}

/// Log-likelihood of per-season persistence counts when the season-`s`
/// probability is `logistic(year_effects[s] + logit(phi))`.
#[inline]
pub fn year_effect_log_lik(counts: &[Count], year_effects: &[f64], phi: f64) -> f64 {
    debug_assert_eq!(counts.len(), year_effects.len());
    let base = logit(phi);
    counts
        .iter()
        .zip(year_effects)
        .filter(|(c, _)| c.trials > 0)
        .map(|(c, &b)| c.log_kernel(clamp_prob(logistic(b + base))))
        .sum()
}

/// Random-walk Metropolis on `logit(phi_c)` for each cluster, targeting the
/// Beta base density times the year-effect likelihood of the members.
///
/// The step size depends only on the members' pooled counts, so the
/// proposal is symmetric within a call.
pub fn update_cluster_params_mh<D, R>(
    state: &mut DpState,
    per_season: &[D],
    year_effects: &[f64],
    steps: usize,
    rng: &mut R,
) where
    D: AsRef<[Count]>,
    R: Rng + ?Sized,
{
    assert_eq!(per_season.len(), state.n(), "one record per individual");
    let (a, b) = (state.base_a, state.base_b);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); state.k()];
    for (i, &c) in state.assignments.iter().enumerate() {
        members[c].push(i);
    }
    for (c, who) in members.iter().enumerate() {
        // Density of x = logit(phi) including the Jacobian phi (1 - phi).
        let log_target = |x: f64| {
            let phi = clamp_prob(logistic(x));
            let lik: f64 = who
                .iter()
                .map(|&i| year_effect_log_lik(per_season[i].as_ref(), year_effects, phi))
                .sum();
            lik + a * phi.ln() + b * (1.0 - phi).ln()
        };
        let pooled: Count = who
            .iter()
            .flat_map(|&i| per_season[i].as_ref().iter().copied())
            .sum();
        let p_hat = (pooled.successes as f64 + a) / (pooled.trials as f64 + a + b);
        let info = pooled.trials as f64 * p_hat * (1.0 - p_hat) + a * b / (a + b);
        let scale = 2.4 / (1.0 + info).sqrt();

        let mut x = logit(state.values[c]);
        let mut current = log_target(x);
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(rng);
            let proposal = x + scale * z;
            let cand = log_target(proposal);
            if rng.random::<f64>().ln() < cand - current {
                x = proposal;
                current = cand;
            }
        }
        state.values[c] = clamp_prob(logistic(x));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{ln_beta_pdf, GammaPrior};
    use crate::sampling::stream_rng;

    fn prior() -> GammaPrior {
        GammaPrior { shape: 1.0, rate: 1.0 }
    }

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn empty_counts_draw_from_base() {
        let mut rng = stream_rng(31, 0);
        let mut s = DpState::single_cluster(1, 0.5, 1.0, (2.0, 3.0), prior()).unwrap();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                update_cluster_params_conjugate(&mut s, &[Count::new(0, 0)], &mut rng);
                s.cluster_values()[0]
            })
            .collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 0.4).abs() < 3.0 * se, "{m}");
    }

    #[test]
    fn conjugate_posterior_mean() {
        let mut rng = stream_rng(32, 0);
        // Members pooled: 4/6 + 3/4 = 7/10.
        let counts = [Count::new(4, 6), Count::new(3, 4)];
        let mut s = DpState::single_cluster(2, 0.5, 1.0, (1.0, 1.0), prior()).unwrap();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| {
                update_cluster_params_conjugate(&mut s, &counts, &mut rng);
                s.cluster_values()[0]
            })
            .collect();
        let (m, se) = mean_and_se(&draws);
        assert!((m - 8.0 / 12.0).abs() < 3.0 * se, "{m}");
    }

    fn run_mh(counts: Vec<Vec<Count>>, effects: &[f64], base: (f64, f64), seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let n = counts.len();
        let mut s = DpState::single_cluster(n, 0.5, 1.0, base, prior()).unwrap();
        (0..120_000)
            .map(|_| {
                update_cluster_params_mh(&mut s, &counts, effects, 1, &mut rng);
                s.cluster_values()[0]
            })
            .skip(2_000)
            .collect()
    }

    #[test]
    fn zero_effects_match_conjugate_posterior() {
        let counts = vec![vec![Count::new(5, 12), Count::new(9, 11)], vec![Count::new(3, 8), Count::new(0, 0)]];
        let draws = run_mh(counts, &[0.0, 0.0], (2.0, 2.0), 33);
        // Pooled 17/31 with Beta(2, 2): posterior mean 19/35.
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 19.0 / 35.0).abs() < 0.005, "{m}");
    }

    #[test]
    fn symmetric_likelihood_has_mode_at_half() {
        let draws = run_mh(vec![vec![Count::new(5, 10)]], &[0.0], (1.0, 1.0), 34);
        let mut bins = [0usize; 10];
        for d in &draws {
            bins[((d * 10.0) as usize).min(9)] += 1;
        }
        let mode = bins.iter().enumerate().max_by_key(|(_, &c)| c).unwrap().0;
        assert!(mode == 4 || mode == 5, "{bins:?}");
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 0.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn year_effects_match_quadrature() {
        let counts = vec![vec![Count::new(14, 20), Count::new(6, 15)]];
        let effects = [1.0, -1.0];
        let (a, b) = (1.5, 1.2);
        let draws = run_mh(counts.clone(), &effects, (a, b), 35);
        let m = draws.iter().sum::<f64>() / draws.len() as f64;

        let grid = 100_000;
        let (mut num, mut den) = (0.0, 0.0);
        for g in 0..grid {
            let p = (g as f64 + 0.5) / grid as f64;
            let lik: f64 = counts[0]
                .iter()
                .zip(effects)
                .map(|(c, e)| {
                    let q = 1.0 / (1.0 + (-(e + (p / (1.0 - p)).ln())).exp());
                    c.successes as f64 * q.ln() + c.failures() as f64 * (1.0 - q).ln()
                })
                .sum();
            let w = (lik + ln_beta_pdf(p, a, b)).exp();
            num += p * w;
            den += w;
        }
        let exact = num / den;
        assert!((m - exact).abs() < 0.01, "{m} vs {exact}");
    }
}
