mod common;

use std::collections::HashMap;

use dphmm::dp::{
    murugiah_hyperparams, neal8_update, sample_eta, update_alpha, update_cluster_params_conjugate,
    DpState, GammaPrior,
};
use dphmm::hmm::{backward_sample, forward_pass, CaptureHistory, Count, Dataset, Dynamics, ModelKind, TransitionParams};
use dphmm::mcmc::{
    base_hyperparams_log_target, mcmc_iteration, mh_update_base_hyperparams, AdaptiveKernel, ChainState,
    FrozenFamily, McmcConfig, NoTrace,
};
use dphmm::sampling::stream_rng;

use common::*;

#[test]
fn ffbs_matches_enumeration() {
    let mut rng = stream_rng(100, 0);
    let draws = 20_000;
    for (pi, hh, aa) in [(0.2, 0.8, 0.5), (0.8, 0.2, 0.8), (0.5, 0.5, 0.2)] {
        for t in 1..=4 {
            for seen in patterns(t) {
                let h = CaptureHistory::two_state("x", seen.clone()).unwrap();
                let dynamics = Dynamics::two_state(pi, &TransitionParams::two_state(hh, aa)).unwrap();
                let fwd = forward_pass(&h, &dynamics).unwrap();
                let mut freq: HashMap<Vec<_>, f64> = HashMap::new();
                for _ in 0..draws {
                    let p = backward_sample(&fwd, &h, &dynamics, &mut rng).unwrap();
                    *freq.entry(p.states().to_vec()).or_default() += 1.0 / draws as f64;
                }
                let exact: HashMap<_, _> = two_state_path_posterior(&seen, pi, hh, aa).into_iter().collect();
                let tv = total_variation(&freq, &exact);
                assert!(tv < 0.02, "tv {tv} for {seen:?} at ({pi}, {hh}, {aa})");
            }
        }
    }
}

#[test]
fn neal8_partition_frequencies() {
    let data = [Count::new(8, 10), Count::new(2, 10), Count::new(7, 10)];
    let (alpha, a, b) = (1.0, 1.0, 1.0);
    let prior = GammaPrior { shape: 1.0, rate: 1.0 };
    let mut state = DpState::single_cluster(3, 0.5, alpha, (a, b), prior).unwrap();
    let mut rng = stream_rng(101, 0);
    let sweeps = 30_000;
    let mut freq: HashMap<Vec<usize>, f64> = HashMap::new();
    for _ in 0..sweeps {
        neal8_update(&mut state, &data, |c: &Count, p| c.log_kernel(p), 3, &mut rng).unwrap();
        update_cluster_params_conjugate(&mut state, &data, &mut rng);
        *freq.entry(state.canonical_partition()).or_default() += 1.0 / sweeps as f64;
    }
    let records: Vec<(f64, f64)> = data.iter().map(|c| (c.successes as f64, c.failures() as f64)).collect();
    let exact: HashMap<_, _> = partition_posterior(&records, alpha, a, b).into_iter().collect();
    let tv = total_variation(&freq, &exact);
    assert!(tv < 0.03, "tv {tv}: {freq:?} vs {exact:?}");
}

#[test]
fn alpha_chain_matches_quadrature_mean() {
    let (k, n) = (5, 30);
    let prior = murugiah_hyperparams(n);
    let mut rng = stream_rng(102, 0);
    let mut alpha = 1.0;
    let draws = 200_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let eta = sample_eta(alpha, n, &mut rng);
        alpha = update_alpha(k, n, eta, prior, &mut rng);
        sum += alpha;
    }
    // Posterior mean on a fine grid over log alpha.
    let (mut z, mut m) = (0.0, 0.0);
    for i in 0..20_000 {
        let u = -15.0 + 25.0 * (i as f64 + 0.5) / 20_000.0;
        let w = (ln_alpha_posterior(u.exp(), k, n, prior.shape, prior.rate) + u).exp();
        z += w;
        m += w * u.exp();
    }
    let exact = m / z;
    let mean = sum / draws as f64;
    assert!((mean - exact).abs() / exact < 0.02, "{mean} vs {exact}");
}

#[test]
fn full_sampler_matches_two_individual_oracle() {
    let y1 = [true, false, true, true, false];
    let y2 = [true, true, false, false, false];
    let (alpha, a, b) = (1.0, 2.0, 2.0);
    let exact = two_individual_pi_means([&y1, &y2], alpha, a, b);

    let data = Dataset::new(
        ModelKind::TwoState,
        vec![
            CaptureHistory::two_state("a", y1.to_vec()).unwrap(),
            CaptureHistory::two_state("b", y2.to_vec()).unwrap(),
        ],
    )
    .unwrap();
    let config = McmcConfig {
        iterations: 200_000,
        burn_in: 1_000,
        fixed_alpha: Some(alpha),
        fixed_base: Some((a, b)),
        seed: 103,
        ..Default::default()
    };
    let mut state = ChainState::new(&data, &config, 0).unwrap();
    let (mut s1, mut s2, mut n) = (0.0, 0.0, 0.0);
    for it in 1..=config.iterations {
        mcmc_iteration(&mut state, &data, &config, &mut NoTrace).unwrap();
        if it > config.burn_in {
            s1 += state.dp_pi.value_of(0);
            s2 += state.dp_pi.value_of(1);
            n += 1.0;
        }
    }
    let (m1, m2) = (s1 / n, s2 / n);
    assert!((m1 - exact[0]).abs() < 0.02, "pi_1 {m1} vs {}", exact[0]);
    assert!((m2 - exact[1]).abs() < 0.02, "pi_2 {m2} vs {}", exact[1]);
}

/// Runs the (a, b) update against fixed cluster values and returns the
/// long-run means of a and b.
fn base_chain(values: &[f64], seed: u64, iterations: usize) -> (f64, f64) {
    let n = values.len();
    let mut dp = DpState::from_parts(
        (0..n).collect(),
        values.to_vec(),
        1.0,
        (1.0, 1.0),
        GammaPrior { shape: 1.0, rate: 1.0 },
    )
    .unwrap();
    let mut kernel = AdaptiveKernel::new(vec![0.3, 0.3], FrozenFamily::Normal { inflation: 1.5 }, true);
    let mut rng = stream_rng(seed, 0);
    let adapt = 5_000;
    let (mut sa, mut sb) = (0.0, 0.0);
    for it in 1..=adapt + iterations {
        mh_update_base_hyperparams(&mut dp, &mut kernel, 2.0, &mut rng);
        let (a, b) = dp.base();
        if it <= adapt {
            kernel.observe(&[a.ln(), b.ln()], it > adapt / 2);
            if it == adapt {
                kernel.freeze();
            }
        } else {
            sa += a;
            sb += b;
        }
    }
    (sa / iterations as f64, sb / iterations as f64)
}

#[test]
fn base_hyperparams_match_grid_quadrature() {
    let values = [0.62, 0.71, 0.55, 0.8, 0.67];
    let (ma, mb) = base_chain(&values, 104, 200_000);
    let (mut z, mut ea, mut eb) = (0.0, 0.0, 0.0);
    let g = 800;
    for i in 0..g {
        for j in 0..g {
            let x = [-8.0 + 16.0 * (i as f64 + 0.5) / g as f64, -8.0 + 16.0 * (j as f64 + 0.5) / g as f64];
            let w = base_hyperparams_log_target(&x, &values, 2.0).exp();
            z += w;
            ea += w * x[0].exp();
            eb += w * x[1].exp();
        }
    }
    let (ea, eb) = (ea / z, eb / z);
    assert!((ma - ea).abs() / ea < 0.05, "a {ma} vs {ea}");
    assert!((mb - eb).abs() / eb < 0.05, "b {mb} vs {eb}");
}

#[test]
fn base_hyperparams_symmetric_at_one_half() {
    let (ma, mb) = base_chain(&[0.5], 105, 200_000);
    assert!((ma - mb).abs() / ma < 0.05, "{ma} vs {mb}");
}
