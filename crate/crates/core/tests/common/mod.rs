//! Brute-force references shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashMap;

use dphmm::hmm::State;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

/// Exact posterior over two-state paths that start Here, by enumeration.
pub fn two_state_path_posterior(seen: &[bool], pi: f64, hh: f64, aa: f64) -> Vec<(Vec<State>, f64)> {
    let t = seen.len();
    let mut out = Vec::new();
    let mut total = 0.0;
    for mask in 0..(1u32 << (t - 1)) {
        let mut path = vec![State::Here];
        for j in 0..t - 1 {
            path.push(if mask >> j & 1 == 1 { State::Away } else { State::Here });
        }
        let mut w = 1.0;
        for (k, (&s, &y)) in path.iter().zip(seen).enumerate() {
            w *= match (s, y) {
                (State::Here, true) => pi,
                (State::Here, false) => 1.0 - pi,
                (_, true) => 0.0,
                (_, false) => 1.0,
            };
            if k > 0 {
                w *= match (path[k - 1], s) {
                    (State::Here, State::Here) => hh,
                    (State::Here, _) => 1.0 - hh,
                    (_, State::Away) => aa,
                    _ => 1.0 - aa,
                };
            }
        }
        if w > 0.0 {
            total += w;
            out.push((path, w));
        }
    }
    for (_, w) in &mut out {
        *w /= total;
    }
    out
}

/// Every observation pattern of length `t` that starts with a sighting.
pub fn patterns(t: usize) -> Vec<Vec<bool>> {
    (0..(1u32 << (t - 1)))
        .map(|m| std::iter::once(true).chain((0..t - 1).map(|j| m >> j & 1 == 1)).collect())
        .collect()
}

/// All set partitions of `n` items as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let max = cur.iter().copied().max().map_or(0, |m| m + 1);
        for c in 0..=max {
            cur.push(c);
            grow(cur, n, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// `ln p(partition | alpha)` under the CRP.
pub fn ln_crp(partition: &[usize], alpha: f64) -> f64 {
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &c in partition {
        *sizes.entry(c).or_default() += 1;
    }
    let n = partition.len() as f64;
    sizes.len() as f64 * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n)
        + sizes.values().map(|&s| ln_gamma(s as f64)).sum::<f64>()
}

/// `ln ∫ p^s (1-p)^f Beta(p; a, b) dp`.
pub fn ln_beta_binomial(s: f64, f: f64, a: f64, b: f64) -> f64 {
    ln_beta(a + s, b + f) - ln_beta(a, b)
}

/// Exact posterior over partitions of Binomial records `(successes,
/// failures)` with cluster values integrated against Beta(a, b).
pub fn partition_posterior(data: &[(f64, f64)], alpha: f64, a: f64, b: f64) -> Vec<(Vec<usize>, f64)> {
    let parts = set_partitions(data.len());
    let logs: Vec<f64> = parts
        .iter()
        .map(|p| {
            let k = p.iter().max().unwrap() + 1;
            let mut lp = ln_crp(p, alpha);
            for c in 0..k {
                let (s, f) = p
                    .iter()
                    .zip(data)
                    .filter(|(&l, _)| l == c)
                    .fold((0.0, 0.0), |acc, (_, d)| (acc.0 + d.0, acc.1 + d.1));
                lp += ln_beta_binomial(s, f, a, b);
            }
            lp
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    parts.into_iter().zip(logs).map(|(p, l)| (p, (l - max).exp() / z)).collect()
}

/// Unnormalised `ln p(alpha | k, n)` under a Gamma(shape, rate) prior.
pub fn ln_alpha_posterior(alpha: f64, k: usize, n: usize, shape: f64, rate: f64) -> f64 {
    (shape + k as f64 - 1.0) * alpha.ln() - rate * alpha + ln_gamma(alpha) - ln_gamma(alpha + n as f64)
}

/// Success/failure counts of a two-state path, with the first sighting
/// counted as a detection.
#[derive(Debug, Clone, Copy, Default)]
pub struct PathCounts {
    pub obs: (f64, f64),
    pub hh: (f64, f64),
    pub aa: (f64, f64),
}

pub fn path_counts(path: &[State], seen: &[bool]) -> PathCounts {
    let mut c = PathCounts::default();
    for (k, (&s, &y)) in path.iter().zip(seen).enumerate() {
        if s == State::Here {
            if y {
                c.obs.0 += 1.0;
            } else {
                c.obs.1 += 1.0;
            }
        }
        if k > 0 {
            match (path[k - 1], s) {
                (State::Here, State::Here) => c.hh.0 += 1.0,
                (State::Here, _) => c.hh.1 += 1.0,
                (_, State::Away) => c.aa.0 += 1.0,
                _ => c.aa.1 += 1.0,
            }
        }
    }
    c
}

fn all_paths(seen: &[bool]) -> Vec<Vec<State>> {
    let t = seen.len();
    (0..(1u32 << (t - 1)))
        .map(|m| {
            std::iter::once(State::Here)
                .chain((0..t - 1).map(|j| if m >> j & 1 == 1 { State::Away } else { State::Here }))
                .collect::<Vec<_>>()
        })
        .filter(|p: &Vec<State>| p.iter().zip(seen).all(|(&s, &y)| !y || s == State::Here))
        .collect()
}

/// Posterior means of `pi_1` and `pi_2` for two individuals under three
/// independent DPs with fixed concentration and Beta(a, b) base.
///
/// Sums over every pair of latent paths and both partitions of each DP; the
/// cluster values integrate in closed form.
pub fn two_individual_pi_means(seen: [&[bool]; 2], alpha: f64, a: f64, b: f64) -> [f64; 2] {
    let p_together = 1.0 / (1.0 + alpha);
    let p_apart = alpha / (1.0 + alpha);
    let bb = |s: f64, f: f64| ln_beta_binomial(s, f, a, b).exp();
    // Marginal of one DP over two records, optionally with one extra
    // success for individual `which`.
    let dp = |r1: (f64, f64), r2: (f64, f64), which: Option<usize>| {
        let bump = |r: (f64, f64), i: usize| if which == Some(i) { (r.0 + 1.0, r.1) } else { r };
        let (x1, x2) = (bump(r1, 0), bump(r2, 1));
        p_together * bb(x1.0 + x2.0, x1.1 + x2.1) + p_apart * bb(x1.0, x1.1) * bb(x2.0, x2.1)
    };
    // E[pi_i] = sum numerators / sum evidence, where the numerator of a
    // path pair multiplies the pi-DP integrand by pi_i.
    let (mut z, mut n1, mut n2) = (0.0, 0.0, 0.0);
    for p1 in all_paths(seen[0]) {
        let c1 = path_counts(&p1, seen[0]);
        for p2 in all_paths(seen[1]) {
            let c2 = path_counts(&p2, seen[1]);
            let rest = dp(c1.hh, c2.hh, None) * dp(c1.aa, c2.aa, None);
            z += dp(c1.obs, c2.obs, None) * rest;
            n1 += dp(c1.obs, c2.obs, Some(0)) * rest;
            n2 += dp(c1.obs, c2.obs, Some(1)) * rest;
        }
    }
    [n1 / z, n2 / z]
}

/// Total variation distance between two distributions keyed alike.
pub fn total_variation<K: std::hash::Hash + Eq>(p: &HashMap<K, f64>, q: &HashMap<K, f64>) -> f64 {
    let mut d = 0.0;
    for (k, v) in p {
        d += (v - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, v) in q {
        if !p.contains_key(k) {
            d += v.abs();
        }
    }
    d / 2.0
}
