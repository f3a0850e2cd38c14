//! Dirichlet-process prior machinery.
//!
//! A [`DpState`] holds the clustering of individuals for one parameter
//! (detection, Here persistence or Away persistence): which cluster each
//! individual belongs to, the shared probability of each cluster, the
//! concentration `alpha`, the Beta base-distribution shape and the Gamma
//! prior on `alpha`.

mod cluster;
mod concentration;
mod crp;
mod neal8;

pub use cluster::{
    update_cluster_params_conjugate, update_cluster_params_mh, year_effect_log_lik,
};
pub use concentration::{eta_mixing_weight, murugiah_hyperparams, sample_eta, update_alpha};
pub use crp::{crp_draw, expected_clusters, CrpDraw};
pub use neal8::neal8_update;

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Shape hyperparameters of a Gamma prior on the concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    assignments: Vec<usize>,
    values: Vec<f64>,
    sizes: Vec<usize>,
    alpha: f64,
    base_a: f64,
    base_b: f64,
    alpha_prior: GammaPrior,
}

impl DpState {
    /// All `n` individuals share a single cluster at `value`.
    pub fn single_cluster(
        n: usize,
        value: f64,
        alpha: f64,
        base: (f64, f64),
        alpha_prior: GammaPrior,
    ) -> Result<Self> {
        Self::from_parts(vec![0; n], vec![value], alpha, base, alpha_prior)
    }

    /// Builds a state from arbitrary labels in `0..values.len()`. Labels
    /// that no individual uses are dropped.
    pub fn from_parts(
        assignments: Vec<usize>,
        values: Vec<f64>,
        alpha: f64,
        base: (f64, f64),
        alpha_prior: GammaPrior,
    ) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::domain("a DP state needs at least one individual"));
        }
        if let Some(&bad) = assignments.iter().find(|&&c| c >= values.len()) {
            return Err(Error::domain(format!(
                "label {bad} has no cluster value ({} provided)",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::domain(format!("cluster value {v} outside (0, 1)")));
        }
        check_positive("alpha", alpha)?;
        check_positive("base_a", base.0)?;
        check_positive("base_b", base.1)?;
        check_positive("gamma prior shape", alpha_prior.shape)?;
        check_positive("gamma prior rate", alpha_prior.rate)?;

        let mut remap = vec![usize::MAX; values.len()];
        let mut new_values = Vec::new();
        let mut sizes = Vec::new();
        let assignments = assignments
            .into_iter()
            .map(|c| {
                if remap[c] == usize::MAX {
                    remap[c] = new_values.len();
                    new_values.push(values[c]);
                    sizes.push(0);
                }
                sizes[remap[c]] += 1;
                remap[c]
            })
            .collect();
        Ok(DpState {
            assignments,
            values: new_values,
            sizes,
            alpha,
            base_a: base.0,
            base_b: base.1,
            alpha_prior,
        })
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// Number of active clusters.
    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn cluster_values(&self) -> &[f64] {
        &self.values
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.sizes
    }

    #[inline]
    pub fn value_of(&self, individual: usize) -> f64 {
        self.values[self.assignments[individual]]
    }

    pub fn individual_values(&self) -> Vec<f64> {
        self.assignments.iter().map(|&c| self.values[c]).collect()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) {
        assert!(alpha > 0.0, "alpha must be positive, got {alpha}");
        self.alpha = alpha;
    }

    pub fn base(&self) -> (f64, f64) {
        (self.base_a, self.base_b)
    }

    pub fn set_base(&mut self, a: f64, b: f64) {
        assert!(a > 0.0 && b > 0.0, "base shape ({a}, {b}) must be positive");
        self.base_a = a;
        self.base_b = b;
    }

    pub fn alpha_prior(&self) -> GammaPrior {
        self.alpha_prior
    }

    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }

    /// Labels renumbered in order of first appearance, so that two states
    /// describing the same partition compare equal.
    pub fn canonical_partition(&self) -> Vec<usize> {
        let mut remap = vec![usize::MAX; self.values.len()];
        let mut next = 0;
        self.assignments
            .iter()
            .map(|&c| {
                if remap[c] == usize::MAX {
                    remap[c] = next;
                    next += 1;
                }
                remap[c]
            })
            .collect()
    }

    /// Assignments, values and sizes must describe the same set of
    /// non-empty clusters.
    pub fn check_invariants(&self) -> Result<()> {
        if self.values.len() != self.sizes.len() || self.values.is_empty() {
            return Err(Error::numerical("cluster bookkeeping out of sync"));
        }
        let mut counted = vec![0usize; self.values.len()];
        for &c in &self.assignments {
            if c >= self.values.len() {
                return Err(Error::numerical(format!("dangling cluster label {c}")));
            }
            counted[c] += 1;
        }
        if counted != self.sizes || counted.contains(&0) {
            return Err(Error::numerical(format!(
                "cluster sizes {:?} disagree with assignments {:?}",
                self.sizes, counted
            )));
        }
        if self.values.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::numerical(format!(
                "cluster value outside (0, 1): {:?}",
                self.values
            )));
        }
        Ok(())
    }

    /// Joint log density of data, cluster values and partition, up to a
    /// constant: `sum_i F(y_i, phi_{c_i}) + sum_c log G0(phi_c) + log CRP(c)`.
    pub fn log_joint<D>(&self, data: &[D], log_lik: impl Fn(&D, f64) -> f64) -> f64 {
        let lik: f64 = data
            .iter()
            .enumerate()
            .map(|(i, d)| log_lik(d, self.value_of(i)))
            .sum();
        let base: f64 = self
            .values
            .iter()
            .map(|&v| ln_beta_pdf(v, self.base_a, self.base_b))
            .sum();
        lik + base + log_crp_prior(&self.sizes, self.alpha)
    }

    // Cluster `c` is empty: move the last cluster into its slot.
    fn remove_cluster(&mut self, c: usize) {
        debug_assert_eq!(self.sizes[c], 0);
        let last = self.values.len() - 1;
        self.values.swap_remove(c);
        self.sizes.swap_remove(c);
        if c != last {
            for a in self.assignments.iter_mut().filter(|a| **a == last) {
                *a = c;
            }
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Log density of Beta(a, b) at `x`.
pub fn ln_beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Log probability of a partition with the given block sizes under the
/// Chinese restaurant process.
pub fn log_crp_prior(sizes: &[usize], alpha: f64) -> f64 {
    let n: usize = sizes.iter().sum();
    let blocks: f64 = sizes.iter().map(|&s| ln_gamma(s as f64)).sum();
    let rising: f64 = (0..n).map(|i| (alpha + i as f64).ln()).sum();
    sizes.len() as f64 * alpha.ln() + blocks - rising
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn prior() -> GammaPrior {
        GammaPrior { shape: 1.0, rate: 1.0 }
    }

    #[test]
    fn from_parts_compacts_labels() {
        let s = DpState::from_parts(vec![4, 1, 4], vec![0.1, 0.2, 0.3, 0.4, 0.5], 1.0, (1.0, 1.0), prior())
            .unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.assignments(), &[0, 1, 0]);
        assert_eq!(s.individual_values(), vec![0.5, 0.2, 0.5]);
        assert_eq!(s.cluster_sizes(), &[2, 1]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn from_parts_validates() {
        assert!(DpState::from_parts(vec![], vec![0.5], 1.0, (1.0, 1.0), prior()).is_err());
        assert!(DpState::from_parts(vec![1], vec![0.5], 1.0, (1.0, 1.0), prior()).is_err());
        assert!(DpState::from_parts(vec![0], vec![1.0], 1.0, (1.0, 1.0), prior()).is_err());
        assert!(DpState::from_parts(vec![0], vec![0.5], 0.0, (1.0, 1.0), prior()).is_err());
    }

    #[test]
    fn relabeling_leaves_joint_density_unchanged() {
        let data = [(3u32, 10u32), (9, 10), (4, 10), (8, 10)];
        let ll = |d: &(u32, u32), p: f64| {
            d.0 as f64 * p.ln() + (d.1 - d.0) as f64 * (1.0 - p).ln()
        };
        let a = DpState::from_parts(vec![0, 1, 0, 1], vec![0.35, 0.85], 0.7, (2.0, 3.0), prior()).unwrap();
        let b = DpState::from_parts(vec![1, 0, 1, 0], vec![0.85, 0.35], 0.7, (2.0, 3.0), prior()).unwrap();
        assert_eq!(a.individual_values(), b.individual_values());
        assert_eq!(a.canonical_partition(), b.canonical_partition());
        assert_abs_diff_eq!(a.log_joint(&data, ll), b.log_joint(&data, ll), epsilon = 1e-12);
    }

    #[test]
    fn crp_prior_sums_to_one_over_partitions_of_three() {
        // Partitions of 3: {123}, three of type {12}{3}, {1}{2}{3}.
        let alpha = 1.7;
        let total = log_crp_prior(&[3], alpha).exp()
            + 3.0 * log_crp_prior(&[2, 1], alpha).exp()
            + log_crp_prior(&[1, 1, 1], alpha).exp();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
