use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::{beta, categorical_log};

use super::DpState;

/// One Gibbs sweep over cluster assignments using `m` auxiliary components
/// drawn from the Beta base distribution.
///
/// Individual `i` joins existing cluster `c` with weight
/// `n_{-i,c} F(y_i, phi_c)` or auxiliary component `j` with weight
/// `(alpha / m) F(y_i, phi_j)`. A singleton's own value is recycled as the
/// first auxiliary component. Empty clusters are dropped immediately.
pub fn neal8_update<D, R, L>(
    state: &mut DpState,
    data: &[D],
    log_lik: L,
    m: usize,
    rng: &mut R,
) -> Result<()>
where
    R: Rng + ?Sized,
    L: Fn(&D, f64) -> f64,
{
    if m == 0 {
        return Err(Error::domain("Algorithm needs at least one auxiliary component"));
    }
    if data.len() != state.n() {
        return Err(Error::domain(format!(
            "{} data records for {} individuals",
            data.len(),
            state.n()
        )));
    }
    let mut scratch = Scratch::with_capacity(m);
    for i in 0..state.n() {
        reassign(state, i, &data[i], &log_lik, m, &mut scratch, rng)?;
    }
    Ok(())
}

#[derive(Default)]
pub(crate) struct Scratch {
    aux: Vec<f64>,
    log_w: Vec<f64>,
}

impl Scratch {
    pub(crate) fn with_capacity(m: usize) -> Self {
        Scratch {
            aux: Vec::with_capacity(m),
            log_w: Vec::with_capacity(m + 8),
        }
    }
}

pub(crate) fn reassign<D, R, L>(
    state: &mut DpState,
    i: usize,
    datum: &D,
    log_lik: &L,
    m: usize,
    scratch: &mut Scratch,
    rng: &mut R,
) -> Result<()>
where
    R: Rng + ?Sized,
    L: Fn(&D, f64) -> f64,
{
    let old = state.assignments[i];
    state.sizes[old] -= 1;
    scratch.aux.clear();
    if state.sizes[old] == 0 {
        scratch.aux.push(state.values[old]);
        state.assignments[i] = usize::MAX;
        state.remove_cluster(old);
    }
    let (a, b) = (state.base_a, state.base_b);
    while scratch.aux.len() < m {
        scratch.aux.push(beta(a, b, rng));
    }

    let log_new = (state.alpha / m as f64).ln();
    scratch.log_w.clear();
    for (&size, &v) in state.sizes.iter().zip(&state.values) {
        scratch.log_w.push((size as f64).ln() + log_lik(datum, v));
    }
    for &v in &scratch.aux {
        scratch.log_w.push(log_new + log_lik(datum, v));
    }

    let k = state.values.len();
    let choice = categorical_log(&scratch.log_w, rng).ok_or_else(|| {
        Error::numerical(format!(
            "every candidate cluster has zero likelihood for individual {i} \
             (alpha = {}, {} existing clusters, {m} auxiliary)",
            state.alpha, k
        ))
    })?;
    if choice < k {
        state.assignments[i] = choice;
        state.sizes[choice] += 1;
    } else {
        state.values.push(scratch.aux[choice - k]);
        state.sizes.push(1);
        state.assignments[i] = k;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{ln_beta_pdf, GammaPrior};
    use crate::hmm::Count;
    use crate::sampling::stream_rng;

    fn kernel(c: &Count, p: f64) -> f64 {
        c.log_kernel(p)
    }

    fn prior() -> GammaPrior {
        GammaPrior { shape: 1.0, rate: 1.0 }
    }

    #[test]
    fn single_individual_keeps_one_cluster() {
        let mut rng = stream_rng(21, 0);
        let mut s = DpState::single_cluster(1, 0.5, 2.0, (1.0, 1.0), prior()).unwrap();
        let data = [Count::new(7, 10)];
        let mut distinct = std::collections::HashSet::new();
        for _ in 0..200 {
            neal8_update(&mut s, &data, kernel, 3, &mut rng).unwrap();
            assert_eq!(s.k(), 1);
            s.check_invariants().unwrap();
            distinct.insert(s.cluster_values()[0].to_bits());
        }
        assert!(distinct.len() > 10, "value never refreshed");
    }

    #[test]
    fn vanishing_alpha_collapses_to_one_cluster() {
        let mut rng = stream_rng(22, 0);
        let mut s = DpState::from_parts(vec![0, 1, 2], vec![0.2, 0.5, 0.8], 1e-8, (1.0, 1.0), prior())
            .unwrap();
        let data = [Count::new(2, 10), Count::new(5, 10), Count::new(8, 10)];
        let mut single = 0;
        for _ in 0..1000 {
            neal8_update(&mut s, &data, kernel, 3, &mut rng).unwrap();
            super::super::update_cluster_params_conjugate(&mut s, &data, &mut rng);
            single += usize::from(s.k() == 1);
        }
        assert!(single >= 995, "{single}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = stream_rng(0, 0);
        let mut s = DpState::single_cluster(2, 0.5, 1.0, (1.0, 1.0), prior()).unwrap();
        assert!(neal8_update(&mut s, &[Count::new(1, 1)], kernel, 3, &mut rng).is_err());
        assert!(neal8_update(&mut s, &[Count::new(1, 1); 2], kernel, 0, &mut rng).is_err());
    }

    #[test]
    fn zero_likelihood_everywhere_is_numerical() {
        let mut rng = stream_rng(0, 0);
        let mut s = DpState::single_cluster(2, 0.5, 1.0, (1.0, 1.0), prior()).unwrap();
        let err = neal8_update(&mut s, &[0u8, 0u8], |_, _| f64::NEG_INFINITY, 3, &mut rng)
            .unwrap_err();
        assert!(err.is_numerical());
    }

    /// With many auxiliary components the probability of joining the other
    /// individual's cluster approaches
    /// `F(y, phi_1) / (F(y, phi_1) + alpha * int F(y, phi) G0(dphi))`.
    #[test]
    fn large_m_matches_integrated_conditional() {
        let (a, b, alpha) = (2.0, 2.0, 1.5);
        let y = Count::new(6, 9);
        let phi_other = 0.55;

        // Midpoint quadrature of the marginal likelihood under the base.
        let grid = 200_000;
        let marginal: f64 = (0..grid)
            .map(|g| {
                let p = (g as f64 + 0.5) / grid as f64;
                (y.log_kernel(p) + ln_beta_pdf(p, a, b)).exp()
            })
            .sum::<f64>()
            / grid as f64;
        let join = y.log_kernel(phi_other).exp();
        let exact = join / (join + alpha * marginal);

        let mut rng = stream_rng(23, 0);
        let mut scratch = Scratch::with_capacity(64);
        let data = [y, Count::new(0, 0)];
        let reps = 200_000;
        let mut joined = 0;
        for _ in 0..reps {
            let mut s = DpState::single_cluster(2, phi_other, alpha, (a, b), prior()).unwrap();
            reassign(&mut s, 0, &data[0], &kernel, 64, &mut scratch, &mut rng).unwrap();
            joined += usize::from(s.k() == 1);
        }
        let freq = joined as f64 / reps as f64;
        assert!((freq - exact).abs() < 0.005, "{freq} vs {exact}");
    }
}
