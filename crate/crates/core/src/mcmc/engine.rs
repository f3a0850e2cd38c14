use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{
    ln_beta_pdf, murugiah_hyperparams, neal8_update, sample_eta, update_alpha,
    update_cluster_params_conjugate, update_cluster_params_mh, year_effect_log_lik, DpState,
    GammaPrior,
};
use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::hmm::{
    backward_sample, build_transition_3state, forward_pass, logistic, logit, sufficient_stats,
    Count, Dataset, Dynamics, ModelKind, StatePath, SufficientStats, TransitionParams,
    OFF_SEASON_WEEKS,
};
use crate::sampling::{clamp_prob, stream_rng};

use super::config::{Execution, McmcConfig, Priors};
use super::proposal::{AdaptiveKernel, FrozenFamily};

/// Population-level parameters of the three-state model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffects {
    /// Logit-scale offset on Here persistence, one per season.
    pub beta_yr: Vec<f64>,
    pub gamma_d: f64,
    pub q: f64,
}

impl FixedEffects {
    pub fn new(beta_yr: Vec<f64>, gamma_d: f64, q: f64) -> Result<Self> {
        if beta_yr.is_empty() || beta_yr.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("need one finite year effect per season"));
        }
        if !(gamma_d >= 0.0 && gamma_d < 1.0) {
            return Err(Error::domain(format!("gamma_d must lie in [0, 1), got {gamma_d}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
        }
        Ok(FixedEffects { beta_yr, gamma_d, q })
    }

    /// Off-season survival `(1 - gamma_d)^26`.
    pub fn p_surv(&self) -> f64 {
        crate::hmm::off_season_survival(self.gamma_d)
    }

    /// `(beta_1.., logit gamma_d, logit q)`.
    pub fn to_unconstrained(&self) -> Vec<f64> {
        let mut v = self.beta_yr.clone();
        v.push(logit(self.gamma_d));
        v.push(logit(self.q));
        v
    }

    pub fn from_unconstrained(theta: &[f64]) -> Self {
        let s = theta.len() - 2;
        FixedEffects {
            beta_yr: theta[..s].to_vec(),
            gamma_d: clamp_prob(logistic(theta[s])),
            q: clamp_prob(logistic(theta[s + 1])),
        }
    }
}

/// The six stages of one sweep, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum IterationStep {
    SamplePaths,
    SufficientStats,
    DpAssignments,
    BaseHyperparams,
    Concentration,
    FixedEffects,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Step {
        iteration: usize,
        step: IterationStep,
        active: bool,
    },
    Proposal {
        iteration: usize,
        kernel: &'static str,
        frozen: bool,
        signature: Vec<f64>,
    },
}

/// Receives structured events from [`mcmc_iteration`].
pub trait Trace {
    fn enabled(&self) -> bool {
        true
    }
    fn record(&mut self, event: TraceEvent);
}

impl Trace for Vec<TraceEvent> {
    fn record(&mut self, event: TraceEvent) {
        self.push(event);
    }
}

pub struct NoTrace;

impl Trace for NoTrace {
    fn enabled(&self) -> bool {
        false
    }
    fn record(&mut self, _: TraceEvent) {}
}

/// Which individual-level parameter a DP governs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "gamma_hh")]
    GammaHH,
    #[serde(rename = "gamma_aa")]
    GammaAA,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Pi, Param::GammaHH, Param::GammaAA];

    pub fn name(self) -> &'static str {
        match self {
            Param::Pi => "pi",
            Param::GammaHH => "gamma_hh",
            Param::GammaAA => "gamma_aa",
        }
    }

    pub fn from_name(s: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == s)
    }

    fn kernel_name(self) -> &'static str {
        match self {
            Param::Pi => "base_pi",
            Param::GammaHH => "base_gamma_hh",
            Param::GammaAA => "base_gamma_aa",
        }
    }
}

/// Per-DP quantities recorded with every retained draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSummary {
    pub alpha: f64,
    pub k: usize,
    pub base_a: f64,
    pub base_b: f64,
}

/// One retained draw of the full model.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub chain: usize,
    pub iteration: usize,
    pub pi: Vec<f64>,
    /// Individual Here persistence before any year effect is applied.
    pub gamma_hh: Vec<f64>,
    pub gamma_aa: Vec<f64>,
    /// Indexed like [`Param::ALL`].
    pub dp: [DpSummary; 3],
    pub fixed: Option<FixedEffects>,
    /// Observed-data log-likelihood from this iteration's forward passes.
    pub log_likelihood: f64,
}

impl PosteriorSample {
    pub fn values(&self, p: Param) -> &[f64] {
        match p {
            Param::Pi => &self.pi,
            Param::GammaHH => &self.gamma_hh,
            Param::GammaAA => &self.gamma_aa,
        }
    }

    pub fn dp(&self, p: Param) -> &DpSummary {
        &self.dp[p as usize]
    }
}

/// Complete sampler state for one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub dp_pi: DpState,
    pub dp_hh: DpState,
    pub dp_aa: DpState,
    pub fixed: Option<FixedEffects>,
    pub paths: Vec<StatePath>,
    pub stats: Vec<SufficientStats>,
    pub iteration: usize,
    pub log_likelihood: f64,
    rng: ChaCha8Rng,
    base_kernels: [AdaptiveKernel; 3],
    fixed_kernel: Option<AdaptiveKernel>,
}

impl ChainState {
    /// Initial state for chain `chain`: every individual in one cluster per
    /// parameter at the configured starting values, with latent paths drawn
    /// from those values.
    pub fn new(data: &Dataset, config: &McmcConfig, chain: usize) -> Result<Self> {
        config.validate()?;
        if data.model() != config.model {
            return Err(Error::domain(format!(
                "config is for the {} model but the data are {}",
                config.model,
                data.model()
            )));
        }
        let n = data.len();
        let alpha_prior = match config.priors.alpha {
            Some((shape, rate)) => GammaPrior { shape, rate },
            None => murugiah_hyperparams(n),
        };
        let alpha = config.fixed_alpha.unwrap_or(config.init.alpha);
        let base = config.fixed_base.unwrap_or(config.init.base);
        let init = &config.init;
        let dp = |v| DpState::single_cluster(n, v, alpha, base, alpha_prior);
        let fixed = match config.model {
            ModelKind::TwoState => None,
            ModelKind::ThreeState => Some(FixedEffects::new(
                vec![0.0; data.layout().count],
                init.gamma_d,
                init.q,
            )?),
        };
        let adapting = config.adaptation_end() > 0;
        let base_kernel =
            || AdaptiveKernel::new(vec![0.3, 0.3], FrozenFamily::Normal { inflation: 1.5 }, adapting);
        let fixed_kernel = fixed.as_ref().map(|f| {
            let mut sd = vec![0.1; f.beta_yr.len()];
            sd.extend([0.3, 0.1]);
            AdaptiveKernel::new(sd, FrozenFamily::StudentT { df: 4.0 }, adapting)
        });

        let mut state = ChainState {
            dp_pi: dp(init.pi)?,
            dp_hh: dp(init.gamma_hh)?,
            dp_aa: dp(init.gamma_aa)?,
            fixed,
            paths: Vec::new(),
            stats: Vec::new(),
            iteration: 0,
            log_likelihood: f64::NAN,
            rng: stream_rng(config.seed, chain as u64),
            base_kernels: [base_kernel(), base_kernel(), base_kernel()],
            fixed_kernel,
        };
        let (paths, ll) = sample_paths(&mut state, data, config.execution)?;
        state.stats = paths
            .iter()
            .zip(data.histories())
            .map(|(p, h)| sufficient_stats(p, h, data.layout()))
            .collect::<Result<_>>()?;
        state.paths = paths;
        state.log_likelihood = ll;
        Ok(state)
    }

    pub fn dp(&self, p: Param) -> &DpState {
        match p {
            Param::Pi => &self.dp_pi,
            Param::GammaHH => &self.dp_hh,
            Param::GammaAA => &self.dp_aa,
        }
    }

    pub fn snapshot(&self, chain: usize) -> PosteriorSample {
        let summary = |d: &DpState| DpSummary {
            alpha: d.alpha(),
            k: d.k(),
            base_a: d.base().0,
            base_b: d.base().1,
        };
        PosteriorSample {
            chain,
            iteration: self.iteration,
            pi: self.dp_pi.individual_values(),
            gamma_hh: self.dp_hh.individual_values(),
            gamma_aa: self.dp_aa.individual_values(),
            dp: [summary(&self.dp_pi), summary(&self.dp_hh), summary(&self.dp_aa)],
            fixed: self.fixed.clone(),
            log_likelihood: self.log_likelihood,
        }
    }

    /// Acceptance rates of the hyperparameter and fixed-effect kernels.
    pub fn acceptance_rates(&self) -> Vec<(&'static str, f64)> {
        let mut out: Vec<_> = Param::ALL
            .iter()
            .zip(&self.base_kernels)
            .map(|(p, k)| (p.kernel_name(), k.acceptance_rate()))
            .collect();
        if let Some(k) = &self.fixed_kernel {
            out.push(("fixed_effects", k.acceptance_rate()));
        }
        out
    }

    /// Checks the structural invariants of the state against the data.
    pub fn check_invariants(&self, data: &Dataset) -> Result<()> {
        for d in [&self.dp_pi, &self.dp_hh, &self.dp_aa] {
            d.check_invariants()?;
            if d.n() != data.len() {
                return Err(Error::numerical("DP size differs from the dataset"));
            }
        }
        if self.paths.len() != data.len() {
            return Err(Error::numerical("one path per individual required"));
        }
        for (p, h) in self.paths.iter().zip(data.histories()) {
            StatePath::new(p.states().to_vec(), h)?;
        }
        Ok(())
    }
}

/// Per-individual dynamics implied by the current parameter values.
fn dynamics_for(state: &ChainState, data: &Dataset, i: usize) -> Result<Dynamics> {
    let pi = state.dp_pi.value_of(i);
    let hh = state.dp_hh.value_of(i);
    let aa = state.dp_aa.value_of(i);
    let layout = data.layout();
    match &state.fixed {
        None => Dynamics::two_state_in_season(pi, &TransitionParams::two_state(hh, aa), layout.first),
        Some(f) => {
            let base = logit(hh);
            let weekly = f
                .beta_yr
                .iter()
                .map(|b| {
                    build_transition_3state(&TransitionParams::three_state(
                        logistic(b + base),
                        aa,
                        f.gamma_d,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Dynamics::three_state(pi, layout, weekly, f.q, f.gamma_d)
        }
    }
}

/// Step 1: forward filtering, backward sampling for every individual.
///
/// Each individual gets its own stream seeded from the chain RNG, so the
/// draws do not depend on how the work is scheduled.
fn sample_paths(
    state: &mut ChainState,
    data: &Dataset,
    execution: Execution,
) -> Result<(Vec<StatePath>, f64)> {
    let seeds: Vec<u64> = (0..data.len()).map(|_| state.rng.random()).collect();
    let st = &*state;
    let results = map_indices(data.len(), execution, |i| -> Result<(StatePath, f64)> {
        let h = &data.histories()[i];
        let dynamics = dynamics_for(st, data, i)?;
        let fwd = forward_pass(h, &dynamics)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
        let path = backward_sample(&fwd, h, &dynamics, &mut rng)?;
        Ok((path, fwd.log_likelihood()))
    });
    let mut paths = Vec::with_capacity(data.len());
    let mut total = 0.0;
    for r in results {
        let (p, ll) = r?;
        paths.push(p);
        total += ll;
    }
    Ok((paths, total))
}

/// Log target of the Beta base shape on `(ln a, ln b)`: the base density of
/// every active cluster value times independent Normal hyperpriors.
pub fn base_hyperparams_log_target(x: &[f64], cluster_values: &[f64], log_sd: f64) -> f64 {
    let (a, b) = (x[0].exp(), x[1].exp());
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return f64::NEG_INFINITY;
    }
    let lik: f64 = cluster_values.iter().map(|&v| ln_beta_pdf(v, a, b)).sum();
    lik - 0.5 * (x[0] * x[0] + x[1] * x[1]) / (log_sd * log_sd)
}

/// Step 4a for one DP.
pub fn mh_update_base_hyperparams<R: Rng + ?Sized>(
    dp: &mut DpState,
    kernel: &mut AdaptiveKernel,
    log_sd: f64,
    rng: &mut R,
) {
    let values = dp.cluster_values().to_vec();
    let (a, b) = dp.base();
    let mut x = vec![a.ln(), b.ln()];
    kernel.step(&mut x, |v| base_hyperparams_log_target(v, &values, log_sd), rng);
    dp.set_base(x[0].exp(), x[1].exp());
}

/// Complete-data log posterior of the fixed effects, on
/// `(beta_1.., logit gamma_d, logit q)`, given sampled paths and each
/// individual's Here persistence.
pub fn fixed_effects_log_target(
    theta: &[f64],
    stats: &[SufficientStats],
    hh_values: &[f64],
    priors: &Priors,
) -> f64 {
    let s = theta.len() - 2;
    let beta = &theta[..s];
    let (x_d, x_q) = (theta[s], theta[s + 1]);
    if !(x_d.is_finite() && x_q.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let mut lp = 0.0;
    for (st, &phi) in stats.iter().zip(hh_values) {
        lp += year_effect_log_lik(&st.hh, beta, phi);
    }
    let sd2 = priors.year_effect_sd * priors.year_effect_sd;
    lp -= 0.5 * beta.iter().map(|b| b * b).sum::<f64>() / sd2;

    // ln(gamma_d), ln(1 - gamma_d) etc. computed stably from the logits.
    let ln_logistic = |x: f64| if x >= 0.0 { -(-x).exp().ln_1p() } else { x - x.exp().ln_1p() };
    let (ln_d, ln_live) = (ln_logistic(x_d), ln_logistic(-x_d));
    let (ln_q, ln_not_q) = (ln_logistic(x_q), ln_logistic(-x_q));
    let ln_surv = OFF_SEASON_WEEKS as f64 * ln_live;
    let ln_not_surv = (-ln_surv.exp_m1()).ln();

    let mut sc = crate::hmm::SurvivalCounts::default();
    for st in stats {
        sc += st.survival;
    }
    let term = |n: u32, l: f64| if n == 0 { 0.0 } else { n as f64 * l };
    lp += term(sc.weekly_survived, ln_live) + term(sc.weekly_died, ln_d);
    lp += term(sc.boundary_here, ln_q + ln_surv);
    lp += term(sc.boundary_away, ln_not_q + ln_surv);
    lp += term(sc.boundary_died, ln_not_surv);

    // Beta priors carried to the logit scale.
    let (ad, bd) = priors.gamma_d;
    let (aq, bq) = priors.q;
    lp += ad * ln_d + bd * ln_live + aq * ln_q + bq * ln_not_q;
    lp
}

/// Step 5: joint update of year effects, mortality and season-start
/// presence.
pub fn mh_update_fixed_effects<R: Rng + ?Sized>(
    fixed: &mut FixedEffects,
    kernel: &mut AdaptiveKernel,
    stats: &[SufficientStats],
    hh_values: &[f64],
    priors: &Priors,
    rng: &mut R,
) {
    let mut theta = fixed.to_unconstrained();
    kernel.step(
        &mut theta,
        |t| fixed_effects_log_target(t, stats, hh_values, priors),
        rng,
    );
    *fixed = FixedEffects::from_unconstrained(&theta);
}

fn emit(trace: &mut dyn Trace, iteration: usize, step: IterationStep, active: bool) {
    tracing::debug!(iteration, step = ?step, active, "mcmc step");
    if trace.enabled() {
        trace.record(TraceEvent::Step {
            iteration,
            step,
            active,
        });
    }
}

/// One full sweep of the sampler.
pub fn mcmc_iteration(
    state: &mut ChainState,
    data: &Dataset,
    config: &McmcConfig,
    trace: &mut dyn Trace,
) -> Result<()> {
    let it = state.iteration + 1;
    let adapt_end = config.adaptation_end();
    let adapting = it <= adapt_end;
    let late = adapting && it > adapt_end / 2;
    let n = data.len();

    // 1. latent paths
    let (paths, ll) = sample_paths(state, data, config.execution).map_err(|e| e.at_iteration(it))?;
    state.paths = paths;
    state.log_likelihood = ll;
    emit(trace, it, IterationStep::SamplePaths, true);

    // 2. counts
    state.stats = state
        .paths
        .iter()
        .zip(data.histories())
        .map(|(p, h)| sufficient_stats(p, h, data.layout()))
        .collect::<Result<_>>()
        .map_err(|e| e.at_iteration(it))?;
    emit(trace, it, IterationStep::SufficientStats, true);

    // 3. cluster assignments and values
    let rng = &mut state.rng;
    let obs: Vec<Count> = state.stats.iter().map(|s| s.obs).collect();
    let aa: Vec<Count> = state.stats.iter().map(|s| s.aa).collect();
    let kernel = |c: &Count, p: f64| c.log_kernel(p);
    neal8_update(&mut state.dp_pi, &obs, kernel, config.m, rng).map_err(|e| e.at_iteration(it))?;
    update_cluster_params_conjugate(&mut state.dp_pi, &obs, rng);
    match &state.fixed {
        None => {
            let hh: Vec<Count> = state.stats.iter().map(|s| s.hh_total()).collect();
            neal8_update(&mut state.dp_hh, &hh, kernel, config.m, rng)
                .map_err(|e| e.at_iteration(it))?;
            update_cluster_params_conjugate(&mut state.dp_hh, &hh, rng);
        }
        Some(f) => {
            let per_season: Vec<&[Count]> = state.stats.iter().map(|s| s.hh.as_slice()).collect();
            let beta = &f.beta_yr;
            neal8_update(
                &mut state.dp_hh,
                &per_season,
                |c: &&[Count], p| year_effect_log_lik(c, beta, p),
                config.m,
                rng,
            )
            .map_err(|e| e.at_iteration(it))?;
            update_cluster_params_mh(&mut state.dp_hh, &per_season, beta, config.cluster_mh_steps, rng);
        }
    }
    neal8_update(&mut state.dp_aa, &aa, kernel, config.m, rng).map_err(|e| e.at_iteration(it))?;
    update_cluster_params_conjugate(&mut state.dp_aa, &aa, rng);
    emit(trace, it, IterationStep::DpAssignments, true);

    // 4a. base distributions
    let dps = [&mut state.dp_pi, &mut state.dp_hh, &mut state.dp_aa];
    if config.fixed_base.is_none() {
        for (dp, k) in dps.into_iter().zip(state.base_kernels.iter_mut()) {
            mh_update_base_hyperparams(dp, k, config.priors.base_log_sd, rng);
            let (a, b) = dp.base();
            k.observe(&[a.ln(), b.ln()], late);
        }
    }
    emit(trace, it, IterationStep::BaseHyperparams, config.fixed_base.is_none());

    // 4b. concentrations
    if config.fixed_alpha.is_none() {
        for dp in [&mut state.dp_pi, &mut state.dp_hh, &mut state.dp_aa] {
            let eta = sample_eta(dp.alpha(), n, rng);
            let alpha = update_alpha(dp.k(), n, eta, dp.alpha_prior(), rng);
            dp.set_alpha(alpha);
        }
    }
    emit(trace, it, IterationStep::Concentration, config.fixed_alpha.is_none());

    // 5. fixed effects
    let active = state.fixed.is_some();
    if let (Some(f), Some(k)) = (state.fixed.as_mut(), state.fixed_kernel.as_mut()) {
        let hh_values = state.dp_hh.individual_values();
        for _ in 0..config.fixed_effect_steps {
            mh_update_fixed_effects(f, k, &state.stats, &hh_values, &config.priors, rng);
        }
        k.observe(&f.to_unconstrained(), late);
    }
    emit(trace, it, IterationStep::FixedEffects, active);

    if it == adapt_end {
        for k in state.base_kernels.iter_mut() {
            k.freeze();
        }
        if let Some(k) = state.fixed_kernel.as_mut() {
            k.freeze();
        }
        tracing::debug!(iteration = it, "proposals frozen");
    }
    if trace.enabled() {
        for (p, k) in Param::ALL.iter().zip(&state.base_kernels) {
            trace.record(TraceEvent::Proposal {
                iteration: it,
                kernel: p.kernel_name(),
                frozen: k.is_frozen(),
                signature: k.signature(),
            });
        }
        if let Some(k) = &state.fixed_kernel {
            trace.record(TraceEvent::Proposal {
                iteration: it,
                kernel: "fixed_effects",
                frozen: k.is_frozen(),
                signature: k.signature(),
            });
        }
    }

    state.iteration = it;
    Ok(())
}
