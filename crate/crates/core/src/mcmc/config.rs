use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::ModelKind;

/// How per-individual and per-chain work is scheduled. `Parallel` falls
/// back to sequential execution when the `parallel` feature is off. Both
/// produce identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    /// Standard deviation of the Normal hyperprior on `ln a` and `ln b` of
    /// each Beta base distribution (mean zero).
    pub base_log_sd: f64,
    /// Standard deviation of the zero-mean Normal prior on each year effect.
    pub year_effect_sd: f64,
    /// Beta prior on weekly mortality.
    pub gamma_d: (f64, f64),
    /// Beta prior on the season-start Here probability.
    pub q: (f64, f64),
    /// Gamma (shape, rate) prior on each concentration; `None` uses
    /// `a = b = exp(-0.033 n)`.
    pub alpha: Option<(f64, f64)>,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            base_log_sd: 2.0,
            year_effect_sd: 1.0,
            gamma_d: (1.0, 1.0),
            q: (1.0, 1.0),
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialValues {
    pub pi: f64,
    pub gamma_hh: f64,
    pub gamma_aa: f64,
    pub gamma_d: f64,
    pub q: f64,
    pub alpha: f64,
    pub base: (f64, f64),
}

impl Default for InitialValues {
    fn default() -> Self {
        InitialValues {
            pi: 0.7,
            gamma_hh: 0.8,
            gamma_aa: 0.8,
            gamma_d: 0.005,
            q: 0.5,
            alpha: 1.0,
            base: (1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub model: ModelKind,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    /// Auxiliary components per assignment update.
    pub m: usize,
    pub seed: u64,
    /// Leading iterations over which proposals adapt; must fit inside the
    /// burn-in. `None` adapts over the whole burn-in.
    pub adaptation_window: Option<usize>,
    /// Random-walk steps per cluster for non-conjugate cluster values.
    pub cluster_mh_steps: usize,
    /// Independence MH steps for the fixed effects per sweep.
    pub fixed_effect_steps: usize,
    pub priors: Priors,
    pub init: InitialValues,
    /// Hold every concentration at this value instead of sampling it.
    pub fixed_alpha: Option<f64>,
    /// Hold every base distribution at Beta(a, b) instead of sampling it.
    pub fixed_base: Option<(f64, f64)>,
    pub execution: Execution,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            model: ModelKind::TwoState,
            iterations: 15_000,
            burn_in: 5_000,
            thin: 1,
            chains: 1,
            m: 3,
            seed: 1,
            adaptation_window: None,
            cluster_mh_steps: 5,
            fixed_effect_steps: 10,
            priors: Priors::default(),
            init: InitialValues::default(),
            fixed_alpha: None,
            fixed_base: None,
            execution: Execution::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.chains == 0 {
            return bad("need at least one chain".into());
        }
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return bad(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.fixed_effect_steps == 0 {
            return bad("fixed_effect_steps must be at least 1".into());
        }
        if let Some(w) = self.adaptation_window {
            if w > self.burn_in {
                return bad(format!(
                    "adaptation window ({w}) must fit inside the burn-in ({})",
                    self.burn_in
                ));
            }
        }
        let i = &self.init;
        for (name, v) in [("pi", i.pi), ("gamma_hh", i.gamma_hh), ("gamma_aa", i.gamma_aa), ("q", i.q)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("initial {name} must lie in (0, 1), got {v}"));
            }
        }
        if !(i.gamma_d > 0.0 && i.gamma_d < 1.0) {
            return bad(format!("initial gamma_d must lie in (0, 1), got {}", i.gamma_d));
        }
        let positive = [
            i.alpha,
            i.base.0,
            i.base.1,
            self.priors.base_log_sd,
            self.priors.year_effect_sd,
            self.priors.gamma_d.0,
            self.priors.gamma_d.1,
            self.priors.q.0,
            self.priors.q.1,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("initial values and prior scales must be positive".into());
        }
        if let Some((a, b)) = self.priors.alpha {
            if !(a > 0.0 && b > 0.0) {
                return bad("alpha prior shape and rate must be positive".into());
            }
        }
        if self.fixed_alpha.is_some_and(|a| !(a > 0.0)) {
            return bad("fixed alpha must be positive".into());
        }
        if self.fixed_base.is_some_and(|(a, b)| !(a > 0.0 && b > 0.0)) {
            return bad("fixed base shapes must be positive".into());
        }
        Ok(())
    }

    /// Iterations (1-based) during which proposals adapt.
    pub fn adaptation_end(&self) -> usize {
        self.adaptation_window.unwrap_or(self.burn_in)
    }

    /// `ceil((iterations - burn_in) / thin)`.
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    /// Whether 1-based iteration `it` is kept.
    #[inline]
    pub fn is_retained(&self, it: usize) -> bool {
        it > self.burn_in && (it - self.burn_in - 1) % self.thin == 0
    }
}
