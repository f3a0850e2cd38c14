//! Synthetic capture histories with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::hmm::{
    build_transition_2state, build_transition_3state, emission_prob, logistic, logit,
    year_boundary_matrix, CaptureHistory, Dataset, ModelKind, Occasion, State, StatePath,
    TransitionMatrix, TransitionParams, FIRST_WEEK, LAST_WEEK,
};
use crate::mcmc::{Execution, FixedEffects, Param};
use crate::sampling::{categorical, stream_rng};

/// How one individual-level parameter is distributed across individuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamSpec {
    /// Each individual takes one of these values, chosen uniformly.
    Groups(Vec<f64>),
    /// `logistic(x)` with `x ~ Normal(mean, variance)`.
    LogitNormal { mean: f64, variance: f64 },
}

impl ParamSpec {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            ParamSpec::Groups(g) => {
                if g.is_empty() {
                    return Err(Error::domain(format!("{name}: need at least one group")));
                }
                // Closed bounds admit the deterministic corner cases; pi = 0
                // would contradict the forced first sighting.
                let lo_ok = |v: f64| if name == "pi" { v > 0.0 } else { v >= 0.0 };
                if let Some(v) = g.iter().find(|&&v| !(lo_ok(v) && v <= 1.0)) {
                    return Err(Error::domain(format!("{name}: group value {v} outside (0, 1]")));
                }
            }
            ParamSpec::LogitNormal { mean, variance } => {
                if !mean.is_finite() || !(*variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::domain(format!(
                        "{name}: logit-normal needs a finite mean and non-negative variance"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Draws a value and, for grouped specs, its group index.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<usize>) {
        match self {
            ParamSpec::Groups(g) => {
                let k = rng.random_range(0..g.len());
                (g[k], Some(k))
            }
            ParamSpec::LogitNormal { mean, variance } => {
                let x = Normal::new(*mean, variance.sqrt())
                    .expect("validated spread")
                    .sample(rng);
                (logistic(x), None)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimDesign {
    pub n_individuals: usize,
    /// Occasions per individual for the two-state model. The three-state
    /// model always covers every in-season week of each season.
    #[serde(default)]
    pub history_length: Option<usize>,
    pub model: ModelKind,
    pub pi: ParamSpec,
    pub gamma_hh: ParamSpec,
    pub gamma_aa: ParamSpec,
    /// Required for the three-state model; one year effect per season.
    #[serde(default)]
    pub fixed: Option<FixedEffects>,
    #[serde(default)]
    pub seed: u64,
}

impl SimDesign {
    /// Two-group design: n = 30, T = 1000.
    pub fn two_group(seed: u64) -> Self {
        SimDesign {
            n_individuals: 30,
            history_length: Some(1000),
            model: ModelKind::TwoState,
            pi: ParamSpec::Groups(vec![0.82, 0.96]),
            gamma_hh: ParamSpec::Groups(vec![0.88, 0.98]),
            gamma_aa: ParamSpec::Groups(vec![0.8, 0.95]),
            fixed: None,
            seed,
        }
    }

    /// Three-group design probing the detection/presence confound.
    pub fn three_group(seed: u64) -> Self {
        SimDesign {
            pi: ParamSpec::Groups(vec![0.6, 0.85, 0.96]),
            gamma_hh: ParamSpec::Groups(vec![0.5, 0.8, 0.95]),
            gamma_aa: ParamSpec::Groups(vec![0.89, 0.97]),
            ..SimDesign::two_group(seed)
        }
    }

    /// Every parameter logit-Normal(2, variance 0.1).
    pub fn unimodal(seed: u64) -> Self {
        let spec = ParamSpec::LogitNormal {
            mean: 2.0,
            variance: 0.1,
        };
        SimDesign {
            pi: spec.clone(),
            gamma_hh: spec.clone(),
            gamma_aa: spec,
            ..SimDesign::two_group(seed)
        }
    }

    pub fn spec(&self, p: Param) -> &ParamSpec {
        match p {
            Param::Pi => &self.pi,
            Param::GammaHH => &self.gamma_hh,
            Param::GammaAA => &self.gamma_aa,
        }
    }

    /// Copy of the design with the seed of replicate `r`.
    pub fn replicate(&self, r: u64) -> Self {
        SimDesign {
            seed: self.seed.wrapping_add(r),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_individuals == 0 {
            return Err(Error::domain("need at least one individual"));
        }
        for p in Param::ALL {
            self.spec(p).validate(p.name())?;
        }
        match self.model {
            ModelKind::TwoState => {
                if self.fixed.is_some() {
                    return Err(Error::domain("the two-state model has no fixed effects"));
                }
                match self.history_length {
                    Some(t) if t >= 2 => {}
                    _ => return Err(Error::domain("history_length must be at least 2")),
                }
            }
            ModelKind::ThreeState => {
                let Some(f) = &self.fixed else {
                    return Err(Error::domain("the three-state model needs fixed effects"));
                };
                FixedEffects::new(f.beta_yr.clone(), f.gamma_d, f.q)?;
                if let Some(t) = self.history_length {
                    if t != f.beta_yr.len() * self.weeks_per_season() {
                        return Err(Error::domain(format!(
                            "history_length {t} disagrees with {} seasons of {} weeks",
                            f.beta_yr.len(),
                            self.weeks_per_season()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn weeks_per_season(&self) -> usize {
        (LAST_WEEK - FIRST_WEEK + 1) as usize
    }

    fn occasions(&self) -> Vec<Occasion> {
        match &self.fixed {
            Some(f) if self.model == ModelKind::ThreeState => (0..f.beta_yr.len() as u32)
                .flat_map(|s| (FIRST_WEEK..=LAST_WEEK).map(move |w| Occasion::new(s, w)))
                .collect(),
            _ => (0..self.history_length.unwrap_or(0) as u32)
                .map(|w| Occasion::new(0, w))
                .collect(),
        }
    }
}

/// Ground truth for one individual.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualTruth {
    pub id: String,
    /// Indexed like [`Param::ALL`].
    pub values: [f64; 3],
    pub groups: [Option<usize>; 3],
    pub path: StatePath,
}

impl IndividualTruth {
    pub fn value(&self, p: Param) -> f64 {
        self.values[p as usize]
    }

    pub fn group(&self, p: Param) -> Option<usize> {
        self.groups[p as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub individuals: Vec<IndividualTruth>,
    pub fixed: Option<FixedEffects>,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub truth: Truth,
}

fn individual_id(i: usize) -> String {
    format!("ind{:03}", i + 1)
}

/// Simulates `design` from its own seed.
pub fn simulate(design: &SimDesign) -> Result<Simulated> {
    simulate_with(design, &mut stream_rng(design.seed, 0), Execution::Parallel)
}

/// Simulates a design whose three parameters are all logit-Normal.
pub fn simulate_unimodal(design: &SimDesign) -> Result<Simulated> {
    if Param::ALL
        .iter()
        .any(|&p| !matches!(design.spec(p), ParamSpec::LogitNormal { .. }))
    {
        return Err(Error::domain(
            "unimodal simulation needs a logit-normal spec for every parameter",
        ));
    }
    simulate(design)
}

/// Simulates `design` drawing from `rng`. Parameters are drawn in
/// individual order; each latent path then uses its own stream so the
/// result does not depend on scheduling.
pub fn simulate_with<R: Rng + ?Sized>(
    design: &SimDesign,
    rng: &mut R,
    execution: Execution,
) -> Result<Simulated> {
    design.validate()?;
    let n = design.n_individuals;
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        let mut values = [0.0; 3];
        let mut groups = [None; 3];
        for p in Param::ALL {
            let (v, g) = design.spec(p).draw(rng);
            values[p as usize] = v;
            groups[p as usize] = g;
        }
        params.push((values, groups, rng.random::<u64>()));
    }
    let occasions = design.occasions();
    let fixed = design.fixed.clone().filter(|_| design.model == ModelKind::ThreeState);
    let boundary = match &fixed {
        Some(f) => Some(year_boundary_matrix(f.q, f.gamma_d)?),
        None => None,
    };

    let results = map_indices(n, execution, |i| -> Result<(IndividualTruth, CaptureHistory)> {
        let (values, groups, seed) = params[i];
        let [pi, hh, aa] = values;
        let weekly: Vec<TransitionMatrix> = match &fixed {
            None => vec![build_transition_2state(&TransitionParams::two_state(hh, aa))?],
            Some(f) => f
                .beta_yr
                .iter()
                .map(|b| {
                    let g = if hh >= 1.0 { 1.0 } else if hh <= 0.0 { 0.0 } else { logistic(b + logit(hh)) };
                    build_transition_3state(&TransitionParams::three_state(g, aa, f.gamma_d))
                })
                .collect::<Result<_>>()?,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut states = Vec::with_capacity(occasions.len());
        let mut seen = Vec::with_capacity(occasions.len());
        let mut s = State::Here;
        for (t, occ) in occasions.iter().enumerate() {
            if t > 0 {
                let m = if occ.season != occasions[t - 1].season {
                    boundary.as_ref().expect("three-state boundary")
                } else {
                    &weekly[occ.season as usize % weekly.len()]
                };
                let row = m.row(s);
                s = State::from_index(categorical(row, &mut rng).expect("stochastic row"));
            }
            let y = t == 0 || rng.random::<f64>() < emission_prob(s, true, pi);
            states.push(s);
            seen.push(y);
        }
        let id = individual_id(i);
        let history = CaptureHistory::new(id.clone(), seen, occasions.clone())?;
        let path = StatePath::new(states, &history)?;
        Ok((
            IndividualTruth {
                id,
                values,
                groups,
                path,
            },
            history,
        ))
    });
    let mut individuals = Vec::with_capacity(n);
    let mut histories = Vec::with_capacity(n);
    for r in results {
        let (t, h) = r?;
        individuals.push(t);
        histories.push(h);
    }
    Ok(Simulated {
        data: Dataset::new(design.model, histories)?,
        truth: Truth { individuals, fixed },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_corner_is_all_sightings() {
        let design = SimDesign {
            n_individuals: 4,
            history_length: Some(50),
            pi: ParamSpec::Groups(vec![1.0]),
            gamma_hh: ParamSpec::Groups(vec![1.0]),
            gamma_aa: ParamSpec::Groups(vec![0.5]),
            ..SimDesign::two_group(3)
        };
        let sim = simulate(&design).unwrap();
        for h in sim.data.histories() {
            assert!(h.seen().iter().all(|&s| s));
        }
    }

    #[test]
    fn zero_variance_gives_identical_values() {
        let spec = ParamSpec::LogitNormal { mean: 2.0, variance: 0.0 };
        let design = SimDesign {
            pi: spec.clone(),
            gamma_hh: spec.clone(),
            gamma_aa: spec,
            n_individuals: 5,
            history_length: Some(10),
            ..SimDesign::two_group(0)
        };
        let sim = simulate_unimodal(&design).unwrap();
        for t in &sim.truth.individuals {
            for v in t.values {
                assert!((v - 0.880_797_077_977_882_4).abs() < 1e-15);
            }
        }
        assert!(simulate_unimodal(&SimDesign::two_group(0)).is_err());
    }

    #[test]
    fn detection_frequency_tracks_pi() {
        let sim = simulate(&SimDesign::two_group(11)).unwrap();
        for (t, h) in sim.truth.individuals.iter().zip(sim.data.histories()) {
            // Skip the forced first sighting.
            let here: Vec<bool> = t.path.states()[1..]
                .iter()
                .zip(&h.seen()[1..])
                .filter(|(s, _)| **s == State::Here)
                .map(|(_, &y)| y)
                .collect();
            let n = here.len() as f64;
            let freq = here.iter().filter(|&&y| y).count() as f64 / n;
            let pi = t.value(Param::Pi);
            let se = (pi * (1.0 - pi) / n).sqrt();
            assert!((freq - pi).abs() < 3.0 * se + 1e-9, "{} {freq} vs {pi}", t.id);
            assert_eq!(
                t.value(Param::Pi),
                [0.82, 0.96][t.group(Param::Pi).unwrap()]
            );
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let d = SimDesign::three_group(5);
        let a = simulate_with(&d, &mut stream_rng(d.seed, 0), Execution::Parallel).unwrap();
        let b = simulate_with(&d, &mut stream_rng(d.seed, 0), Execution::Sequential).unwrap();
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.data.histories(), b.data.histories());
    }

    #[test]
    fn three_state_histories_are_valid() {
        let design = SimDesign {
            model: ModelKind::ThreeState,
            history_length: None,
            fixed: Some(FixedEffects::new(vec![0.5, -0.5, 0.0], 0.01, 0.6).unwrap()),
            n_individuals: 20,
            ..SimDesign::two_group(9)
        };
        let sim = simulate(&design).unwrap();
        assert_eq!(sim.data.layout().count, 3);
        for (t, h) in sim.truth.individuals.iter().zip(sim.data.histories()) {
            assert_eq!(h.len(), 78);
            StatePath::new(t.path.states().to_vec(), h).unwrap();
        }
        let bad = SimDesign {
            history_length: Some(10),
            ..design
        };
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn design_json() {
        let json = r#"{
            "n_individuals": 3, "history_length": 20, "model": "two-state",
            "pi": {"groups": [0.82, 0.96]},
            "gamma_hh": {"logit_normal": {"mean": 2.0, "variance": 0.1}},
            "gamma_aa": {"groups": [0.9]},
            "seed": 4
        }"#;
        let d: SimDesign = serde_json::from_str(json).unwrap();
        assert_eq!(d.pi, ParamSpec::Groups(vec![0.82, 0.96]));
        assert!(simulate(&d).is_ok());
        assert!(SimDesign { n_individuals: 0, ..d.clone() }.validate().is_err());
        assert!(SimDesign { history_length: Some(1), ..d.clone() }.validate().is_err());
        assert!(SimDesign { pi: ParamSpec::Groups(vec![1.2]), ..d }.validate().is_err());
    }
}
