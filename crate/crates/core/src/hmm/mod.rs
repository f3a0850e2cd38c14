//! Hidden Markov machinery for capture histories.
//!
//! Animals move between Here (inside the study area, detectable), Away
//! (outside, undetectable) and, in the three-state model, Dead. The
//! two-state model is the three-state model with no mortality and a single
//! season, so both share one implementation sized by [`ModelKind::n_states`].

mod ffbs;
mod history;
mod stats;

pub use ffbs::{backward_sample, forward_pass, Dynamics, Forward};
pub use history::{CaptureHistory, Dataset, Occasion, SeasonLayout, Step, FIRST_WEEK, LAST_WEEK};
pub use stats::{sufficient_stats, Count, SufficientStats, SurvivalCounts};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unobserved weeks between two consecutive field seasons.
pub const OFF_SEASON_WEEKS: i32 = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "two-state")]
    TwoState,
    #[serde(rename = "three-state")]
    ThreeState,
}

impl ModelKind {
    pub fn n_states(self) -> usize {
        match self {
            ModelKind::TwoState => 2,
            ModelKind::ThreeState => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TwoState => "two-state",
            ModelKind::ThreeState => "three-state",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-state" | "two_state" | "2" => Ok(ModelKind::TwoState),
            "three-state" | "three_state" | "3" => Ok(ModelKind::ThreeState),
            other => Err(Error::domain(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Here = 0,
    Away = 1,
    Dead = 2,
}

impl State {
    pub const ALL: [State; 3] = [State::Here, State::Away, State::Dead];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> State {
        Self::ALL[i]
    }

    pub fn is_alive(self) -> bool {
        self != State::Dead
    }

    pub fn symbol(self) -> char {
        match self {
            State::Here => 'H',
            State::Away => 'A',
            State::Dead => 'D',
        }
    }
}

/// Weekly movement and mortality probabilities for one individual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub gamma_hh: f64,
    pub gamma_aa: f64,
    pub gamma_d: f64,
}

impl TransitionParams {
    pub fn two_state(gamma_hh: f64, gamma_aa: f64) -> Self {
        TransitionParams {
            gamma_hh,
            gamma_aa,
            gamma_d: 0.0,
        }
    }

    pub fn three_state(gamma_hh: f64, gamma_aa: f64, gamma_d: f64) -> Self {
        TransitionParams {
            gamma_hh,
            gamma_aa,
            gamma_d,
        }
    }

    // Staying probabilities may sit on the closed interval so that absorbing
    // limits (e.g. gamma_hh = 1) remain expressible.
    fn validate(&self) -> Result<()> {
        check_closed_unit("gamma_hh", self.gamma_hh)?;
        check_closed_unit("gamma_aa", self.gamma_aa)?;
        if !(self.gamma_d >= 0.0 && self.gamma_d < 1.0) {
            return Err(Error::domain(format!(
                "gamma_d must lie in [0, 1), got {}",
                self.gamma_d
            )));
        }
        Ok(())
    }
}

fn check_closed_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Row-stochastic transition matrix over the first `n_states` of
/// Here/Away/Dead. Row = current state, column = next state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix {
    n_states: usize,
    p: [[f64; 3]; 3],
}

impl TransitionMatrix {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn get(&self, from: State, to: State) -> f64 {
        self.p[from.index()][to.index()]
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[[f64; 3]; 3] {
        &self.p
    }

    pub fn row(&self, from: State) -> &[f64] {
        &self.p[from.index()][..self.n_states]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p[..self.n_states].iter().map(move |r| &r[..self.n_states])
    }

    /// Largest absolute deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Propagate a state distribution one step: `dist · P`.
    pub fn propagate(&self, dist: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (from, &mass) in dist.iter().enumerate().take(self.n_states) {
            for (to, o) in out.iter_mut().enumerate().take(self.n_states) {
                *o += mass * self.p[from][to];
            }
        }
        out
    }
}

pub fn build_transition_2state(p: &TransitionParams) -> Result<TransitionMatrix> {
    p.validate()?;
    if p.gamma_d != 0.0 {
        return Err(Error::domain(format!(
            "two-state model has no mortality, got gamma_d = {}",
            p.gamma_d
        )));
    }
    let mut m = [[0.0; 3]; 3];
    m[0][0] = p.gamma_hh;
    m[0][1] = 1.0 - p.gamma_hh;
    m[1][0] = 1.0 - p.gamma_aa;
    m[1][1] = p.gamma_aa;
    Ok(TransitionMatrix { n_states: 2, p: m })
}

pub fn build_transition_3state(p: &TransitionParams) -> Result<TransitionMatrix> {
    p.validate()?;
    let live = 1.0 - p.gamma_d;
    let m = [
        [p.gamma_hh * live, (1.0 - p.gamma_hh) * live, p.gamma_d],
        [(1.0 - p.gamma_aa) * live, p.gamma_aa * live, p.gamma_d],
        [0.0, 0.0, 1.0],
    ];
    Ok(TransitionMatrix { n_states: 3, p: m })
}

/// Probability of surviving the unobserved off-season given weekly mortality.
pub fn off_season_survival(gamma_d: f64) -> f64 {
    (1.0 - gamma_d).powi(OFF_SEASON_WEEKS)
}

/// Transition applied between the last week of one season and the first
/// week of the next: survivors re-enter Here with probability `q`.
pub fn year_boundary_matrix(q: f64, gamma_d: f64) -> Result<TransitionMatrix> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("q must lie in (0, 1), got {q}")));
    }
    if !(gamma_d >= 0.0 && gamma_d < 1.0) {
        return Err(Error::domain(format!(
            "gamma_d must lie in [0, 1), got {gamma_d}"
        )));
    }
    let surv = off_season_survival(gamma_d);
    let alive_row = [q * surv, (1.0 - q) * surv, 1.0 - surv];
    Ok(TransitionMatrix {
        n_states: 3,
        p: [alive_row, alive_row, [0.0, 0.0, 1.0]],
    })
}

/// State distribution at the first week of a season given the distribution
/// at the final week of the previous one.
pub fn year_boundary_distribution(prev: &[f64], q: f64, gamma_d: f64) -> Result<[f64; 3]> {
    if prev.len() != 3 {
        return Err(Error::domain(format!(
            "expected a three-state distribution, got {} entries",
            prev.len()
        )));
    }
    let total: f64 = prev.iter().sum();
    if prev.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!(
            "state distribution must be non-negative and sum to 1, got {prev:?}"
        )));
    }
    Ok(year_boundary_matrix(q, gamma_d)?.propagate(prev))
}

/// `P(X = observed | state)` for detection probability `pi`.
#[inline]
pub fn emission_prob(state: State, observed: bool, pi: f64) -> f64 {
    match (state, observed) {
        (State::Here, true) => pi,
        (State::Here, false) => 1.0 - pi,
        (_, true) => 0.0,
        (_, false) => 1.0,
    }
}

/// A sampled latent state sequence aligned to a capture history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    states: Vec<State>,
}

impl StatePath {
    /// Validates the path against the history it claims to explain.
    pub fn new(states: Vec<State>, history: &CaptureHistory) -> Result<Self> {
        if states.len() != history.len() {
            return Err(Error::domain(format!(
                "path length {} does not match history `{}` of length {}",
                states.len(),
                history.id(),
                history.len()
            )));
        }
        if states[0] != State::Here {
            return Err(Error::domain("path must start Here at the first sighting"));
        }
        for (t, (&s, &seen)) in states.iter().zip(history.seen()).enumerate() {
            if seen && s != State::Here {
                return Err(Error::domain(format!(
                    "individual `{}` seen at occasion {t} but path is {:?}",
                    history.id(),
                    s
                )));
            }
            if t > 0 && states[t - 1] == State::Dead && s != State::Dead {
                return Err(Error::domain(format!(
                    "path leaves Dead at occasion {t} for `{}`",
                    history.id()
                )));
            }
        }
        Ok(StatePath { states })
    }

    pub(crate) fn from_unchecked(states: Vec<State>) -> Self {
        StatePath { states }
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn to_symbols(&self) -> String {
        self.states.iter().map(|s| s.symbol()).collect()
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
