use rand::Rng;

use crate::error::{Error, Result};
use crate::sampling::categorical;

use super::history::{CaptureHistory, SeasonLayout, Step};
use super::{
    build_transition_2state, emission_prob, year_boundary_matrix, State, StatePath,
    TransitionMatrix, TransitionParams,
};

/// Per-individual model parameters needed to run the forward recursion:
/// detection probability, one weekly matrix per season and, for the
/// three-state model, the season-boundary matrix.
#[derive(Debug, Clone)]
pub struct Dynamics {
    n_states: usize,
    pi: f64,
    first_season: u32,
    weekly: Vec<TransitionMatrix>,
    boundary: Option<TransitionMatrix>,
}

impl Dynamics {
    pub fn two_state(pi: f64, params: &TransitionParams) -> Result<Self> {
        check_pi(pi)?;
        Ok(Dynamics {
            n_states: 2,
            pi,
            first_season: 0,
            weekly: vec![build_transition_2state(params)?],
            boundary: None,
        })
    }

    /// Two-state dynamics for histories whose single season is `season`.
    pub fn two_state_in_season(pi: f64, params: &TransitionParams, season: u32) -> Result<Self> {
        let mut d = Self::two_state(pi, params)?;
        d.first_season = season;
        Ok(d)
    }

    /// `weekly[k]` governs transitions within season `layout.first + k`.
    pub fn three_state(
        pi: f64,
        layout: SeasonLayout,
        weekly: Vec<TransitionMatrix>,
        q: f64,
        gamma_d: f64,
    ) -> Result<Self> {
        check_pi(pi)?;
        if weekly.len() != layout.count {
            return Err(Error::domain(format!(
                "{} weekly matrices for {} seasons",
                weekly.len(),
                layout.count
            )));
        }
        if weekly.iter().any(|m| m.n_states() != 3) {
            return Err(Error::domain("three-state dynamics need 3x3 weekly matrices"));
        }
        Ok(Dynamics {
            n_states: 3,
            pi,
            first_season: layout.first,
            weekly,
            boundary: Some(year_boundary_matrix(q, gamma_d)?),
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn pi(&self) -> f64 {
        self.pi
    }

    #[inline]
    pub fn matrix(&self, step: Step) -> &TransitionMatrix {
        match step {
            Step::Weekly { season } => &self.weekly[(season - self.first_season) as usize],
            Step::Boundary => self
                .boundary
                .as_ref()
                .expect("boundary step checked by covers()"),
        }
    }

    fn covers(&self, history: &CaptureHistory) -> Result<()> {
        let occ = history.occasions();
        let lo = occ[0].season;
        let hi = occ[occ.len() - 1].season;
        let last = self.first_season as usize + self.weekly.len();
        if lo < self.first_season || hi as usize >= last {
            return Err(Error::domain(format!(
                "history `{}` spans seasons {lo}..={hi} but dynamics cover {}..{last}",
                history.id(),
                self.first_season
            )));
        }
        if lo != hi && self.boundary.is_none() {
            return Err(Error::domain(format!(
                "history `{}` crosses a season boundary under a two-state model",
                history.id()
            )));
        }
        Ok(())
    }
}

fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("pi must lie in (0, 1], got {pi}")))
    }
}

/// Filtered state probabilities `P(S_t | X_1..X_t)` for every occasion.
#[derive(Debug, Clone)]
pub struct Forward {
    n_states: usize,
    vectors: Vec<[f64; 3]>,
    normalizers: Vec<f64>,
    log_likelihood: f64,
}

impl Forward {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, t: usize) -> &[f64] {
        &self.vectors[t][..self.n_states]
    }

    /// Per-step normalizing constants `P(X_t | X_1..X_{t-1})`.
    pub fn normalizers(&self) -> &[f64] {
        &self.normalizers
    }

    pub fn log_normalizers(&self) -> Vec<f64> {
        self.normalizers.iter().map(|c| c.ln()).collect()
    }

    /// Log-likelihood of the whole series, including the first sighting.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }
}

/// Normalized forward recursion. The chain is conditioned to be Here at
/// the first occasion; the first sighting still contributes `pi` to the
/// likelihood so that it agrees with the detection counts.
pub fn forward_pass(history: &CaptureHistory, dynamics: &Dynamics) -> Result<Forward> {
    if history.is_empty() {
        return Err(Error::domain("forward pass over an empty history"));
    }
    dynamics.covers(history)?;
    let n = dynamics.n_states;
    let pi = dynamics.pi;
    let seen = history.seen();
    let len = seen.len();

    let mut vectors = Vec::with_capacity(len);
    let mut normalizers = Vec::with_capacity(len);
    let mut alpha = [1.0, 0.0, 0.0];
    let first = emission_prob(State::Here, seen[0], pi);
    vectors.push(alpha);
    normalizers.push(first);

    // Product of normalizers, folded into the log only when it nears underflow.
    let mut log_acc = 0.0;
    let mut running = first;

    for t in 1..len {
        let p = dynamics.matrix(history.step(t)).raw();
        let c;
        if seen[t] {
            let mut into_here = 0.0;
            for s in 0..n {
                into_here += alpha[s] * p[s][0];
            }
            c = into_here * pi;
            alpha = [1.0, 0.0, 0.0];
        } else {
            let mut next = [0.0; 3];
            for (s, &a) in alpha.iter().enumerate().take(n) {
                if a == 0.0 {
                    continue;
                }
                for (to, nx) in next.iter_mut().enumerate().take(n) {
                    *nx += a * p[s][to];
                }
            }
            next[0] *= 1.0 - pi;
            c = next[..n].iter().sum::<f64>();
            if c > 0.0 {
                let inv = 1.0 / c;
                for v in next.iter_mut().take(n) {
                    *v *= inv;
                }
            }
            alpha = next;
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::numerical(format!(
                "individual `{}`: observation {} at occasion {t} has zero probability \
                 (pi = {pi}, filtered state before step = {:?})",
                history.id(),
                u8::from(seen[t]),
                &vectors[t - 1][..n]
            )));
        }
        vectors.push(alpha);
        normalizers.push(c);
        running *= c;
        if running < 1e-250 {
            log_acc += running.ln();
            running = 1.0;
        }
    }
    log_acc += running.ln();

    Ok(Forward {
        n_states: n,
        vectors,
        normalizers,
        log_likelihood: log_acc,
    })
}

/// Draws a latent path from its exact conditional distribution given the
/// observations, working backwards from the final occasion.
pub fn backward_sample<R: Rng + ?Sized>(
    forward: &Forward,
    history: &CaptureHistory,
    dynamics: &Dynamics,
    rng: &mut R,
) -> Result<StatePath> {
    let len = history.len();
    if forward.len() != len {
        return Err(Error::domain(format!(
            "forward pass has {} steps but history `{}` has {len}",
            forward.len(),
            history.id()
        )));
    }
    if forward.n_states != dynamics.n_states {
        return Err(Error::domain("forward pass and dynamics disagree on state count"));
    }
    let n = dynamics.n_states;
    let seen = history.seen();
    let mut states = vec![State::Here; len];

    let last = forward.vector(len - 1);
    states[len - 1] = State::from_index(categorical(last, rng).ok_or_else(|| {
        Error::numerical(format!("degenerate final filter for `{}`", history.id()))
    })?);

    for t in (0..len - 1).rev() {
        if seen[t] {
            continue;
        }
        let next = states[t + 1].index();
        let p = dynamics.matrix(history.step(t + 1)).raw();
        let alpha = &forward.vectors[t];
        let mut w = [0.0; 3];
        for s in 0..n {
            w[s] = alpha[s] * p[s][next];
        }
        let s = categorical(&w[..n], rng).ok_or_else(|| {
            Error::numerical(format!(
                "individual `{}`: no state at occasion {t} can reach {:?}",
                history.id(),
                states[t + 1]
            ))
        })?;
        states[t] = State::from_index(s);
    }
    Ok(StatePath::from_unchecked(states))
}
