//! Metropolis-Hastings kernels with burn-in-only adaptation.
//!
//! During the adaptation window a kernel runs random-walk Metropolis whose
//! covariance tracks the running moments of its own draws. When the window
//! closes it freezes into an independence sampler centred on the moments
//! gathered in the second half of the window. Nothing changes afterwards.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Running mean and covariance (Welford).
#[derive(Debug, Clone)]
pub struct Moments {
    count: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Moments {
            count: 0,
            mean: DVector::zeros(dim),
            m2: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        let x = DVector::from_column_slice(x);
        self.count += 1;
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        if self.count < 2 {
            return DMatrix::zeros(self.mean.len(), self.mean.len());
        }
        &self.m2 / (self.count - 1) as f64
    }
}

/// Heavy- or light-tailed multivariate proposal with location `mean` and
/// scale matrix `L L^T`.
#[derive(Debug, Clone)]
pub struct MultivariateProposal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    chol_inv: DMatrix<f64>,
    /// Degrees of freedom; `None` for a Normal.
    df: Option<f64>,
}

impl MultivariateProposal {
    /// Fails when `scale` is not positive definite.
    pub fn new(mean: Vec<f64>, scale: DMatrix<f64>, df: Option<f64>) -> Option<Self> {
        let chol = scale.cholesky()?.l();
        let chol_inv = chol.clone().try_inverse()?;
        Some(MultivariateProposal {
            mean: DVector::from_vec(mean),
            chol,
            chol_inv,
            df,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| StandardNormal.sample(rng)));
        let mut step = &self.chol * z;
        if let Some(df) = self.df {
            let chi: f64 = ChiSquared::new(df).unwrap().sample(rng);
            step *= (df / chi).sqrt();
        }
        (&self.mean + step).iter().copied().collect()
    }

    /// Log density up to an additive constant.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        let z = &self.chol_inv * d;
        let q = z.norm_squared();
        match self.df {
            None => -0.5 * q,
            Some(df) => -0.5 * (df + self.dim() as f64) * (q / df).ln_1p(),
        }
    }

    /// Flattened location and scale, for tracing.
    pub fn signature(&self) -> Vec<f64> {
        self.mean.iter().chain(self.chol.iter()).copied().collect()
    }
}

/// One independence Metropolis-Hastings step. Returns whether the proposal
/// was accepted; `current` and `current_log_target` are updated in place.
pub fn imh_step<R, F>(
    current: &mut Vec<f64>,
    current_log_target: &mut f64,
    proposal: &MultivariateProposal,
    log_target: F,
    rng: &mut R,
) -> bool
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let cand = proposal.sample(rng);
    let cand_target = log_target(&cand);
    if !cand_target.is_finite() {
        return false;
    }
    let log_ratio = (cand_target - proposal.log_density(&cand))
        - (*current_log_target - proposal.log_density(current));
    if rng.random::<f64>().ln() < log_ratio {
        *current = cand;
        *current_log_target = cand_target;
        true
    } else {
        false
    }
}

/// Tail family used once the kernel freezes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrozenFamily {
    Normal { inflation: f64 },
    StudentT { df: f64 },
}

#[derive(Debug, Clone)]
enum Mode {
    Adapting,
    Frozen(MultivariateProposal),
    /// Window closed without enough draws, or never opened: fixed random walk.
    FixedWalk,
}

#[derive(Debug, Clone)]
pub struct AdaptiveKernel {
    initial_sd: Vec<f64>,
    family: FrozenFamily,
    all: Moments,
    late: Moments,
    mode: Mode,
    proposed: u64,
    accepted: u64,
}

impl AdaptiveKernel {
    pub fn new(initial_sd: Vec<f64>, family: FrozenFamily, adapting: bool) -> Self {
        let dim = initial_sd.len();
        AdaptiveKernel {
            initial_sd,
            family,
            all: Moments::new(dim),
            late: Moments::new(dim),
            mode: if adapting { Mode::Adapting } else { Mode::FixedWalk },
            proposed: 0,
            accepted: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.initial_sd.len()
    }

    pub fn is_frozen(&self) -> bool {
        !matches!(self.mode, Mode::Adapting)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn walk_proposal(&self) -> MultivariateProposal {
        let d = self.dim();
        let diag = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.initial_sd.iter().map(|s| s * s),
        ));
        let scale = if matches!(self.mode, Mode::Adapting) && self.all.count() > 2 * d + 10 {
            let jitter = DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                self.initial_sd.iter().map(|s| 1e-4 * s * s),
            ));
            (self.all.covariance() + jitter) * (2.38f64.powi(2) / d as f64)
        } else {
            diag.clone()
        };
        MultivariateProposal::new(vec![0.0; d], scale, None)
            .or_else(|| MultivariateProposal::new(vec![0.0; d], diag, None))
            .expect("diagonal walk scale is positive definite")
    }

    /// Advances `current` by one MH step targeting `log_target`.
    pub fn step<R, F>(&mut self, current: &mut Vec<f64>, log_target: F, rng: &mut R)
    where
        R: Rng + ?Sized,
        F: Fn(&[f64]) -> f64,
    {
        let mut here = log_target(current);
        self.proposed += 1;
        let accepted = match &self.mode {
            Mode::Frozen(p) => imh_step(current, &mut here, p, &log_target, rng),
            _ => {
                let walk = self.walk_proposal();
                let step = walk.sample(rng);
                let cand: Vec<f64> = current.iter().zip(&step).map(|(x, s)| x + s).collect();
                let cand_target = log_target(&cand);
                if cand_target.is_finite() && rng.random::<f64>().ln() < cand_target - here {
                    *current = cand;
                    true
                } else {
                    false
                }
            }
        };
        self.accepted += u64::from(accepted);
    }

    /// Records a post-step draw while adapting. `late` marks the second half
    /// of the adaptation window.
    pub fn observe(&mut self, x: &[f64], late: bool) {
        if matches!(self.mode, Mode::Adapting) {
            self.all.push(x);
            if late {
                self.late.push(x);
            }
        }
    }

    /// Closes the adaptation window. Subsequent steps use a fixed proposal.
    pub fn freeze(&mut self) {
        if self.is_frozen() {
            return;
        }
        let d = self.dim();
        let source = if self.late.count() > 2 * d + 10 {
            &self.late
        } else {
            &self.all
        };
        if source.count() <= 2 * d + 10 {
            self.mode = Mode::FixedWalk;
            return;
        }
        let floor = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            self.initial_sd.iter().map(|s| 1e-4 * s * s),
        ));
        let cov = source.covariance() + floor;
        let mean: Vec<f64> = source.mean().iter().copied().collect();
        let proposal = match self.family {
            FrozenFamily::Normal { inflation } => {
                MultivariateProposal::new(mean, cov * inflation, None)
            }
            FrozenFamily::StudentT { df } => MultivariateProposal::new(mean, cov, Some(df)),
        };
        self.mode = match proposal {
            Some(p) => Mode::Frozen(p),
            None => Mode::FixedWalk,
        };
    }

    /// Parameters that define the current proposal; constant once frozen.
    pub fn signature(&self) -> Vec<f64> {
        match &self.mode {
            Mode::Frozen(p) => p.signature(),
            Mode::FixedWalk => self.initial_sd.clone(),
            Mode::Adapting => {
                let mut s = self.all.mean().iter().copied().collect::<Vec<_>>();
                s.push(self.all.count() as f64);
                s
            }
        }
    }
}
