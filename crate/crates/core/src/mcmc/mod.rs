//! Blocked Gibbs sampler for the DP-HMM.

mod config;
mod engine;
mod proposal;
mod run;

pub use config::{Execution, InitialValues, McmcConfig, Priors};
pub use engine::{
    base_hyperparams_log_target, fixed_effects_log_target, mcmc_iteration,
    mh_update_base_hyperparams, mh_update_fixed_effects, ChainState, DpSummary, FixedEffects,
    IterationStep, NoTrace, Param, PosteriorSample, Trace, TraceEvent,
};
pub use proposal::{imh_step, AdaptiveKernel, FrozenFamily, Moments, MultivariateProposal};
pub use run::{combine_chains, run_chain, run_chain_traced, run_chains, ChainOutput, ChainProvenance, CombinedSamples};
