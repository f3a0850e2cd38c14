use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::hmm::Dataset;

use super::config::McmcConfig;
use super::engine::{mcmc_iteration, ChainState, NoTrace, PosteriorSample, Trace};

/// Where a chain's draws came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainProvenance {
    pub chain: usize,
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub retained: usize,
    /// Final acceptance rate of each hyperparameter kernel.
    pub acceptance: Vec<(String, f64)>,
    /// Hash of the model-defining part of the configuration; chains with
    /// different signatures cannot be pooled.
    pub signature: String,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub samples: Vec<PosteriorSample>,
    pub provenance: ChainProvenance,
}

#[derive(Debug, Clone)]
pub struct CombinedSamples {
    pub samples: Vec<PosteriorSample>,
    pub provenance: Vec<ChainProvenance>,
}

fn config_signature(config: &McmcConfig) -> String {
    // Everything except the chain count and scheduling affects the target
    // or the sampler; seeds differ between chains by construction.
    let mut c = config.clone();
    c.chains = 1;
    c.execution = Default::default();
    serde_json::to_string(&c).expect("config serializes")
}

/// Runs chain `chain` to completion and keeps the post-burn-in, thinned
/// draws.
pub fn run_chain(data: &Dataset, config: &McmcConfig, chain: usize) -> Result<ChainOutput> {
    run_chain_traced(data, config, chain, &mut NoTrace)
}

pub fn run_chain_traced(
    data: &Dataset,
    config: &McmcConfig,
    chain: usize,
    trace: &mut dyn Trace,
) -> Result<ChainOutput> {
    let mut state = ChainState::new(data, config, chain)?;
    let mut samples = Vec::with_capacity(config.retained_per_chain());
    let report = (config.iterations / 10).max(1);
    for it in 1..=config.iterations {
        mcmc_iteration(&mut state, data, config, trace)?;
        if config.is_retained(it) {
            samples.push(state.snapshot(chain));
        }
        if it % report == 0 {
            tracing::info!(
                chain,
                iteration = it,
                k_pi = state.dp_pi.k(),
                k_hh = state.dp_hh.k(),
                k_aa = state.dp_aa.k(),
                log_lik = state.log_likelihood,
                "progress"
            );
        }
    }
    let provenance = ChainProvenance {
        chain,
        seed: config.seed,
        iterations: config.iterations,
        burn_in: config.burn_in,
        thin: config.thin,
        retained: samples.len(),
        acceptance: state
            .acceptance_rates()
            .into_iter()
            .map(|(k, r)| (k.to_string(), r))
            .collect(),
        signature: config_signature(config),
    };
    Ok(ChainOutput {
        samples,
        provenance,
    })
}

/// Runs `config.chains` independent chains, in parallel when configured.
pub fn run_chains(data: &Dataset, config: &McmcConfig) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    map_indices(config.chains, config.execution, |c| run_chain(data, config, c))
        .into_iter()
        .collect()
}

/// Concatenates chains in chain order.
pub fn combine_chains(chains: Vec<ChainOutput>) -> Result<CombinedSamples> {
    let Some(first) = chains.first() else {
        return Err(Error::domain("no chains to combine"));
    };
    let sig = first.provenance.signature.clone();
    let n = first.samples.first().map(|s| s.pi.len());
    for c in &chains {
        if c.provenance.signature != sig {
            return Err(Error::domain(format!(
                "chain {} was run with a different configuration",
                c.provenance.chain
            )));
        }
        if c.samples.first().map(|s| s.pi.len()) != n {
            return Err(Error::domain(format!(
                "chain {} has a different number of individuals",
                c.provenance.chain
            )));
        }
    }
    let mut samples = Vec::new();
    let mut provenance = Vec::new();
    for c in chains {
        samples.extend(c.samples);
        provenance.push(c.provenance);
    }
    Ok(CombinedSamples {
        samples,
        provenance,
    })
}
