//! Gibbs sampler for the additive and multiplicative effects model
//!
//! `theta_ij = beta'X_ij + a_i + b_j + u_i'D v_j + e_ij`, with `(e_ij, e_ji)` bivariate normal
//! with correlation `rho`. Binary outcomes are `y_ij = 1(theta_ij > 0)` (probit link, unit
//! variance); gaussian outcomes observe `theta` directly.

mod config;
mod samples;
mod sweep;

use rayon::prelude::*;

pub use config::{BetaStep, FitConfig, Priors, RhoProposal};
pub use samples::{
    convergence_diagnostics, geweke_z, posterior_summary, Acceptance, DiagnosticRow, Draw,
    Latent, PosteriorSamples, SummaryRow,
};
pub use sweep::{draw_theta, gibbs_sweep, init_state, sample_latent_theta, ModelState, Sweeper};

use crate::error::{Error, Result};
use crate::lfm::multiplicative_predictor;
use crate::netdata::{DesignArray, Network};
use crate::randkit::SeededStream;

/// Runs `config.chains` chains (in parallel) and concatenates their kept draws by chain index.
pub fn fit(y: &Network, x: &DesignArray, config: &FitConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let parts: Vec<Result<PosteriorSamples>> = (0..config.chains)
        .into_par_iter()
        .map(|chain| fit_chain(y, x, config, chain))
        .collect();
    PosteriorSamples::merge(parts.into_iter().collect::<Result<Vec<_>>>()?)
}

/// A single chain seeded from `(config.seed, chain)`.
pub fn fit_chain(
    y: &Network,
    x: &DesignArray,
    config: &FitConfig,
    chain: usize,
) -> Result<PosteriorSamples> {
    let mut stream = SeededStream::derive(config.seed, chain as u64);
    let mut state = init_state(y, x, config, &mut stream)?;
    let mut sweeper = Sweeper::new(y, x, config)?;
    let mut samples =
        PosteriorSamples::new(y.family(), y.labels().to_vec(), x.names().to_vec());
    samples.has_latent = config.k > 0;
    for sweep in 1..=config.iterations {
        sweeper
            .sweep(&mut state, sweep, &mut stream)
            .map_err(|e| Error::Sweep {
                sweep,
                source: Box::new(e),
            })?;
        if config.is_kept(sweep) {
            record_state(&mut samples, &state, x, chain, sweep, config.keep_states);
        }
    }
    samples.sweeps = config.iterations;
    if config.dyadic_correlation {
        samples.acceptance.push(Acceptance {
            name: "rho".into(),
            proposed: sweeper.rho_proposed,
            accepted: sweeper.rho_accepted,
        });
    }
    Ok(samples)
}

fn record_state(
    samples: &mut PosteriorSamples,
    state: &ModelState,
    x: &DesignArray,
    chain: usize,
    sweep: usize,
    keep: bool,
) {
    let mut mu = x.linear_predictor(state.beta.as_slice());
    mu += state.effects.fitted();
    let mult = (state.factors.k() > 0).then(|| multiplicative_predictor(&state.factors));
    if let Some(m) = &mult {
        mu += m;
    }
    let draw = Draw {
        chain,
        sweep,
        beta: state.beta.clone(),
        cov: state.cov,
        effects: state.effects.clone(),
        latent: if keep && state.factors.k() > 0 {
            Latent::Factors(state.factors.clone())
        } else {
            Latent::None
        },
    };
    samples.record(draw, &mu, Some(&state.theta), mult.as_ref());
}
