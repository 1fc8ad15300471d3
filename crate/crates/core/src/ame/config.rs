use crate::error::{Error, Result};
use crate::lfm::FactorScale;
use crate::srm::{CovAbPrior, VariancePrior};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priors {
    /// Prior variance of every regression coefficient.
    pub beta_var: f64,
    pub cov_ab: CovAbPrior,
    /// Inverse-gamma prior on the dyadic variance (gaussian family only).
    pub sigma_eps2: VariancePrior,
    /// Prior variance of the factor entries.
    pub factor_var: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            beta_var: 100.0,
            cov_ab: CovAbPrior::default(),
            sigma_eps2: VariancePrior::default(),
            factor_var: 1.0,
        }
    }
}

/// Standard deviation of the truncated-normal random walk on `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoProposal {
    /// The current `sqrt(sigma_eps2)`, i.e. one under the probit link.
    Literal,
    Fixed(f64),
    /// Starts at the given value and is tuned toward a 30–40% acceptance rate during burn-in
    /// only, then frozen.
    Adaptive(f64),
}

/// How the regression coefficients are updated relative to the additive effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaStep {
    /// `beta` drawn with `(a, b)` integrated out, then `(a, b) | beta`.
    Collapsed,
    /// `beta | a, b`, then `(a, b) | beta`.
    Conditional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Number of multiplicative factor dimensions.
    pub k: usize,
    pub burn: usize,
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub priors: Priors,
    pub rho_proposal: RhoProposal,
    pub additive_effects: bool,
    pub dyadic_correlation: bool,
    pub factor_scale: FactorScale,
    pub beta_step: BetaStep,
    /// Keep every kept draw's full state (needed for posterior-predictive simulation).
    pub keep_states: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            k: 2,
            burn: 5000,
            iterations: 15000,
            thin: 10,
            seed: 1,
            chains: 1,
            priors: Priors::default(),
            rho_proposal: RhoProposal::Literal,
            additive_effects: true,
            dyadic_correlation: true,
            factor_scale: FactorScale::Absorbed,
            beta_step: BetaStep::Collapsed,
            keep_states: true,
        }
    }
}

impl FitConfig {
    /// Short-run settings: `burn` sweeps of burn-in followed by `kept * thin` sweeps.
    pub fn with_budget(mut self, burn: usize, kept: usize, thin: usize) -> Self {
        self.burn = burn;
        self.thin = thin;
        self.iterations = burn + kept * thin;
        self
    }

    /// Number of kept draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        (self.iterations - self.burn) / self.thin
    }

    pub fn is_kept(&self, sweep: usize) -> bool {
        sweep > self.burn && (sweep - self.burn) % self.thin == 0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.iterations <= self.burn {
            return bad(format!(
                "iterations ({}) must exceed burn ({})",
                self.iterations, self.burn
            ));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        let p = &self.priors;
        if !(p.beta_var > 0.0 && p.factor_var > 0.0) {
            return bad("prior variances must be positive".into());
        }
        if !(p.sigma_eps2.shape > 0.0 && p.sigma_eps2.rate > 0.0) {
            return bad("inverse-gamma prior parameters must be positive".into());
        }
        if !(p.cov_ab.dof > 1.0) || p.cov_ab.scale.cholesky().is_none() {
            return bad("inverse-Wishart prior needs dof > 1 and a positive-definite scale".into());
        }
        match self.rho_proposal {
            RhoProposal::Fixed(sd) | RhoProposal::Adaptive(sd) if !(sd > 0.0) => {
                bad(format!("rho proposal sd {sd} must be positive"))
            }
            _ => Ok(()),
        }
    }
}
