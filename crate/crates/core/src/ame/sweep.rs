use nalgebra::{DMatrix, DVector};

use super::config::{BetaStep, FitConfig, RhoProposal};
use crate::dyad::{DyadPairs, DyadicNoise, Whitening};
use crate::error::{Error, Result};
use crate::lfm::{multiplicative_predictor, sample_factors_with, FactorPrior, LatentFactors};
use crate::linalg::{cholesky_jittered, solve_upper_transpose};
use crate::netdata::{DesignArray, Family, Network};
use crate::randkit::{draw_truncated_normal, SeededStream};
use crate::srm::{
    sample_cov_ab, sample_rho, sample_sigma_eps2, AbSystem, AdditiveEffects, SrmCovariance,
};

/// One snapshot of every unknown in the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub beta: DVector<f64>,
    pub effects: AdditiveEffects,
    pub cov: SrmCovariance,
    pub factors: LatentFactors,
    /// Latent propensities; diagonal `NaN`, every off-diagonal cell defined (missing
    /// outcomes are imputed).
    pub theta: DMatrix<f64>,
}

impl ModelState {
    /// `beta'X + a + b + u'Dv` without the dyadic error.
    pub fn mean_predictor(&self, x: &DesignArray) -> DMatrix<f64> {
        let mut mu = x.linear_predictor(self.beta.as_slice());
        mu += self.effects.fitted();
        if self.factors.k() > 0 {
            mu += multiplicative_predictor(&self.factors);
        }
        mu
    }
}

fn check_dims(y: &Network, x: &DesignArray) -> Result<()> {
    if y.n() != x.n() {
        return Err(Error::Dimension(format!(
            "network has {} nodes but the design array has {}",
            y.n(),
            x.n()
        )));
    }
    if y.n() < 3 {
        return Err(Error::TooFewNodes(y.n()));
    }
    Ok(())
}

/// Starting values: zero regression and additive effects, small random factors, identity
/// `Sigma_ab`, `rho = 0`, unit variance; `theta` at `+-0.5` (binary) or centred `y` (gaussian),
/// zero where `y` is missing.
pub fn init_state(
    y: &Network,
    x: &DesignArray,
    config: &FitConfig,
    stream: &mut SeededStream,
) -> Result<ModelState> {
    check_dims(y, x)?;
    let n = y.n();
    let centre = y.mean().unwrap_or(0.0);
    let theta = DMatrix::from_fn(n, n, |i, j| match y.get(i, j) {
        _ if i == j => f64::NAN,
        None => 0.0,
        Some(v) => match y.family() {
            Family::Binary if v > 0.5 => 0.5,
            Family::Binary => -0.5,
            Family::Gaussian => v - centre,
        },
    });
    Ok(ModelState {
        beta: DVector::zeros(x.p()),
        effects: AdditiveEffects::zeros(n),
        cov: SrmCovariance::default(),
        factors: LatentFactors::random(n, config.k, 0.1, stream),
        theta,
    })
}

/// Pairwise update of the latent propensities given their mean `mu`.
///
/// For each unordered pair, `theta_ij | theta_ji` and then `theta_ji | theta_ij` are drawn from
/// their normal conditionals, truncated by the observed binary outcome; gaussian cells are
/// set to the observation and only missing cells are drawn.
pub fn draw_theta(
    theta: &mut DMatrix<f64>,
    mu: &DMatrix<f64>,
    y: &Network,
    noise: DyadicNoise,
    stream: &mut SeededStream,
) -> Result<()> {
    let n = y.n();
    let rho = noise.rho;
    let sd = (noise.sigma_eps2 * (1.0 - rho * rho)).sqrt();
    let family = y.family();
    let cell = |theta: &mut DMatrix<f64>, i: usize, j: usize, stream: &mut SeededStream| {
        let other = theta[(j, i)];
        let mean = mu[(i, j)] + rho * (other - mu[(j, i)]);
        theta[(i, j)] = match (y.get(i, j), family) {
            (None, _) => mean + sd * stream.std_normal(),
            (Some(v), Family::Gaussian) => v,
            (Some(v), Family::Binary) if v > 0.5 => {
                draw_truncated_normal(mean, sd, 0.0, f64::INFINITY, stream)?
            }
            (Some(_), Family::Binary) => {
                draw_truncated_normal(mean, sd, f64::NEG_INFINITY, 0.0, stream)?
            }
        };
        Ok::<(), Error>(())
    };
    for i in 0..n {
        for j in (i + 1)..n {
            cell(theta, i, j, stream)?;
            cell(theta, j, i, stream)?;
        }
    }
    Ok(())
}

/// Redraws `state.theta` from its full conditional.
pub fn sample_latent_theta(
    state: &mut ModelState,
    y: &Network,
    x: &DesignArray,
    stream: &mut SeededStream,
) -> Result<()> {
    let mu = state.mean_predictor(x);
    draw_theta(&mut state.theta, &mu, y, state.cov.noise(), stream)
}

/// Per-fit quantities reused by every sweep.
pub struct Sweeper<'a> {
    y: &'a Network,
    x: &'a DesignArray,
    config: &'a FitConfig,
    /// `sum_{i != j} X_k,ij X_l,ij`
    gram_same: DMatrix<f64>,
    /// `sum_{i != j} X_k,ij X_l,ji`
    gram_cross: DMatrix<f64>,
    rho_sd: f64,
    pub rho_proposed: usize,
    pub rho_accepted: usize,
    window: (usize, usize),
}

fn off_diag_dot(a: &DMatrix<f64>, b: &DMatrix<f64>, transpose_b: bool) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * if transpose_b { b[(j, i)] } else { b[(i, j)] };
            }
        }
    }
    s
}

impl<'a> Sweeper<'a> {
    pub fn new(y: &'a Network, x: &'a DesignArray, config: &'a FitConfig) -> Result<Self> {
        check_dims(y, x)?;
        config.validate()?;
        let p = x.p();
        let mut gram_same = DMatrix::zeros(p, p);
        let mut gram_cross = DMatrix::zeros(p, p);
        for k in 0..p {
            for l in 0..=k {
                let s = off_diag_dot(x.slab(k), x.slab(l), false);
                let c = off_diag_dot(x.slab(k), x.slab(l), true);
                gram_same[(k, l)] = s;
                gram_same[(l, k)] = s;
                gram_cross[(k, l)] = c;
                gram_cross[(l, k)] = c;
            }
        }
        let rho_sd = match config.rho_proposal {
            RhoProposal::Literal => 1.0,
            RhoProposal::Fixed(sd) | RhoProposal::Adaptive(sd) => sd,
        };
        Ok(Sweeper {
            y,
            x,
            config,
            gram_same,
            gram_cross,
            rho_sd,
            rho_proposed: 0,
            rho_accepted: 0,
            window: (0, 0),
        })
    }

    pub fn rho_proposal_sd(&self) -> f64 {
        self.rho_sd
    }

    /// `(X~'X~, X~'t~)` of the decorrelated regression of `target` on the design slabs.
    fn regression_system(&self, target: &DMatrix<f64>, c1: f64, c2: f64) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.x.p();
        let gram = &self.gram_same * c1 + &self.gram_cross * c2;
        let rhs = DVector::from_fn(p, |k, _| {
            let slab = self.x.slab(k);
            c1 * off_diag_dot(slab, target, false) + c2 * off_diag_dot(slab, target, true)
        });
        (gram, rhs)
    }

    fn draw_normal(
        precision: DMatrix<f64>,
        linear: &DVector<f64>,
        stream: &mut SeededStream,
    ) -> Result<DVector<f64>> {
        let chol = cholesky_jittered(&precision)?;
        let mean = chol.solve(linear);
        let z = DVector::from_fn(linear.len(), |_, _| stream.std_normal());
        Ok(mean + solve_upper_transpose(&chol, &z))
    }

    /// One full sweep: `theta`, `beta`, `(a, b)`, `Sigma_ab`, `rho`, `sigma_eps2`, factors.
    pub fn sweep(&mut self, s: &mut ModelState, sweep_index: usize, stream: &mut SeededStream) -> Result<()> {
        let n = self.y.n();
        let cfg = self.config;
        let p = self.x.p();

        // theta
        sample_latent_theta(s, self.y, self.x, stream)?;

        // beta and (a, b)
        let mm = if s.factors.k() > 0 {
            multiplicative_predictor(&s.factors)
        } else {
            DMatrix::zeros(n, n)
        };
        let target = &s.theta - &mm;
        let whitening = Whitening::complete(n, s.cov.noise());
        let (td, to) = whitening.pair_coefficients();
        let (c1, c2) = (td * td + to * to, 2.0 * td * to);
        let prior_prec = DMatrix::from_diagonal_element(p, p, 1.0 / cfg.priors.beta_var);
        if cfg.additive_effects {
            let sys = AbSystem::new(&whitening, &s.cov.sigma_ab_precision()?)?;
            let hx: Vec<DVector<f64>> = (0..p)
                .map(|k| sys.project(&whitening, self.x.slab(k)))
                .collect();
            let ht = sys.project(&whitening, &target);
            s.beta = match cfg.beta_step {
                BetaStep::Collapsed => {
                    let (gram, rhs) = self.regression_system(&target, c1, c2);
                    let solved: Vec<DVector<f64>> = hx.iter().map(|h| sys.solve(h)).collect();
                    let q = DMatrix::from_fn(p, p, |k, l| hx[k].dot(&solved[l]));
                    let q = 0.5 * (&q + q.transpose());
                    let adj = DVector::from_fn(p, |k, _| solved[k].dot(&ht));
                    Self::draw_normal(gram - q + prior_prec, &(rhs - adj), stream)?
                }
                BetaStep::Conditional => {
                    let t2 = &target - s.effects.fitted();
                    let (gram, rhs) = self.regression_system(&t2, c1, c2);
                    Self::draw_normal(gram + prior_prec, &rhs, stream)?
                }
            };
            let mut rhs = ht;
            for (k, h) in hx.iter().enumerate() {
                rhs.axpy(-s.beta[k], h, 1.0);
            }
            s.effects = AdditiveEffects::from_interleaved(&sys.draw(&rhs, stream));
            let sab = sample_cov_ab(&s.effects, &cfg.priors.cov_ab, stream)?;
            s.cov.set_sigma_ab(&sab);
        } else {
            let (gram, rhs) = self.regression_system(&target, c1, c2);
            s.beta = Self::draw_normal(gram + prior_prec, &rhs, stream)?;
        }

        // rho and sigma_eps2 from the dyadic residuals
        let xb = self.x.linear_predictor(s.beta.as_slice());
        let additive = s.effects.fitted();
        let base = &xb + &additive;
        if cfg.dyadic_correlation || self.y.family() == Family::Gaussian {
            let pairs = DyadPairs::from_residual(&(&s.theta - &base - &mm));
            if cfg.dyadic_correlation {
                let sd = match cfg.rho_proposal {
                    RhoProposal::Literal => s.cov.sigma_eps2.sqrt(),
                    _ => self.rho_sd,
                };
                let (rho, acc) = sample_rho(&pairs, s.cov.rho, s.cov.sigma_eps2, sd, stream)?;
                s.cov.rho = rho;
                self.rho_proposed += 1;
                self.rho_accepted += acc as usize;
                self.adapt(sweep_index, acc);
            }
            if self.y.family() == Family::Gaussian {
                s.cov.sigma_eps2 = sample_sigma_eps2(
                    &pairs,
                    s.cov.rho,
                    &cfg.priors.sigma_eps2,
                    Family::Gaussian,
                    stream,
                )?;
            }
        }

        // factor columns
        if s.factors.k() > 0 {
            let residual = &s.theta - &base;
            let prior = FactorPrior {
                prior_var: cfg.priors.factor_var,
                scale: cfg.factor_scale,
            };
            let w = Whitening::complete(n, s.cov.noise());
            s.factors = sample_factors_with(&residual, &s.factors, &w, &prior, stream)?;
        }
        Ok(())
    }

    fn adapt(&mut self, sweep_index: usize, accepted: bool) {
        if !matches!(self.config.rho_proposal, RhoProposal::Adaptive(_)) || sweep_index > self.config.burn {
            return;
        }
        self.window.0 += 1;
        self.window.1 += accepted as usize;
        if self.window.0 == 50 {
            let rate = self.window.1 as f64 / 50.0;
            if rate < 0.3 {
                self.rho_sd *= 0.7;
            } else if rate > 0.4 {
                self.rho_sd = (self.rho_sd * 1.4).min(2.0);
            }
            self.window = (0, 0);
        }
    }
}

/// A single sweep from `state`; `state` itself is left unchanged.
pub fn gibbs_sweep(
    state: &ModelState,
    y: &Network,
    x: &DesignArray,
    config: &FitConfig,
    stream: &mut SeededStream,
) -> Result<ModelState> {
    let mut sweeper = Sweeper::new(y, x, config)?;
    let mut next = state.clone();
    sweeper.sweep(&mut next, config.burn + 1, stream)?;
    Ok(next)
}
