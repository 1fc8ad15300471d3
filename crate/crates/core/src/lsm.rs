//! Latent space (distance) model: `eta_ij = beta'X_ij - |z_i - z_j| (+ a_i + b_j)`, fitted by
//! probit augmentation with per-node random-walk Metropolis updates of the positions.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::ame::{draw_theta, Acceptance, Draw, Latent, PosteriorSamples};
use crate::dyad::{DyadicNoise, Whitening};
use crate::error::{Error, Result};
use crate::gof::geodesic_matrix;
use crate::linalg::{cholesky_jittered, solve_upper_transpose};
use crate::netdata::{DesignArray, Family, Network};
use crate::randkit::SeededStream;
use crate::srm::{
    sample_additive_effects_with, sample_cov_ab, AdditiveEffects, CovAbPrior, SrmCovariance,
};

/// Pairwise Euclidean distances between the rows of `z`.
pub fn distance_matrix(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (z.row(i) - z.row(j)).norm();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// `beta'X_ij - |z_i - z_j|`, plus `a_i + b_j` when effects are given; diagonal `NaN`.
pub fn lsm_predictor(
    z: &DMatrix<f64>,
    beta: &[f64],
    x: &DesignArray,
    effects: Option<&AdditiveEffects>,
) -> DMatrix<f64> {
    let mut eta = x.linear_predictor(beta) - distance_matrix(z);
    if let Some(e) = effects {
        eta += e.fitted();
    }
    eta
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmConfig {
    /// Dimension of the latent space.
    pub k: usize,
    /// Include sender and receiver random effects.
    pub sr_effects: bool,
    pub burn: usize,
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub beta_var: f64,
    pub z_prior_var: f64,
    pub proposal_sd: f64,
    pub cov_ab: CovAbPrior,
    pub keep_states: bool,
}

impl Default for LsmConfig {
    fn default() -> Self {
        LsmConfig {
            k: 2,
            sr_effects: false,
            burn: 5000,
            iterations: 15000,
            thin: 10,
            seed: 1,
            chains: 1,
            beta_var: 100.0,
            z_prior_var: 4.0,
            proposal_sd: 0.1,
            cov_ab: CovAbPrior::default(),
            keep_states: true,
        }
    }
}

impl LsmConfig {
    pub fn with_budget(mut self, burn: usize, kept: usize, thin: usize) -> Self {
        self.burn = burn;
        self.thin = thin;
        self.iterations = burn + kept * thin;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("latent space dimension must be at least 1".into()));
        }
        if self.iterations <= self.burn || self.thin == 0 || self.chains == 0 {
            return Err(Error::InvalidArgument(
                "need iterations > burn, thin >= 1 and chains >= 1".into(),
            ));
        }
        if !(self.beta_var > 0.0 && self.z_prior_var > 0.0 && self.proposal_sd > 0.0) {
            return Err(Error::InvalidArgument("LSM prior and proposal scales must be positive".into()));
        }
        Ok(())
    }
}

/// Classical scaling of the symmetrised geodesic distances (unreachable pairs at one past the
/// longest finite path).
fn initial_positions(y: &Network, k: usize) -> DMatrix<f64> {
    let n = y.n();
    let adj = y.cells().map(|v| if v.is_nan() { 0.0 } else { v });
    let sym = DMatrix::from_fn(n, n, |i, j| ((adj[(i, j)] > 0.0) || (adj[(j, i)] > 0.0)) as u8 as f64);
    let g = geodesic_matrix(&sym);
    let longest = g.iter().flatten().flatten().copied().max().unwrap_or(1);
    let d2 = DMatrix::from_fn(n, n, |i, j| {
        let d = g[i][j].unwrap_or(longest + 1) as f64;
        if i == j { 0.0 } else { d * d }
    });
    let centre = DMatrix::from_fn(n, n, |i, j| (i == j) as u8 as f64 - 1.0 / n as f64);
    let b = -0.5 * &centre * d2 * &centre;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut z = DMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let s = eig.eigenvalues[idx].max(0.0).sqrt();
        for i in 0..n {
            z[(i, c)] = eig.eigenvectors[(i, idx)] * s;
        }
    }
    z
}

/// Bayesian LSM fit; binary networks only.
pub fn fit_lsm(y: &Network, x: &DesignArray, config: &LsmConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    if y.family() != Family::Binary {
        return Err(Error::WrongFamily { expected: "binary" });
    }
    if y.n() != x.n() {
        return Err(Error::Dimension("design array does not match the network".into()));
    }
    if y.n() < 3 {
        return Err(Error::TooFewNodes(y.n()));
    }
    use rayon::prelude::*;
    let parts: Vec<Result<PosteriorSamples>> = (0..config.chains)
        .into_par_iter()
        .map(|c| fit_lsm_chain(y, x, config, c))
        .collect();
    PosteriorSamples::merge(parts.into_iter().collect::<Result<Vec<_>>>()?)
}

fn fit_lsm_chain(y: &Network, x: &DesignArray, cfg: &LsmConfig, chain: usize) -> Result<PosteriorSamples> {
    let n = y.n();
    let p = x.p();
    let mut stream = SeededStream::derive(cfg.seed ^ 0x6c73_6d00, chain as u64);
    let mut z = initial_positions(y, cfg.k);
    let mut beta = DVector::zeros(p);
    let mut effects = AdditiveEffects::zeros(n);
    let mut cov = SrmCovariance::default();
    let mut theta = DMatrix::from_fn(n, n, |i, j| match y.get(i, j) {
        _ if i == j => f64::NAN,
        None => 0.0,
        Some(v) if v > 0.5 => 0.5,
        Some(_) => -0.5,
    });
    let mut gram = DMatrix::from_diagonal_element(p, p, 1.0 / cfg.beta_var);
    for k in 0..p {
        for l in 0..p {
            gram[(k, l)] += off_diag_sum(n, |i, j| x.slab(k)[(i, j)] * x.slab(l)[(i, j)]);
        }
    }
    let beta_chol = cholesky_jittered(&gram)?;
    let whitening = Whitening::complete(n, DyadicNoise::independent());
    let mut samples = PosteriorSamples::new(Family::Binary, y.labels().to_vec(), x.names().to_vec());
    samples.has_latent = true;
    let (mut proposed, mut accepted) = (0usize, 0usize);

    for sweep in 1..=cfg.iterations {
        let wrap = |e: Error| Error::Sweep {
            sweep,
            source: Box::new(e),
        };
        let dist = distance_matrix(&z);
        let xb = x.linear_predictor(beta.as_slice());
        let eta = &xb - &dist + effects.fitted();
        draw_theta(&mut theta, &eta, y, DyadicNoise::independent(), &mut stream).map_err(wrap)?;

        // beta | theta, z, a, b
        let target = &theta + &dist - effects.fitted();
        let rhs = DVector::from_fn(p, |k, _| off_diag_sum(n, |i, j| x.slab(k)[(i, j)] * target[(i, j)]));
        let zs = DVector::from_fn(p, |_, _| stream.std_normal());
        beta = beta_chol.solve(&rhs) + solve_upper_transpose(&beta_chol, &zs);
        let xb = x.linear_predictor(beta.as_slice());

        if cfg.sr_effects {
            let resid = &theta - &xb + &dist;
            effects = sample_additive_effects_with(&resid, &cov, &whitening, &mut stream).map_err(wrap)?;
            let s = sample_cov_ab(&effects, &cfg.cov_ab, &mut stream).map_err(wrap)?;
            cov.set_sigma_ab(&s);
        }

        // positions, one node at a time
        let base = &xb + effects.fitted();
        let resid = &theta - &base;
        for i in 0..n {
            let current = z.row(i).into_owned();
            let prop = DVector::from_fn(cfg.k, |c, _| current[c] + cfg.proposal_sd * stream.std_normal()).transpose();
            let log_target = |zi: &nalgebra::RowDVector<f64>| {
                let mut s = -zi.norm_squared() / (2.0 * cfg.z_prior_var);
                for j in 0..n {
                    if j != i {
                        let d = (zi - z.row(j)).norm();
                        let r1 = resid[(i, j)] + d;
                        let r2 = resid[(j, i)] + d;
                        s -= 0.5 * (r1 * r1 + r2 * r2);
                    }
                }
                s
            };
            let ratio = log_target(&prop) - log_target(&current);
            proposed += 1;
            if stream.uniform_open().ln() < ratio {
                z.set_row(i, &prop);
                accepted += 1;
            }
        }

        if sweep > cfg.burn && (sweep - cfg.burn) % cfg.thin == 0 {
            let dist = distance_matrix(&z);
            let eta = &base - &dist;
            let neg = -dist;
            let draw = Draw {
                chain,
                sweep,
                beta: beta.clone(),
                cov,
                effects: effects.clone(),
                latent: if cfg.keep_states {
                    Latent::Positions(z.clone())
                } else {
                    Latent::None
                },
            };
            samples.record(draw, &eta, Some(&theta), Some(&neg));
        }
    }
    samples.sweeps = cfg.iterations;
    samples.acceptance.push(Acceptance {
        name: "z".into(),
        proposed,
        accepted,
    });
    Ok(samples)
}

fn off_diag_sum(n: usize, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += f(i, j);
            }
        }
    }
    s
}
