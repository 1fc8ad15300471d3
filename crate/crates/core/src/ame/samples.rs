use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lfm::{multiplicative_predictor, LatentFactors};
use crate::lsm::distance_matrix;
use crate::netdata::{DesignArray, Family};
use crate::randkit::norm_cdf;
use crate::srm::{AdditiveEffects, SrmCovariance};
use crate::summary::{mean, quantile_sorted, sd};

/// Latent structure of one draw.
#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    None,
    Factors(LatentFactors),
    /// Latent-space positions, one row per node.
    Positions(DMatrix<f64>),
}

/// One kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub chain: usize,
    /// 1-based sweep index within the chain.
    pub sweep: usize,
    pub beta: DVector<f64>,
    pub cov: SrmCovariance,
    pub effects: AdditiveEffects,
    /// `Latent::None` when states are not kept.
    pub latent: Latent,
}

impl Draw {
    /// `beta'X + a + b` plus the latent term; `None` when the latent state was not kept but
    /// the model has one.
    pub fn mean_predictor(&self, x: &DesignArray) -> DMatrix<f64> {
        let mut mu = x.linear_predictor(self.beta.as_slice());
        mu += self.effects.fitted();
        match &self.latent {
            Latent::None => {}
            Latent::Factors(f) => mu += multiplicative_predictor(f),
            Latent::Positions(z) => mu -= distance_matrix(z),
        }
        mu
    }
}

/// Proposal and acceptance counts of one Metropolis step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acceptance {
    pub name: String,
    pub proposed: usize,
    pub accepted: usize,
}

impl Acceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Kept draws plus running means of the cell-level quantities.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub family: Family,
    pub labels: Vec<String>,
    pub beta_names: Vec<String>,
    pub draws: Vec<Draw>,
    pub acceptance: Vec<Acceptance>,
    /// Sweeps run across all chains, burn-in included.
    pub sweeps: usize,
    /// Whether the model has a latent term (`Latent::None` in draws then means it was dropped).
    pub has_latent: bool,
    prob_sum: DMatrix<f64>,
    mu_sum: DMatrix<f64>,
    theta_sum: DMatrix<f64>,
    mult_sum: DMatrix<f64>,
    a_sum: DVector<f64>,
    b_sum: DVector<f64>,
}

impl PosteriorSamples {
    pub fn new(family: Family, labels: Vec<String>, beta_names: Vec<String>) -> Self {
        let n = labels.len();
        PosteriorSamples {
            family,
            labels,
            beta_names,
            draws: Vec::new(),
            acceptance: Vec::new(),
            sweeps: 0,
            has_latent: false,
            prob_sum: DMatrix::zeros(n, n),
            mu_sum: DMatrix::zeros(n, n),
            theta_sum: DMatrix::zeros(n, n),
            mult_sum: DMatrix::zeros(n, n),
            a_sum: DVector::zeros(n),
            b_sum: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn kept(&self) -> usize {
        self.draws.len()
    }

    /// Adds one kept draw with its mean predictor `mu`, latent `theta` (or `None`, counted as
    /// `mu`) and latent-term matrix (or `None`, counted as zero).
    pub fn record(
        &mut self,
        draw: Draw,
        mu: &DMatrix<f64>,
        theta: Option<&DMatrix<f64>>,
        latent_term: Option<&DMatrix<f64>>,
    ) {
        let n = self.n();
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    continue;
                }
                let m = mu[(i, j)];
                self.mu_sum[(i, j)] += m;
                self.prob_sum[(i, j)] += norm_cdf(m);
                self.theta_sum[(i, j)] += theta.map_or(m, |t| t[(i, j)]);
                if let Some(l) = latent_term {
                    self.mult_sum[(i, j)] += l[(i, j)];
                }
            }
        }
        self.a_sum += &draw.effects.a;
        self.b_sum += &draw.effects.b;
        self.draws.push(draw);
    }

    /// Concatenates chains in the given order.
    pub fn merge(parts: Vec<PosteriorSamples>) -> Result<PosteriorSamples> {
        let mut it = parts.into_iter();
        let mut out = it
            .next()
            .ok_or_else(|| Error::InvalidArgument("no chains to merge".into()))?;
        for p in it {
            if p.labels != out.labels || p.beta_names != out.beta_names {
                return Err(Error::Dimension("chains disagree on labels or coefficients".into()));
            }
            out.prob_sum += p.prob_sum;
            out.mu_sum += p.mu_sum;
            out.theta_sum += p.theta_sum;
            out.mult_sum += p.mult_sum;
            out.a_sum += p.a_sum;
            out.b_sum += p.b_sum;
            out.sweeps += p.sweeps;
            out.draws.extend(p.draws);
            for acc in p.acceptance {
                match out.acceptance.iter_mut().find(|a| a.name == acc.name) {
                    Some(a) => {
                        a.proposed += acc.proposed;
                        a.accepted += acc.accepted;
                    }
                    None => out.acceptance.push(acc),
                }
            }
        }
        Ok(out)
    }

    fn averaged(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.draws.is_empty() {
            return Err(Error::InvalidArgument("no kept draws".into()));
        }
        let k = self.draws.len() as f64;
        let n = self.n();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                f64::NAN
            } else {
                m[(i, j)] / k
            }
        }))
    }

    /// Posterior mean of `Phi(mu_ij)`; binary family only.
    pub fn predict_proba(&self) -> Result<DMatrix<f64>> {
        if self.family != Family::Binary {
            return Err(Error::WrongFamily { expected: "binary" });
        }
        self.averaged(&self.prob_sum)
    }

    /// Posterior mean of the latent propensities `theta` (the fitted values of a gaussian model).
    pub fn predict_mean(&self) -> Result<DMatrix<f64>> {
        self.averaged(&self.theta_sum)
    }

    /// Posterior mean of the error-free predictor `mu`.
    pub fn mean_predictor(&self) -> Result<DMatrix<f64>> {
        self.averaged(&self.mu_sum)
    }

    /// Posterior mean of the latent term (factor product, or minus the latent distance).
    pub fn latent_term_mean(&self) -> Result<DMatrix<f64>> {
        self.averaged(&self.mult_sum)
    }

    pub fn effects_mean(&self) -> Result<AdditiveEffects> {
        if self.draws.is_empty() {
            return Err(Error::InvalidArgument("no kept draws".into()));
        }
        let k = self.draws.len() as f64;
        Ok(AdditiveEffects {
            a: &self.a_sum / k,
            b: &self.b_sum / k,
        })
    }

    /// Names of the scalar parameters in [`Self::scalar_row`] order.
    pub fn scalar_names(&self) -> Vec<String> {
        let mut names = self.beta_names.clone();
        for s in ["rho", "sigma_a2", "sigma_b2", "sigma_ab", "sigma_eps2"] {
            names.push(s.to_string());
        }
        names
    }

    pub fn scalar_row(draw: &Draw) -> Vec<f64> {
        let mut row: Vec<f64> = draw.beta.iter().copied().collect();
        let c = &draw.cov;
        row.extend([c.rho, c.sigma_a2, c.sigma_b2, c.sigma_ab, c.sigma_eps2]);
        row
    }

    /// Column `index` of the scalar table, over all draws (or one chain).
    pub fn trace(&self, index: usize, chain: Option<usize>) -> Vec<f64> {
        self.draws
            .iter()
            .filter(|d| chain.is_none_or(|c| d.chain == c))
            .map(|d| Self::scalar_row(d)[index])
            .collect()
    }

    pub fn chains(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.draws.iter().map(|d| d.chain).collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

/// Mean, sd and 95% equal-tailed interval of every scalar parameter. Quantiles interpolate
/// linearly between order statistics: with sorted draws `x_1..x_m`, the `p` quantile is
/// `x_h + (h - floor(h)) (x_{h+1} - x_h)` at `h = 1 + (m - 1) p`.
pub fn posterior_summary(samples: &PosteriorSamples) -> Result<Vec<SummaryRow>> {
    if samples.kept() < 2 {
        return Err(Error::InvalidArgument(format!(
            "posterior summary needs at least 2 draws, have {}",
            samples.kept()
        )));
    }
    Ok(samples
        .scalar_names()
        .into_iter()
        .enumerate()
        .map(|(idx, name)| {
            let mut v = samples.trace(idx, None);
            let (m, s) = (mean(&v), sd(&v));
            v.sort_by(f64::total_cmp);
            SummaryRow {
                name,
                mean: m,
                sd: s,
                q025: quantile_sorted(&v, 0.025),
                q975: quantile_sorted(&v, 0.975),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub chain: usize,
    pub name: String,
    /// Means over the first, middle and last third of the kept draws.
    pub third_means: [f64; 3],
    /// Difference of the first-10% and last-50% means over its batch-means standard error.
    pub geweke_z: f64,
}

fn batch_mean_variance(x: &[f64]) -> f64 {
    let m = x.len();
    let size = ((m as f64).sqrt().floor() as usize).max(1);
    let count = m / size;
    if count < 2 {
        let s = sd(x);
        return if s.is_nan() { 0.0 } else { s * s / m as f64 };
    }
    let means: Vec<f64> = (0..count)
        .map(|b| mean(&x[b * size..(b + 1) * size]))
        .collect();
    let s = sd(&means);
    s * s / count as f64
}

/// Geweke z-score comparing the first 10% and last 50% of a trace.
pub fn geweke_z(trace: &[f64]) -> f64 {
    let m = trace.len();
    let first = &trace[..(m / 10).max(1).min(m)];
    let last = &trace[m - m / 2..];
    if first.is_empty() || last.is_empty() {
        return f64::NAN;
    }
    let diff = mean(first) - mean(last);
    let var = batch_mean_variance(first) + batch_mean_variance(last);
    if diff == 0.0 {
        0.0
    } else if var > 0.0 {
        diff / var.sqrt()
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Thirds means and Geweke scores per chain and scalar parameter.
pub fn convergence_diagnostics(samples: &PosteriorSamples) -> Vec<DiagnosticRow> {
    let names = samples.scalar_names();
    let mut rows = Vec::new();
    for chain in samples.chains() {
        for (idx, name) in names.iter().enumerate() {
            let t = samples.trace(idx, Some(chain));
            let m = t.len();
            let third = |k: usize| mean(&t[k * m / 3..(k + 1) * m / 3]);
            rows.push(DiagnosticRow {
                chain,
                name: name.clone(),
                third_means: [third(0), third(1), third(2)],
                geweke_z: if m >= 10 { geweke_z(&t) } else { f64::NAN },
            });
        }
    }
    rows
}
