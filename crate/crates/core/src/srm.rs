//! Full conditionals for the additive (social relations) part of the model: sender and
//! receiver effects, their covariance, the within-dyad correlation and the dyadic variance.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix2, Vector2};

use crate::dyad::{DyadPairs, DyadicNoise, Whitening};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, min_eigen_2x2, solve_upper_transpose};
use crate::netdata::Family;
use crate::randkit::{
    draw_inverse_gamma, draw_inverse_wishart, draw_truncated_normal, normal_mass, SeededStream,
};

/// Sender (`a`) and receiver (`b`) effects.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveEffects {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
}

impl AdditiveEffects {
    pub fn zeros(n: usize) -> Self {
        AdditiveEffects {
            a: DVector::zeros(n),
            b: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `a_i + b_j` off the diagonal, `NaN` on it.
    pub fn fitted(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                f64::NAN
            } else {
                self.a[i] + self.b[j]
            }
        })
    }

    pub(crate) fn from_interleaved(x: &DVector<f64>) -> Self {
        let n = x.len() / 2;
        AdditiveEffects {
            a: DVector::from_fn(n, |i, _| x[2 * i]),
            b: DVector::from_fn(n, |i, _| x[2 * i + 1]),
        }
    }
}

/// Variance components of the additive part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrmCovariance {
    pub sigma_a2: f64,
    pub sigma_b2: f64,
    pub sigma_ab: f64,
    pub rho: f64,
    pub sigma_eps2: f64,
}

impl Default for SrmCovariance {
    fn default() -> Self {
        SrmCovariance {
            sigma_a2: 1.0,
            sigma_b2: 1.0,
            sigma_ab: 0.0,
            rho: 0.0,
            sigma_eps2: 1.0,
        }
    }
}

impl SrmCovariance {
    pub fn sigma_ab_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.sigma_a2, self.sigma_ab, self.sigma_ab, self.sigma_b2)
    }

    pub fn set_sigma_ab(&mut self, m: &Matrix2<f64>) {
        self.sigma_a2 = m[(0, 0)];
        self.sigma_b2 = m[(1, 1)];
        self.sigma_ab = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    }

    pub fn noise(&self) -> DyadicNoise {
        DyadicNoise {
            rho: self.rho,
            sigma_eps2: self.sigma_eps2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("rho = {} outside (-1, 1)", self.rho)));
        }
        if !(self.sigma_eps2 > 0.0) {
            return Err(Error::InvalidArgument("sigma_eps2 must be positive".into()));
        }
        if !(min_eigen_2x2(self.sigma_a2, self.sigma_ab, self.sigma_b2) > 0.0) {
            return Err(Error::NotPositiveDefinite { dim: 2 });
        }
        Ok(())
    }

    pub(crate) fn sigma_ab_precision(&self) -> Result<Matrix2<f64>> {
        self.validate()?;
        self.sigma_ab_matrix()
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite { dim: 2 })
    }
}

/// Precision of the `(a_1, b_1, ..., a_n, b_n)` full conditional.
///
/// With every off-diagonal cell observed the precision is `I (x) W + J (x) O` for 2x2 blocks
/// `W` and `O`, which decouples into the mean direction (block `W + n O`) and its orthogonal
/// complement (block `W`). Otherwise a dense `2n x 2n` factorisation is used.
pub struct AbSystem {
    n: usize,
    kind: AbKind,
}

enum AbKind {
    Structured {
        sum_coef: f64,
        cross_coef: f64,
        w_chol: Matrix2<f64>,
        g_chol: Matrix2<f64>,
    },
    Dense {
        chol: Cholesky<f64, Dyn>,
    },
}

fn chol2(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    m.cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite { dim: 2 })
}

fn solve_chol2(l: &Matrix2<f64>, r: &Vector2<f64>) -> Vector2<f64> {
    let y0 = r[0] / l[(0, 0)];
    let y1 = (r[1] - l[(1, 0)] * y0) / l[(1, 1)];
    let x1 = y1 / l[(1, 1)];
    let x0 = (y0 - l[(1, 0)] * x1) / l[(0, 0)];
    Vector2::new(x0, x1)
}

fn solve_lt2(l: &Matrix2<f64>, z: &Vector2<f64>) -> Vector2<f64> {
    let x1 = z[1] / l[(1, 1)];
    let x0 = (z[0] - l[(1, 0)] * x1) / l[(0, 0)];
    Vector2::new(x0, x1)
}

impl AbSystem {
    pub fn new(whitening: &Whitening, prior_precision: &Matrix2<f64>) -> Result<Self> {
        let n = whitening.n();
        if whitening.is_complete() {
            let (d, o) = whitening.pair_coefficients();
            let c1 = d * d + o * o;
            let c2 = 2.0 * d * o;
            let m = (n - 1) as f64;
            let diag = Matrix2::new(m * c1, m * c2, m * c2, m * c1) + prior_precision;
            let off = Matrix2::new(c2, c1, c1, c2);
            let w = diag - off;
            let g = w + off * n as f64;
            Ok(AbSystem {
                n,
                kind: AbKind::Structured {
                    sum_coef: c1,
                    cross_coef: c2,
                    w_chol: chol2(&w)?,
                    g_chol: chol2(&g)?,
                },
            })
        } else {
            let mut q = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for r in 0..2 {
                    for c in 0..2 {
                        q[(2 * i + r, 2 * i + c)] += prior_precision[(r, c)];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if let Some((ws, wo)) = whitening.weights(i, j) {
                        let idx = [2 * i, 2 * j + 1, 2 * j, 2 * i + 1];
                        let coef = [ws, ws, wo, wo];
                        for (p, &ip) in idx.iter().enumerate() {
                            for (r, &ir) in idx.iter().enumerate() {
                                q[(ip, ir)] += coef[p] * coef[r];
                            }
                        }
                    }
                }
            }
            Ok(AbSystem {
                n,
                kind: AbKind::Dense {
                    chol: cholesky_jittered(&q)?,
                },
            })
        }
    }

    /// `H' T` for the whitened version `T` of `m`, where `H` maps effects to cells.
    pub fn project(&self, whitening: &Whitening, m: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n;
        let mut l = DVector::zeros(2 * n);
        match &self.kind {
            AbKind::Structured {
                sum_coef,
                cross_coef,
                ..
            } => {
                let (mut rs, mut cs) = (vec![0.0; n], vec![0.0; n]);
                for j in 0..n {
                    for i in 0..n {
                        if i != j {
                            let v = m[(i, j)];
                            rs[i] += v;
                            cs[j] += v;
                        }
                    }
                }
                for i in 0..n {
                    l[2 * i] = sum_coef * rs[i] + cross_coef * cs[i];
                    l[2 * i + 1] = sum_coef * cs[i] + cross_coef * rs[i];
                }
            }
            AbKind::Dense { .. } => {
                for i in 0..n {
                    for j in 0..n {
                        if let Some((ws, wo)) = whitening.weights(i, j) {
                            let t = ws * m[(i, j)] + if wo != 0.0 { wo * m[(j, i)] } else { 0.0 };
                            l[2 * i] += ws * t;
                            l[2 * j + 1] += ws * t;
                            l[2 * j] += wo * t;
                            l[2 * i + 1] += wo * t;
                        }
                    }
                }
            }
        }
        l
    }

    /// `Q^{-1} rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            AbKind::Structured { w_chol, g_chol, .. } => {
                let n = self.n;
                let mean = node_mean(rhs, n);
                let xbar = solve_chol2(g_chol, &mean);
                let mut x = DVector::zeros(2 * n);
                for i in 0..n {
                    let r = Vector2::new(rhs[2 * i], rhs[2 * i + 1]) - mean;
                    let xi = solve_chol2(w_chol, &r) + xbar;
                    x[2 * i] = xi[0];
                    x[2 * i + 1] = xi[1];
                }
                x
            }
            AbKind::Dense { chol } => chol.solve(rhs),
        }
    }

    /// Draws from `N(Q^{-1} rhs, Q^{-1})`.
    pub fn draw(&self, rhs: &DVector<f64>, stream: &mut SeededStream) -> DVector<f64> {
        let n = self.n;
        let mean = self.solve(rhs);
        let z = DVector::from_fn(2 * n, |_, _| stream.std_normal());
        let noise = match &self.kind {
            AbKind::Structured { w_chol, g_chol, .. } => {
                let zbar = node_mean(&z, n);
                let common = solve_lt2(g_chol, &zbar);
                let mut out = DVector::zeros(2 * n);
                for i in 0..n {
                    let zi = Vector2::new(z[2 * i], z[2 * i + 1]) - zbar;
                    let e = solve_lt2(w_chol, &zi) + common;
                    out[2 * i] = e[0];
                    out[2 * i + 1] = e[1];
                }
                out
            }
            AbKind::Dense { chol } => solve_upper_transpose(chol, &z),
        };
        mean + noise
    }

    /// The precision matrix in dense form.
    pub fn precision(&self) -> DMatrix<f64> {
        let n = self.n;
        match &self.kind {
            AbKind::Structured { w_chol, g_chol, .. } => {
                let w = w_chol * w_chol.transpose();
                let g = g_chol * g_chol.transpose();
                let off = (g - w) / n as f64;
                DMatrix::from_fn(2 * n, 2 * n, |r, c| {
                    let (i, k) = (r / 2, c / 2);
                    let base = off[(r % 2, c % 2)];
                    if i == k {
                        base + w[(r % 2, c % 2)]
                    } else {
                        base
                    }
                })
            }
            AbKind::Dense { chol } => chol.l() * chol.l().transpose(),
        }
    }
}

fn node_mean(x: &DVector<f64>, n: usize) -> Vector2<f64> {
    let mut m = Vector2::zeros();
    for i in 0..n {
        m[0] += x[2 * i];
        m[1] += x[2 * i + 1];
    }
    m / n as f64
}

/// Mean and precision of the `(a, b)` full conditional given the residual
/// `theta - beta'X - UDV'`, in interleaved `(a_1, b_1, a_2, ...)` order.
pub fn additive_conditional(
    residual: &DMatrix<f64>,
    cov: &SrmCovariance,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let whitening = Whitening::for_pattern(residual, cov.noise());
    let sys = AbSystem::new(&whitening, &cov.sigma_ab_precision()?)?;
    let l = sys.project(&whitening, residual);
    Ok((sys.solve(&l), sys.precision()))
}

/// Joint normal draw of the sender and receiver effects.
///
/// Missing residual cells contribute nothing; the diagonal is ignored.
pub fn sample_additive_effects(
    residual: &DMatrix<f64>,
    cov: &SrmCovariance,
    stream: &mut SeededStream,
) -> Result<AdditiveEffects> {
    let whitening = Whitening::for_pattern(residual, cov.noise());
    sample_additive_effects_with(residual, cov, &whitening, stream)
}

pub(crate) fn sample_additive_effects_with(
    residual: &DMatrix<f64>,
    cov: &SrmCovariance,
    whitening: &Whitening,
    stream: &mut SeededStream,
) -> Result<AdditiveEffects> {
    let sys = AbSystem::new(whitening, &cov.sigma_ab_precision()?)?;
    let l = sys.project(whitening, residual);
    Ok(AdditiveEffects::from_interleaved(&sys.draw(&l, stream)))
}

/// Inverse-Wishart prior on the sender/receiver covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovAbPrior {
    pub scale: Matrix2<f64>,
    pub dof: f64,
}

impl Default for CovAbPrior {
    fn default() -> Self {
        CovAbPrior {
            scale: Matrix2::identity(),
            dof: 4.0,
        }
    }
}

/// Draws `Sigma_ab ~ IW(S0 + sum_i (a_i, b_i)(a_i, b_i)', nu0 + n)`.
pub fn sample_cov_ab(
    effects: &AdditiveEffects,
    prior: &CovAbPrior,
    stream: &mut SeededStream,
) -> Result<Matrix2<f64>> {
    let mut scale = prior.scale;
    for i in 0..effects.n() {
        let c = Vector2::new(effects.a[i], effects.b[i]);
        scale += c * c.transpose();
    }
    let scale = DMatrix::from_column_slice(2, 2, scale.as_slice());
    let draw = draw_inverse_wishart(&scale, prior.dof + effects.n() as f64, stream)?;
    Ok(Matrix2::new(draw[(0, 0)], draw[(0, 1)], draw[(1, 0)], draw[(1, 1)]))
}

/// Sufficient statistics of the complete pairs for the correlation likelihood.
#[derive(Debug, Clone, Copy)]
struct PairStats {
    count: f64,
    sum_sq: f64,
    cross: f64,
}

impl PairStats {
    fn new(pairs: &[(f64, f64)]) -> Self {
        let mut s = PairStats {
            count: pairs.len() as f64,
            sum_sq: 0.0,
            cross: 0.0,
        };
        for &(x, y) in pairs {
            s.sum_sq += x * x + y * y;
            s.cross += x * y;
        }
        s
    }

    fn log_lik(&self, rho: f64, s2: f64) -> f64 {
        let one_m = 1.0 - rho * rho;
        -0.5 * self.count * one_m.ln() - (self.sum_sq - 2.0 * rho * self.cross) / (2.0 * s2 * one_m)
    }
}

/// Log-likelihood of the complete pairs under `Sigma_eps = s2 [[1, rho], [rho, 1]]`, up to a
/// constant independent of `rho`.
pub fn rho_log_likelihood(pairs: &DyadPairs, rho: f64, sigma_eps2: f64) -> f64 {
    PairStats::new(&pairs.pairs).log_lik(rho, sigma_eps2)
}

/// One Metropolis-Hastings update of the within-dyad correlation.
///
/// The proposal is a normal centred at the current value truncated to (-1, 1); the
/// acceptance ratio carries the ratio of the two truncation masses. The prior is uniform.
pub fn sample_rho(
    pairs: &DyadPairs,
    rho_current: f64,
    sigma_eps2: f64,
    proposal_sd: f64,
    stream: &mut SeededStream,
) -> Result<(f64, bool)> {
    if !(rho_current.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!("rho = {rho_current} outside (-1, 1)")));
    }
    let proposal = draw_truncated_normal(rho_current, proposal_sd, -1.0, 1.0, stream)?;
    let stats = PairStats::new(&pairs.pairs);
    let mass = |m: f64| normal_mass((-1.0 - m) / proposal_sd, (1.0 - m) / proposal_sd);
    let log_ratio = stats.log_lik(proposal, sigma_eps2) - stats.log_lik(rho_current, sigma_eps2)
        + mass(rho_current).ln()
        - mass(proposal).ln();
    let accept = stream.uniform_open().ln() < log_ratio;
    Ok(if accept {
        (proposal, true)
    } else {
        (rho_current, false)
    })
}

/// Inverse-gamma prior on the dyadic variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for VariancePrior {
    fn default() -> Self {
        VariancePrior {
            shape: 1.0,
            rate: 1.0,
        }
    }
}

/// Draws the dyadic variance from its inverse-gamma full conditional.
///
/// Only defined for the gaussian family; under the probit link the scale is fixed at one.
pub fn sample_sigma_eps2(
    pairs: &DyadPairs,
    rho: f64,
    prior: &VariancePrior,
    family: Family,
    stream: &mut SeededStream,
) -> Result<f64> {
    if family != Family::Gaussian {
        return Err(Error::WrongFamily {
            expected: "gaussian",
        });
    }
    let one_m = 1.0 - rho * rho;
    let mut quad = 0.0;
    for &(x, y) in &pairs.pairs {
        quad += (x * x - 2.0 * rho * x * y + y * y) / one_m;
    }
    quad += pairs.singles.iter().map(|x| x * x).sum::<f64>();
    draw_inverse_gamma(
        prior.shape + pairs.cell_count() as f64 / 2.0,
        prior.rate + quad / 2.0,
        stream,
    )
}
