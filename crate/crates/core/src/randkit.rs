//! Seeded random-variate kernels used by the full conditionals.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::linalg::cholesky_jittered;

/// A per-unit random stream.
///
/// Backed by a ChaCha8 keystream keyed by `seed`; `counter` is the number of 32-bit words
/// consumed so far. Equal seeds yield bitwise-equal sequences on every platform.
#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    rng: ChaCha8Rng,
    counter: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        }
    }

    /// Stream for parallel unit `unit` (chain, fold, replicate) under `master`.
    pub fn derive(master: u64, unit: u64) -> Self {
        SeededStream::new(derive_seed(master, unit))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for SeededStream {
    fn next_u32(&mut self) -> u32 {
        self.counter += 1;
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.counter += 2;
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.counter += dst.len().div_ceil(4) as u64;
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a unit index into a master seed.
pub fn derive_seed(master: u64, unit: u64) -> u64 {
    splitmix64(master ^ splitmix64(unit.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`, accurate in the upper tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Inverse survival function: `x` with `norm_sf(x) = q`.
pub fn norm_isf(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

/// Draws from `N(mean, cov)` via a (jittered) Cholesky factor.
pub fn draw_mvnormal(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    stream: &mut SeededStream,
) -> Result<DVector<f64>> {
    let k = mean.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, mean has length {k}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cholesky_jittered(cov)?;
    let z = DVector::from_fn(k, |_, _| stream.std_normal());
    Ok(mean + chol.l() * z)
}

/// Standardised bound beyond which the tails switch to exponential rejection.
const TAIL_SWITCH: f64 = 5.0;

/// Draws `N(mean, sd^2)` truncated to `(lower, upper)`; bounds may be infinite.
pub fn draw_truncated_normal(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    stream: &mut SeededStream,
) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncated normal needs finite mean and sd > 0, got mean {mean}, sd {sd}"
        )));
    }
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!(
            "truncation interval ({lower}, {upper}) has no width"
        )));
    }
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = std_truncated(a, b, stream);
    let x = mean + sd * z;
    // rounding can land on a bound after rescaling
    Ok(if x <= lower || x >= upper {
        if lower.is_finite() && upper.is_finite() {
            0.5 * (lower + upper)
        } else if lower.is_finite() {
            lower + (lower.abs() * f64::EPSILON).max(f64::MIN_POSITIVE)
        } else {
            upper - (upper.abs() * f64::EPSILON).max(f64::MIN_POSITIVE)
        }
    } else {
        x
    })
}

/// Standard normal truncated to `(a, b)`.
fn std_truncated(a: f64, b: f64, stream: &mut SeededStream) -> f64 {
    if a >= TAIL_SWITCH {
        return tail_rejection(a, b, stream);
    }
    if b <= -TAIL_SWITCH {
        return -tail_rejection(-b, -a, stream);
    }
    loop {
        let u = stream.uniform_open();
        let z = if a >= 0.0 {
            let (sa, sb) = (norm_sf(a), norm_sf(b));
            norm_isf(sa - u * (sa - sb))
        } else {
            let (pa, pb) = (norm_cdf(a), norm_cdf(b));
            norm_quantile(pa + u * (pb - pa))
        };
        if z > a && z < b && z.is_finite() {
            return z;
        }
    }
}

/// Robert's rejection samplers for `(a, b)` with `a >= 5`.
fn tail_rejection(a: f64, b: f64, stream: &mut SeededStream) -> f64 {
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let uniform_better = b.is_finite()
        && (b - a)
            < 2.0 * std::f64::consts::E.sqrt() / (a + (a * a + 4.0).sqrt())
                * ((a * a - a * (a * a + 4.0).sqrt()) / 4.0).exp();
    loop {
        if uniform_better {
            let z = a + (b - a) * stream.uniform_open();
            if stream.uniform() <= ((a * a - z * z) / 2.0).exp() && z > a && z < b {
                return z;
            }
        } else {
            let z = a - stream.uniform_open().ln() / alpha;
            if z < b && z > a && stream.uniform() <= (-(z - alpha).powi(2) / 2.0).exp() {
                return z;
            }
        }
    }
}

/// Log density of `N(mean, sd^2)` truncated to `(lower, upper)` at `x`.
pub fn truncated_normal_ln_pdf(x: f64, mean: f64, sd: f64, lower: f64, upper: f64) -> f64 {
    if x <= lower || x >= upper {
        return f64::NEG_INFINITY;
    }
    let z = (x - mean) / sd;
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    -0.5 * z * z - (2.0 * std::f64::consts::PI).sqrt().ln() - sd.ln() - normal_mass(a, b).ln()
}

/// `Phi(b) - Phi(a)` computed on the side that keeps precision.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// CDF of the standard normal truncated to `(a, b)` at `x`.
pub fn truncated_std_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        0.0
    } else if x >= b {
        1.0
    } else {
        normal_mass(a, x) / normal_mass(a, b)
    }
}

/// Draws from the inverse-Wishart with the given scale and degrees of freedom.
///
/// A Wishart(scale^-1, dof) matrix is built by the Bartlett decomposition and inverted.
pub fn draw_inverse_wishart(
    scale: &DMatrix<f64>,
    dof: f64,
    stream: &mut SeededStream,
) -> Result<DMatrix<f64>> {
    let k = scale.nrows();
    if scale.ncols() != k {
        return Err(Error::Dimension("inverse-Wishart scale must be square".into()));
    }
    if !(dof > k as f64 - 1.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse-Wishart needs dof > {}, got {dof}",
            k as f64 - 1.0
        )));
    }
    if (scale - scale.transpose()).abs().max() > 1e-10 * scale.abs().max().max(1.0) {
        return Err(Error::InvalidArgument("inverse-Wishart scale is not symmetric".into()));
    }
    let scale_chol = nalgebra::Cholesky::new(scale.clone()).ok_or(Error::NotPositiveDefinite { dim: k })?;
    let inv_scale = scale_chol.inverse();
    let l = cholesky_jittered(&inv_scale)?.l();
    let mut bartlett = DMatrix::zeros(k, k);
    for i in 0..k {
        let chi = ChiSquared::new(dof - i as f64)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .sample(stream);
        bartlett[(i, i)] = chi.sqrt();
        for j in 0..i {
            bartlett[(i, j)] = stream.std_normal();
        }
    }
    let la = l * bartlett;
    let wishart = &la * la.transpose();
    let inv = cholesky_jittered(&wishart)?.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Draws from the inverse-gamma with density proportional to `x^(-shape-1) exp(-rate/x)`.
pub fn draw_inverse_gamma(shape: f64, rate: f64, stream: &mut SeededStream) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "inverse-gamma needs shape, rate > 0, got {shape}, {rate}"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sample(stream);
    Ok(1.0 / g.max(f64::MIN_POSITIVE))
}
