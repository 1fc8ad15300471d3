//! Pair decorrelation of dyadic residuals.
//!
//! Under `(e_ij, e_ji) ~ N(0, s2 [[1, rho], [rho, 1]])` the map
//! `t_ij = diag * e_ij + off * e_ji` with the symmetric inverse square root of the pair
//! covariance turns every complete pair into two independent standard normals. A cell whose
//! partner is missing is marginally `N(0, s2)` and is scaled by `1 / sqrt(s2)` alone.

use nalgebra::DMatrix;

use crate::linalg::pair_inverse_sqrt;

/// Within-dyad error parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicNoise {
    pub rho: f64,
    pub sigma_eps2: f64,
}

impl DyadicNoise {
    pub fn independent() -> Self {
        DyadicNoise {
            rho: 0.0,
            sigma_eps2: 1.0,
        }
    }
}

/// Row weights of the decorrelated system for one observation pattern.
#[derive(Debug, Clone)]
pub struct Whitening {
    n: usize,
    diag: f64,
    off: f64,
    inv_sd: f64,
    /// Row-major observedness, `None` when every off-diagonal cell is observed.
    observed: Option<Vec<bool>>,
}

impl Whitening {
    pub fn complete(n: usize, noise: DyadicNoise) -> Self {
        let (diag, off) = pair_inverse_sqrt(noise.rho, noise.sigma_eps2);
        Whitening {
            n,
            diag,
            off,
            inv_sd: 1.0 / noise.sigma_eps2.sqrt(),
            observed: None,
        }
    }

    /// Observation pattern taken from the non-`NaN` off-diagonal cells of `pattern`.
    pub fn for_pattern(pattern: &DMatrix<f64>, noise: DyadicNoise) -> Self {
        let n = pattern.nrows();
        let mut w = Whitening::complete(n, noise);
        let mut obs = vec![false; n * n];
        let mut all = true;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let o = !pattern[(i, j)].is_nan();
                    obs[i * n + j] = o;
                    all &= o;
                }
            }
        }
        if !all {
            w.observed = Some(obs);
        }
        w
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_complete(&self) -> bool {
        self.observed.is_none()
    }

    /// `(diag, off)` entries of the pair inverse square root.
    pub fn pair_coefficients(&self) -> (f64, f64) {
        (self.diag, self.off)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        i != j
            && self
                .observed
                .as_ref()
                .is_none_or(|o| o[i * self.n + j])
    }

    /// Weights `(on e_ij, on e_ji)` of the whitened row for cell `(i, j)`, if it is observed.
    #[inline]
    pub fn weights(&self, i: usize, j: usize) -> Option<(f64, f64)> {
        match &self.observed {
            None => (i != j).then_some((self.diag, self.off)),
            Some(o) => {
                if i == j || !o[i * self.n + j] {
                    None
                } else if o[j * self.n + i] {
                    Some((self.diag, self.off))
                } else {
                    Some((self.inv_sd, 0.0))
                }
            }
        }
    }

    pub fn transposed(&self) -> Whitening {
        let n = self.n;
        Whitening {
            observed: self.observed.as_ref().map(|o| {
                let mut t = vec![false; n * n];
                for i in 0..n {
                    for j in 0..n {
                        t[j * n + i] = o[i * n + j];
                    }
                }
                t
            }),
            ..self.clone()
        }
    }

    /// Decorrelated residuals; unobserved cells and the diagonal are `NaN`.
    pub fn whiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| match self.weights(i, j) {
            Some((ws, wo)) => ws * m[(i, j)] + if wo != 0.0 { wo * m[(j, i)] } else { 0.0 },
            None => f64::NAN,
        })
    }
}

/// Complete `(e_ij, e_ji)` pairs (one per unordered dyad) and cells whose partner is missing.
#[derive(Debug, Clone, Default)]
pub struct DyadPairs {
    pub pairs: Vec<(f64, f64)>,
    pub singles: Vec<f64>,
}

impl DyadPairs {
    pub fn from_residual(e: &DMatrix<f64>) -> Self {
        let n = e.nrows();
        let mut out = DyadPairs::default();
        for i in 0..n {
            for j in (i + 1)..n {
                let (x, y) = (e[(i, j)], e[(j, i)]);
                match (x.is_nan(), y.is_nan()) {
                    (false, false) => out.pairs.push((x, y)),
                    (false, true) => out.singles.push(x),
                    (true, false) => out.singles.push(y),
                    (true, true) => {}
                }
            }
        }
        out
    }

    pub fn cell_count(&self) -> usize {
        2 * self.pairs.len() + self.singles.len()
    }
}
