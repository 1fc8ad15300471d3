//! Logistic regression on the stacked observed dyads, fitted by Newton–Raphson (IRLS).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netdata::{DesignArray, Family, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub names: Vec<String>,
    pub coefficients: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub converged: bool,
    /// Raised when the likelihood has no finite maximiser (some fitted probabilities reach 0
    /// or 1, or coefficients exceed 1e3 in magnitude).
    pub separation: bool,
    pub iterations: usize,
    /// Score vector at the returned coefficients.
    pub score: DVector<f64>,
}

impl LogitFit {
    /// Fitted probabilities for every off-diagonal cell; diagonal `NaN`.
    pub fn predict(&self, x: &DesignArray) -> DMatrix<f64> {
        x.linear_predictor(self.coefficients.as_slice()).map(logistic)
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `(rows, outcomes)` of the observed off-diagonal dyads in row-major order.
pub fn stack_dyads(y: &Network, x: &DesignArray) -> (DMatrix<f64>, DVector<f64>) {
    let n = y.n();
    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| y.is_observed(i, j))
        .collect();
    let design = DMatrix::from_fn(cells.len(), x.p(), |r, k| {
        let (i, j) = cells[r];
        x.slab(k)[(i, j)]
    });
    let out = DVector::from_fn(cells.len(), |r, _| {
        let (i, j) = cells[r];
        y.get(i, j).unwrap()
    });
    (design, out)
}

pub fn fit_logit(y: &Network, x: &DesignArray) -> Result<LogitFit> {
    if y.family() != Family::Binary {
        return Err(Error::WrongFamily { expected: "binary" });
    }
    if y.n() != x.n() {
        return Err(Error::Dimension("design array does not match the network".into()));
    }
    let (design, out) = stack_dyads(y, x);
    let mut fit = fit_logit_rows(&design, &out)?;
    fit.names = x.names().to_vec();
    Ok(fit)
}

/// Maximum likelihood on an explicit design; stops when `max |score| < 1e-8` or after 100
/// Newton steps.
pub fn fit_logit_rows(design: &DMatrix<f64>, out: &DVector<f64>) -> Result<LogitFit> {
    let (m, p) = design.shape();
    if m == 0 {
        return Err(Error::InvalidArgument("no observed dyads".into()));
    }
    let mut beta = DVector::zeros(p);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    let mut score;
    let mut info;
    let mut step = f64::INFINITY;
    loop {
        let eta = design * &beta;
        let prob = eta.map(logistic);
        score = design.transpose() * (out - &prob);
        let w = prob.map(|q| q * (1.0 - q));
        info = DMatrix::from_fn(p, p, |k, l| {
            (0..m).map(|r| design[(r, k)] * w[r] * design[(r, l)]).sum()
        });
        let near_edge = prob.iter().any(|&q| !(q > 1e-8 && q < 1.0 - 1e-8));
        if score.amax() < 1e-8 && (!near_edge || step < 1e-6) {
            converged = true;
            break;
        }
        let saturated = prob.iter().any(|&q| !(q > 1e-10 && q < 1.0 - 1e-10));
        if iterations >= 100 || beta.amax() > 1e3 || (saturated && iterations >= 25) {
            separation |= beta.amax() > 1e3 || saturated;
            break;
        }
        let Some(chol) = info.clone().cholesky() else {
            separation = true;
            break;
        };
        let delta = chol.solve(&score);
        step = delta.amax();
        beta += delta;
        iterations += 1;
    }
    let std_errors = match info.clone().try_inverse() {
        Some(inv) if !separation => DVector::from_fn(p, |k, _| inv[(k, k)].max(0.0).sqrt()),
        _ => DVector::from_element(p, f64::NAN),
    };
    Ok(LogitFit {
        names: (0..p).map(|k| format!("x{k}")).collect(),
        coefficients: beta,
        std_errors,
        converged,
        separation,
        iterations,
        score,
    })
}
