//! Multiplicative (bilinear latent factor) effects `u_i' D v_j` for directed networks.
//!
//! Estimation works in the absorbed parameterisation by default: `D` is held at ones and the
//! receiver factors carry the scale. Only the product `U diag(D) V'` is identified, so every
//! summary downstream is computed from the product.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dyad::{DyadicNoise, Whitening};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, solve_upper_transpose};
use crate::randkit::SeededStream;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    /// `n x K` sender factors.
    pub u: DMatrix<f64>,
    /// `n x K` receiver factors.
    pub v: DMatrix<f64>,
    /// Diagonal scaling, length `K`.
    pub d: DVector<f64>,
}

impl LatentFactors {
    pub fn zeros(n: usize, k: usize) -> Self {
        LatentFactors {
            u: DMatrix::zeros(n, k),
            v: DMatrix::zeros(n, k),
            d: DVector::from_element(k, 1.0),
        }
    }

    /// Factors with iid `N(0, sd^2)` entries and unit scaling.
    pub fn random(n: usize, k: usize, sd: f64, stream: &mut SeededStream) -> Self {
        LatentFactors {
            u: DMatrix::from_fn(n, k, |_, _| sd * stream.std_normal()),
            v: DMatrix::from_fn(n, k, |_, _| sd * stream.std_normal()),
            d: DVector::from_element(k, 1.0),
        }
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    /// Balanced factors `U S^1/2`, `V S^1/2` of the leading `k` singular triplets of `m`,
    /// with the singular values reported in `d` (so `u_i' v_j` already includes them).
    pub fn from_product(m: &DMatrix<f64>, k: usize) -> Result<Self> {
        let n = m.nrows();
        if k > n {
            return Err(Error::InvalidArgument(format!("rank {k} exceeds {n} nodes")));
        }
        let clean = m.map(|v| if v.is_nan() { 0.0 } else { v });
        let svd = thin_svd(&clean)?;
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut out = LatentFactors::zeros(n, k);
        for (c, &idx) in order.iter().take(k).enumerate() {
            let s = svd.singular_values[idx];
            let root = s.sqrt();
            for i in 0..n {
                out.u[(i, c)] = u[(i, idx)] * root;
                out.v[(i, c)] = vt[(idx, i)] * root;
            }
            out.d[c] = s;
        }
        Ok(out)
    }
}

/// SVD with an explicit tolerance; the default settings mis-deflate rank-deficient input.
pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let scale = m.amax();
    if scale == 0.0 || !scale.is_finite() {
        return m
            .clone()
            .try_svd(true, true, 1e-14, 10_000)
            .ok_or_else(|| Error::InvalidArgument("SVD did not converge".into()));
    }
    let mut svd = (m / scale)
        .try_svd(true, true, 1e-14, 10_000)
        .ok_or_else(|| Error::InvalidArgument("SVD did not converge".into()))?;
    svd.singular_values *= scale;
    Ok(svd)
}

/// `M_ij = sum_k d_k u_ik v_jk`; the diagonal is filled but carries no meaning.
pub fn multiplicative_predictor(factors: &LatentFactors) -> DMatrix<f64> {
    let n = factors.n();
    let mut scaled = factors.u.clone();
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= factors.d[c];
    }
    if factors.k() == 0 {
        return DMatrix::zeros(n, n);
    }
    &scaled * factors.v.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorScale {
    /// `D` fixed at ones, receiver factors carry the scale.
    Absorbed,
    /// `D` sampled with an `N(0, n)` prior after each column pair.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorPrior {
    /// Prior variance of every entry of `U` and `V`.
    pub prior_var: f64,
    pub scale: FactorScale,
}

impl Default for FactorPrior {
    fn default() -> Self {
        FactorPrior {
            prior_var: 1.0,
            scale: FactorScale::Absorbed,
        }
    }
}

/// One pass over the factor columns: `U[,k]`, then `V[,k]`, then (explicit form) `D[k]`.
///
/// `residual` is `theta - beta'X - a - b`; missing cells are excluded.
pub fn sample_factors(
    residual: &DMatrix<f64>,
    factors: &LatentFactors,
    noise: DyadicNoise,
    prior: &FactorPrior,
    stream: &mut SeededStream,
) -> Result<LatentFactors> {
    let whitening = Whitening::for_pattern(residual, noise);
    sample_factors_with(residual, factors, &whitening, prior, stream)
}

pub(crate) fn sample_factors_with(
    residual: &DMatrix<f64>,
    factors: &LatentFactors,
    whitening: &Whitening,
    prior: &FactorPrior,
    stream: &mut SeededStream,
) -> Result<LatentFactors> {
    let mut f = factors.clone();
    if f.k() == 0 {
        return Ok(f);
    }
    let n = f.n();
    let transposed = whitening.transposed();
    let mut e = residual - multiplicative_predictor(&f);
    for k in 0..f.k() {
        // e currently excludes column k's contribution; add it back
        add_rank_one(&mut e, f.d[k], &f.u.column(k).into_owned(), &f.v.column(k).into_owned());
        let g = f.v.column(k) * f.d[k];
        let u = draw_side(&e, &g, whitening, prior.prior_var, stream)?;
        f.u.set_column(k, &u);
        let et = e.transpose();
        let h = f.u.column(k) * f.d[k];
        let v = draw_side(&et, &h, &transposed, prior.prior_var, stream)?;
        f.v.set_column(k, &v);
        if prior.scale == FactorScale::Explicit {
            f.d[k] = draw_scale(&e, &f.u.column(k).into_owned(), &f.v.column(k).into_owned(), whitening, n as f64, stream)?;
        }
        add_rank_one(&mut e, -f.d[k], &f.u.column(k).into_owned(), &f.v.column(k).into_owned());
    }
    Ok(f)
}

fn add_rank_one(e: &mut DMatrix<f64>, d: f64, u: &DVector<f64>, v: &DVector<f64>) {
    let n = e.nrows();
    for j in 0..n {
        let vj = d * v[j];
        for i in 0..n {
            e[(i, j)] += u[i] * vj;
        }
    }
}

/// Draws the sender column `x` in `E_ij ~ x_i g_j + noise`.
fn draw_side(
    e: &DMatrix<f64>,
    g: &DVector<f64>,
    whitening: &Whitening,
    prior_var: f64,
    stream: &mut SeededStream,
) -> Result<DVector<f64>> {
    let n = e.nrows();
    if whitening.is_complete() {
        if let Some(x) = draw_side_structured(e, g, whitening, prior_var, stream) {
            return Ok(x);
        }
    }
    let mut q = DMatrix::from_diagonal_element(n, n, 1.0 / prior_var);
    let mut l = DVector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if let Some((ws, wo)) = whitening.weights(i, j) {
                let t = ws * e[(i, j)] + if wo != 0.0 { wo * e[(j, i)] } else { 0.0 };
                let (xi, xj) = (ws * g[j], wo * g[i]);
                q[(i, i)] += xi * xi;
                q[(j, j)] += xj * xj;
                q[(i, j)] += xi * xj;
                q[(j, i)] += xi * xj;
                l[i] += xi * t;
                l[j] += xj * t;
            }
        }
    }
    let chol = cholesky_jittered(&q)?;
    let mean = chol.solve(&l);
    let z = DVector::from_fn(n, |_, _| stream.std_normal());
    Ok(mean + solve_upper_transpose(&chol, &z))
}

/// Complete-data path: the precision is `diag(d) + c g g'`, drawn in O(n).
///
/// Returns `None` (without consuming randomness) when the diagonal part is not positive.
fn draw_side_structured(
    e: &DMatrix<f64>,
    g: &DVector<f64>,
    whitening: &Whitening,
    prior_var: f64,
    stream: &mut SeededStream,
) -> Option<DVector<f64>> {
    let n = e.nrows();
    let (td, to) = whitening.pair_coefficients();
    let c1 = td * td + to * to;
    let c2 = 2.0 * td * to;
    let total: f64 = g.iter().map(|x| x * x).sum();
    let diag = DVector::from_fn(n, |i, _| {
        c1 * (total - g[i] * g[i]) - c2 * g[i] * g[i] + 1.0 / prior_var
    });
    if diag.iter().any(|&d| !(d > 0.0)) {
        return None;
    }
    let mut l: DVector<f64> = DVector::zeros(n);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                l[i] += (c1 * e[(i, j)] + c2 * e[(j, i)]) * g[j];
            }
        }
    }
    let w2: f64 = (0..n).map(|i| g[i] * g[i] / diag[i]).sum();
    let kappa = 1.0 + c2 * w2;
    if !(kappa > 0.0) {
        return None;
    }
    let dl: f64 = (0..n).map(|i| g[i] * l[i] / diag[i]).sum();
    let corr = c2 * dl / kappa;
    let mut x = DVector::from_fn(n, |i, _| (l[i] - g[i] * corr) / diag[i]);
    let z = DVector::from_fn(n, |_, _| stream.std_normal());
    let w = DVector::from_fn(n, |i, _| g[i] / diag[i].sqrt());
    let gamma = if w2 > 1e-300 {
        (kappa.sqrt() - 1.0) / w2
    } else {
        0.0
    };
    let wz = w.dot(&z);
    let shrink = gamma * wz / (1.0 + gamma * w2);
    for i in 0..n {
        x[i] += (z[i] - shrink * w[i]) / diag[i].sqrt();
    }
    Some(x)
}

/// Normal draw of `d` in `E_ij ~ d u_i v_j + noise` under an `N(0, prior_var)` prior.
fn draw_scale(
    e: &DMatrix<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    whitening: &Whitening,
    prior_var: f64,
    stream: &mut SeededStream,
) -> Result<f64> {
    let n = e.nrows();
    let (mut q, mut l) = (1.0 / prior_var, 0.0);
    for i in 0..n {
        for j in 0..n {
            if let Some((ws, wo)) = whitening.weights(i, j) {
                let t = ws * e[(i, j)] + wo * if wo != 0.0 { e[(j, i)] } else { 0.0 };
                let x = ws * u[i] * v[j] + wo * u[j] * v[i];
                q += x * x;
                l += x * t;
            }
        }
    }
    Ok(l / q + stream.std_normal() / q.sqrt())
}

/// Which dyads count as showing excess association.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcessThreshold {
    /// Quantile (in (0, 1)) of the off-diagonal multiplicative predictor values.
    Quantile(f64),
    Value(f64),
}

impl Default for ExcessThreshold {
    fn default() -> Self {
        ExcessThreshold::Quantile(0.9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub label: String,
    pub sender_angle: f64,
    pub sender_magnitude: f64,
    pub receiver_angle: f64,
    pub receiver_magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadExcess {
    pub sender: usize,
    pub receiver: usize,
    /// Multiplicative predictor value.
    pub score: f64,
    /// Regression plus additive fit for the same dyad.
    pub additive: f64,
    pub excess: bool,
}

/// Circle-plot geometry from the first two factor dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGeometry {
    pub nodes: Vec<NodeGeometry>,
    pub dyads: Vec<DyadExcess>,
    pub threshold: f64,
}

fn angle_of(x: f64, y: f64) -> f64 {
    let a = y.atan2(x);
    let a = if a < 0.0 { a + TAU } else { a };
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Angles and magnitudes of the sender/receiver factors plus flagged excess dyads.
pub fn export_factor_geometry(
    factors: &LatentFactors,
    labels: &[String],
    additive_fit: &DMatrix<f64>,
    threshold: ExcessThreshold,
) -> Result<FactorGeometry> {
    if factors.k() < 2 {
        return Err(Error::InvalidArgument(format!(
            "factor geometry needs K >= 2, got K = {}",
            factors.k()
        )));
    }
    let n = factors.n();
    if labels.len() != n || additive_fit.nrows() != n {
        return Err(Error::Dimension("labels or additive fit do not match the factors".into()));
    }
    let nodes = (0..n)
        .map(|i| {
            let (ux, uy) = (factors.u[(i, 0)], factors.u[(i, 1)]);
            let (vx, vy) = (factors.v[(i, 0)], factors.v[(i, 1)]);
            NodeGeometry {
                label: labels[i].clone(),
                sender_angle: angle_of(ux, uy),
                sender_magnitude: ux.hypot(uy),
                receiver_angle: angle_of(vx, vy),
                receiver_magnitude: vx.hypot(vy),
            }
        })
        .collect();
    let m = multiplicative_predictor(factors);
    let cut = match threshold {
        ExcessThreshold::Value(v) => v,
        ExcessThreshold::Quantile(q) => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidArgument(format!("quantile {q} outside (0, 1)")));
            }
            let mut vals: Vec<f64> = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)])
                .collect();
            vals.sort_by(f64::total_cmp);
            crate::summary::quantile_sorted(&vals, q)
        }
    };
    let mut dyads = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dyads.push(DyadExcess {
                    sender: i,
                    receiver: j,
                    score: m[(i, j)],
                    additive: additive_fit[(i, j)],
                    excess: m[(i, j)] > cut,
                });
            }
        }
    }
    Ok(FactorGeometry {
        nodes,
        dyads,
        threshold: cut,
    })
}

impl FactorGeometry {
    /// Long table `node,role,angle,magnitude`.
    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("node,role,angle,magnitude\n");
        for g in &self.nodes {
            let _ = writeln!(s, "{},sender,{},{}", g.label, g.sender_angle, g.sender_magnitude);
            let _ = writeln!(s, "{},receiver,{},{}", g.label, g.receiver_angle, g.receiver_magnitude);
        }
        s
    }

    /// Flagged dyads `sender,receiver,score,additive`.
    pub fn dyads_csv(&self) -> String {
        let mut s = String::from("sender,receiver,score,additive\n");
        for d in self.dyads.iter().filter(|d| d.excess) {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                self.nodes[d.sender].label, self.nodes[d.receiver].label, d.score, d.additive
            );
        }
        s
    }

    /// Circle plot: senders and receivers placed on the unit circle by angle, radius scaled
    /// by magnitude, dashed chords between the senders and receivers of excess dyads.
    pub fn to_svg(&self) -> String {
        let size = 600.0;
        let c = size / 2.0;
        let r = size * 0.4;
        let max_mag = self
            .nodes
            .iter()
            .flat_map(|g| [g.sender_magnitude, g.receiver_magnitude])
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let pos = |angle: f64| (c + r * angle.cos(), c - r * angle.sin());
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#999" stroke-width="1"/>"##
        );
        for d in self.dyads.iter().filter(|d| d.excess) {
            let (x1, y1) = pos(self.nodes[d.sender].sender_angle);
            let (x2, y2) = pos(self.nodes[d.receiver].receiver_angle);
            let _ = writeln!(
                s,
                r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#555" stroke-dasharray="4,3" stroke-width="0.8"/>"##
            );
        }
        for g in &self.nodes {
            let (x, y) = pos(g.sender_angle);
            let rad = 3.0 + 9.0 * g.sender_magnitude / max_mag;
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="{rad:.2}" fill="#1f77b4" fill-opacity="0.6"/>"##
            );
            let _ = writeln!(
                s,
                r##"<text x="{x:.2}" y="{y:.2}" font-size="9" fill="#1f77b4">{}</text>"##,
                xml_escape(&g.label)
            );
            let (x, y) = pos(g.receiver_angle);
            let rad = 3.0 + 9.0 * g.receiver_magnitude / max_mag;
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#d62728" fill-opacity="0.6"/>"##,
                x - rad,
                y - rad,
                2.0 * rad,
                2.0 * rad
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
