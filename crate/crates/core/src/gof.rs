//! Network goodness-of-fit statistics and posterior-predictive envelopes.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ame::{Latent, PosteriorSamples};
use crate::error::{Error, Result};
use crate::netdata::{DesignArray, Family, Network};
use crate::randkit::SeededStream;
use crate::summary::{correlation, quantile_sorted, sd};

/// The four summary statistics of a (possibly valued) directed network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofVector {
    pub sd_rowmean: f64,
    pub sd_colmean: f64,
    /// Correlation between `y_ij` and `y_ji`; `None` when undefined (constant network).
    pub dyad_dep: Option<f64>,
    /// `tr(E^3) / (tr(D^3) sd(y)^3)` with `E` the centred network (missing cells zero) and `D`
    /// the observedness indicator; `None` when undefined.
    pub triad_dep: Option<f64>,
}

impl GofVector {
    pub const NAMES: [&'static str; 4] = ["sd.rowmean", "sd.colmean", "dyad.dep", "triad.dep"];

    pub fn values(&self) -> [f64; 4] {
        [
            self.sd_rowmean,
            self.sd_colmean,
            self.dyad_dep.unwrap_or(f64::NAN),
            self.triad_dep.unwrap_or(f64::NAN),
        ]
    }
}

fn sd_of_means(y: &DMatrix<f64>, by_row: bool) -> f64 {
    let n = y.nrows();
    let means: Vec<f64> = (0..n)
        .filter_map(|a| {
            let vals: Vec<f64> = (0..n)
                .filter(|&b| b != a)
                .map(|b| if by_row { y[(a, b)] } else { y[(b, a)] })
                .filter(|v| !v.is_nan())
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect();
    sd(&means)
}

/// [`gof_core4`] on a raw matrix (`NaN` = missing; the diagonal is ignored).
pub fn gof_core4_cells(y: &DMatrix<f64>) -> GofVector {
    let n = y.nrows();
    let obs = |i: usize, j: usize| i != j && !y[(i, j)].is_nan();
    let mut cells = Vec::new();
    let (mut fwd, mut bwd) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            if obs(i, j) {
                cells.push(y[(i, j)]);
                if obs(j, i) {
                    fwd.push(y[(i, j)]);
                    bwd.push(y[(j, i)]);
                }
            }
        }
    }
    let dyad = if fwd.len() >= 2 {
        Some(correlation(&fwd, &bwd)).filter(|v| v.is_finite())
    } else {
        None
    };
    let grand = cells.iter().sum::<f64>() / cells.len().max(1) as f64;
    let spread = sd(&cells);
    let e = DMatrix::from_fn(n, n, |i, j| if obs(i, j) { y[(i, j)] - grand } else { 0.0 });
    let d = DMatrix::from_fn(n, n, |i, j| obs(i, j) as u8 as f64);
    let tr3 = |m: &DMatrix<f64>| (m * m).component_mul(&m.transpose()).sum();
    let denom = tr3(&d) * spread.powi(3);
    let triad = (denom > 0.0 && denom.is_finite())
        .then(|| tr3(&e) / denom)
        .filter(|v| v.is_finite());
    GofVector {
        sd_rowmean: sd_of_means(y, true),
        sd_colmean: sd_of_means(y, false),
        dyad_dep: dyad,
        triad_dep: triad,
    }
}

pub fn gof_core4(y: &Network) -> Result<GofVector> {
    if y.n() < 3 {
        return Err(Error::TooFewNodes(y.n()));
    }
    Ok(gof_core4_cells(y.cells()))
}

/// Edge indicator of a binary matrix; missing and diagonal cells count as absent.
fn edges(y: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = y.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| i != j && y[(i, j)] > 0.5).collect())
        .collect()
}

/// Which ties make `k` a shared partner of `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpMode {
    /// Tie in either direction.
    #[default]
    Symmetric,
    /// `i -> k` and `j -> k`.
    Out,
    /// `k -> i` and `k -> j`.
    In,
}

impl FromStr for SpMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(SpMode::Symmetric),
            "out" => Ok(SpMode::Out),
            "in" => Ok(SpMode::In),
            other => Err(Error::InvalidArgument(format!(
                "shared-partner mode {other:?} is not one of symmetric, out, in"
            ))),
        }
    }
}

impl fmt::Display for SpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpMode::Symmetric => "symmetric",
            SpMode::Out => "out",
            SpMode::In => "in",
        })
    }
}

/// Histograms indexed by the number of shared partners `0..=n-2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedPartners {
    /// Over all unordered pairs.
    pub dyadwise: Vec<usize>,
    /// Over unordered pairs joined by a tie in either direction.
    pub edgewise: Vec<usize>,
}

pub fn shared_partner_dists_cells(y: &DMatrix<f64>, mode: SpMode) -> SharedPartners {
    let n = y.nrows();
    let e = edges(y);
    let tie = |a: usize, b: usize| match mode {
        SpMode::Symmetric => e[a][b] || e[b][a],
        SpMode::Out => e[a][b],
        SpMode::In => e[b][a],
    };
    let bins = n.saturating_sub(1).max(1);
    let mut out = SharedPartners {
        dyadwise: vec![0; bins],
        edgewise: vec![0; bins],
    };
    for i in 0..n {
        for j in (i + 1)..n {
            let count = (0..n)
                .filter(|&k| k != i && k != j && tie(i, k) && tie(j, k))
                .count();
            out.dyadwise[count] += 1;
            if e[i][j] || e[j][i] {
                out.edgewise[count] += 1;
            }
        }
    }
    out
}

pub fn shared_partner_dists(y: &Network, mode: SpMode) -> SharedPartners {
    shared_partner_dists_cells(y.cells(), mode)
}

/// Directed shortest-path lengths by breadth-first search; `None` when unreachable.
pub fn geodesic_matrix(y: &DMatrix<f64>) -> Vec<Vec<Option<usize>>> {
    let n = y.nrows();
    let e = edges(y);
    let adj: Vec<Vec<usize>> = e
        .iter()
        .map(|row| (0..n).filter(|&j| row[j]).collect())
        .collect();
    (0..n)
        .map(|s| {
            let mut dist = vec![None; n];
            dist[s] = Some(0);
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                let du = dist[u].unwrap();
                for &v in &adj[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(du + 1);
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
        .collect()
}

/// Counts of ordered pairs by geodesic distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicHistogram {
    /// `counts[d - 1]` pairs at distance `d`, for `d = 1..=n-1`.
    pub counts: Vec<usize>,
    pub unreachable: usize,
}

impl GeodesicHistogram {
    /// Shares of the `n(n-1)` ordered pairs, finite distances then unreachable.
    pub fn proportions(&self) -> (Vec<f64>, f64) {
        let total = (self.counts.iter().sum::<usize>() + self.unreachable) as f64;
        (
            self.counts.iter().map(|&c| c as f64 / total).collect(),
            self.unreachable as f64 / total,
        )
    }
}

pub fn geodesic_dist_cells(y: &DMatrix<f64>) -> GeodesicHistogram {
    let n = y.nrows();
    let g = geodesic_matrix(y);
    let mut h = GeodesicHistogram {
        counts: vec![0; n.saturating_sub(1).max(1)],
        unreachable: 0,
    };
    for (i, row) in g.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            if i != j {
                match d {
                    Some(d) => h.counts[d - 1] += 1,
                    None => h.unreachable += 1,
                }
            }
        }
    }
    h
}

pub fn geodesic_dist(y: &Network) -> GeodesicHistogram {
    geodesic_dist_cells(y.cells())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    /// `indegree[d]` nodes with in-degree `d`, for `d = 0..=n-1`.
    pub indegree: Vec<usize>,
    pub outdegree: Vec<usize>,
    /// `(k, sum_i C(indeg_i, k))` for `k = 2..=kmax`.
    pub in_stars: Vec<(usize, f64)>,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Degree histograms and incoming k-star counts; `kmax` defaults to the largest in-degree.
pub fn degree_and_star_stats_cells(y: &DMatrix<f64>, kmax: Option<usize>) -> DegreeStats {
    let n = y.nrows();
    let e = edges(y);
    let indeg: Vec<usize> = (0..n).map(|j| (0..n).filter(|&i| e[i][j]).count()).collect();
    let outdeg: Vec<usize> = (0..n).map(|i| e[i].iter().filter(|&&b| b).count()).collect();
    let mut din = vec![0; n.max(1)];
    let mut dout = vec![0; n.max(1)];
    for k in 0..n {
        din[indeg[k]] += 1;
        dout[outdeg[k]] += 1;
    }
    let kmax = kmax.unwrap_or_else(|| indeg.iter().copied().max().unwrap_or(0));
    let in_stars = (2..=kmax)
        .map(|k| (k, indeg.iter().map(|&d| binomial(d, k)).sum()))
        .collect();
    DegreeStats {
        indegree: din,
        outdegree: dout,
        in_stars,
    }
}

pub fn degree_and_star_stats(y: &Network, kmax: Option<usize>) -> DegreeStats {
    degree_and_star_stats_cells(y.cells(), kmax)
}

/// Statistic families available to the posterior-predictive check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    Core4,
    SharedPartners(SpMode),
    Geodesic,
    Degree,
    InStars,
}

impl StatKind {
    pub fn all(mode: SpMode) -> Vec<StatKind> {
        vec![
            StatKind::Core4,
            StatKind::SharedPartners(mode),
            StatKind::Geodesic,
            StatKind::Degree,
            StatKind::InStars,
        ]
    }

    pub fn binary_only(&self) -> bool {
        !matches!(self, StatKind::Core4)
    }
}

/// `(statistic, bin, value)` entries of the requested families for one network.
pub fn statistic_table(y: &DMatrix<f64>, which: &[StatKind], kmax: usize) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for kind in which {
        match *kind {
            StatKind::Core4 => {
                let g = gof_core4_cells(y);
                for (name, v) in GofVector::NAMES.iter().zip(g.values()) {
                    out.push((name.to_string(), String::new(), v));
                }
            }
            StatKind::SharedPartners(mode) => {
                let sp = shared_partner_dists_cells(y, mode);
                for (k, &c) in sp.dyadwise.iter().enumerate() {
                    out.push((format!("dsp.{mode}"), k.to_string(), c as f64));
                }
                for (k, &c) in sp.edgewise.iter().enumerate() {
                    out.push((format!("esp.{mode}"), k.to_string(), c as f64));
                }
            }
            StatKind::Geodesic => {
                let (props, inf) = geodesic_dist_cells(y).proportions();
                for (d, p) in props.iter().enumerate() {
                    out.push(("geodesic".into(), (d + 1).to_string(), *p));
                }
                out.push(("geodesic".into(), "inf".into(), inf));
            }
            StatKind::Degree => {
                let d = degree_and_star_stats_cells(y, Some(0));
                for (k, &c) in d.indegree.iter().enumerate() {
                    out.push(("indegree".into(), k.to_string(), c as f64));
                }
                for (k, &c) in d.outdegree.iter().enumerate() {
                    out.push(("outdegree".into(), k.to_string(), c as f64));
                }
            }
            StatKind::InStars => {
                let d = degree_and_star_stats_cells(y, Some(kmax));
                for (k, c) in d.in_stars {
                    out.push(("instar".into(), k.to_string(), c));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofRow {
    pub statistic: String,
    /// Histogram bin, empty for scalar statistics.
    pub bin: String,
    pub observed: f64,
    pub sim_mean: f64,
    pub q05: f64,
    pub q95: f64,
    pub q025: f64,
    pub q975: f64,
}

impl GofRow {
    pub fn inside_95(&self) -> bool {
        self.observed >= self.q025 && self.observed <= self.q975
    }

    pub fn inside_90(&self) -> bool {
        self.observed >= self.q05 && self.observed <= self.q95
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofReport {
    pub nsims: usize,
    pub rows: Vec<GofRow>,
    /// `simulated[r][s]`: value of row `r` in simulation `s`.
    pub simulated: Vec<Vec<f64>>,
}

impl GofReport {
    pub fn row(&self, statistic: &str, bin: &str) -> Option<&GofRow> {
        self.rows.iter().find(|r| r.statistic == statistic && r.bin == bin)
    }

    /// Long-format table with a one-line header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("statistic,bin,observed,sim_mean,q05,q95,q025,q975\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.statistic, r.bin, r.observed, r.sim_mean, r.q05, r.q95, r.q025, r.q975
            ));
        }
        s
    }
}

/// Draws one network from the predictive distribution of a posterior draw: pair-correlated
/// errors added to the mean predictor, thresholded at zero for binary models, with the
/// observed missingness pattern reapplied.
pub fn simulate_network(
    mu: &DMatrix<f64>,
    rho: f64,
    sigma_eps2: f64,
    family: Family,
    pattern: &DMatrix<f64>,
    stream: &mut SeededStream,
) -> DMatrix<f64> {
    let n = mu.nrows();
    let sd = sigma_eps2.sqrt();
    let tail = (1.0 - rho * rho).max(0.0).sqrt();
    let mut y = DMatrix::from_element(n, n, f64::NAN);
    for i in 0..n {
        for j in (i + 1)..n {
            let z1 = stream.std_normal();
            let z2 = rho * z1 + tail * stream.std_normal();
            let t1 = mu[(i, j)] + sd * z1;
            let t2 = mu[(j, i)] + sd * z2;
            let link = |t: f64| match family {
                Family::Binary => (t > 0.0) as u8 as f64,
                Family::Gaussian => t,
            };
            if !pattern[(i, j)].is_nan() {
                y[(i, j)] = link(t1);
            }
            if !pattern[(j, i)].is_nan() {
                y[(j, i)] = link(t2);
            }
        }
    }
    y
}

/// Simulates `nsims` networks (cycling over kept draws) and brackets the observed statistics
/// by 90% and 95% simulation intervals. Simulation `s` uses the stream `(seed, s)`.
pub fn posterior_predictive_gof(
    samples: &PosteriorSamples,
    observed: &Network,
    x: &DesignArray,
    nsims: usize,
    which: &[StatKind],
    seed: u64,
) -> Result<GofReport> {
    if nsims < 20 {
        return Err(Error::InvalidArgument(format!(
            "posterior-predictive check needs at least 20 simulations, got {nsims}"
        )));
    }
    if samples.draws.is_empty() {
        return Err(Error::InvalidArgument("no kept draws".into()));
    }
    if samples.has_latent && samples.draws.iter().any(|d| d.latent == Latent::None) {
        return Err(Error::InvalidArgument(
            "posterior samples were fitted without keeping latent states".into(),
        ));
    }
    let family = samples.family;
    let which: Vec<StatKind> = which
        .iter()
        .copied()
        .filter(|k| family == Family::Binary || !k.binary_only())
        .collect();
    let obs = observed.cells();
    let kmax = degree_and_star_stats_cells(obs, None)
        .in_stars
        .last()
        .map_or(2, |s| s.0);
    let observed_table = statistic_table(obs, &which, kmax);
    let sims: Vec<Vec<f64>> = (0..nsims)
        .into_par_iter()
        .map(|s| {
            let draw = &samples.draws[s % samples.draws.len()];
            let mu = draw.mean_predictor(x);
            let mut stream = SeededStream::derive(seed, s as u64);
            let y = simulate_network(&mu, draw.cov.rho, draw.cov.sigma_eps2, family, obs, &mut stream);
            statistic_table(&y, &which, kmax).into_iter().map(|t| t.2).collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(observed_table.len());
    let mut simulated = Vec::with_capacity(observed_table.len());
    for (r, (statistic, bin, value)) in observed_table.into_iter().enumerate() {
        let col: Vec<f64> = sims.iter().map(|s| s[r]).collect();
        let mut finite: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        finite.sort_by(f64::total_cmp);
        let mean = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        rows.push(GofRow {
            statistic,
            bin,
            observed: value,
            sim_mean: mean,
            q05: quantile_sorted(&finite, 0.05),
            q95: quantile_sorted(&finite, 0.95),
            q025: quantile_sorted(&finite, 0.025),
            q975: quantile_sorted(&finite, 0.975),
        });
        simulated.push(col);
    }
    trim_empty_bins(&mut rows, &mut simulated);
    Ok(GofReport {
        nsims,
        rows,
        simulated,
    })
}

/// Drops trailing histogram bins that are zero in the observed network and every simulation.
fn trim_empty_bins(rows: &mut Vec<GofRow>, simulated: &mut Vec<Vec<f64>>) {
    let mut keep = vec![true; rows.len()];
    let mut r = rows.len();
    while r > 0 {
        let stat = rows[r - 1].statistic.clone();
        let start = rows[..r].iter().rposition(|x| x.statistic != stat).map_or(0, |p| p + 1);
        if !rows[r - 1].bin.is_empty() && stat != "geodesic" {
            let mut k = r;
            while k > start + 1
                && rows[k - 1].observed == 0.0
                && simulated[k - 1].iter().all(|&v| v == 0.0)
            {
                keep[k - 1] = false;
                k -= 1;
            }
        }
        r = start;
    }
    let mut idx = 0;
    rows.retain(|_| {
        idx += 1;
        keep[idx - 1]
    });
    let mut idx = 0;
    simulated.retain(|_| {
        idx += 1;
        keep[idx - 1]
    });
}
