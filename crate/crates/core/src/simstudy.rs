//! Simulation studies comparing the latent factor model with the latent space model on
//! networks of varying degree heterogeneity and reciprocity.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::ame::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::eval::{pr_auc_matrix, roc_auc_matrix};
use crate::gof::gof_core4_cells;
use crate::lfm::{multiplicative_predictor, LatentFactors};
use crate::lsm::{fit_lsm, LsmConfig};
use crate::netdata::{DesignArray, Family, Network};
use crate::srm::AdditiveEffects;
use crate::randkit::{derive_seed, norm_cdf, SeededStream};
use crate::summary::{five_number, mean, sd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Sender and receiver effects with standard deviation `level`.
    Egalitarian,
    /// Within-dyad error correlation `level`, no additive effects.
    Reciprocity,
}

impl ScenarioKind {
    pub fn default_levels(&self) -> Vec<f64> {
        match self {
            ScenarioKind::Egalitarian => vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0],
            ScenarioKind::Reciprocity => vec![0.0, 0.2, 0.4, 0.6, 0.8],
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "egalitarian" => Ok(ScenarioKind::Egalitarian),
            "reciprocity" => Ok(ScenarioKind::Reciprocity),
            other => Err(Error::InvalidArgument(format!(
                "scenario kind {other:?} is not one of egalitarian, reciprocity"
            ))),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Egalitarian => "egalitarian",
            ScenarioKind::Reciprocity => "reciprocity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub level: f64,
    pub n: usize,
    pub density_target: f64,
    pub replicates: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let ok_level = match self.kind {
            ScenarioKind::Egalitarian => self.level >= 0.0 && self.level.is_finite(),
            ScenarioKind::Reciprocity => (0.0..1.0).contains(&self.level),
        };
        if !ok_level {
            return Err(Error::InvalidArgument(format!(
                "level {} invalid for the {} scenario",
                self.level, self.kind
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.n < 3 {
            return Err(Error::TooFewNodes(self.n));
        }
        if !(self.density_target > 0.0 && self.density_target < 1.0) {
            return Err(Error::DensityBracket(self.density_target));
        }
        Ok(())
    }

    fn unit_seed(&self, replicate: usize, master_seed: u64) -> u64 {
        let kind = match self.kind {
            ScenarioKind::Egalitarian => 1,
            ScenarioKind::Reciprocity => 2,
        };
        let mut s = derive_seed(master_seed, kind);
        s = derive_seed(s, self.level.to_bits());
        s = derive_seed(s, self.n as u64);
        s = derive_seed(s, self.density_target.to_bits());
        derive_seed(s, replicate as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    /// Intercept solved for the density target.
    pub mu: f64,
    pub density: f64,
    /// Standard deviation of the out-degrees.
    pub outdegree_sd: f64,
    pub indegree_sd: f64,
    /// Within-dyad correlation of the generated `y`.
    pub reciprocity: f64,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub network: Network,
    pub truth: Truth,
}

/// Intercept `mu` such that the mean over off-diagonal cells of `Phi(mu + a_i + b_j)` equals
/// `target`, by bisection on `[-50, 50]`.
pub fn solve_intercept(a: &[f64], b: &[f64], target: f64) -> Result<f64> {
    let n = a.len();
    let density = |mu: f64| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += norm_cdf(mu + a[i] + b[j]);
                }
            }
        }
        s / (n * (n - 1)) as f64
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    if !(density(lo) < target && density(hi) > target) {
        return Err(Error::DensityBracket(target));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if density(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Generates one replicate; fully determined by `(scenario, replicate, master_seed)`.
pub fn gen_network(scenario: &Scenario, replicate: usize, master_seed: u64) -> Result<Generated> {
    scenario.validate()?;
    let n = scenario.n;
    let mut s = SeededStream::new(scenario.unit_seed(replicate, master_seed));
    let (a, b, rho) = match scenario.kind {
        ScenarioKind::Egalitarian => {
            let a: Vec<f64> = (0..n).map(|_| scenario.level * s.std_normal()).collect();
            let b: Vec<f64> = (0..n).map(|_| scenario.level * s.std_normal()).collect();
            (a, b, 0.0)
        }
        ScenarioKind::Reciprocity => (vec![0.0; n], vec![0.0; n], scenario.level),
    };
    let mu = solve_intercept(&a, &b, scenario.density_target)?;
    let mut cells = DMatrix::from_element(n, n, f64::NAN);
    let tail = (1.0 - rho * rho).sqrt();
    for i in 0..n {
        for j in (i + 1)..n {
            let z1 = s.std_normal();
            let z2 = rho * z1 + tail * s.std_normal();
            cells[(i, j)] = ((mu + a[i] + b[j] + z1) > 0.0) as u8 as f64;
            cells[(j, i)] = ((mu + a[j] + b[i] + z2) > 0.0) as u8 as f64;
        }
    }
    let labels = (1..=n).map(|k| format!("v{k}")).collect();
    let network = Network::new(labels, cells, Family::Binary)?;
    let c = network.cells();
    let out: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| c[(i, j)]).sum())
        .collect();
    let inn: Vec<f64> = (0..n)
        .map(|j| (0..n).filter(|&i| i != j).map(|i| c[(i, j)]).sum())
        .collect();
    let truth = Truth {
        mu,
        density: network.mean().unwrap_or(f64::NAN),
        outdegree_sd: sd(&out),
        indegree_sd: sd(&inn),
        reciprocity: gof_core4_cells(c).dyad_dep.unwrap_or(f64::NAN),
    };
    Ok(Generated { network, truth })
}

/// Parameters of a synthetic AME data set.
#[derive(Debug, Clone, PartialEq)]
pub struct AmeTruth {
    /// Intercept first, then one coefficient per standard-normal dyadic covariate.
    pub beta: Vec<f64>,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub rho: f64,
    /// Number of factor dimensions; entries of `U` and `V` are `N(0, factor_sd^2)`.
    pub k: usize,
    pub factor_sd: f64,
    pub family: Family,
    /// Error variance of the gaussian family.
    pub sigma_eps2: f64,
}

impl Default for AmeTruth {
    fn default() -> Self {
        AmeTruth {
            beta: vec![-2.0, 1.0],
            sigma_a: 0.5,
            sigma_b: 0.5,
            rho: 0.5,
            k: 2,
            factor_sd: 1.0,
            family: Family::Binary,
            sigma_eps2: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmeDataset {
    pub network: Network,
    pub design: DesignArray,
    pub effects: AdditiveEffects,
    pub factors: LatentFactors,
    /// Error-free predictor.
    pub mu: DMatrix<f64>,
}

/// Draws covariates, effects, factors and outcomes from the AME model.
pub fn gen_ame_data(n: usize, truth: &AmeTruth, seed: u64) -> Result<AmeDataset> {
    if truth.beta.is_empty() {
        return Err(Error::InvalidArgument("beta needs at least the intercept".into()));
    }
    if !(truth.rho > -1.0 && truth.rho < 1.0) || truth.sigma_a < 0.0 || truth.sigma_b < 0.0 {
        return Err(Error::InvalidArgument("need |rho| < 1 and non-negative effect sds".into()));
    }
    let mut s = SeededStream::new(seed);
    let p = truth.beta.len() - 1;
    let slabs: Vec<DMatrix<f64>> = (0..p)
        .map(|_| {
            let mut m = DMatrix::from_fn(n, n, |_, _| s.std_normal());
            m.fill_diagonal(f64::NAN);
            m
        })
        .collect();
    let names = (1..=p).map(|k| format!("x{k}")).collect();
    let design = DesignArray::with_dyadic(n, names, slabs)?;
    let effects = AdditiveEffects {
        a: nalgebra::DVector::from_fn(n, |_, _| truth.sigma_a * s.std_normal()),
        b: nalgebra::DVector::from_fn(n, |_, _| truth.sigma_b * s.std_normal()),
    };
    let factors = LatentFactors::random(n, truth.k, truth.factor_sd, &mut s);
    let mu = design.linear_predictor(&truth.beta) + effects.fitted() + multiplicative_predictor(&factors);
    let sd = match truth.family {
        Family::Binary => 1.0,
        Family::Gaussian => truth.sigma_eps2.sqrt(),
    };
    let tail = (1.0 - truth.rho * truth.rho).sqrt();
    let mut cells = DMatrix::from_element(n, n, f64::NAN);
    for i in 0..n {
        for j in (i + 1)..n {
            let z1 = s.std_normal();
            let z2 = truth.rho * z1 + tail * s.std_normal();
            let (t1, t2) = (mu[(i, j)] + sd * z1, mu[(j, i)] + sd * z2);
            let link = |t: f64| match truth.family {
                Family::Binary => (t > 0.0) as u8 as f64,
                Family::Gaussian => t,
            };
            cells[(i, j)] = link(t1);
            cells[(j, i)] = link(t2);
        }
    }
    let labels = (1..=n).map(|k| format!("v{k}")).collect();
    let network = Network::new(labels, cells, truth.family)?;
    Ok(AmeDataset {
        network,
        design,
        effects,
        factors,
        mu,
    })
}

/// Sampler budget shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitBudget {
    pub burn: usize,
    pub kept: usize,
    pub thin: usize,
}

impl Default for FitBudget {
    fn default() -> Self {
        FitBudget {
            burn: 5000,
            kept: 1000,
            thin: 10,
        }
    }
}

/// Latent factor model without additive effects or dyadic correlation, intercept only.
pub fn lfm_config(budget: FitBudget, seed: u64) -> FitConfig {
    FitConfig {
        k: 2,
        seed,
        additive_effects: false,
        dyadic_correlation: false,
        keep_states: false,
        ..FitConfig::default()
    }
    .with_budget(budget.burn, budget.kept, budget.thin)
}

pub fn lsm_config(budget: FitBudget, seed: u64) -> LsmConfig {
    LsmConfig {
        k: 2,
        seed,
        keep_states: false,
        ..LsmConfig::default()
    }
    .with_budget(budget.burn, budget.kept, budget.thin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scenario: usize,
    pub kind: ScenarioKind,
    pub level: f64,
    pub replicate: usize,
    pub model: &'static str,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub truth: Option<Truth>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub scenario: usize,
    pub kind: ScenarioKind,
    pub level: f64,
    pub model: &'static str,
    pub metric: &'static str,
    /// `[min, q25, median, q75, max]` over successful replicates.
    pub five: [f64; 5],
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub summary: Vec<ScenarioSummary>,
    /// Per scenario: mean realised heterogeneity (out-degree sd) or reciprocity.
    pub realised: Vec<(usize, f64)>,
}

impl ComparisonTable {
    pub fn median(&self, scenario: usize, model: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.scenario == scenario && s.model == model && s.metric == metric)
            .map(|s| s.five[2])
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from(
            "scenario,kind,level,replicate,model,auc_roc,auc_pr,density,outdegree_sd,reciprocity,error\n",
        );
        for r in &self.rows {
            let (d, o, rc) = r
                .truth
                .map_or((f64::NAN, f64::NAN, f64::NAN), |t| (t.density, t.outdegree_sd, t.reciprocity));
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.kind,
                r.level,
                r.replicate,
                r.model,
                r.auc_roc,
                r.auc_pr,
                d,
                o,
                rc,
                r.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("scenario,kind,level,model,metric,min,q25,median,q75,max,failures\n");
        for r in &self.summary {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario, r.kind, r.level, r.model, r.metric, r.five[0], r.five[1], r.five[2],
                r.five[3], r.five[4], r.failures
            ));
        }
        s
    }
}

fn run_unit(scn: &Scenario, idx: usize, rep: usize, budget: FitBudget, master_seed: u64) -> Vec<ComparisonRow> {
    let row = |model, auc_roc, auc_pr, truth, error| ComparisonRow {
        scenario: idx,
        kind: scn.kind,
        level: scn.level,
        replicate: rep,
        model,
        auc_roc,
        auc_pr,
        truth,
        error,
    };
    let generated = match gen_network(scn, rep, master_seed) {
        Ok(g) => g,
        Err(e) => {
            return ["LFM", "LSM"]
                .into_iter()
                .map(|m| row(m, f64::NAN, f64::NAN, None, Some(e.to_string())))
                .collect()
        }
    };
    let y = &generated.network;
    let x = DesignArray::intercept_only(scn.n);
    let fit_seed = derive_seed(scn.unit_seed(rep, master_seed), 0x5eed);
    let score = |probs: Result<DMatrix<f64>>| -> (f64, f64, Option<String>) {
        match probs.and_then(|p| Ok((roc_auc_matrix(y.cells(), &p)?, pr_auc_matrix(y.cells(), &p)?))) {
            Ok((r, p)) => (r, p, None),
            Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
        }
    };
    let lfm = score(fit(y, &x, &lfm_config(budget, fit_seed)).and_then(|s| s.predict_proba()));
    let lsm = score(fit_lsm(y, &x, &lsm_config(budget, fit_seed)).and_then(|s| s.predict_proba()));
    vec![
        row("LFM", lfm.0, lfm.1, Some(generated.truth), lfm.2),
        row("LSM", lsm.0, lsm.1, Some(generated.truth), lsm.2),
    ]
}

/// Fits both models to every replicate of every scenario and summarises in-sample AUCs.
pub fn run_comparison(scenarios: &[Scenario], budget: FitBudget, master_seed: u64) -> Result<ComparisonTable> {
    for s in scenarios {
        s.validate()?;
    }
    let units: Vec<(usize, usize)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.replicates).map(move |r| (i, r)))
        .collect();
    let rows: Vec<ComparisonRow> = units
        .par_iter()
        .map(|&(i, r)| run_unit(&scenarios[i], i, r, budget, master_seed))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut summary = Vec::new();
    let mut realised = Vec::new();
    for (i, scn) in scenarios.iter().enumerate() {
        for model in ["LFM", "LSM"] {
            let mine: Vec<&ComparisonRow> = rows.iter().filter(|r| r.scenario == i && r.model == model).collect();
            let failures = mine.iter().filter(|r| r.error.is_some()).count();
            for metric in ["auc_roc", "auc_pr"] {
                let vals: Vec<f64> = mine
                    .iter()
                    .filter(|r| r.error.is_none())
                    .map(|r| if metric == "auc_roc" { r.auc_roc } else { r.auc_pr })
                    .collect();
                summary.push(ScenarioSummary {
                    scenario: i,
                    kind: scn.kind,
                    level: scn.level,
                    model,
                    metric,
                    five: five_number(&vals),
                    failures,
                });
            }
        }
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.scenario == i && r.model == "LFM")
            .filter_map(|r| r.truth)
            .map(|t| match scn.kind {
                ScenarioKind::Egalitarian => t.outdegree_sd,
                ScenarioKind::Reciprocity => t.reciprocity,
            })
            .collect();
        realised.push((i, mean(&vals)));
    }
    Ok(ComparisonTable {
        rows,
        summary,
        realised,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(kind: ScenarioKind, level: f64, n: usize) -> Scenario {
        Scenario {
            kind,
            level,
            n,
            density_target: 0.2,
            replicates: 10,
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let s = scenario(ScenarioKind::Egalitarian, 1.0, 20);
        let a = gen_network(&s, 3, 9).unwrap();
        let b = gen_network(&s, 3, 9).unwrap();
        assert_eq!(a.network.cells().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.network.cells().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = gen_network(&s, 4, 9).unwrap();
        assert_ne!(a.network.cells(), c.network.cells());
    }

    #[test]
    fn intercept_solver_hits_target_and_brackets() {
        let a = vec![0.3, -0.2, 0.5, 0.0];
        let b = vec![0.1, 0.4, -0.6, 0.2];
        let mu = solve_intercept(&a, &b, 0.2).unwrap();
        let mut d = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    d += norm_cdf(mu + a[i] + b[j]);
                }
            }
        }
        assert!((d / 12.0 - 0.2).abs() < 1e-9);
        assert!((solve_intercept(&[0.0; 5], &[0.0; 5], 0.2).unwrap() - crate::randkit::norm_quantile(0.2)).abs() < 1e-9);
        assert!(matches!(gen_network(&Scenario { density_target: 1.0, ..scenario(ScenarioKind::Egalitarian, 0.0, 5) }, 0, 1),
            Err(Error::DensityBracket(_))));
        assert!(gen_network(&scenario(ScenarioKind::Reciprocity, 1.0, 5), 0, 1).is_err());
    }

    #[test]
    fn baseline_heterogeneity_is_binomial() {
        let n = 100;
        let s = scenario(ScenarioKind::Egalitarian, 0.0, n);
        let sds: Vec<f64> = (0..20).map(|r| gen_network(&s, r, 5).unwrap().truth.outdegree_sd).collect();
        let want = ((n - 1) as f64 * 0.2 * 0.8).sqrt();
        assert!((mean(&sds) - want).abs() < 0.1 * want, "{} vs {want}", mean(&sds));
    }

    #[test]
    fn independence_gives_no_reciprocity_and_levels_are_monotone() {
        let n = 50;
        let zero: Vec<f64> = (0..50)
            .map(|r| gen_network(&scenario(ScenarioKind::Reciprocity, 0.0, n), r, 6).unwrap().truth.reciprocity)
            .collect();
        assert!(mean(&zero).abs() < 0.05);
        let avg = |kind: ScenarioKind, level: f64| {
            let v: Vec<f64> = (0..50)
                .map(|r| {
                    let t = gen_network(&scenario(kind, level, n), r, 6).unwrap().truth;
                    match kind {
                        ScenarioKind::Egalitarian => t.outdegree_sd,
                        ScenarioKind::Reciprocity => t.reciprocity,
                    }
                })
                .collect();
            mean(&v)
        };
        for kind in [ScenarioKind::Egalitarian, ScenarioKind::Reciprocity] {
            let levels = kind.default_levels();
            let vals: Vec<f64> = levels.iter().map(|&l| avg(kind, l)).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "{kind}: {vals:?}");
        }
    }

    #[test]
    fn density_targets_are_met_on_average() {
        for kind in [ScenarioKind::Egalitarian, ScenarioKind::Reciprocity] {
            let s = scenario(kind, 0.6, 30);
            let d: Vec<f64> = (0..20).map(|r| gen_network(&s, r, 7).unwrap().truth.density).collect();
            assert!((mean(&d) - 0.2).abs() < 0.05);
        }
    }

    #[test]
    fn tiny_comparison_emits_full_table() {
        let scns = [scenario(ScenarioKind::Reciprocity, 0.5, 12), scenario(ScenarioKind::Egalitarian, 1.0, 12)]
            .map(|s| Scenario { replicates: 2, ..s });
        let t = run_comparison(&scns, FitBudget { burn: 20, kept: 20, thin: 1 }, 3).unwrap();
        assert_eq!(t.rows.len(), 8);
        assert_eq!(t.summary.len(), 8);
        assert!(t.rows.iter().all(|r| r.error.is_none() && r.auc_roc > 0.0));
        assert!(t.median(0, "LFM", "auc_roc").is_some());
        assert_eq!(t.rows_csv().lines().count(), 9);
    }
}
