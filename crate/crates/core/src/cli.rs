//! The `ame` command-line tool.
//!
//! Every setting resolves as flag, then flat JSON config file (`--config`, keys are the long
//! flag names), then default. Each command writes comma-separated tables into `--out-dir`
//! together with `metadata.json`, which records the version, seed, a SHA-256 of the resolved
//! settings and a hash of every file written.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::ame::{
    convergence_diagnostics, fit, posterior_summary, BetaStep, FitConfig, PosteriorSamples, RhoProposal,
};
use crate::error::Error;
use crate::eval::{cross_validate, pr_points, roc_points, separation_data, CvModel};
use crate::glmbase::fit_logit;
use crate::gof::{degree_and_star_stats_cells, posterior_predictive_gof, statistic_table, SpMode, StatKind};
use crate::lfm::{export_factor_geometry, ExcessThreshold, FactorScale, LatentFactors};
use crate::lsm::{fit_lsm, LsmConfig};
use crate::netdata::{
    build_design_array, matrix_csv, read_adjacency, read_dyadic_covariates, read_nodal_covariates,
    DesignArray, Family, Network, NodeRole,
};
use crate::randkit::derive_seed;
use crate::simstudy::{run_comparison, FitBudget, Scenario, ScenarioKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "ame", version, about = "Additive and multiplicative effects network models")]
struct Cli {
    /// Worker threads (falls back to AME_THREADS, then the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat JSON file of settings keyed by long flag name.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the AME model; `--K 1,2,3,4` fits one model per K.
    Fit(FitArgs),
    /// Fit the latent space model.
    LsmFit(LsmArgs),
    /// Logistic regression on the stacked dyads.
    LogitFit(LogitArgs),
    /// Dyad-fold cross-validation.
    Cv(CvArgs),
    /// Observed network statistics.
    Gof(GofArgs),
    /// Posterior-predictive envelopes of the network statistics.
    Ppc(PpcArgs),
    /// Simulation study comparing the latent factor and latent space models.
    Simstudy(SimArgs),
    /// Circle-plot geometry from a posterior-mean factor product.
    ExportFactors(ExportArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    adjacency: Option<String>,
    #[arg(long)]
    nodal: Option<String>,
    #[arg(long)]
    dyadic: Option<String>,
    /// Comma-separated sender/receiver/both, one per nodal variable.
    #[arg(long)]
    roles: Option<String>,
    /// binary or gaussian.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Debug, Args)]
struct ChainArgs {
    #[arg(long)]
    burn: Option<usize>,
    /// Total sweeps, burn-in included.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Debug, Args)]
struct AmeArgs {
    /// literal, fixed:SD or adaptive[:SD].
    #[arg(long = "rho-proposal")]
    rho_proposal: Option<String>,
    /// absorbed or explicit.
    #[arg(long = "factor-scale")]
    factor_scale: Option<String>,
    /// collapsed or conditional.
    #[arg(long = "beta-step")]
    beta_step: Option<String>,
    #[arg(long = "beta-var")]
    beta_var: Option<f64>,
}

#[derive(Debug, Args)]
struct LsmExtra {
    #[arg(long = "with-sr-effects")]
    with_sr_effects: bool,
    #[arg(long = "proposal-sd")]
    proposal_sd: Option<f64>,
    #[arg(long = "z-prior-var")]
    z_prior_var: Option<f64>,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long = "out-dir")]
    out_dir: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "K")]
    k: Option<String>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    ame: AmeArgs,
    /// Quantile of the factor product above which a dyad is flagged.
    #[arg(long = "threshold-quantile")]
    threshold_quantile: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct LsmArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long = "K")]
    k: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    lsm: LsmExtra,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct LogitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    /// ame, lsm or logit.
    #[arg(long)]
    model: Option<String>,
    /// Number of folds.
    #[arg(long = "S")]
    s: Option<usize>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    ame: AmeArgs,
    #[command(flatten)]
    lsm: LsmExtra,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct GofArgs {
    #[arg(long)]
    adjacency: Option<String>,
    #[arg(long)]
    family: Option<String>,
    /// symmetric, out or in.
    #[arg(long = "sp-mode")]
    sp_mode: Option<String>,
    #[arg(long)]
    kmax: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct PpcArgs {
    #[command(flatten)]
    data: DataArgs,
    /// ame or lsm.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    nsims: Option<usize>,
    #[arg(long = "sp-mode")]
    sp_mode: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    ame: AmeArgs,
    #[command(flatten)]
    lsm: LsmExtra,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// egalitarian or reciprocity.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated scenario levels.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// BURN,KEPT,THIN for each fit.
    #[arg(long)]
    budget: Option<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Posterior-mean factor product, written by `fit` as multiplicative.csv.
    #[arg(long)]
    multiplicative: Option<String>,
    /// Posterior-mean additive predictor, written by `fit` as additive.csv.
    #[arg(long)]
    additive: Option<String>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "threshold-quantile")]
    threshold_quantile: Option<f64>,
    /// Absolute cut-off; overrides the quantile.
    #[arg(long = "threshold-value")]
    threshold_value: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    /// 0 success, 1 usage error, 2 data error, 3 numerical failure.
    pub code: i32,
    /// Every file written, in write order.
    pub manifest: Vec<PathBuf>,
    /// Text for stdout (help, version, manifest) or stderr (errors).
    pub message: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Flag > config file > default resolution, recording every resolved value (output paths
/// excluded) for hashing.
struct Settings {
    file: Map<String, Value>,
    resolved: BTreeMap<String, String>,
    consulted: BTreeSet<String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return usage(format!("--config {}: expected a JSON object", p.display())),
                    Err(e) => return usage(format!("--config {}: {e}", p.display())),
                }
            }
        };
        if let Some((k, _)) = file.iter().find(|(_, v)| v.is_object() || v.is_array()) {
            return usage(format!("--config key {k:?}: nested values are not allowed"));
        }
        Ok(Settings {
            file,
            resolved: BTreeMap::new(),
            consulted: BTreeSet::new(),
        })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        self.consulted.insert(key.to_string());
        let Some(v) = self.file.get(key) else {
            return Ok(None);
        };
        let text = match v {
            Value::String(s) => s.clone(),
            Value::Null => return Ok(None),
            other => other.to_string(),
        };
        text.parse::<T>()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("--config key {key:?}: {e}")))
    }

    fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let file_value = self.file_value::<T>(key)?;
        let v = flag.or(file_value);
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn flag(&mut self, key: &str, flag: bool) -> CliResult<bool> {
        let v = flag || self.file_value::<bool>(key)?.unwrap_or(false);
        self.resolved.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    fn required(&mut self, key: &str, flag: Option<String>) -> CliResult<String> {
        match self.opt(key, flag)? {
            Some(v) => Ok(v),
            None => usage(format!("missing required --{key}")),
        }
    }

    fn parsed<T: FromStr>(&mut self, key: &str, flag: Option<String>, default: &str) -> CliResult<T>
    where
        T::Err: Display,
    {
        let raw = self.get(key, flag, default.to_string())?;
        raw.parse::<T>()
            .map_err(|e| CliError::Usage(format!("--{key} {raw:?}: {e}")))
    }

    fn check_unused(&self) -> CliResult<()> {
        match self.file.keys().find(|k| !self.consulted.contains(*k)) {
            Some(k) => usage(format!("--config key {k:?} is not a setting of this command")),
            None => Ok(()),
        }
    }

    fn hash(&self, command: &str) -> String {
        let body = serde_json::to_string(&(command, &self.resolved)).expect("string map serialises");
        hex(&Sha256::digest(body.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory with a manifest of the files written into it.
struct Outputs {
    dir: PathBuf,
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn new(dir: impl Into<PathBuf>) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push((path, hex(&Sha256::digest(contents.as_bytes()))));
        Ok(())
    }

    fn finish(mut self, command: &str, seed: Option<u64>, settings: &Settings) -> CliResult<Vec<PathBuf>> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(p, h)| {
                let rel = p.strip_prefix(&self.dir).unwrap_or(p);
                serde_json::json!({ "file": rel.to_string_lossy(), "sha256": h })
            })
            .collect();
        let meta = serde_json::json!({
            "version": VERSION,
            "command": command,
            "seed": seed,
            "config_sha256": settings.hash(command),
            "settings": settings.resolved,
            "files": files,
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serialises") + "\n";
        self.write("metadata.json", &text)?;
        Ok(self.files.into_iter().map(|(p, _)| p).collect())
    }
}

fn csv_line<T: Display>(fields: impl IntoIterator<Item = T>) -> String {
    let mut s = fields.into_iter().map(|f| f.to_string()).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> CliResult<Vec<T>>
where
    T::Err: Display,
{
    raw.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|e| CliError::Usage(format!("--{key} entry {t:?}: {e}"))))
        .collect()
}

fn parse_rho_proposal(raw: &str) -> CliResult<RhoProposal> {
    let (head, tail) = raw.split_once(':').unwrap_or((raw, ""));
    let sd = |default: Option<f64>| -> CliResult<f64> {
        match (tail, default) {
            ("", Some(d)) => Ok(d),
            (t, _) => t
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("--rho-proposal {raw:?}: {e}"))),
        }
    };
    match head {
        "literal" if tail.is_empty() => Ok(RhoProposal::Literal),
        "fixed" => Ok(RhoProposal::Fixed(sd(None)?)),
        "adaptive" => Ok(RhoProposal::Adaptive(sd(Some(0.1))?)),
        _ => usage(format!("--rho-proposal {raw:?}: expected literal, fixed:SD or adaptive[:SD]")),
    }
}

fn load_data(st: &mut Settings, d: DataArgs) -> CliResult<(Network, DesignArray)> {
    let family: Family = st.parsed("family", d.family, "binary")?;
    let adjacency = st.required("adjacency", d.adjacency)?;
    let y = read_adjacency(&adjacency, family)?;
    let nodal = match st.opt("nodal", d.nodal)? {
        Some(p) => Some(read_nodal_covariates(&p, y.labels())?),
        None => None,
    };
    let roles: Vec<NodeRole> = match st.opt("roles", d.roles)? {
        Some(r) => parse_list("roles", &r)?,
        None if nodal.is_some() => return usage("--nodal requires --roles"),
        None => Vec::new(),
    };
    if let Some(nodal) = &nodal {
        if nodal.names.len() != roles.len() {
            return usage(format!(
                "--roles lists {} roles for {} nodal variables",
                roles.len(),
                nodal.names.len()
            ));
        }
    }
    let dyadic = match st.opt("dyadic", d.dyadic)? {
        Some(p) => Some(read_dyadic_covariates(&p, y.labels())?),
        None => None,
    };
    let x = build_design_array(y.n(), nodal.as_ref(), &roles, dyadic.as_ref())?;
    Ok((y, x))
}

fn ame_config(st: &mut Settings, k: usize, c: &ChainArgs, a: &AmeArgs) -> CliResult<FitConfig> {
    let d = FitConfig::default();
    let mut cfg = FitConfig {
        k,
        burn: st.get("burn", c.burn, d.burn)?,
        iterations: st.get("iters", c.iters, d.iterations)?,
        thin: st.get("thin", c.thin, d.thin)?,
        seed: st.get("seed", c.seed, d.seed)?,
        chains: st.get("chains", c.chains, d.chains)?,
        ..d
    };
    cfg.rho_proposal = parse_rho_proposal(&st.get("rho-proposal", a.rho_proposal.clone(), "literal".into())?)?;
    cfg.factor_scale = match st.get("factor-scale", a.factor_scale.clone(), "absorbed".into())?.as_str() {
        "absorbed" => FactorScale::Absorbed,
        "explicit" => FactorScale::Explicit,
        other => return usage(format!("--factor-scale {other:?}: expected absorbed or explicit")),
    };
    cfg.beta_step = match st.get("beta-step", a.beta_step.clone(), "collapsed".into())?.as_str() {
        "collapsed" => BetaStep::Collapsed,
        "conditional" => BetaStep::Conditional,
        other => return usage(format!("--beta-step {other:?}: expected collapsed or conditional")),
    };
    cfg.priors.beta_var = st.get("beta-var", a.beta_var, cfg.priors.beta_var)?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn lsm_config(st: &mut Settings, k: usize, c: &ChainArgs, l: &LsmExtra) -> CliResult<LsmConfig> {
    let d = LsmConfig::default();
    let cfg = LsmConfig {
        k,
        sr_effects: st.flag("with-sr-effects", l.with_sr_effects)?,
        burn: st.get("burn", c.burn, d.burn)?,
        iterations: st.get("iters", c.iters, d.iterations)?,
        thin: st.get("thin", c.thin, d.thin)?,
        seed: st.get("seed", c.seed, d.seed)?,
        chains: st.get("chains", c.chains, d.chains)?,
        proposal_sd: st.get("proposal-sd", l.proposal_sd, d.proposal_sd)?,
        z_prior_var: st.get("z-prior-var", l.z_prior_var, d.z_prior_var)?,
        ..d
    };
    if cfg.iterations <= cfg.burn || cfg.thin == 0 || cfg.chains == 0 || cfg.k == 0 {
        return usage("lsm settings need iters > burn, thin >= 1, chains >= 1 and K >= 1");
    }
    if !(cfg.proposal_sd > 0.0 && cfg.z_prior_var > 0.0) {
        return usage("--proposal-sd and --z-prior-var must be positive");
    }
    Ok(cfg)
}

fn out_dir(st: &mut Settings, o: OutArgs) -> CliResult<Outputs> {
    let file_value = st.file_value::<String>("out-dir")?;
    Outputs::new(o.out_dir.or(file_value).unwrap_or_else(|| "out".into()))
}

fn samples_csv(s: &PosteriorSamples) -> String {
    let mut out = csv_line(["chain".to_string(), "sweep".to_string()].into_iter().chain(s.scalar_names()));
    for d in &s.draws {
        let mut row = vec![d.chain.to_string(), d.sweep.to_string()];
        row.extend(PosteriorSamples::scalar_row(d).iter().map(|v| v.to_string()));
        out.push_str(&csv_line(row));
    }
    out
}

fn summary_csv(rows: &[(String, f64, f64, f64, f64)]) -> String {
    let mut out = String::from("name,mean,sd,q025,q975\n");
    for (n, m, s, lo, hi) in rows {
        out.push_str(&csv_line([n.clone(), m.to_string(), s.to_string(), lo.to_string(), hi.to_string()]));
    }
    out
}

fn write_posterior(out: &mut Outputs, prefix: &str, s: &PosteriorSamples) -> CliResult<Vec<(String, f64, f64, f64, f64)>> {
    out.write(&format!("{prefix}samples.csv"), &samples_csv(s))?;
    let summary: Vec<_> = posterior_summary(s)?
        .into_iter()
        .map(|r| (r.name, r.mean, r.sd, r.q025, r.q975))
        .collect();
    out.write(&format!("{prefix}summary.csv"), &summary_csv(&summary))?;
    let mut diag = String::from("chain,name,mean_first_third,mean_middle_third,mean_last_third,geweke_z\n");
    for r in convergence_diagnostics(s) {
        let [a, b, c] = r.third_means;
        diag.push_str(&csv_line([r.chain.to_string(), r.name, a.to_string(), b.to_string(), c.to_string(), r.geweke_z.to_string()]));
    }
    out.write(&format!("{prefix}diagnostics.csv"), &diag)?;
    let mut acc = String::from("name,proposed,accepted,rate\n");
    for a in &s.acceptance {
        acc.push_str(&csv_line([a.name.clone(), a.proposed.to_string(), a.accepted.to_string(), a.rate().to_string()]));
    }
    out.write(&format!("{prefix}acceptance.csv"), &acc)?;
    let fitted = match s.family {
        Family::Binary => s.predict_proba()?,
        Family::Gaussian => s.predict_mean()?,
    };
    out.write(&format!("{prefix}probabilities.csv"), &matrix_csv(&s.labels, &fitted))?;
    Ok(summary)
}

fn cmd_fit(st: &mut Settings, a: FitArgs) -> CliResult<(Outputs, Option<u64>)> {
    let (y, x) = load_data(st, a.data)?;
    let ks: Vec<usize> = parse_list("K", &st.get("K", a.k, "2".into())?)?;
    if ks.is_empty() {
        return usage("--K needs at least one value");
    }
    let q = st.get("threshold-quantile", a.threshold_quantile, 0.9)?;
    if !(0.0..=1.0).contains(&q) {
        return usage("--threshold-quantile must lie in [0, 1]");
    }
    let configs: Vec<FitConfig> = ks
        .iter()
        .map(|&k| ame_config(st, k, &a.chain, &a.ame))
        .collect::<CliResult<_>>()?;
    let mut out = out_dir(st, a.out)?;
    let mut table: Vec<(usize, Vec<(String, f64, f64, f64, f64)>)> = Vec::new();
    for cfg in &configs {
        let prefix = if ks.len() > 1 { format!("K{}/", cfg.k) } else { String::new() };
        let s = fit(&y, &x, cfg)?;
        let summary = write_posterior(&mut out, &prefix, &s)?;
        let latent = s.latent_term_mean()?;
        let additive = s.mean_predictor()? - &latent;
        out.write(&format!("{prefix}multiplicative.csv"), &matrix_csv(&s.labels, &latent))?;
        out.write(&format!("{prefix}additive.csv"), &matrix_csv(&s.labels, &additive))?;
        if cfg.k >= 2 {
            write_geometry(&mut out, &prefix, &latent, &additive, &s.labels, cfg.k, ExcessThreshold::Quantile(q))?;
        }
        table.push((cfg.k, summary));
    }
    if ks.len() > 1 {
        let mut s = csv_line(["parameter".to_string()].into_iter().chain(ks.iter().map(|k| format!("AME (k={k})"))));
        for (r, (name, ..)) in table[0].1.iter().enumerate() {
            let mut row = vec![name.clone()];
            for (_, rows) in &table {
                let (_, m, _, lo, hi) = &rows[r];
                row.push(format!("{m:.2} [{lo:.2}; {hi:.2}]"));
            }
            s.push_str(&csv_line(row));
        }
        out.write("summary_by_k.csv", &s)?;
    }
    Ok((out, Some(configs[0].seed)))
}

fn write_geometry(
    out: &mut Outputs,
    prefix: &str,
    product: &DMatrix<f64>,
    additive: &DMatrix<f64>,
    labels: &[String],
    k: usize,
    threshold: ExcessThreshold,
) -> CliResult<()> {
    let m = product.map(|v| if v.is_nan() { 0.0 } else { v });
    let mut factors = LatentFactors::from_product(&m, k)?;
    factors.d = DVector::from_element(k, 1.0);
    let g = export_factor_geometry(&factors, labels, additive, threshold)?;
    out.write(&format!("{prefix}factors_nodes.csv"), &g.nodes_csv())?;
    out.write(&format!("{prefix}factors_dyads.csv"), &g.dyads_csv())?;
    out.write(&format!("{prefix}factors.svg"), &g.to_svg())
}

fn cmd_lsm(st: &mut Settings, a: LsmArgs) -> CliResult<(Outputs, Option<u64>)> {
    let (y, x) = load_data(st, a.data)?;
    let k = st.get("K", a.k, 2)?;
    let cfg = lsm_config(st, k, &a.chain, &a.lsm)?;
    let mut out = out_dir(st, a.out)?;
    let s = fit_lsm(&y, &x, &cfg)?;
    write_posterior(&mut out, "", &s)?;
    Ok((out, Some(cfg.seed)))
}

fn cmd_logit(st: &mut Settings, a: LogitArgs) -> CliResult<(Outputs, Option<u64>)> {
    let (y, x) = load_data(st, a.data)?;
    let mut out = out_dir(st, a.out)?;
    let f = fit_logit(&y, &x)?;
    let z = 1.959963984540054;
    let rows: Vec<_> = (0..f.names.len())
        .map(|k| {
            let (b, se) = (f.coefficients[k], f.std_errors[k]);
            (f.names[k].clone(), b, se, b - z * se, b + z * se)
        })
        .collect();
    out.write("summary.csv", &summary_csv(&rows))?;
    out.write(
        "logit_info.csv",
        &format!("converged,separation,iterations\n{},{},{}\n", f.converged, f.separation, f.iterations),
    )?;
    out.write("probabilities.csv", &matrix_csv(y.labels(), &f.predict(&x)))?;
    Ok((out, None))
}

fn model_for(st: &mut Settings, name: &str, k: Option<usize>, c: &ChainArgs, a: &AmeArgs, l: &LsmExtra) -> CliResult<(CvModel, Option<u64>)> {
    match name {
        "ame" => {
            let k = st.get("K", k, 2)?;
            let cfg = ame_config(st, k, c, a)?;
            let seed = cfg.seed;
            Ok((CvModel::Ame(cfg), Some(seed)))
        }
        "lsm" => {
            let k = st.get("K", k, 2)?;
            let cfg = lsm_config(st, k, c, l)?;
            let seed = cfg.seed;
            Ok((CvModel::Lsm(cfg), Some(seed)))
        }
        "logit" => Ok((CvModel::Logit, None)),
        other => usage(format!("--model {other:?}: expected ame, lsm or logit")),
    }
}

fn cmd_cv(st: &mut Settings, a: CvArgs) -> CliResult<(Outputs, Option<u64>)> {
    let (y, x) = load_data(st, a.data)?;
    let name = st.get("model", a.model, "ame".into())?;
    let folds = st.get("S", a.s, 45)?;
    let (model, model_seed) = model_for(st, &name, a.k, &a.chain, &a.ame, &a.lsm)?;
    let seed = match model_seed {
        Some(s) => s,
        None => st.get("seed", a.chain.seed, 1)?,
    };
    if folds < 2 {
        return usage("--S must be at least 2");
    }
    let mut out = out_dir(st, a.out)?;
    let preds = cross_validate(&y, &x, &model, folds, seed)?;
    let labels = y.labels();
    let mut p = String::from("sender,receiver,fold,label,score\n");
    for e in &preds.entries {
        p.push_str(&csv_line([labels[e.sender].clone(), labels[e.receiver].clone(), e.fold.to_string(), (e.label as u8).to_string(), e.score.to_string()]));
    }
    out.write("predictions.csv", &p)?;
    let roc = roc_points(&preds)?;
    let pr = pr_points(&preds)?;
    let points = |header: &str, c: &[(f64, f64)]| {
        let mut s = format!("{header}\n");
        for (a, b) in c {
            s.push_str(&csv_line([a, b]));
        }
        s
    };
    out.write("roc.csv", &points("fpr,tpr", &roc.points))?;
    out.write("pr.csv", &points("recall,precision", &pr.points))?;
    let mut sep = String::from("rank,label,score\n");
    for (r, l, s) in separation_data(&preds) {
        sep.push_str(&csv_line([r.to_string(), (l as u8).to_string(), s.to_string()]));
    }
    out.write("separation.csv", &sep)?;
    out.write("metrics.csv", &format!("metric,value\nauc_roc,{:.2}\nauc_pr,{:.2}\n", roc.auc, pr.auc))?;
    Ok((out, Some(seed)))
}

fn cmd_gof(st: &mut Settings, a: GofArgs) -> CliResult<(Outputs, Option<u64>)> {
    let family: Family = st.parsed("family", a.family, "binary")?;
    let path = st.required("adjacency", a.adjacency)?;
    let mode: SpMode = st.parsed("sp-mode", a.sp_mode, "symmetric")?;
    let y = read_adjacency(&path, family)?;
    let default_kmax = degree_and_star_stats_cells(y.cells(), None).in_stars.last().map_or(2, |s| s.0);
    let kmax = st.get("kmax", a.kmax, default_kmax)?;
    let which: Vec<StatKind> = StatKind::all(mode)
        .into_iter()
        .filter(|k| family == Family::Binary || !k.binary_only())
        .collect();
    let mut out = out_dir(st, a.out)?;
    let mut s = String::from("statistic,bin,value\n");
    for (stat, bin, v) in statistic_table(y.cells(), &which, kmax) {
        s.push_str(&csv_line([stat, bin, v.to_string()]));
    }
    out.write("gof_observed.csv", &s)?;
    Ok((out, None))
}

fn cmd_ppc(st: &mut Settings, a: PpcArgs) -> CliResult<(Outputs, Option<u64>)> {
    let (y, x) = load_data(st, a.data)?;
    let name = st.get("model", a.model, "ame".into())?;
    let nsims = st.get("nsims", a.nsims, 1000)?;
    let mode: SpMode = st.parsed("sp-mode", a.sp_mode, "symmetric")?;
    if nsims < 20 {
        return usage("--nsims must be at least 20");
    }
    let (samples, seed) = match model_for(st, &name, a.k, &a.chain, &a.ame, &a.lsm)? {
        (CvModel::Ame(cfg), _) => (fit(&y, &x, &cfg)?, cfg.seed),
        (CvModel::Lsm(cfg), _) => (fit_lsm(&y, &x, &cfg)?, cfg.seed),
        (CvModel::Logit, _) => return usage("--model logit has no posterior-predictive check"),
    };
    let mut out = out_dir(st, a.out)?;
    let report = posterior_predictive_gof(&samples, &y, &x, nsims, &StatKind::all(mode), derive_seed(seed, 0x707063))?;
    out.write("ppc.csv", &report.to_csv())?;
    Ok((out, Some(seed)))
}

fn cmd_simstudy(st: &mut Settings, a: SimArgs) -> CliResult<(Outputs, Option<u64>)> {
    let kind: ScenarioKind = st.parsed("kind", a.kind, "egalitarian")?;
    let default_levels = kind.default_levels().iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
    let levels: Vec<f64> = parse_list("levels", &st.get("levels", a.levels, default_levels)?)?;
    let n = st.get("n", a.n, 50)?;
    let replicates = st.get("replicates", a.replicates, 10)?;
    let density = st.get("density", a.density, 0.2)?;
    let seed = st.get("seed", a.seed, 1)?;
    let budget_raw = st.get("budget", a.budget, "5000,1000,10".into())?;
    let b: Vec<usize> = parse_list("budget", &budget_raw)?;
    let [burn, kept, thin] = b[..] else {
        return usage(format!("--budget {budget_raw:?}: expected BURN,KEPT,THIN"));
    };
    if kept == 0 || thin == 0 {
        return usage("--budget needs KEPT >= 1 and THIN >= 1");
    }
    let scenarios: Vec<Scenario> = levels
        .iter()
        .map(|&level| Scenario { kind, level, n, density_target: density, replicates })
        .collect();
    for s in &scenarios {
        if let Err(e) = s.validate() {
            return usage(e.to_string());
        }
    }
    let mut out = out_dir(st, a.out)?;
    let table = run_comparison(&scenarios, FitBudget { burn, kept, thin }, seed)?;
    out.write("results.csv", &table.rows_csv())?;
    out.write("summary.csv", &table.summary_csv())?;
    let mut r = String::from("scenario,level,realised\n");
    for (i, v) in &table.realised {
        r.push_str(&csv_line([i.to_string(), scenarios[*i].level.to_string(), v.to_string()]));
    }
    out.write("realised.csv", &r)?;
    Ok((out, Some(seed)))
}

fn cmd_export(st: &mut Settings, a: ExportArgs) -> CliResult<(Outputs, Option<u64>)> {
    let path = st.required("multiplicative", a.multiplicative)?;
    let m = read_adjacency(&path, Family::Gaussian)?;
    let additive = match st.opt("additive", a.additive)? {
        Some(p) => {
            let add = read_adjacency(&p, Family::Gaussian)?;
            if add.labels() != m.labels() {
                return Err(Error::Dimension(format!("{p} and {path} have different node labels")).into());
            }
            add.cells().clone()
        }
        None => DMatrix::zeros(m.n(), m.n()),
    };
    let k = st.get("K", a.k, 2)?;
    let q = st.get("threshold-quantile", a.threshold_quantile, 0.9)?;
    let threshold = match st.opt("threshold-value", a.threshold_value)? {
        Some(v) => ExcessThreshold::Value(v),
        None if (0.0..=1.0).contains(&q) => ExcessThreshold::Quantile(q),
        None => return usage("--threshold-quantile must lie in [0, 1]"),
    };
    if k < 2 {
        return usage("--K must be at least 2 for factor geometry");
    }
    let mut out = out_dir(st, a.out)?;
    write_geometry(&mut out, "", m.cells(), &additive, m.labels(), k, threshold)?;
    Ok((out, None))
}

fn thread_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(t) = flag {
        return if t == 0 { usage("--threads must be at least 1") } else { Ok(t) };
    }
    match std::env::var("AME_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => usage(format!("AME_THREADS={v:?} is not a positive integer")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn dispatch(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let mut st = Settings::load(cli.config.as_deref())?;
    let (name, result) = match cli.command {
        Command::Fit(a) => ("fit", cmd_fit(&mut st, a)),
        Command::LsmFit(a) => ("lsm-fit", cmd_lsm(&mut st, a)),
        Command::LogitFit(a) => ("logit-fit", cmd_logit(&mut st, a)),
        Command::Cv(a) => ("cv", cmd_cv(&mut st, a)),
        Command::Gof(a) => ("gof", cmd_gof(&mut st, a)),
        Command::Ppc(a) => ("ppc", cmd_ppc(&mut st, a)),
        Command::Simstudy(a) => ("simstudy", cmd_simstudy(&mut st, a)),
        Command::ExportFactors(a) => ("export-factors", cmd_export(&mut st, a)),
    };
    let (out, seed) = result?;
    st.check_unused()?;
    out.finish(name, seed, &st)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> RunOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let fail = |code, message: String| RunOutcome { code, manifest: Vec::new(), message };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return fail(code, e.render().to_string());
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(CliError::Usage(m)) | Err(CliError::Core(Error::InvalidArgument(m))) => return fail(1, m),
        Err(CliError::Core(e)) => return fail(2, e.to_string()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return fail(3, format!("cannot start {threads} worker threads: {e}")),
    };
    match pool.install(|| dispatch(cli)) {
        Ok(manifest) => {
            let message = manifest.iter().map(|p| p.display().to_string() + "\n").collect();
            RunOutcome { code: 0, manifest, message }
        }
        Err(CliError::Usage(m)) => fail(1, format!("error: {m}\n\nRun `ame --help` for usage.\n")),
        Err(CliError::Core(e)) => fail(if e.is_numerical() { 3 } else { 2 }, format!("error: {e}\n")),
    }
}
