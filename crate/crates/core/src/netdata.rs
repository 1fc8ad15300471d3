//! Network and covariate data model, CSV ingestion and the regression design array.
//!
//! Missing cells are stored as `NaN`. The diagonal of every sociomatrix and of every
//! dyadic slab is always missing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Literal used for missing values in every table read or written by this crate.
pub const NA: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// 0/1 ties, probit link.
    Binary,
    /// Continuous ties, identity link.
    Gaussian,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bin" | "probit" => Ok(Family::Binary),
            "gaussian" | "normal" | "nrm" => Ok(Family::Gaussian),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Binary => "binary",
            Family::Gaussian => "gaussian",
        })
    }
}

/// Directed relational data on `n` labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    labels: Vec<String>,
    cells: DMatrix<f64>,
    family: Family,
}

impl Network {
    /// Validates the invariants and forces the diagonal to missing.
    pub fn new(labels: Vec<String>, mut cells: DMatrix<f64>, family: Family) -> Result<Self> {
        if cells.nrows() != cells.ncols() {
            return Err(Error::NonSquare {
                rows: cells.nrows(),
                cols: cells.ncols(),
            });
        }
        let n = cells.nrows();
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for a {n}x{n} matrix",
                labels.len()
            )));
        }
        check_unique(&labels)?;
        if n < 3 {
            return Err(Error::TooFewNodes(n));
        }
        for i in 0..n {
            cells[(i, i)] = f64::NAN;
        }
        if family == Family::Binary {
            for i in 0..n {
                for j in 0..n {
                    let v = cells[(i, j)];
                    if !v.is_nan() && v != 0.0 && v != 1.0 {
                        return Err(Error::NotBinary {
                            row: labels[i].clone(),
                            col: labels[j].clone(),
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(Network {
            labels,
            cells,
            family,
        })
    }

    /// Convenience constructor labelling nodes `1..=n`.
    pub fn from_matrix(cells: DMatrix<f64>, family: Family) -> Result<Self> {
        let labels = (1..=cells.nrows()).map(|i| i.to_string()).collect();
        Network::new(labels, cells, family)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Raw cells with `NaN` for missing entries.
    pub fn cells(&self) -> &DMatrix<f64> {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.cells[(i, j)];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        !self.cells[(i, j)].is_nan()
    }

    pub fn observed_count(&self) -> usize {
        self.cells.iter().filter(|v| !v.is_nan()).count()
    }

    /// Mean over observed off-diagonal cells, `None` if nothing is observed.
    pub fn mean(&self) -> Option<f64> {
        let (sum, count) = self
            .cells
            .iter()
            .filter(|v| !v.is_nan())
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Copy of the network with the listed ordered dyads set to missing.
    pub fn masked(&self, dyads: &[(usize, usize)]) -> Network {
        let mut out = self.clone();
        for &(i, j) in dyads {
            out.cells[(i, j)] = f64::NAN;
        }
        out
    }

    /// Copy with one cell replaced; validation of the family domain is repeated.
    pub fn with_cell(&self, i: usize, j: usize, value: f64) -> Result<Network> {
        let mut cells = self.cells.clone();
        cells[(i, j)] = value;
        Network::new(self.labels.clone(), cells, self.family)
    }

    /// Relabels nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Network {
        let n = self.n();
        let cells = DMatrix::from_fn(n, n, |i, j| self.cells[(perm[i], perm[j])]);
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        Network {
            labels,
            cells,
            family: self.family,
        }
    }
}

fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn parse_cell(raw: &str) -> Option<f64> {
    let t = raw.trim();
    if t.eq_ignore_ascii_case(NA) || t.is_empty() {
        None
    } else {
        t.parse().ok()
    }
}

fn format_cell(v: f64) -> String {
    if v.is_nan() {
        NA.to_string()
    } else {
        format!("{v}")
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Reads a square adjacency matrix: a header row of labels and a first column of labels.
pub fn read_adjacency(path: impl AsRef<Path>, family: Family) -> Result<Network> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::table(path, e.to_string()))?
        .clone();
    let col_labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut row_labels = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::table(path, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != col_labels.len() + 1 {
            return Err(Error::NonSquare {
                rows: rec.len().saturating_sub(1),
                cols: col_labels.len(),
            });
        }
        row_labels.push(rec[0].to_string());
        for (k, raw) in rec.iter().skip(1).enumerate() {
            let v = match parse_cell(raw) {
                Some(v) => v,
                None if raw.trim().eq_ignore_ascii_case(NA) || raw.trim().is_empty() => f64::NAN,
                None => {
                    return Err(Error::NonNumeric {
                        node: rec[0].to_string(),
                        variable: col_labels[k].clone(),
                        value: raw.to_string(),
                    })
                }
            };
            values.push(v);
        }
    }
    if row_labels.len() != col_labels.len() {
        return Err(Error::NonSquare {
            rows: row_labels.len(),
            cols: col_labels.len(),
        });
    }
    check_unique(&row_labels)?;
    if row_labels != col_labels {
        return Err(Error::table(
            path,
            "row labels and column labels differ in content or order",
        ));
    }
    let n = row_labels.len();
    let cells = DMatrix::from_row_slice(n, n, &values);
    Network::new(row_labels, cells, family)
}

/// Labelled square matrix in the adjacency file format.
pub fn matrix_csv(labels: &[String], cells: &DMatrix<f64>) -> String {
    let mut out = String::new();
    out.push_str("node");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        out.push_str(l);
        for j in 0..labels.len() {
            out.push(',');
            out.push_str(&format_cell(cells[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Writes a sociomatrix in the format accepted by [`read_adjacency`].
pub fn write_matrix(path: impl AsRef<Path>, labels: &[String], cells: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let out = matrix_csv(labels, cells);
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_adjacency(path: impl AsRef<Path>, net: &Network) -> Result<()> {
    write_matrix(path, net.labels(), net.cells())
}

/// Node-level covariates aligned to a network's label order.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalCovariates {
    pub labels: Vec<String>,
    pub names: Vec<String>,
    /// `n x p` matrix, one row per node.
    pub values: DMatrix<f64>,
}

impl NodalCovariates {
    pub fn new(labels: Vec<String>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != labels.len() || values.ncols() != names.len() {
            return Err(Error::Dimension(format!(
                "nodal values are {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                labels.len(),
                names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "nodal covariates may not contain missing values".into(),
            ));
        }
        Ok(NodalCovariates {
            labels,
            names,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Warnings for columns that are collinear with the intercept or with each other.
    ///
    /// The check is a numerical rank test of `[1 | values]` after column scaling.
    pub fn collinearity_warnings(&self) -> Vec<String> {
        let n = self.n();
        let p = self.names.len();
        let mut warnings = Vec::new();
        for (k, name) in self.names.iter().enumerate() {
            let col = self.values.column(k);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                warnings.push(format!(
                    "nodal covariate {name:?} is constant and collinear with the intercept"
                ));
            }
        }
        if warnings.is_empty() && p > 0 {
            let mut m = DMatrix::from_element(n, p + 1, 1.0);
            for k in 0..p {
                let col = self.values.column(k);
                let scale = col.norm().max(f64::MIN_POSITIVE);
                for i in 0..n {
                    m[(i, k + 1)] = col[i] / scale;
                }
            }
            m.column_mut(0).scale_mut(1.0 / (n as f64).sqrt());
            if full_rank(&m) < p + 1 {
                warnings.push("nodal covariates together with the intercept are rank deficient".into());
            }
        }
        warnings
    }
}

fn full_rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    svd.singular_values
        .iter()
        .filter(|&&s| s > smax * 1e-10 * m.nrows().max(m.ncols()) as f64)
        .count()
}

/// Reads a wide table `label,var1,...,varp` and permutes rows to match `labels`.
pub fn read_nodal_covariates(path: impl AsRef<Path>, labels: &[String]) -> Result<NodalCovariates> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::table(path, e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows: HashMap<String, Vec<f64>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::table(path, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != names.len() + 1 {
            return Err(Error::table(path, format!("row for {:?} has wrong width", &rec[0])));
        }
        let node = rec[0].to_string();
        let mut vals = Vec::with_capacity(names.len());
        for (k, raw) in rec.iter().skip(1).enumerate() {
            match parse_cell(raw) {
                Some(v) => vals.push(v),
                None => {
                    return Err(Error::NonNumeric {
                        node,
                        variable: names[k].clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        if rows.insert(node.clone(), vals).is_some() {
            return Err(Error::DuplicateLabel(node));
        }
    }
    let n = labels.len();
    let mut values = DMatrix::zeros(n, names.len());
    for (i, l) in labels.iter().enumerate() {
        let row = rows.get(l).ok_or_else(|| Error::MissingNode(l.clone()))?;
        for (k, v) in row.iter().enumerate() {
            values[(i, k)] = *v;
        }
    }
    NodalCovariates::new(labels.to_vec(), names, values)
}

/// Dyad-level covariates, one `n x n` slab per variable with missing diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCovariates {
    pub names: Vec<String>,
    pub values: Vec<DMatrix<f64>>,
}

impl DyadicCovariates {
    pub fn new(names: Vec<String>, mut values: Vec<DMatrix<f64>>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} dyadic names for {} slabs",
                names.len(),
                values.len()
            )));
        }
        if let Some(first) = values.first() {
            let n = first.nrows();
            for (name, slab) in names.iter().zip(&values) {
                if slab.nrows() != n || slab.ncols() != n {
                    return Err(Error::Dimension(format!("dyadic slab {name:?} is not {n}x{n}")));
                }
            }
        }
        for slab in &mut values {
            let n = slab.nrows();
            for i in 0..n {
                slab[(i, i)] = f64::NAN;
            }
            for i in 0..n {
                for j in 0..n {
                    if i != j && !slab[(i, j)].is_finite() {
                        return Err(Error::InvalidArgument(
                            "dyadic covariates may not contain missing values".into(),
                        ));
                    }
                }
            }
        }
        Ok(DyadicCovariates { names, values })
    }

    pub fn n(&self) -> Option<usize> {
        self.values.first().map(|m| m.nrows())
    }
}

/// Reads a long table `sender,receiver,var1,...`; every ordered pair must be present once.
pub fn read_dyadic_covariates(path: impl AsRef<Path>, labels: &[String]) -> Result<DyadicCovariates> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::table(path, e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(Error::table(path, "expected sender and receiver columns"));
    }
    let names: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let n = labels.len();
    let mut slabs = vec![DMatrix::from_element(n, n, f64::NAN); names.len()];
    let mut seen = vec![false; n * n];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::table(path, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != names.len() + 2 {
            return Err(Error::table(path, "row has wrong width"));
        }
        let s = *index
            .get(&rec[0])
            .ok_or_else(|| Error::UnknownNode(rec[0].to_string()))?;
        let r = *index
            .get(&rec[1])
            .ok_or_else(|| Error::UnknownNode(rec[1].to_string()))?;
        if s == r {
            return Err(Error::SelfPair(rec[0].to_string()));
        }
        if std::mem::replace(&mut seen[s * n + r], true) {
            return Err(Error::DuplicatePair {
                sender: rec[0].to_string(),
                receiver: rec[1].to_string(),
            });
        }
        for (k, raw) in rec.iter().skip(2).enumerate() {
            slabs[k][(s, r)] = parse_cell(raw).ok_or_else(|| Error::NonNumeric {
                node: format!("{}->{}", &rec[0], &rec[1]),
                variable: names[k].clone(),
                value: raw.to_string(),
            })?;
        }
    }
    for s in 0..n {
        for r in 0..n {
            if s != r && !seen[s * n + r] {
                return Err(Error::MissingPair {
                    sender: labels[s].clone(),
                    receiver: labels[r].clone(),
                });
            }
        }
    }
    DyadicCovariates::new(names, slabs)
}

/// How a nodal covariate enters the dyadic regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Sender,
    Receiver,
    Both,
}

impl FromStr for NodeRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sender" | "row" | "s" => Ok(NodeRole::Sender),
            "receiver" | "col" | "r" => Ok(NodeRole::Receiver),
            "both" | "b" => Ok(NodeRole::Both),
            other => Err(Error::InvalidArgument(format!("unknown node role {other:?}"))),
        }
    }
}

/// The `n x n x (p+1)` regressor stack; slab 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignArray {
    names: Vec<String>,
    slabs: Vec<DMatrix<f64>>,
}

impl DesignArray {
    pub fn intercept_only(n: usize) -> Self {
        DesignArray {
            names: vec!["intercept".into()],
            slabs: vec![intercept_slab(n)],
        }
    }

    /// Intercept followed by the given dyadic slabs.
    pub fn with_dyadic(n: usize, names: Vec<String>, slabs: Vec<DMatrix<f64>>) -> Result<Self> {
        let dyadic = DyadicCovariates::new(names, slabs)?;
        build_design_array(n, None, &[], Some(&dyadic))
    }

    pub fn n(&self) -> usize {
        self.slabs[0].nrows()
    }

    /// Number of regressors including the intercept.
    pub fn p(&self) -> usize {
        self.slabs.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn slabs(&self) -> &[DMatrix<f64>] {
        &self.slabs
    }

    pub fn slab(&self, k: usize) -> &DMatrix<f64> {
        &self.slabs[k]
    }

    /// `beta' X_ij` for every off-diagonal cell; diagonal is `NaN`.
    pub fn linear_predictor(&self, beta: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut out = DMatrix::zeros(n, n);
        for (slab, b) in self.slabs.iter().zip(beta) {
            out.zip_apply(slab, |o, x| *o += b * x);
        }
        for i in 0..n {
            out[(i, i)] = f64::NAN;
        }
        out
    }

    pub fn permuted(&self, perm: &[usize]) -> DesignArray {
        let n = self.n();
        DesignArray {
            names: self.names.clone(),
            slabs: self
                .slabs
                .iter()
                .map(|s| DMatrix::from_fn(n, n, |i, j| s[(perm[i], perm[j])]))
                .collect(),
        }
    }
}

fn intercept_slab(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        m[(i, i)] = f64::NAN;
    }
    m
}

/// Expands nodal covariates into sender/receiver slabs and stacks them with the dyadic ones.
///
/// Slab order is intercept, sender-expanded, receiver-expanded, dyadic. A `Both` variable
/// contributes one sender and one receiver slab.
pub fn build_design_array(
    n: usize,
    nodal: Option<&NodalCovariates>,
    roles: &[NodeRole],
    dyadic: Option<&DyadicCovariates>,
) -> Result<DesignArray> {
    let mut names = vec!["intercept".to_string()];
    let mut slabs = vec![intercept_slab(n)];
    if let Some(nodal) = nodal {
        if nodal.n() != n {
            return Err(Error::Dimension(format!(
                "nodal covariates cover {} nodes, network has {n}",
                nodal.n()
            )));
        }
        if roles.len() != nodal.names.len() {
            return Err(Error::Dimension(format!(
                "{} roles for {} nodal variables",
                roles.len(),
                nodal.names.len()
            )));
        }
        let mut receivers = Vec::new();
        for (k, (name, role)) in nodal.names.iter().zip(roles).enumerate() {
            let col = nodal.values.column(k);
            if matches!(role, NodeRole::Sender | NodeRole::Both) {
                names.push(format!("{name}.sender"));
                let mut m = DMatrix::from_fn(n, n, |i, _| col[i]);
                m.fill_diagonal(f64::NAN);
                slabs.push(m);
            }
            if matches!(role, NodeRole::Receiver | NodeRole::Both) {
                let mut m = DMatrix::from_fn(n, n, |_, j| col[j]);
                m.fill_diagonal(f64::NAN);
                receivers.push((format!("{name}.receiver"), m));
            }
        }
        for (name, m) in receivers {
            names.push(name);
            slabs.push(m);
        }
    } else if !roles.is_empty() {
        return Err(Error::Dimension("roles given without nodal covariates".into()));
    }
    if let Some(dyadic) = dyadic {
        if let Some(dn) = dyadic.n() {
            if dn != n {
                return Err(Error::Dimension(format!(
                    "dyadic covariates cover {dn} nodes, network has {n}"
                )));
            }
        }
        for (name, slab) in dyadic.names.iter().zip(&dyadic.values) {
            names.push(name.clone());
            slabs.push(slab.clone());
        }
    }
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(Error::NameCollision(name.clone()));
        }
    }
    Ok(DesignArray { names, slabs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn all_na_adjacency_has_no_observed_cells() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "y.csv", ",a,b,c\na,NA,NA,NA\nb,NA,NA,NA\nc,NA,NA,NA\n");
        let net = read_adjacency(&p, Family::Binary).unwrap();
        assert_eq!(net.n(), 3);
        assert_eq!(net.observed_count(), 0);
        assert!(net.mean().is_none());
    }

    #[test]
    fn binary_domain_violation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "y.csv", ",a,b,c\na,NA,2,0\nb,1,NA,0\nc,0,0,NA\n");
        let err = read_adjacency(&p, Family::Binary).unwrap_err();
        assert!(matches!(err, Error::NotBinary { value, .. } if value == 2.0));
        assert!(read_adjacency(&p, Family::Gaussian).is_ok());
    }

    #[test]
    fn diagonal_is_forced_missing_and_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "y.csv", ",a,b,c\na,1,1,0\nb,1,1,0\nc,0,0,1\n");
        let net = read_adjacency(&p, Family::Binary).unwrap();
        assert!((0..3).all(|i| net.get(i, i).is_none()));
        let p = write_tmp(&dir, "d.csv", ",a,a,c\na,NA,1,0\na,1,NA,0\nc,0,0,NA\n");
        assert!(matches!(
            read_adjacency(&p, Family::Binary),
            Err(Error::DuplicateLabel(_))
        ));
        let p = write_tmp(&dir, "ns.csv", ",a,b,c\na,NA,1,0\nb,1,NA,0\n");
        assert!(matches!(
            read_adjacency(&p, Family::Binary),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn adjacency_round_trip_preserves_na_placement() {
        let dir = tempfile::tempdir().unwrap();
        let body = "node,x,y,z,w\nx,NA,1,0,NA\ny,0,NA,1,1\nz,NA,0,NA,1\nw,1,1,0,NA\n";
        let p = write_tmp(&dir, "y.csv", body);
        let net = read_adjacency(&p, Family::Binary).unwrap();
        let q = dir.path().join("out.csv");
        write_adjacency(&q, &net).unwrap();
        assert_eq!(std::fs::read_to_string(&q).unwrap(), body);
        let again = read_adjacency(&q, Family::Binary).unwrap();
        assert_eq!(format!("{:?}", again.cells()), format!("{:?}", net.cells()));
    }

    #[test]
    fn nodal_rows_are_permuted_to_network_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "x.csv", "node,ngo,size\nc,0,3\na,1,1\nb,0,2\n");
        let cov = read_nodal_covariates(&p, &labels(&["a", "b", "c"])).unwrap();
        assert_eq!(cov.values.column(0).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(cov.values.column(1).as_slice(), &[1.0, 2.0, 3.0]);
        assert!(cov.collinearity_warnings().is_empty());
    }

    #[test]
    fn nodal_missing_node_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "x.csv", "node,ngo\na,1\nb,0\n");
        match read_nodal_covariates(&p, &labels(&["a", "b", "k"])) {
            Err(Error::MissingNode(k)) => assert_eq!(k, "k"),
            other => panic!("unexpected {other:?}"),
        }
        let p = write_tmp(&dir, "y.csv", "node,ngo\na,1\nb,yes\nk,0\n");
        assert!(matches!(
            read_nodal_covariates(&p, &labels(&["a", "b", "k"])),
            Err(Error::NonNumeric { .. })
        ));
    }

    #[test]
    fn constant_nodal_column_is_accepted_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "x.csv", "node,one\na,1\nb,1\nc,1\n");
        let cov = read_nodal_covariates(&p, &labels(&["a", "b", "c"])).unwrap();
        // Gram matrix of [1 | one] has determinant n*n - n*n = 0.
        let m = DMatrix::from_fn(3, 2, |i, k| if k == 0 { 1.0 } else { cov.values[(i, 0)] });
        let gram = m.transpose() * &m;
        assert_eq!(gram.determinant(), 0.0);
        assert_eq!(cov.collinearity_warnings().len(), 1);
    }

    #[test]
    fn collinear_pair_is_warned_via_rank() {
        let vals = DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 5.0, 10.0]);
        let cov = NodalCovariates::new(labels(&["a", "b", "c", "d"]), labels(&["u", "v"]), vals)
            .unwrap();
        let m = DMatrix::from_fn(4, 3, |i, k| if k == 0 { 1.0 } else { cov.values[(i, k - 1)] });
        let det = (m.transpose() * &m).determinant();
        assert!(det.abs() < 1e-9);
        assert_eq!(cov.collinearity_warnings().len(), 1);
    }

    #[test]
    fn dyadic_long_file_reads_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let l = labels(&["a", "b", "c"]);
        let mut body = String::from("sender,receiver,one\n");
        for s in &l {
            for r in &l {
                if s != r {
                    body.push_str(&format!("{s},{r},1\n"));
                }
            }
        }
        let p = write_tmp(&dir, "d.csv", &body);
        let cov = read_dyadic_covariates(&p, &l).unwrap();
        assert_eq!(cov.values.len(), 1);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!(cov.values[0][(i, j)].is_nan());
                } else {
                    assert_eq!(cov.values[0][(i, j)], 1.0);
                }
            }
        }
        let omitted: String = body.lines().filter(|l| *l != "b,c,1").collect::<Vec<_>>().join("\n");
        let p = write_tmp(&dir, "m.csv", &omitted);
        match read_dyadic_covariates(&p, &l) {
            Err(Error::MissingPair { sender, receiver }) => {
                assert_eq!((sender.as_str(), receiver.as_str()), ("b", "c"))
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = write_tmp(&dir, "s.csv", &format!("{body}a,a,1\n"));
        assert!(matches!(read_dyadic_covariates(&p, &l), Err(Error::SelfPair(_))));
    }

    #[test]
    fn sender_and_receiver_slabs_replicate_nodal_values() {
        let nodal = NodalCovariates::new(
            labels(&["a", "b", "c"]),
            labels(&["ngo", "gov"]),
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
        )
        .unwrap();
        let x = build_design_array(3, Some(&nodal), &[NodeRole::Sender, NodeRole::Both], None)
            .unwrap();
        assert_eq!(
            x.names(),
            &["intercept", "ngo.sender", "gov.sender", "gov.receiver"]
        );
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                assert_eq!(x.slab(0)[(i, j)], 1.0);
                assert_eq!(x.slab(1)[(i, j)], nodal.values[(i, 0)]);
                assert_eq!(x.slab(3)[(i, j)], nodal.values[(j, 1)]);
            }
        }
    }

    #[test]
    fn design_without_covariates_is_intercept_only() {
        let x = build_design_array(5, None, &[], None).unwrap();
        assert_eq!(x.p(), 1);
        let off: Vec<f64> = x.slab(0).iter().copied().filter(|v| !v.is_nan()).collect();
        assert_eq!(off.len(), 20);
        assert_eq!(off.iter().sum::<f64>() / off.len() as f64, 1.0);
    }

    #[test]
    fn expanded_name_collision_is_an_error() {
        let nodal = NodalCovariates::new(
            labels(&["a", "b", "c"]),
            labels(&["x"]),
            DMatrix::from_element(3, 1, 1.0),
        )
        .unwrap();
        let dy = DyadicCovariates::new(
            labels(&["x.sender"]),
            vec![DMatrix::from_element(3, 3, 0.5)],
        )
        .unwrap();
        assert!(matches!(
            build_design_array(3, Some(&nodal), &[NodeRole::Sender], Some(&dy)),
            Err(Error::NameCollision(_))
        ));
    }

    #[test]
    fn design_is_permutation_equivariant() {
        let nodal = NodalCovariates::new(
            labels(&["a", "b", "c", "d"]),
            labels(&["s"]),
            DMatrix::from_column_slice(4, 1, &[0.3, -1.0, 2.0, 0.5]),
        )
        .unwrap();
        let dy = DyadicCovariates::new(
            labels(&["w"]),
            vec![DMatrix::from_fn(4, 4, |i, j| (i * 4 + j) as f64)],
        )
        .unwrap();
        let x = build_design_array(4, Some(&nodal), &[NodeRole::Both], Some(&dy)).unwrap();
        let perm = [2, 0, 3, 1];
        let nodal_p = NodalCovariates::new(
            perm.iter().map(|&p| nodal.labels[p].clone()).collect(),
            nodal.names.clone(),
            DMatrix::from_fn(4, 1, |i, _| nodal.values[(perm[i], 0)]),
        )
        .unwrap();
        let dy_p = DyadicCovariates::new(
            dy.names.clone(),
            vec![DMatrix::from_fn(4, 4, |i, j| dy.values[0][(perm[i], perm[j])])],
        )
        .unwrap();
        let xp = build_design_array(4, Some(&nodal_p), &[NodeRole::Both], Some(&dy_p)).unwrap();
        let expect = x.permuted(&perm);
        for k in 0..x.p() {
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert_eq!(xp.slab(k)[(i, j)], expect.slab(k)[(i, j)]);
                    }
                }
            }
        }
    }
}
