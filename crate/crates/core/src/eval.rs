//! Dyad-level cross-validation and ranking metrics (ROC, precision-recall, separation plots).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::ame::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::glmbase::fit_logit;
use crate::lsm::{fit_lsm, LsmConfig};
use crate::netdata::{DesignArray, Family, Network};
use crate::randkit::{derive_seed, SeededStream};

/// Fold index (1-based) of every ordered dyad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub n: usize,
    pub folds: usize,
    /// Ordered dyads in row-major order.
    pub dyads: Vec<(usize, usize)>,
    /// `fold[k]` is the fold of `dyads[k]`, in `1..=folds`.
    pub fold: Vec<usize>,
}

impl FoldAssignment {
    pub fn members(&self, s: usize) -> Vec<(usize, usize)> {
        self.dyads
            .iter()
            .zip(&self.fold)
            .filter(|(_, &f)| f == s)
            .map(|(&d, _)| d)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.fold {
            sizes[f - 1] += 1;
        }
        sizes
    }
}

/// Random balanced partition of the `n(n-1)` ordered dyads into `s` folds.
pub fn assign_folds(n: usize, s: usize, seed: u64) -> Result<FoldAssignment> {
    let total = n * n.saturating_sub(1);
    if s < 2 || s > total {
        return Err(Error::InvalidArgument(format!(
            "number of folds {s} must lie in 2..={total}"
        )));
    }
    let dyads: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut order: Vec<usize> = (0..total).collect();
    let mut stream = SeededStream::new(seed);
    order.shuffle(&mut stream);
    let mut fold = vec![0; total];
    for (pos, &idx) in order.iter().enumerate() {
        fold[idx] = pos % s + 1;
    }
    Ok(FoldAssignment {
        n,
        folds: s,
        dyads,
        fold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub sender: usize,
    pub receiver: usize,
    pub label: bool,
    pub score: f64,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    pub entries: Vec<Prediction>,
}

impl PredictionSet {
    pub fn from_pairs(labels: &[bool], scores: &[f64]) -> Self {
        PredictionSet {
            entries: labels
                .iter()
                .zip(scores)
                .enumerate()
                .map(|(k, (&label, &score))| Prediction {
                    sender: k,
                    receiver: k,
                    label,
                    score,
                    fold: 0,
                })
                .collect(),
        }
    }

    /// Every observed off-diagonal cell of `y` scored by `scores`.
    pub fn in_sample(y: &DMatrix<f64>, scores: &DMatrix<f64>) -> Self {
        let n = y.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && !y[(i, j)].is_nan() {
                    entries.push(Prediction {
                        sender: i,
                        receiver: j,
                        label: y[(i, j)] > 0.5,
                        score: scores[(i, j)],
                        fold: 0,
                    });
                }
            }
        }
        PredictionSet { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label).count();
        (pos, self.entries.len() - pos)
    }

    /// `(true positives, false positives)` after each distinct score threshold, descending.
    fn threshold_counts(&self) -> Vec<(usize, usize)> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| self.entries[b].score.total_cmp(&self.entries[a].score));
        let mut out = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (k, &i) in idx.iter().enumerate() {
            if self.entries[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            let last = k + 1 == idx.len()
                || self.entries[idx[k + 1]].score != self.entries[i].score;
            if last {
                out.push((tp, fp));
            }
        }
        out
    }
}

/// Which model a cross-validation run fits.
#[derive(Debug, Clone)]
pub enum CvModel {
    Ame(FitConfig),
    Lsm(LsmConfig),
    Logit,
}

/// Fits the model on each fold's complement and scores the held-out observed dyads.
///
/// Folds run in parallel; fold `s` uses the seed `derive_seed(seed, s)` for its sampler.
pub fn cross_validate(
    y: &Network,
    x: &DesignArray,
    model: &CvModel,
    folds: usize,
    seed: u64,
) -> Result<PredictionSet> {
    if y.family() != Family::Binary {
        return Err(Error::WrongFamily { expected: "binary" });
    }
    let assignment = assign_folds(y.n(), folds, seed)?;
    let per_fold: Vec<Result<Vec<Prediction>>> = (1..=folds)
        .into_par_iter()
        .map(|s| predict_fold(y, x, model, &assignment, s, derive_seed(seed, s as u64)))
        .collect();
    let mut entries = Vec::new();
    for r in per_fold {
        entries.extend(r?);
    }
    Ok(PredictionSet { entries })
}

/// Fits `model` with fold `s` masked and scores its observed dyads.
pub fn predict_fold(
    y: &Network,
    x: &DesignArray,
    model: &CvModel,
    assignment: &FoldAssignment,
    s: usize,
    seed: u64,
) -> Result<Vec<Prediction>> {
    let held = assignment.members(s);
    let train = y.masked(&held);
    let (mut ones, mut zeros) = (0, 0);
    for v in train.cells().iter().filter(|v| !v.is_nan()) {
        if *v > 0.5 {
            ones += 1;
        } else {
            zeros += 1;
        }
    }
    if ones == 0 || zeros == 0 {
        return Err(Error::UnfittableFold {
            fold: s,
            reason: format!("training outcomes are constant ({ones} ones, {zeros} zeros)"),
        });
    }
    let wrap = |e: Error| Error::UnfittableFold {
        fold: s,
        reason: e.to_string(),
    };
    let probs = match model {
        CvModel::Ame(cfg) => {
            let cfg = FitConfig {
                seed,
                keep_states: false,
                ..cfg.clone()
            };
            fit(&train, x, &cfg).and_then(|f| f.predict_proba()).map_err(wrap)?
        }
        CvModel::Lsm(cfg) => {
            let cfg = LsmConfig {
                seed,
                keep_states: false,
                ..cfg.clone()
            };
            fit_lsm(&train, x, &cfg).and_then(|f| f.predict_proba()).map_err(wrap)?
        }
        CvModel::Logit => fit_logit(&train, x).map_err(wrap)?.predict(x),
    };
    Ok(held
        .into_iter()
        .filter_map(|(i, j)| {
            y.get(i, j).map(|v| Prediction {
                sender: i,
                receiver: j,
                label: v > 0.5,
                score: probs[(i, j)],
                fold: s,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// `(FPR, TPR)` for ROC, `(recall, precision)` for PR.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn check_classes(preds: &PredictionSet, need_negative: bool) -> Result<(usize, usize)> {
    let (p, n) = preds.counts();
    if p == 0 || (need_negative && n == 0) {
        return Err(Error::InvalidArgument(format!(
            "curve needs both classes: {p} positives, {n} negatives"
        )));
    }
    if preds.entries.iter().any(|e| !e.score.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    Ok((p, n))
}

/// ROC curve over all distinct thresholds with its trapezoid area (ties give the half credit
/// of the Mann–Whitney statistic).
pub fn roc_points(preds: &PredictionSet) -> Result<Curve> {
    let (p, n) = check_classes(preds, true)?;
    let (pf, nf) = (p as f64, n as f64);
    let mut points = vec![(0.0, 0.0)];
    let mut auc = 0.0;
    let (mut last_tp, mut last_fp) = (0usize, 0usize);
    for (tp, fp) in preds.threshold_counts() {
        auc += (fp - last_fp) as f64 * (tp + last_tp) as f64 / 2.0;
        points.push((fp as f64 / nf, tp as f64 / pf));
        last_tp = tp;
        last_fp = fp;
    }
    Ok(Curve {
        points,
        auc: auc / (pf * nf),
    })
}

/// Precision–recall curve at every threshold. The area interpolates between achievable
/// points in true-positive counts: going from `(TP_a, FP_a)` to `(TP_b, FP_b)`, each extra
/// positive `x` carries `FP_a + x (FP_b - FP_a) / (TP_b - TP_a)` false positives, and the
/// area is the step sum of those precisions over recall increments of `1 / P`.
pub fn pr_points(preds: &PredictionSet) -> Result<Curve> {
    let (p, _) = check_classes(preds, false)?;
    let pf = p as f64;
    let mut points = Vec::new();
    let mut auc = 0.0;
    let (mut a_tp, mut a_fp) = (0usize, 0usize);
    for (tp, fp) in preds.threshold_counts() {
        let steps = tp - a_tp;
        let slope = if steps > 0 {
            (fp - a_fp) as f64 / steps as f64
        } else {
            0.0
        };
        for x in 1..=steps {
            let t = (a_tp + x) as f64;
            let f = a_fp as f64 + slope * x as f64;
            auc += t / (t + f) / pf;
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            1.0
        };
        points.push((tp as f64 / pf, precision));
        a_tp = tp;
        a_fp = fp;
    }
    Ok(Curve { points, auc })
}

/// `(rank, label, score)` sorted by ascending score; ties keep input order.
pub fn separation_data(preds: &PredictionSet) -> Vec<(usize, bool, f64)> {
    let mut idx: Vec<usize> = (0..preds.entries.len()).collect();
    idx.sort_by(|&a, &b| preds.entries[a].score.total_cmp(&preds.entries[b].score));
    idx.into_iter()
        .enumerate()
        .map(|(r, i)| (r + 1, preds.entries[i].label, preds.entries[i].score))
        .collect()
}

/// In-sample ROC area over the observed off-diagonal cells of `y`.
pub fn roc_auc_matrix(y: &DMatrix<f64>, scores: &DMatrix<f64>) -> Result<f64> {
    Ok(roc_points(&PredictionSet::in_sample(y, scores))?.auc)
}

/// In-sample precision-recall area over the observed off-diagonal cells of `y`.
pub fn pr_auc_matrix(y: &DMatrix<f64>, scores: &DMatrix<f64>) -> Result<f64> {
    Ok(pr_points(&PredictionSet::in_sample(y, scores))?.auc)
}
