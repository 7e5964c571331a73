//! Model container, training entry points, evaluation and feature ranking.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::condprob::{train_condprob, CondProbParams};
use super::logistic::{train_logistic, LogisticParams};
use super::platt::PlattSigmoid;
use super::svm::{train_svm, PolyKernel, SmoSettings, SvmParams};
use super::{Feature, FeatureVector, GapEvent};
use crate::error::{Error, Result};
use crate::metrics::{classification_metrics_from_probs, ClassificationReport};
use crate::sim::derive_seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Smallest labeled set accepted by [`train`].
pub const MIN_EVENTS: usize = 50;
const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmPoly3,
    Logistic,
    CondProb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::SvmPoly3, ModelKind::Logistic, ModelKind::CondProb];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SvmPoly3 => "svm_poly3",
            ModelKind::Logistic => "logistic",
            ModelKind::CondProb => "cond_prob",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "svm" | "svm_poly3" => Ok(ModelKind::SvmPoly3),
            "logistic" => Ok(ModelKind::Logistic),
            "condprob" | "cond_prob" => Ok(ModelKind::CondProb),
            _ => Err(format!("unknown model kind {s:?}")),
        }
    }
}

/// Per-feature z-score statistics from the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let d = rows.first().map_or(0, Vec::len);
        let mean: Vec<f64> = (0..d).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|k| {
                let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                // a constant column carries no information; keep it finite
                if s > 1e-12 * mean[k].abs().max(1.0) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Normalization { mean, std }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    SvmPoly3 {
        svm: SvmParams,
        platt: PlattSigmoid,
    },
    Logistic(LogisticParams),
    CondProb(CondProbParams),
}

/// A trained, immutable gap-acceptance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapModel {
    pub version: u32,
    pub features: Vec<Feature>,
    pub normalization: Normalization,
    pub params: ModelParams,
}

impl GapModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::SvmPoly3 { .. } => ModelKind::SvmPoly3,
            ModelParams::Logistic(_) => ModelKind::Logistic,
            ModelParams::CondProb(_) => ModelKind::CondProb,
        }
    }

    /// Probability that the gap is accepted, in `(0, 1)`.
    pub fn predict_probability(&self, f: &FeatureVector) -> f64 {
        let z = self.normalization.apply(&f.select(&self.features));
        match &self.params {
            ModelParams::SvmPoly3 { svm, platt } => platt.probability(svm.decision_value(&z)),
            ModelParams::Logistic(p) => p.probability(&z),
            ModelParams::CondProb(p) => p.probability(&z),
        }
    }

    /// Raw SVM decision value, `None` for the other kinds.
    pub fn decision_value(&self, f: &FeatureVector) -> Option<f64> {
        match &self.params {
            ModelParams::SvmPoly3 { svm, .. } => {
                Some(svm.decision_value(&self.normalization.apply(&f.select(&self.features))))
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GapModel = serde_json::from_str(s).map_err(|e| Error::Data(format!("model file: {e}")))?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.version
            )));
        }
        if m.normalization.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Data("model normalization has non-positive std".into()));
        }
        Ok(m)
    }
}

/// Anything that maps gap features to a crossing probability.
pub trait CrossingModel: Sync {
    fn crossing_probability(&self, f: &FeatureVector) -> f64;
}

impl CrossingModel for GapModel {
    fn crossing_probability(&self, f: &FeatureVector) -> f64 {
        self.predict_probability(f)
    }
}

/// Fixed probability regardless of features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel(pub f64);

impl CrossingModel for ConstantModel {
    fn crossing_probability(&self, _: &FeatureVector) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub svm_c: f64,
    /// Kernel scale; `None` uses `1 / (n_features · variance)` on z-scored data.
    pub svm_gamma: Option<f64>,
    pub svm_coef0: f64,
    pub svm_tolerance: f64,
    pub svm_max_iter: usize,
    pub platt_folds: usize,
    pub logistic_l2: f64,
    pub logistic_max_iter: usize,
    pub condprob_bins: usize,
    pub condprob_alpha: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            svm_c: 1.0,
            svm_gamma: None,
            svm_coef0: 1.0,
            svm_tolerance: 1e-3,
            svm_max_iter: 10_000_000,
            platt_folds: 5,
            logistic_l2: 1e-2,
            logistic_max_iter: 100,
            condprob_bins: 10,
            condprob_alpha: 1.0,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.svm_c > 0.0) {
            return Err(Error::invalid("svm_c", "must be > 0"));
        }
        if self.svm_gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::invalid("svm_gamma", "must be > 0"));
        }
        if self.platt_folds < 2 {
            return Err(Error::invalid("platt_folds", "must be >= 2"));
        }
        if !(self.logistic_l2 >= 0.0) {
            return Err(Error::invalid("logistic_l2", "must be >= 0"));
        }
        if self.condprob_bins == 0 || !(self.condprob_alpha >= 0.0) {
            return Err(Error::invalid("condprob_bins", "need >= 1 bin and alpha >= 0"));
        }
        Ok(())
    }
}

fn labeled(events: &[GapEvent]) -> Vec<&GapEvent> {
    events.iter().filter(|e| e.label.is_labeled()).collect()
}

/// Deterministic 80/20 split, stratified by label. Undetermined events are
/// dropped.
pub fn split_events(events: &[GapEvent], seed: u64) -> (Vec<GapEvent>, Vec<GapEvent>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5e11, 0));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for accepted in [true, false] {
        let mut class: Vec<&GapEvent> = labeled(events)
            .into_iter()
            .filter(|e| e.is_accepted() == accepted)
            .collect();
        class.shuffle(&mut rng);
        let n_test = (class.len() as f64 * TEST_FRACTION).round() as usize;
        test.extend(class[..n_test].iter().map(|e| (*e).clone()));
        train.extend(class[n_test..].iter().map(|e| (*e).clone()));
    }
    (train, test)
}

fn design(events: &[GapEvent], features: &[Feature]) -> (Vec<Vec<f64>>, Vec<bool>) {
    let x = events.iter().map(|e| e.features.select(features)).collect();
    let y = events.iter().map(GapEvent::is_accepted).collect();
    (x, y)
}

fn smo(settings: &TrainSettings) -> SmoSettings {
    SmoSettings {
        c: settings.svm_c,
        eps: settings.svm_tolerance,
        max_iter: settings.svm_max_iter,
    }
}

/// Fits a model of `kind` on already-split training events.
pub fn train_on(
    kind: ModelKind,
    train_events: &[GapEvent],
    features: &[Feature],
    settings: &TrainSettings,
    seed: u64,
) -> Result<GapModel> {
    settings.validate()?;
    if features.is_empty() {
        return Err(Error::invalid("features", "at least one feature required"));
    }
    let (raw, y) = design(train_events, features);
    let n_pos = y.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == y.len() {
        return Err(Error::SingleClass(y.len()));
    }
    let normalization = Normalization::fit(&raw);
    let x: Vec<Vec<f64>> = raw.iter().map(|r| normalization.apply(r)).collect();

    let params = match kind {
        ModelKind::SvmPoly3 => {
            // z-scored features have unit variance
            let gamma = settings.svm_gamma.unwrap_or(1.0 / features.len() as f64);
            let kernel = PolyKernel {
                gamma,
                coef0: settings.svm_coef0,
                degree: 3,
            };
            let oof = out_of_fold_decisions(&x, &y, kernel, settings, seed)?;
            let platt = PlattSigmoid::fit(&oof, &y);
            let svm = train_svm(&x, &y, kernel, smo(settings))?;
            ModelParams::SvmPoly3 { svm, platt }
        }
        ModelKind::Logistic => {
            ModelParams::Logistic(train_logistic(&x, &y, settings.logistic_l2, settings.logistic_max_iter)?)
        }
        ModelKind::CondProb => ModelParams::CondProb(train_condprob(
            &x,
            &y,
            settings.condprob_bins,
            settings.condprob_alpha,
        )?),
    };
    Ok(GapModel {
        version: MODEL_FORMAT_VERSION,
        features: features.to_vec(),
        normalization,
        params,
    })
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xf01d, 0)));
    let mut fold = vec![0; n];
    for (rank, &i) in idx.iter().enumerate() {
        fold[i] = rank % folds;
    }
    fold
}

/// Decision values for every training row from an SVM that did not see it.
fn out_of_fold_decisions(
    x: &[Vec<f64>],
    y: &[bool],
    kernel: PolyKernel,
    settings: &TrainSettings,
    seed: u64,
) -> Result<Vec<f64>> {
    let folds = settings.platt_folds.min(x.len());
    let fold = fold_assignment(x.len(), folds, seed);
    let mut out = vec![0.0; x.len()];
    for k in 0..folds {
        let (mut fx, mut fy) = (Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold[i] != k {
                fx.push(x[i].clone());
                fy.push(y[i]);
            }
        }
        let n_pos = fy.iter().filter(|&&l| l).count();
        if n_pos == 0 || n_pos == fy.len() {
            // a degenerate fold predicts its only class
            let s = if n_pos == 0 { -1.0 } else { 1.0 };
            (0..x.len()).filter(|&i| fold[i] == k).for_each(|i| out[i] = s);
            continue;
        }
        let m = train_svm(&fx, &fy, kernel, smo(settings))?;
        for i in 0..x.len() {
            if fold[i] == k {
                out[i] = m.decision_value(&x[i]);
            }
        }
    }
    Ok(out)
}

/// Splits, trains on the 80 % part and returns the model with the held-out 20 %.
pub fn train(
    kind: ModelKind,
    events: &[GapEvent],
    split_seed: u64,
    settings: &TrainSettings,
) -> Result<(GapModel, Vec<GapEvent>)> {
    let n = labeled(events).len();
    if n < MIN_EVENTS {
        return Err(Error::TooFewEvents {
            got: n,
            need: MIN_EVENTS,
        });
    }
    let (train_set, test_set) = split_events(events, split_seed);
    let model = train_on(kind, &train_set, &Feature::ALL, settings, split_seed)?;
    Ok((model, test_set))
}

/// Accuracy, precision, recall and F1 of the accepted class at threshold 0.5.
pub fn evaluate<M: CrossingModel + ?Sized>(model: &M, test: &[GapEvent]) -> Result<ClassificationReport> {
    let test = labeled(test);
    if test.is_empty() {
        return Err(Error::Empty("test events"));
    }
    let labels: Vec<bool> = test.iter().map(|e| e.is_accepted()).collect();
    let probs: Vec<f64> = test.iter().map(|e| model.crossing_probability(&e.features)).collect();
    classification_metrics_from_probs(&labels, &probs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub removed: Feature,
    pub report: ClassificationReport,
}

/// Retrains the SVM once per feature with that feature left out.
///
/// Returns the full-model report and the rows sorted ascending by F1 after
/// removal, so the most important feature comes first.
pub fn rank_features(
    events: &[GapEvent],
    seed: u64,
    settings: &TrainSettings,
) -> Result<(ClassificationReport, Vec<RankingRow>)> {
    let (full, test) = train(ModelKind::SvmPoly3, events, seed, settings)?;
    let full_report = evaluate(&full, &test)?;
    let (train_set, _) = split_events(events, seed);
    let mut rows = Feature::ALL
        .iter()
        .map(|&removed| {
            let keep: Vec<Feature> = Feature::ALL.into_iter().filter(|&f| f != removed).collect();
            let model = train_on(ModelKind::SvmPoly3, &train_set, &keep, settings, seed)?;
            Ok(RankingRow {
                removed,
                report: evaluate(&model, &test)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.report
            .f1
            .total_cmp(&b.report.f1)
            .then(a.removed.index().cmp(&b.removed.index()))
    });
    Ok((full_report, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    pub cv_f1: f64,
}

/// Cross-validated F1 of the SVM over a `(C, γ)` grid, on the training split
/// only. Points are returned in grid order.
pub fn grid_search_svm(
    events: &[GapEvent],
    seed: u64,
    cs: &[f64],
    gammas: &[f64],
    settings: &TrainSettings,
) -> Result<Vec<GridPoint>> {
    let (train_set, _) = split_events(events, seed);
    let folds = settings.platt_folds.max(2);
    let fold = fold_assignment(train_set.len(), folds, derive_seed(seed, 0x9e1d, 0));
    let mut out = Vec::new();
    for &c in cs {
        for &gamma in gammas {
            let s = TrainSettings {
                svm_c: c,
                svm_gamma: Some(gamma),
                ..settings.clone()
            };
            let (mut labels, mut probs) = (Vec::new(), Vec::new());
            for k in 0..folds {
                let fit: Vec<GapEvent> = (0..train_set.len())
                    .filter(|&i| fold[i] != k)
                    .map(|i| train_set[i].clone())
                    .collect();
                let model = train_on(ModelKind::SvmPoly3, &fit, &Feature::ALL, &s, seed)?;
                for i in (0..train_set.len()).filter(|&i| fold[i] == k) {
                    labels.push(train_set[i].is_accepted());
                    probs.push(model.predict_probability(&train_set[i].features));
                }
            }
            let report = classification_metrics_from_probs(&labels, &probs)?;
            out.push(GridPoint {
                c,
                gamma,
                cv_f1: report.f1,
            });
        }
    }
    Ok(out)
}
