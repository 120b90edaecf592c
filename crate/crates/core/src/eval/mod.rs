//! Cross-validation and the comparison statistics used to rank ensembles
//! across datasets.

mod report;
mod stats;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, stratified_folds, Dataset, Standardizer};
use crate::ensemble::{derive_seed, train_ensemble, EnsembleConfig, Strategy};
use crate::error::{Error, Result};
use crate::inducers::InducerKind;

pub use report::{
    emit_report, read_accuracy_csv, read_reports, render_markdown, write_atomic, ReportFormat,
};
pub use stats::{
    average_improvement, average_ranks, nemenyi_q, rank_rows, rank_summary, AccuracyTable,
    RankSummary,
};

/// What to evaluate: an ensemble configuration plus preprocessing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlgorithmSpec {
    pub ensemble: EnsembleConfig,
    /// Z-score features using statistics of the training folds only.
    pub standardize: bool,
    /// Fill `wall_time_ms`; otherwise it is 0 so reports stay reproducible.
    pub record_time: bool,
}

impl AlgorithmSpec {
    pub fn new(strategy: Strategy, inducer: InducerKind) -> Self {
        AlgorithmSpec {
            ensemble: EnsembleConfig::new(strategy, inducer),
            ..AlgorithmSpec::default()
        }
    }

    pub fn name(&self) -> String {
        algorithm_name(self.ensemble.strategy, self.ensemble.inducer)
    }
}

pub fn algorithm_name(strategy: Strategy, inducer: InducerKind) -> String {
    format!("{}-{}", strategy.name(), inducer_name(inducer))
}

pub fn inducer_name(inducer: InducerKind) -> &'static str {
    match inducer {
        InducerKind::Nn => "nn",
        InducerKind::Tree => "tree",
        InducerKind::Nb => "nb",
    }
}

/// Outcome of one k-fold cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub algorithm: String,
    pub strategy: Strategy,
    pub inducer: InducerKind,
    pub k: usize,
    pub seed: u64,
    pub n_instances: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub stdev: f64,
    pub wall_time_ms: u64,
}

/// Mean and sample standard deviation (denominator `n − 1`).
pub fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn fold_accuracy(train: &Dataset, test: &Dataset, spec: &AlgorithmSpec, seed: u64) -> Result<f64> {
    let (train, scaler): (Dataset, Option<Standardizer>) = if spec.standardize {
        let (t, s) = standardize(train)?;
        (t, Some(s))
    } else {
        (train.clone(), None)
    };
    let model = train_ensemble(&train, &spec.ensemble, seed)?;
    let mut correct = 0usize;
    for (x, &y) in test.features.row_iter().zip(&test.labels) {
        let pred = match &scaler {
            Some(s) => model.classify(&s.apply(x))?.0,
            None => model.classify(x)?.0,
        };
        if pred == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Stratified `k`-fold cross-validation. Folds come from
/// [`stratified_folds`]`(d, k, seed)`; the ensemble for fold `f` is trained
/// with master seed [`derive_seed`]`(seed, f)`.
pub fn cross_validate(d: &Dataset, spec: &AlgorithmSpec, k: usize, seed: u64) -> Result<EvalReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    spec.ensemble.validate()?;
    let start = Instant::now();
    let plan = stratified_folds(d, k, seed)?;
    let run = |f: usize| {
        let (tr, te) = plan.split(f);
        fold_accuracy(&d.subset(&tr), &d.subset(&te), spec, derive_seed(seed, f as u64))
    };
    let fold_accuracies: Vec<f64> = if spec.ensemble.parallel {
        (0..k).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..k).map(run).collect::<Result<_>>()?
    };
    let (mean, stdev) = mean_stdev(&fold_accuracies);
    let wall_time_ms = if spec.record_time {
        start.elapsed().as_millis() as u64
    } else {
        0
    };
    Ok(EvalReport {
        dataset: d.name.clone(),
        algorithm: spec.name(),
        strategy: spec.ensemble.strategy,
        inducer: spec.ensemble.inducer,
        k,
        seed,
        n_instances: d.len(),
        fold_accuracies,
        mean,
        stdev,
        wall_time_ms,
    })
}
