//! Prequential evaluation: every instance is predicted before any model
//! update that includes it (test-then-train, or test-then-train-per-batch in
//! mini-batch mode), with metrics accumulated over the whole stream.
//!
//! Precision and recall are macro-averaged over classes. A class that was
//! never predicted has undefined precision; it counts as 0 in the macro
//! average, which is conservative and deterministic. The same convention
//! applies to the recall of a class absent from the stream.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Instance, Schema};
use crate::ensembles::{Ensemble, EnsembleConfig, Variant};
use crate::error::{Error, Result};
use crate::executor::{run, ExecConfig, RunOptions, RunResult};

/// Weighted (true class, predicted class) tallies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n_classes: usize,
    /// Row-major: `counts[t * n_classes + p]`.
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::domain("confusion matrix needs at least one class"));
        }
        Ok(ConfusionMatrix { n_classes, counts: vec![0; n_classes * n_classes] })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn record(&mut self, true_class: u32, predicted: u32) -> Result<()> {
        let (t, p) = (true_class as usize, predicted as usize);
        if t >= self.n_classes || p >= self.n_classes {
            return Err(Error::domain(format!(
                "class pair ({t}, {p}) out of range for {} classes",
                self.n_classes
            )));
        }
        self.counts[t * self.n_classes + p] += 1;
        Ok(())
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    /// Number of evaluated instances.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// trace / total; 0 on an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let trace: u64 = (0..self.n_classes).map(|c| self.count(c, c)).sum();
        trace as f64 / total as f64
    }

    /// Macro-averaged precision over all classes (undefined terms count 0).
    pub fn macro_precision(&self) -> f64 {
        self.macro_average(|c| {
            let predicted: u64 = (0..self.n_classes).map(|t| self.count(t, c)).sum();
            (self.count(c, c), predicted)
        })
    }

    /// Macro-averaged recall over all classes (undefined terms count 0).
    pub fn macro_recall(&self) -> f64 {
        self.macro_average(|c| {
            let actual: u64 = (0..self.n_classes).map(|p| self.count(c, p)).sum();
            (self.count(c, c), actual)
        })
    }

    fn macro_average(&self, term: impl Fn(usize) -> (u64, u64)) -> f64 {
        let sum: f64 = (0..self.n_classes)
            .map(|c| {
                let (hit, denom) = term(c);
                if denom == 0 {
                    0.0
                } else {
                    hit as f64 / denom as f64
                }
            })
            .sum();
        sum / self.n_classes as f64
    }
}

/// Builds the confusion matrix of a finished run.
pub fn confusion_from_run(n_classes: usize, result: &RunResult) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(n_classes)?;
    for (&label, &predicted) in result.labels.iter().zip(&result.predictions) {
        cm.record(label, predicted)?;
    }
    Ok(cm)
}

/// One evaluation row: metrics of a single (algorithm, dataset, batch size,
/// seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub dataset: String,
    pub batch_size: u64,
    pub seed: u64,
    pub n_instances: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub changes_detected: u64,
    pub warnings: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "algorithm,dataset,batch_size,seed,n_instances,accuracy,precision,recall,changes_detected,warnings";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.dataset,
            self.batch_size,
            self.seed,
            self.n_instances,
            self.accuracy,
            self.precision,
            self.recall,
            self.changes_detected,
            self.warnings
        )
    }
}

fn report_from(
    ensemble: &Ensemble,
    dataset: &str,
    batch_size: u64,
    result: &RunResult,
) -> Result<MetricsReport> {
    let cm = confusion_from_run(ensemble.schema().n_classes(), result)?;
    Ok(MetricsReport {
        algorithm: ensemble.config().variant.name().to_string(),
        dataset: dataset.to_string(),
        batch_size,
        seed: ensemble.config().seed,
        n_instances: cm.total(),
        accuracy: cm.accuracy(),
        precision: cm.macro_precision(),
        recall: cm.macro_recall(),
        changes_detected: result.change_log.change_count() as u64,
        warnings: (result.change_log.len() - result.change_log.change_count()) as u64,
    })
}

/// Runs a fresh ensemble prequentially over the stream and reports metrics.
pub fn prequential_run(
    ensemble: &mut Ensemble,
    stream: &[Instance],
    exec: ExecConfig,
    dataset: &str,
) -> Result<MetricsReport> {
    let result = run(ensemble, stream, exec, RunOptions::default())?;
    // the executor defers training behind classification by construction;
    // re-check the observable part: one prediction per instance, labels in
    // stream order
    if result.predictions.len() != stream.len()
        || !result.labels.iter().zip(stream).all(|(&l, x)| l == x.label())
    {
        return Err(Error::domain("prequential run did not cover the stream in order"));
    }
    report_from(ensemble, dataset, exec.effective_batch_size(), &result)
}

/// One fresh-ensemble run per batch size, same seed throughout. The Poisson
/// weight sequence each member consumes is invariant across batch sizes; the
/// sweep checks that on the logged weight prefixes and fails loudly if the
/// seed discipline is ever broken.
pub fn batch_size_sweep(
    config: &EnsembleConfig,
    schema: &Arc<Schema>,
    stream: &[Instance],
    sizes: &[u64],
    num_threads: usize,
    dataset: &str,
) -> Result<Vec<MetricsReport>> {
    if sizes.is_empty() {
        return Err(Error::domain("batch-size sweep needs at least one size"));
    }
    let mut reports = Vec::with_capacity(sizes.len());
    let mut reference_logs: Option<Vec<Vec<u64>>> = None;
    for &size in sizes {
        let mut ensemble = Ensemble::new(*config, Arc::clone(schema))?;
        let exec = ExecConfig::minibatch(size, num_threads);
        let result = run(&mut ensemble, stream, exec, RunOptions::default())?;
        match &reference_logs {
            None => reference_logs = Some(result.weight_logs.clone()),
            Some(reference) => {
                if *reference != result.weight_logs {
                    return Err(Error::domain(
                        "per-member weight sequences diverged across batch sizes",
                    ));
                }
            }
        }
        reports.push(report_from(&ensemble, dataset, size, &result)?);
    }
    Ok(reports)
}

/// Detected-change counts (drifts and replacements) per batch size, for the
/// variants whose detectors drive resets.
///
/// Member-level detectors (LBag) monitor the member's own per-instance
/// pre-training error, which does not depend on the batch size, so their
/// counts are constant across sizes; only the global detector (OBAdwin) sees
/// the frozen pre-batch predictions and reacts to staleness.
pub fn change_count_sweep(
    config: &EnsembleConfig,
    schema: &Arc<Schema>,
    stream: &[Instance],
    sizes: &[u64],
    num_threads: usize,
) -> Result<Vec<(u64, u64)>> {
    if !matches!(config.variant, Variant::LBag | Variant::ObAdwin) {
        return Err(Error::domain(format!(
            "change-count sweep applies to LBag and OBAdwin, not {}",
            config.variant
        )));
    }
    if sizes.is_empty() {
        return Err(Error::domain("change-count sweep needs at least one size"));
    }
    let mut counts = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut ensemble = Ensemble::new(*config, Arc::clone(schema))?;
        let exec = ExecConfig::minibatch(size, num_threads);
        let result = run(&mut ensemble, stream, exec, RunOptions::default())?;
        counts.push((size, result.change_log.change_count() as u64));
    }
    Ok(counts)
}
