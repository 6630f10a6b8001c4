//! Execution strategies: sequential baseline, per-instance parallel, and
//! mini-batch parallel.
//!
//! All three share the same phase discipline per step: classify against the
//! frozen ensemble, train members (the only parallel phase; each worker owns
//! a disjoint member subset), then the serial global change step. Training is
//! deferred, so no prediction ever observes a model updated with an instance
//! of its own batch. Per-instance parallelism is the mini-batch engine at
//! b=1, which in turn is bit-equivalent to the sequential baseline thanks to
//! per-member RNG substreams and index-ordered vote aggregation.

mod pool;

pub use pool::{pool_execute, FixedPool, Task};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::data::Instance;
use crate::ensembles::{ChangeEvent, ChangeLog, Ensemble, MemberBatchOutcome};
use crate::error::{Error, Result};
use crate::locality::{RunTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    ParallelPerInstance,
    Minibatch,
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::Sequential => "sequential",
            ExecMode::ParallelPerInstance => "parallel_per_instance",
            ExecMode::Minibatch => "minibatch",
        }
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sequential" => Ok(ExecMode::Sequential),
            "parallel_per_instance" | "parallel" => Ok(ExecMode::ParallelPerInstance),
            "minibatch" | "mini_batch" => Ok(ExecMode::Minibatch),
            _ => Err(Error::domain(format!(
                "unknown execution mode {s:?} (expected sequential, parallel_per_instance, or minibatch)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    pub mode: ExecMode,
    pub num_threads: usize,
    /// Mini-batch size; meaningful for `Minibatch` only.
    pub batch_size: u64,
}

impl ExecConfig {
    pub fn sequential() -> Self {
        ExecConfig { mode: ExecMode::Sequential, num_threads: 1, batch_size: 1 }
    }

    pub fn parallel_per_instance(num_threads: usize) -> Self {
        ExecConfig { mode: ExecMode::ParallelPerInstance, num_threads, batch_size: 1 }
    }

    pub fn minibatch(batch_size: u64, num_threads: usize) -> Self {
        ExecConfig { mode: ExecMode::Minibatch, num_threads, batch_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_threads == 0 {
            return Err(Error::domain("num_threads must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be >= 1"));
        }
        Ok(())
    }

    /// The batch size the engine actually uses (1 outside mini-batch mode).
    pub fn effective_batch_size(&self) -> u64 {
        match self.mode {
            ExecMode::Minibatch => self.batch_size,
            _ => 1,
        }
    }
}

/// Wall-clock cost per phase, accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub classify: Duration,
    pub train: Duration,
    pub change: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record the (worker, member, instance) access trace of the training phase.
    pub capture_trace: bool,
    /// Pin workers to cores where the platform allows it.
    pub pin_cores: bool,
}

/// Everything a run produces. Only `timings` varies between repetitions of
/// the same seeded configuration; all other fields are deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub predictions: Vec<u32>,
    pub labels: Vec<u32>,
    pub change_log: ChangeLog,
    pub timings: PhaseTimings,
    #[serde(skip)]
    pub trace: Option<RunTrace>,
    /// First hundred Poisson draws per member, for seed-matched sweep checks.
    pub weight_logs: Vec<Vec<u64>>,
}

/// Dispatches on the configured mode.
pub fn run(
    ensemble: &mut Ensemble,
    stream: &[Instance],
    exec: ExecConfig,
    options: RunOptions,
) -> Result<RunResult> {
    exec.validate()?;
    match exec.mode {
        ExecMode::Sequential => run_sequential(ensemble, stream, options),
        ExecMode::ParallelPerInstance => {
            run_parallel_per_instance(ensemble, stream, exec.num_threads, options)
        }
        ExecMode::Minibatch => {
            run_minibatch(ensemble, stream, exec.batch_size, exec.num_threads, options)
        }
    }
}

/// Strictly serial baseline: one instance at a time, members in index order,
/// no worker pool at all.
pub fn run_sequential(
    ensemble: &mut Ensemble,
    stream: &[Instance],
    options: RunOptions,
) -> Result<RunResult> {
    let start = Instant::now();
    let m = ensemble.size();
    let mut predictions = Vec::with_capacity(stream.len());
    let mut labels = Vec::with_capacity(stream.len());
    let mut change_log = ChangeLog::new();
    let mut trace = options.capture_trace.then(|| RunTrace::new(m, 1));
    let mut timings = PhaseTimings::default();

    for (idx, x) in stream.iter().enumerate() {
        let instance = idx as u64;
        let t = Instant::now();
        let prediction = ensemble.classify(x)?;
        timings.classify += t.elapsed();
        let predicted = prediction.argmax() as u32;
        predictions.push(predicted);
        labels.push(x.label());

        let t = Instant::now();
        let mut events: Vec<ChangeEvent> = Vec::new();
        for slot in 0..m {
            let outcome =
                ensemble.members_mut()[slot].train_batch(std::slice::from_ref(x), instance)?;
            if let Some(trace) = trace.as_mut() {
                for _ in &outcome.trained {
                    trace.push(TraceRecord { worker: 0, member: slot as u32, instance });
                }
            }
            events.extend(outcome.events);
        }
        timings.train += t.elapsed();

        let t = Instant::now();
        let err = (predicted != x.label()) as u32 as f64;
        events.extend(ensemble.global_change_step(instance, &[err])?);
        change_log.merge_batch(events);
        timings.change += t.elapsed();
    }

    timings.total = start.elapsed();
    Ok(RunResult {
        predictions,
        labels,
        change_log,
        timings,
        trace,
        weight_logs: weight_logs(ensemble),
    })
}

/// Per-instance parallelism: the mini-batch engine driven at b=1.
pub fn run_parallel_per_instance(
    ensemble: &mut Ensemble,
    stream: &[Instance],
    num_threads: usize,
    options: RunOptions,
) -> Result<RunResult> {
    run_minibatch(ensemble, stream, 1, num_threads, options)
}

/// Mini-batch engine: buffer b instances, classify them against the frozen
/// ensemble, train all members across the pool (member i on worker i mod
/// threads), then run the serial global change step. The pool is created once
/// and reused; a final partial batch is processed like any other.
pub fn run_minibatch(
    ensemble: &mut Ensemble,
    stream: &[Instance],
    batch_size: u64,
    num_threads: usize,
    options: RunOptions,
) -> Result<RunResult> {
    if batch_size == 0 {
        return Err(Error::domain("batch_size must be >= 1"));
    }
    if num_threads == 0 {
        return Err(Error::domain("num_threads must be >= 1"));
    }
    let start = Instant::now();
    let m = ensemble.size();
    let pool = FixedPool::new(num_threads, options.pin_cores)?;
    let mut predictions = Vec::with_capacity(stream.len());
    let mut labels = Vec::with_capacity(stream.len());
    let mut change_log = ChangeLog::new();
    let mut trace = options.capture_trace.then(|| RunTrace::new(m, num_threads));
    let mut timings = PhaseTimings::default();

    let mut base = 0u64;
    for batch in stream.chunks(batch_size as usize) {
        let t = Instant::now();
        let batch_predictions = ensemble.classify_batch(batch)?;
        timings.classify += t.elapsed();
        let mut errors = Vec::with_capacity(batch.len());
        for (prediction, x) in batch_predictions.iter().zip(batch) {
            let predicted = prediction.argmax() as u32;
            predictions.push(predicted);
            labels.push(x.label());
            errors.push((predicted != x.label()) as u32 as f64);
        }

        let t = Instant::now();
        let shared: Arc<[Instance]> = Arc::from(batch);
        let tasks: Vec<_> = ensemble
            .take_members()
            .into_iter()
            .map(|mut member| {
                let batch = Arc::clone(&shared);
                move |_worker: usize| {
                    let outcome = member.train_batch(&batch, base);
                    (member, outcome)
                }
            })
            .collect();
        let results = pool_execute(&pool, tasks);
        let mut members = Vec::with_capacity(m);
        let mut outcomes: Vec<Result<MemberBatchOutcome>> = Vec::with_capacity(m);
        for (member, outcome) in results {
            members.push(member);
            outcomes.push(outcome);
        }
        ensemble.restore_members(members);
        let mut events: Vec<ChangeEvent> = Vec::new();
        for (slot, outcome) in outcomes.into_iter().enumerate() {
            let outcome = outcome?;
            if let Some(trace) = trace.as_mut() {
                for &off in &outcome.trained {
                    trace.push(TraceRecord {
                        worker: (slot % num_threads) as u32,
                        member: slot as u32,
                        instance: base + off as u64,
                    });
                }
            }
            events.extend(outcome.events);
        }
        timings.train += t.elapsed();

        let t = Instant::now();
        events.extend(ensemble.global_change_step(base, &errors)?);
        change_log.merge_batch(events);
        timings.change += t.elapsed();

        base += batch.len() as u64;
    }

    timings.total = start.elapsed();
    Ok(RunResult {
        predictions,
        labels,
        change_log,
        timings,
        trace,
        weight_logs: weight_logs(ensemble),
    })
}

fn weight_logs(ensemble: &Ensemble) -> Vec<Vec<u64>> {
    ensemble.members().iter().map(|member| member.weight_log().to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Attribute, Schema};
    use crate::ensembles::{EnsembleConfig, Variant};
    use crate::locality::{poisson_skip_trace, reuse_distance_sequence};
    use crate::rng::RngStream;

    fn numeric_schema(n_attrs: usize) -> Arc<Schema> {
        let attrs = (0..n_attrs).map(|i| Attribute::numeric(format!("x{i}"))).collect();
        Arc::new(Schema::new(attrs, vec!["c0".into(), "c1".into()]).unwrap())
    }

    fn threshold_stream(schema: &Schema, seed: u64, n: usize) -> Vec<Instance> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                let values: Vec<f64> =
                    (0..schema.n_attributes()).map(|_| rng.next_f64()).collect();
                let label = (values[0] > 0.5) as u32;
                Instance::new(schema, values, label).unwrap()
            })
            .collect()
    }

    fn fresh(variant: Variant, m: usize, schema: &Arc<Schema>, seed: u64) -> Ensemble {
        Ensemble::new(EnsembleConfig::new(variant, m, seed).unwrap(), Arc::clone(schema)).unwrap()
    }

    fn traced() -> RunOptions {
        RunOptions { capture_trace: true, pin_cores: false }
    }

    #[test]
    fn empty_stream_yields_an_empty_result() {
        let schema = numeric_schema(2);
        for exec in [
            ExecConfig::sequential(),
            ExecConfig::parallel_per_instance(3),
            ExecConfig::minibatch(10, 2),
        ] {
            let mut e = fresh(Variant::Ob, 3, &schema, 1);
            let result = run(&mut e, &[], exec, traced()).unwrap();
            assert!(result.predictions.is_empty());
            assert!(result.labels.is_empty());
            assert!(result.change_log.is_empty());
            assert!(result.trace.unwrap().records().is_empty());
        }
    }

    #[test]
    fn single_instance_trace_visits_members_in_index_order() {
        let schema = numeric_schema(2);
        let stream = threshold_stream(&schema, 2, 1);
        // lambda=6 makes an all-zero draw across three members vanishingly
        // rare; scan a few seeds for one where every member trains
        let mut checked = false;
        for seed in 0..5 {
            let mut e = fresh(Variant::LBag, 3, &schema, seed);
            let result = run_sequential(&mut e, &stream, traced()).unwrap();
            let trace = result.trace.unwrap();
            if trace.records().len() == 3 {
                assert_eq!(trace.logical_trace().events(), &[0, 1, 2]);
                assert!(trace.records().iter().all(|r| r.instance == 0 && r.worker == 0));
                checked = true;
                break;
            }
        }
        assert!(checked, "no seed in 0..5 trained all three members on the first instance");
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let schema = numeric_schema(3);
        let stream = threshold_stream(&schema, 7, 300);
        let go = || {
            let mut e = fresh(Variant::LBag, 4, &schema, 11);
            run_minibatch(&mut e, &stream, 25, 3, traced()).unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a.predictions, b.predictions);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.change_log, b.change_log);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.weight_logs, b.weight_logs);
    }

    /// The cornerstone equivalence: sequential, per-instance parallel, and
    /// mini-batch at b=1 agree bit-exactly, including final member states.
    #[test]
    fn equivalence_ladder_holds_at_batch_size_one() {
        let schema = numeric_schema(3);
        let stream = threshold_stream(&schema, 13, 400);
        for variant in [Variant::LBag, Variant::ObAdwin, Variant::Arf] {
            let mut e_seq = fresh(variant, 5, &schema, 21);
            let seq = run_sequential(&mut e_seq, &stream, traced()).unwrap();
            for threads in [1usize, 4] {
                let mut e_par = fresh(variant, 5, &schema, 21);
                let par =
                    run_parallel_per_instance(&mut e_par, &stream, threads, traced()).unwrap();
                assert_eq!(seq.predictions, par.predictions, "{variant} threads={threads}");
                assert_eq!(seq.change_log, par.change_log, "{variant} threads={threads}");
                assert_eq!(
                    seq.trace.as_ref().unwrap().logical_trace(),
                    par.trace.as_ref().unwrap().logical_trace()
                );
                assert_eq!(seq.weight_logs, par.weight_logs);
                assert_eq!(e_seq, e_par, "final member states must match");
            }
            let mut e_mb = fresh(variant, 5, &schema, 21);
            let mb = run_minibatch(&mut e_mb, &stream, 1, 2, traced()).unwrap();
            assert_eq!(seq.predictions, mb.predictions);
            assert_eq!(seq.change_log, mb.change_log);
            assert_eq!(e_seq, e_mb);
        }
    }

    #[test]
    fn remainder_batches_cover_the_whole_stream() {
        let schema = numeric_schema(2);
        let stream = threshold_stream(&schema, 3, 7);
        // lambda=6: every instance trains some member with overwhelming odds
        let mut e = fresh(Variant::LBag, 2, &schema, 5);
        let result = run_minibatch(&mut e, &stream, 3, 2, traced()).unwrap();
        assert_eq!(result.predictions.len(), 7);
        assert_eq!(result.labels.len(), 7);
        // the final partial batch still trains: instance 6 appears in the trace
        let trace = result.trace.unwrap();
        assert!(trace.records().iter().any(|r| r.instance == 6));
    }

    /// No prediction may observe model state that includes its own batch:
    /// replay the run with explicit pre-batch snapshots as the oracle.
    #[test]
    fn classification_sees_only_the_pre_batch_ensemble() {
        let schema = numeric_schema(3);
        let stream = threshold_stream(&schema, 17, 120);
        let mut e = fresh(Variant::LBag, 4, &schema, 31);
        let result = run_minibatch(&mut e, &stream, 30, 2, traced()).unwrap();

        let mut oracle = fresh(Variant::LBag, 4, &schema, 31);
        let mut expected = Vec::new();
        let mut base = 0u64;
        for batch in stream.chunks(30) {
            let frozen = oracle.clone();
            for x in batch {
                expected.push(frozen.classify(x).unwrap().argmax() as u32);
            }
            for slot in 0..4 {
                oracle.members_mut()[slot].train_batch(batch, base).unwrap();
            }
            base += batch.len() as u64;
        }
        assert_eq!(result.predictions, expected);
    }

    /// The recorded trace is exactly the Poisson-skip model over the same
    /// member substreams: one access per (member, instance) with k > 0,
    /// member-outer within each batch.
    #[test]
    fn live_trace_matches_the_poisson_skip_model() {
        let schema = numeric_schema(2);
        let stream = threshold_stream(&schema, 19, 200);
        let mut e = fresh(Variant::LBag, 10, &schema, 37);
        let result = run_minibatch(&mut e, &stream, 7, 3, traced()).unwrap();
        let expected = poisson_skip_trace(200, 10, 7, 6.0, 37).unwrap();
        assert_eq!(result.trace.as_ref().unwrap().logical_trace(), expected);

        // per-worker sub-traces partition the records by static assignment
        let trace = result.trace.unwrap();
        let total: usize = (0..3).map(|w| trace.worker_trace(w).len()).sum();
        assert_eq!(total, trace.records().len());
        for r in trace.records() {
            assert_eq!(r.worker, r.member % 3);
        }
    }

    /// Member-switch count: with lambda=6 and b=25 every member trains in
    /// every batch (up to negligible probability), so runs of equal members
    /// number m * ceil(n/b).
    #[test]
    fn member_switch_count_tracks_the_batch_structure() {
        let schema = numeric_schema(2);
        let stream = threshold_stream(&schema, 23, 200);
        let mut e = fresh(Variant::LBag, 8, &schema, 41);
        let result = run_minibatch(&mut e, &stream, 25, 2, traced()).unwrap();
        let events = result.trace.unwrap().logical_trace();
        let events = events.events();
        let runs = 1 + events.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(runs, 8 * 200_usize.div_ceil(25));
    }

    #[test]
    fn batching_shifts_reuse_distances_toward_one() {
        let schema = numeric_schema(2);
        let stream = threshold_stream(&schema, 29, 400);
        let frac_rd1 = |b: u64| {
            let mut e = fresh(Variant::LBag, 10, &schema, 43);
            let result = run_minibatch(&mut e, &stream, b, 2, traced()).unwrap();
            let trace = result.trace.unwrap().logical_trace();
            let seq = reuse_distance_sequence(&trace);
            let finite: Vec<u64> = seq.iter().filter_map(|r| r.finite()).collect();
            finite.iter().filter(|&&d| d == 1).count() as f64 / finite.len() as f64
        };
        assert!(frac_rd1(50) > frac_rd1(1));
    }

    #[test]
    fn exec_config_validates_and_parses() {
        assert!(ExecConfig::minibatch(0, 2).validate().is_err());
        assert!(ExecConfig::minibatch(5, 0).validate().is_err());
        assert!(ExecConfig::parallel_per_instance(8).validate().is_ok());
        assert_eq!(ExecConfig::sequential().effective_batch_size(), 1);
        assert_eq!(ExecConfig::minibatch(40, 2).effective_batch_size(), 40);
        assert_eq!("sequential".parse::<ExecMode>().unwrap(), ExecMode::Sequential);
        assert_eq!("parallel-per-instance".parse::<ExecMode>().unwrap(), ExecMode::ParallelPerInstance);
        assert_eq!("minibatch".parse::<ExecMode>().unwrap(), ExecMode::Minibatch);
        assert!("work-stealing".parse::<ExecMode>().is_err());
        assert_eq!(ExecMode::ParallelPerInstance.to_string(), "parallel_per_instance");
    }

    #[test]
    fn global_change_step_runs_outside_the_parallel_section() {
        // OBAdwin under an induced error spike must log global replacements
        // identically with and without a multi-worker pool
        let schema = numeric_schema(2);
        let mut stream = threshold_stream(&schema, 47, 2500);
        let shifted = threshold_stream(&schema, 48, 2500);
        stream.extend(shifted.into_iter().map(|x| {
            Instance::new(&schema, x.values().to_vec(), 1 - x.label()).unwrap()
        }));
        let run_with = |threads: usize| {
            let mut e = fresh(Variant::ObAdwin, 4, &schema, 51);
            run_minibatch(&mut e, &stream, 1, threads, RunOptions::default()).unwrap()
        };
        let a = run_with(1);
        let b = run_with(3);
        assert_eq!(a.change_log, b.change_log);
        assert_eq!(a.predictions, b.predictions);
    }
}
