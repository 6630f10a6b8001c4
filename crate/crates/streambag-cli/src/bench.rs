//! `streambag bench`: wall-time benchmark over the (algorithm, ensemble
//! size, batch size) matrix, with per-phase timings and speedups against the
//! sequential baseline. Every cell starts from a fresh ensemble; cells run
//! one at a time so timings do not contend.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use streambag::ensembles::{Ensemble, EnsembleConfig, Variant};
use streambag::eval::{confusion_from_run, MetricsReport};
use streambag::executor::{run, ExecConfig, ExecMode, PhaseTimings, RunOptions, RunResult};

use crate::source::{resolve, CliError, CliResult, Source};
use crate::{default_threads, parse_mode, parse_variant, write_text, Emit};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Algorithms to benchmark (repeatable)
    #[arg(long = "algo", value_parser = parse_variant, default_values_t = Variant::ALL)]
    pub algos: Vec<Variant>,
    /// Benchmark dataset: a name (airlines, gmsc, electricity, covertype) or
    /// a .arff/.csv path
    #[arg(long)]
    pub dataset: Option<String>,
    /// Synthetic stream: generator name, inline JSON spec, or JSON file
    #[arg(long, conflicts_with = "dataset")]
    pub synthetic: Option<String>,
    /// Ensemble sizes (repeatable)
    #[arg(long = "ensemble-size", default_values_t = [100usize, 150])]
    pub ensemble_sizes: Vec<usize>,
    /// Mini-batch sizes (repeatable)
    #[arg(long = "batch-size", default_values_t = [1u64, 25, 50, 100, 250, 500, 1000, 2000])]
    pub batch_sizes: Vec<u64>,
    /// Execution modes to time (repeatable)
    #[arg(long = "mode", value_parser = parse_mode, default_values_t = [ExecMode::Sequential, ExecMode::Minibatch])]
    pub modes: Vec<ExecMode>,
    /// Worker threads for parallel modes
    #[arg(long, env = "STREAMBAG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Repetitions per cell
    #[arg(long, default_value_t = 3)]
    pub reps: u32,
    /// Pin workers to cores
    #[arg(long = "pin-cores")]
    pub pin_cores: bool,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
    /// Directory holding downloaded benchmark datasets
    #[arg(long = "data-dir", default_value = "data")]
    pub data_dir: PathBuf,
    /// Outputs to write (repeatable; default: timings and metrics)
    #[arg(long = "emit", value_enum)]
    pub emit: Vec<Emit>,
}

struct Cell {
    algo: Variant,
    m: usize,
    b: u64,
    threads: usize,
    mode: ExecMode,
    timings: Vec<PhaseTimings>,
    report: MetricsReport,
}

impl Cell {
    fn mean_total_s(&self) -> f64 {
        self.timings.iter().map(|t| t.total.as_secs_f64()).sum::<f64>()
            / self.timings.len() as f64
    }
}

fn run_cell(
    source: &Source,
    algo: Variant,
    m: usize,
    seed: u64,
    exec: ExecConfig,
    reps: u32,
    pin_cores: bool,
) -> CliResult<(Vec<PhaseTimings>, RunResult)> {
    let config = EnsembleConfig::new(algo, m, seed)?;
    let options = RunOptions { capture_trace: false, pin_cores };
    let mut timings = Vec::with_capacity(reps as usize);
    let mut first = None;
    for _ in 0..reps {
        let mut ensemble = Ensemble::new(config, source.schema.clone())?;
        let result = run(&mut ensemble, &source.instances, exec, options)?;
        timings.push(result.timings);
        if first.is_none() {
            first = Some(result);
        }
    }
    Ok((timings, first.expect("reps >= 1")))
}

fn report_of(
    source: &Source,
    algo: Variant,
    b: u64,
    seed: u64,
    result: &RunResult,
) -> CliResult<MetricsReport> {
    let cm = confusion_from_run(source.schema.n_classes(), result)?;
    Ok(MetricsReport {
        algorithm: algo.name().to_string(),
        dataset: source.name.clone(),
        batch_size: b,
        seed,
        n_instances: cm.total(),
        accuracy: cm.accuracy(),
        precision: cm.macro_precision(),
        recall: cm.macro_recall(),
        changes_detected: result.change_log.change_count() as u64,
        warnings: (result.change_log.len() - result.change_log.change_count()) as u64,
    })
}

pub fn run_bench(args: BenchArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::usage("--reps must be at least 1"));
    }
    if args.algos.is_empty() || args.ensemble_sizes.is_empty() || args.batch_sizes.is_empty() {
        return Err(CliError::usage("need at least one algorithm, ensemble size, and batch size"));
    }
    let threads = args.threads.unwrap_or_else(default_threads);
    if threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let modes: BTreeSet<ExecMode> = args.modes.iter().copied().collect();
    let source =
        resolve(args.dataset.as_deref(), args.synthetic.as_deref(), &args.data_dir, args.seed)?;
    let emit = Emit::effective(&args.emit, &[Emit::Timings, Emit::Metrics]);

    let mut cells: Vec<Cell> = Vec::new();
    let mut baselines: Vec<((Variant, usize), f64)> = Vec::new();
    for &m in &args.ensemble_sizes {
        for &algo in &args.algos {
            // the sequential run is always measured: it is the speedup baseline
            let (timings, result) = run_cell(
                &source,
                algo,
                m,
                args.seed,
                ExecConfig::sequential(),
                args.reps,
                args.pin_cores,
            )?;
            let baseline_mean = timings.iter().map(|t| t.total.as_secs_f64()).sum::<f64>()
                / timings.len() as f64;
            baselines.push(((algo, m), baseline_mean));
            if modes.contains(&ExecMode::Sequential) {
                let report = report_of(&source, algo, 1, args.seed, &result)?;
                cells.push(Cell {
                    algo,
                    m,
                    b: 1,
                    threads: 1,
                    mode: ExecMode::Sequential,
                    timings,
                    report,
                });
            }

            let mut parallel_cells: Vec<(ExecMode, u64)> = Vec::new();
            if modes.contains(&ExecMode::ParallelPerInstance) {
                parallel_cells.push((ExecMode::ParallelPerInstance, 1));
            }
            if modes.contains(&ExecMode::Minibatch) {
                parallel_cells.extend(args.batch_sizes.iter().map(|&b| (ExecMode::Minibatch, b)));
            }
            for (mode, b) in parallel_cells {
                let exec = match mode {
                    ExecMode::ParallelPerInstance => ExecConfig::parallel_per_instance(threads),
                    _ => ExecConfig::minibatch(b, threads),
                };
                let (timings, result) =
                    run_cell(&source, algo, m, args.seed, exec, args.reps, args.pin_cores)?;
                let report = report_of(&source, algo, b, args.seed, &result)?;
                cells.push(Cell { algo, m, b, threads, mode, timings, report });
            }
        }
    }

    write_outputs(&args, &source, threads, &cells, &baselines, &emit)
}

fn baseline_for(baselines: &[((Variant, usize), f64)], algo: Variant, m: usize) -> f64 {
    baselines
        .iter()
        .find(|((a, mm), _)| *a == algo && *mm == m)
        .map(|(_, t)| *t)
        .expect("every (algo, m) ran a baseline")
}

fn write_outputs(
    args: &BenchArgs,
    source: &Source,
    threads: usize,
    cells: &[Cell],
    baselines: &[((Variant, usize), f64)],
    emit: &BTreeSet<Emit>,
) -> CliResult<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let phases = |t: &PhaseTimings| {
        [
            ("classify", t.classify.as_secs_f64()),
            ("train", t.train.as_secs_f64()),
            ("change", t.change.as_secs_f64()),
            ("total", t.total.as_secs_f64()),
        ]
    };

    if emit.contains(&Emit::Timings) {
        let mut csv = String::from("algorithm,dataset,m,b,threads,mode,rep,phase,seconds\n");
        for cell in cells {
            let key = format!(
                "{},{},{},{},{},{}",
                cell.algo, source.name, cell.m, cell.b, cell.threads, cell.mode
            );
            let mut sums = [0.0f64; 4];
            for (rep, t) in cell.timings.iter().enumerate() {
                for (i, (phase, seconds)) in phases(t).into_iter().enumerate() {
                    sums[i] += seconds;
                    writeln!(csv, "{key},{rep},{phase},{seconds}").expect("string write");
                }
            }
            let n = cell.timings.len() as f64;
            for (i, (phase, _)) in phases(&cell.timings[0]).into_iter().enumerate() {
                writeln!(csv, "{key},mean,{phase},{}", sums[i] / n).expect("string write");
            }
        }
        write_text(&args.out_dir.join("timings.csv"), &csv)?;

        let mut csv =
            String::from("algorithm,dataset,m,b,threads,mode,mean_total_s,speedup\n");
        for cell in cells {
            let mean = cell.mean_total_s();
            let speedup = baseline_for(baselines, cell.algo, cell.m) / mean;
            writeln!(
                csv,
                "{},{},{},{},{},{},{mean},{speedup}",
                cell.algo, source.name, cell.m, cell.b, cell.threads, cell.mode
            )
            .expect("string write");
        }
        write_text(&args.out_dir.join("bench_summary.csv"), &csv)?;
    }

    if emit.contains(&Emit::Metrics) {
        let mut csv = format!("ensemble_size,{}\n", MetricsReport::CSV_HEADER);
        for cell in cells {
            writeln!(csv, "{},{}", cell.m, cell.report.csv_row()).expect("string write");
        }
        write_text(&args.out_dir.join("metrics.csv"), &csv)?;
    }

    let summary = json!({
        "command": "bench",
        "dataset": source.name,
        "n_instances": source.instances.len(),
        "seed": args.seed,
        "threads": threads,
        "reps": args.reps,
        "pin_cores": args.pin_cores,
        "cells": cells.iter().map(|cell| {
            json!({
                "algorithm": cell.algo.name(),
                "ensemble_size": cell.m,
                "batch_size": cell.b,
                "threads": cell.threads,
                "mode": cell.mode.name(),
                "mean_total_s": cell.mean_total_s(),
                "speedup": baseline_for(baselines, cell.algo, cell.m) / cell.mean_total_s(),
                "accuracy": cell.report.accuracy,
                "precision": cell.report.precision,
                "recall": cell.report.recall,
                "changes_detected": cell.report.changes_detected,
            })
        }).collect::<Vec<_>>(),
    });
    write_text(
        &args.out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("json serializes")),
    )
}
