//! `streambag eval`: prequential metrics per (algorithm, ensemble size,
//! batch size), plus detected-change counts for the drift-reacting variants.
//! Each cell runs a fresh ensemble with the same seed, so rows differ only
//! through batching.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use streambag::ensembles::{EnsembleConfig, Variant};
use streambag::eval::{batch_size_sweep, change_count_sweep, MetricsReport};

use crate::source::{resolve, CliError, CliResult};
use crate::{default_threads, parse_variant, write_text, Emit};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Algorithms to evaluate (repeatable)
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
    #[arg(long = "ensemble-size", default_values_t = [100usize])]
    pub ensemble_sizes: Vec<usize>,
    /// Mini-batch sizes (repeatable)
    #[arg(long = "batch-size", default_values_t = [1u64, 25, 50, 100, 250, 500, 1000, 2000])]
    pub batch_sizes: Vec<u64>,
    /// Worker threads
    #[arg(long, env = "STREAMBAG_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
    /// Directory holding downloaded benchmark datasets
    #[arg(long = "data-dir", default_value = "data")]
    pub data_dir: PathBuf,
    /// Outputs to write (repeatable; default: metrics and changes)
    #[arg(long = "emit", value_enum)]
    pub emit: Vec<Emit>,
}

pub fn run_eval(args: EvalArgs) -> CliResult<()> {
    if args.algos.is_empty() || args.ensemble_sizes.is_empty() || args.batch_sizes.is_empty() {
        return Err(CliError::usage("need at least one algorithm, ensemble size, and batch size"));
    }
    let threads = args.threads.unwrap_or_else(default_threads);
    if threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let source =
        resolve(args.dataset.as_deref(), args.synthetic.as_deref(), &args.data_dir, args.seed)?;
    let emit = Emit::effective(&args.emit, &[Emit::Metrics, Emit::Changes]);
    std::fs::create_dir_all(&args.out_dir)?;

    let mut metrics_csv = format!("ensemble_size,{}\n", MetricsReport::CSV_HEADER);
    let mut changes_csv =
        String::from("algorithm,dataset,ensemble_size,batch_size,seed,changes_detected\n");
    let mut metric_rows = Vec::new();
    let mut change_rows = Vec::new();

    for &m in &args.ensemble_sizes {
        for &algo in &args.algos {
            let config = EnsembleConfig::new(algo, m, args.seed)?;
            let reports = batch_size_sweep(
                &config,
                &source.schema,
                &source.instances,
                &args.batch_sizes,
                threads,
                &source.name,
            )?;
            for report in &reports {
                writeln!(metrics_csv, "{m},{}", report.csv_row()).expect("string write");
                metric_rows.push(json!({
                    "ensemble_size": m,
                    "report": report,
                }));
            }
            if matches!(algo, Variant::LBag | Variant::ObAdwin) {
                let counts = change_count_sweep(
                    &config,
                    &source.schema,
                    &source.instances,
                    &args.batch_sizes,
                    threads,
                )?;
                for (b, count) in counts {
                    writeln!(
                        changes_csv,
                        "{algo},{},{m},{b},{},{count}",
                        source.name, args.seed
                    )
                    .expect("string write");
                    change_rows.push(json!({
                        "algorithm": algo.name(),
                        "ensemble_size": m,
                        "batch_size": b,
                        "changes_detected": count,
                    }));
                }
            }
        }
    }

    if emit.contains(&Emit::Metrics) {
        write_text(&args.out_dir.join("metrics.csv"), &metrics_csv)?;
    }
    if emit.contains(&Emit::Changes) {
        write_text(&args.out_dir.join("change_counts.csv"), &changes_csv)?;
    }
    let summary = json!({
        "command": "eval",
        "dataset": source.name,
        "n_instances": source.instances.len(),
        "seed": args.seed,
        "threads": threads,
        "metrics": metric_rows,
        "change_counts": change_rows,
    });
    write_text(
        &args.out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("json serializes")),
    )
}
