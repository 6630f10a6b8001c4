//! `streambag rd`: reuse-distance histograms of the training-phase member
//! access pattern, one file per batch size, with the closed-form full-training
//! bound alongside measured totals. Traces come from the Poisson-skip model
//! (the default) or the every-member-trains pattern; both are instant and
//! exactly reproduce what the live executor records for the same seed.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use streambag::locality::{
    full_training_trace, poisson_skip_trace, rd_bound_minibatch, rd_histogram, rd_total, RdBins,
};

use crate::source::{CliError, CliResult};
use crate::{write_text, Emit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceKind {
    /// Members train when their Poisson draw is positive
    Poisson,
    /// Every member trains on every instance
    Full,
}

#[derive(Debug, Args)]
pub struct RdArgs {
    /// Stream length
    #[arg(long, default_value_t = 5000)]
    pub n: u64,
    /// Ensemble size
    #[arg(long = "ensemble-size", default_value_t = 100)]
    pub ensemble_size: usize,
    /// Mini-batch sizes (repeatable)
    #[arg(long = "batch-size", default_values_t = [1u64, 10, 50, 100, 250])]
    pub batch_sizes: Vec<u64>,
    /// Poisson parameter of the skip model
    #[arg(long, default_value_t = 6.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = TraceKind::Poisson)]
    pub trace: TraceKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "out-dir", default_value = "out")]
    pub out_dir: PathBuf,
    /// Outputs to write (repeatable; default: rd)
    #[arg(long = "emit", value_enum)]
    pub emit: Vec<Emit>,
}

pub fn run_rd(args: RdArgs) -> CliResult<()> {
    if args.batch_sizes.is_empty() {
        return Err(CliError::usage("need at least one --batch-size"));
    }
    let (n, m) = (args.n, args.ensemble_size);
    if n == 0 || m == 0 {
        return Err(CliError::usage("--n and --ensemble-size must be at least 1"));
    }
    let emit = Emit::effective(&args.emit, &[Emit::Rd]);
    std::fs::create_dir_all(&args.out_dir)?;
    let bins = RdBins::decades(m as u64)?;

    let mut summary_csv =
        String::from("batch_size,events,finite,infinite,rd_total,full_training_bound\n");
    let mut rows = Vec::new();
    for &b in &args.batch_sizes {
        if b == 0 {
            return Err(CliError::usage("--batch-size must be at least 1"));
        }
        let trace = match args.trace {
            TraceKind::Poisson => poisson_skip_trace(n, m, b, args.lambda, args.seed)?,
            TraceKind::Full => full_training_trace(n, m, b)?,
        };
        let hist = rd_histogram(&trace, &bins)?;
        if emit.contains(&Emit::Rd) {
            let mut out = Vec::new();
            hist.write_csv(&mut out)?;
            write_text(
                &args.out_dir.join(format!("rd_b{b}.csv")),
                &String::from_utf8(out).expect("histogram csv is utf-8"),
            )?;
        }
        let total = rd_total(&trace, m as u64)?;
        let bound = rd_bound_minibatch(n, m as u64, b)?;
        let (events, finite, infinite) =
            (trace.len() as u64, hist.finite_total(), hist.total() - hist.finite_total());
        writeln!(summary_csv, "{b},{events},{finite},{infinite},{total},{bound}")
            .expect("string write");
        rows.push(json!({
            "batch_size": b,
            "events": events,
            "finite": finite,
            "infinite": infinite,
            "rd_total": total,
            "full_training_bound": bound,
        }));
    }
    if emit.contains(&Emit::Rd) {
        write_text(&args.out_dir.join("rd_summary.csv"), &summary_csv)?;
    }

    let summary = json!({
        "command": "rd",
        "n": n,
        "ensemble_size": m,
        "lambda": args.lambda,
        "trace": match args.trace { TraceKind::Poisson => "poisson", TraceKind::Full => "full" },
        "seed": args.seed,
        "rows": rows,
    });
    write_text(
        &args.out_dir.join("summary.json"),
        &format!("{}\n", serde_json::to_string_pretty(&summary).expect("json serializes")),
    )
}
