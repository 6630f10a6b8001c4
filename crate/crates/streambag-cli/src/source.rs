//! Shared plumbing: exit-code-aware errors and stream-source resolution.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use streambag::io::{
    descriptor_for, generate_vec, load_arff, load_csv, read_schema_json, Generator, SyntheticSpec,
};
use streambag::{Instance, Schema};

/// CLI failure carrying its process exit code: 2 for usage problems,
/// 3 for unreadable or malformed data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Data(msg) => f.write_str(msg),
        }
    }
}

impl From<streambag::Error> for CliError {
    fn from(e: streambag::Error) -> Self {
        match e {
            streambag::Error::Domain(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// A fully materialized input stream. Loaders stay single-pass; the CLI
/// collects them because every benchmark cell replays the same stream.
pub struct Source {
    pub name: String,
    pub schema: Arc<Schema>,
    pub instances: Vec<Instance>,
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

fn load_dataset(spec: &str, data_dir: &Path) -> CliResult<Source> {
    let path = PathBuf::from(spec);
    let extension = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match extension.as_deref() {
        Some("arff") => {
            let (schema, rows) = load_arff(&path)?;
            let instances = rows.collect::<streambag::Result<Vec<_>>>()?;
            Ok(Source { name: stem_of(&path), schema, instances })
        }
        Some("csv") => {
            let sidecar = path.with_extension("schema.json");
            if !sidecar.exists() {
                return Err(CliError::data(format!(
                    "CSV input needs a schema sidecar at {}",
                    sidecar.display()
                )));
            }
            let schema = read_schema_json(&sidecar)?;
            let rows = load_csv(&path, Arc::clone(&schema), true)?;
            let instances = rows.collect::<streambag::Result<Vec<_>>>()?;
            Ok(Source { name: stem_of(&path), schema, instances })
        }
        Some(other) => Err(CliError::usage(format!(
            "unsupported dataset extension {other:?} (expected .arff or .csv)"
        ))),
        None => {
            // bare benchmark name
            let Some(descriptor) = descriptor_for(spec) else {
                return Err(CliError::usage(format!(
                    "unknown dataset {spec:?} (expected a path or one of airlines, gmsc, electricity, covertype)"
                )));
            };
            let path = data_dir.join(format!("{}.arff", descriptor.name));
            if !path.exists() {
                return Err(CliError::data(format!(
                    "{} is not downloaded; run scripts/fetch_datasets.sh (expected {})",
                    descriptor.name,
                    path.display()
                )));
            }
            let (schema, rows) = load_arff(&path)?;
            let instances = rows.collect::<streambag::Result<Vec<_>>>()?;
            Ok(Source { name: descriptor.name.to_string(), schema, instances })
        }
    }
}

fn synth_source(spec: SyntheticSpec) -> CliResult<Source> {
    let name = format!("{}_n{}", spec.generator.name(), spec.n);
    let (schema, instances) = generate_vec(&spec)?;
    Ok(Source { name, schema, instances })
}

fn parse_synthetic(spec: &str, default_seed: u64) -> CliResult<SyntheticSpec> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        return serde_json::from_str(trimmed)
            .map_err(|e| CliError::usage(format!("invalid synthetic spec JSON: {e}")));
    }
    if let Ok(generator) = trimmed.parse::<Generator>() {
        return Ok(SyntheticSpec::new(generator, 5000, default_seed).with_noise(0.05));
    }
    let path = Path::new(trimmed);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("invalid synthetic spec in {trimmed}: {e}")));
    }
    Err(CliError::usage(format!(
        "--synthetic takes a generator name, inline JSON, or a JSON file path; got {spec:?}"
    )))
}

/// Resolves `--dataset`/`--synthetic` into a materialized stream. With
/// neither flag, a drift-free 5000-instance synthetic default is used.
pub fn resolve(
    dataset: Option<&str>,
    synthetic: Option<&str>,
    data_dir: &Path,
    default_seed: u64,
) -> CliResult<Source> {
    match (dataset, synthetic) {
        (Some(_), Some(_)) => {
            Err(CliError::usage("choose one of --dataset or --synthetic, not both"))
        }
        (Some(d), None) => load_dataset(d, data_dir),
        (None, Some(s)) => synth_source(parse_synthetic(s, default_seed)?),
        (None, None) => synth_source(
            SyntheticSpec::new(Generator::ThresholdConcept, 5000, default_seed).with_noise(0.05),
        ),
    }
}
