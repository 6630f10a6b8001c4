//! Stream sources: ARFF and CSV loaders for the benchmark datasets, plus
//! deterministic synthetic generators for desk-scale experiments.
//!
//! Loaders are single-pass iterators — rewinding a stream means reopening the
//! file — and never normalize values; they deliver what the file declares.
//! The real datasets are optional fixtures fetched by `scripts/fetch_datasets.sh`;
//! everything that must be deterministic runs on the synthetic generators.

pub mod arff;
pub mod csvio;
pub mod synth;

pub use arff::{load_arff, ArffInstances};
pub use csvio::{load_csv, read_schema_json, write_schema_json, CsvInstances};
pub use synth::{generate, generate_vec, Generator, SyntheticSpec};

use serde::{Deserialize, Serialize};

/// Published summary statistics of one benchmark dataset, used to
/// cross-check a loaded fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: &'static str,
    pub instance_count: u64,
    pub feature_count: usize,
    pub nominal_count: usize,
    pub normalized: bool,
    pub class_count: usize,
}

pub const AIRLINES: DatasetDescriptor = DatasetDescriptor {
    name: "airlines",
    instance_count: 539_383,
    feature_count: 7,
    nominal_count: 4,
    normalized: false,
    class_count: 2,
};

pub const GMSC: DatasetDescriptor = DatasetDescriptor {
    name: "gmsc",
    instance_count: 150_000,
    feature_count: 10,
    nominal_count: 0,
    normalized: false,
    class_count: 2,
};

pub const ELECTRICITY: DatasetDescriptor = DatasetDescriptor {
    name: "electricity",
    instance_count: 45_312,
    feature_count: 8,
    nominal_count: 1,
    normalized: true,
    class_count: 2,
};

pub const COVERTYPE: DatasetDescriptor = DatasetDescriptor {
    name: "covertype",
    instance_count: 581_012,
    feature_count: 54,
    nominal_count: 45,
    normalized: true,
    class_count: 7,
};

pub const BENCHMARKS: [DatasetDescriptor; 4] = [AIRLINES, GMSC, ELECTRICITY, COVERTYPE];

/// Looks a benchmark descriptor up by (case-insensitive) name.
pub fn descriptor_for(name: &str) -> Option<&'static DatasetDescriptor> {
    let name = name.to_ascii_lowercase();
    BENCHMARKS.iter().find(|d| d.name == name)
}
