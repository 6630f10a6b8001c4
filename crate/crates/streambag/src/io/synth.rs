//! Deterministic synthetic streams. Each generator consumes a fixed number
//! of RNG draws per instance regardless of its parameters, so two specs that
//! differ only in drift points produce byte-identical prefixes up to the
//! first differing drift point.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{Attribute, Instance, Schema};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Label = (active feature > 1/2); the active feature advances at each
    /// drift point.
    ThresholdConcept,
    /// Gradually rotating linear separator; rotation reverses at drift points.
    RotatingHyperplane,
    /// Class prior alternates between 0.2 and 0.8 at each drift point.
    AbruptBernoulliDrift,
    /// Loan-decision rules over salary/commission/age/loan; the rule in force
    /// advances at each drift point.
    AgrawalLike,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::ThresholdConcept => "threshold_concept",
            Generator::RotatingHyperplane => "rotating_hyperplane",
            Generator::AbruptBernoulliDrift => "abrupt_bernoulli_drift",
            Generator::AgrawalLike => "agrawal_like",
        }
    }

    fn n_features(self) -> usize {
        match self {
            Generator::ThresholdConcept => 4,
            Generator::RotatingHyperplane => 5,
            Generator::AbruptBernoulliDrift => 2,
            Generator::AgrawalLike => 4,
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "threshold_concept" => Ok(Generator::ThresholdConcept),
            "rotating_hyperplane" => Ok(Generator::RotatingHyperplane),
            "abrupt_bernoulli_drift" => Ok(Generator::AbruptBernoulliDrift),
            "agrawal_like" => Ok(Generator::AgrawalLike),
            _ => Err(Error::domain(format!(
                "unknown generator {s:?} (expected threshold_concept, rotating_hyperplane, abrupt_bernoulli_drift, or agrawal_like)"
            ))),
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub generator: Generator,
    pub n: u64,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub drift_points: Vec<u64>,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(generator: Generator, n: u64, seed: u64) -> Self {
        SyntheticSpec { generator, n, noise: 0.0, drift_points: Vec::new(), seed }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_drift_points(mut self, points: Vec<u64>) -> Self {
        self.drift_points = points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::domain(format!("noise must lie in [0, 1], got {}", self.noise)));
        }
        if !self.drift_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::domain("drift points must be strictly increasing"));
        }
        if let Some(&last) = self.drift_points.last() {
            if last >= self.n {
                return Err(Error::domain(format!(
                    "drift point {last} is out of range for a stream of {}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Concept segment in force at instance `i`: the number of drift points
    /// at or before `i`.
    pub fn segment_at(&self, i: u64) -> usize {
        self.drift_points.iter().take_while(|&&p| p <= i).count()
    }
}

/// Lazy, deterministic instance stream for a spec.
pub struct SynthStream {
    spec: SyntheticSpec,
    schema: Arc<Schema>,
    rng: RngStream,
    next_index: u64,
    /// Hyperplane state: current angle of the separator in the (x0, x1) plane.
    angle: f64,
}

impl Iterator for SynthStream {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.next_index >= self.spec.n {
            return None;
        }
        let i = self.next_index;
        self.next_index += 1;
        let segment = self.spec.segment_at(i);
        let f = self.spec.generator.n_features();
        let mut values: Vec<f64> = Vec::with_capacity(f);
        let mut label = match self.spec.generator {
            Generator::ThresholdConcept => {
                for _ in 0..f {
                    values.push(self.rng.next_f64());
                }
                (values[segment % f] > 0.5) as u32
            }
            Generator::RotatingHyperplane => {
                for _ in 0..f {
                    values.push(self.rng.next_f64());
                }
                // quarter turn over the stream; direction flips per segment
                let direction = if segment % 2 == 0 { 1.0 } else { -1.0 };
                self.angle += direction * std::f64::consts::FRAC_PI_2 / self.spec.n as f64;
                let (s, c) = self.angle.sin_cos();
                let margin = c * (values[0] - 0.5) + s * (values[1] - 0.5);
                (margin > 0.0) as u32
            }
            Generator::AbruptBernoulliDrift => {
                let prior = if segment % 2 == 0 { 0.2 } else { 0.8 };
                let label = (self.rng.next_f64() < prior) as u32;
                // one informative feature, one pure noise
                values.push(0.5 * self.rng.next_f64() + 0.5 * label as f64);
                values.push(self.rng.next_f64());
                label
            }
            Generator::AgrawalLike => {
                let salary = 20_000.0 + 130_000.0 * self.rng.next_f64();
                let commission = if salary >= 75_000.0 {
                    // draw regardless, to keep per-instance consumption fixed
                    let _ = self.rng.next_f64();
                    0.0
                } else {
                    10_000.0 + 65_000.0 * self.rng.next_f64()
                };
                let age = (20.0 + 60.0 * self.rng.next_f64()).floor();
                let loan = 500_000.0 * self.rng.next_f64();
                values.extend([salary, commission, age, loan]);
                let approved = match segment % 3 {
                    0 => age < 40.0 || age >= 60.0,
                    1 => salary + commission > 100_000.0,
                    _ => age >= 40.0 && loan < 300_000.0,
                };
                approved as u32
            }
        };
        let flip = self.rng.next_f64();
        if flip < self.spec.noise {
            label = 1 - label;
        }
        Some(Instance::new(&self.schema, values, label).expect("generated values fit the schema"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.spec.n - self.next_index) as usize;
        (left, Some(left))
    }
}

fn schema_for(generator: Generator) -> Arc<Schema> {
    let names: Vec<&str> = match generator {
        Generator::ThresholdConcept => vec!["x0", "x1", "x2", "x3"],
        Generator::RotatingHyperplane => vec!["x0", "x1", "x2", "x3", "x4"],
        Generator::AbruptBernoulliDrift => vec!["signal", "noise"],
        Generator::AgrawalLike => vec!["salary", "commission", "age", "loan"],
    };
    let attrs = names.into_iter().map(Attribute::numeric).collect();
    Arc::new(Schema::new(attrs, vec!["c0".into(), "c1".into()]).expect("static schema is valid"))
}

/// Validates the spec and returns its schema plus a lazy instance stream.
pub fn generate(spec: &SyntheticSpec) -> Result<(Arc<Schema>, SynthStream)> {
    spec.validate()?;
    let schema = schema_for(spec.generator);
    let stream = SynthStream {
        spec: spec.clone(),
        schema: Arc::clone(&schema),
        rng: RngStream::new(spec.seed, 0),
        next_index: 0,
        angle: 0.0,
    };
    Ok((schema, stream))
}

/// Convenience: generate and collect the full stream.
pub fn generate_vec(spec: &SyntheticSpec) -> Result<(Arc<Schema>, Vec<Instance>)> {
    let (schema, stream) = generate(spec)?;
    Ok((schema, stream.collect()))
}
