//! Data model: schemas, instances, and class-vote predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of a single attribute. Nominal attributes carry their declared value set;
/// instance values for them are category indices into that set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Numeric,
    Nominal { values: Vec<String> },
}

impl AttributeKind {
    pub fn is_nominal(&self) -> bool {
        matches!(self, AttributeKind::Nominal { .. })
    }

    /// Number of declared values for a nominal attribute, 0 for numeric.
    pub fn n_values(&self) -> usize {
        match self {
            AttributeKind::Numeric => 0,
            AttributeKind::Nominal { values } => values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute { name: name.into(), kind: AttributeKind::Numeric }
    }

    pub fn nominal(name: impl Into<String>, values: Vec<String>) -> Self {
        Attribute { name: name.into(), kind: AttributeKind::Nominal { values } }
    }
}

/// Declares the feature attributes and the class value set of a stream.
/// Immutable once built; shared via `Arc` between streams, learners, and loaders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    attributes: Vec<Attribute>,
    class_values: Vec<String>,
}

impl Schema {
    /// Validates attribute-name uniqueness, non-empty nominal value sets, and a
    /// non-empty class value set.
    pub fn new(attributes: Vec<Attribute>, class_values: Vec<String>) -> Result<Self> {
        if class_values.is_empty() {
            return Err(Error::schema("class value set must not be empty"));
        }
        let mut names: Vec<&str> = attributes.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::schema("attribute names must be unique"));
        }
        for attr in &attributes {
            if let AttributeKind::Nominal { values } = &attr.kind {
                if values.is_empty() {
                    return Err(Error::schema(format!(
                        "nominal attribute '{}' declares no values",
                        attr.name
                    )));
                }
            }
        }
        Ok(Schema { attributes, class_values })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn class_values(&self) -> &[String] {
        &self.class_values
    }

    pub fn n_classes(&self) -> usize {
        self.class_values.len()
    }
}

/// One labeled example. Numeric attributes hold reals; nominal attributes hold
/// their category index stored as an exact small float.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    values: Box<[f64]>,
    label: u32,
}

impl Instance {
    /// Validates the value vector against `schema`: length, finiteness for
    /// numerics, integral in-range indices for nominals, label in range.
    pub fn new(schema: &Schema, values: Vec<f64>, label: u32) -> Result<Self> {
        if values.len() != schema.n_attributes() {
            return Err(Error::schema(format!(
                "instance has {} values, schema declares {} attributes",
                values.len(),
                schema.n_attributes()
            )));
        }
        for (i, (&v, attr)) in values.iter().zip(schema.attributes()).enumerate() {
            match &attr.kind {
                AttributeKind::Numeric => {
                    if !v.is_finite() {
                        return Err(Error::schema(format!(
                            "attribute {i} ('{}') is numeric but value is {v}",
                            attr.name
                        )));
                    }
                }
                AttributeKind::Nominal { values: declared } => {
                    if v.fract() != 0.0 || v < 0.0 || (v as usize) >= declared.len() {
                        return Err(Error::schema(format!(
                            "attribute {i} ('{}') expects a category index in 0..{}, got {v}",
                            attr.name,
                            declared.len()
                        )));
                    }
                }
            }
        }
        if (label as usize) >= schema.n_classes() {
            return Err(Error::schema(format!(
                "label {label} out of range for {} classes",
                schema.n_classes()
            )));
        }
        Ok(Instance { values: values.into_boxed_slice(), label })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, attr: usize) -> f64 {
        self.values[attr]
    }

    /// Category index of a nominal attribute's value.
    pub fn nominal_value(&self, attr: usize) -> usize {
        self.values[attr] as usize
    }

    pub fn label(&self) -> u32 {
        self.label
    }
}

/// Per-class vote scores. Scores are non-negative and need not be normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    votes: Vec<f64>,
}

impl Prediction {
    pub fn new(votes: Vec<f64>) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::domain("prediction requires at least one class vote"));
        }
        if votes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain("votes must be finite and non-negative"));
        }
        Ok(Prediction { votes })
    }

    pub fn zeros(n_classes: usize) -> Self {
        Prediction { votes: vec![0.0; n_classes] }
    }

    pub fn votes(&self) -> &[f64] {
        &self.votes
    }

    /// Index of the maximal vote; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.votes)
    }

    /// Adds `other` scaled to sum 1. All-zero vote vectors contribute nothing.
    pub fn add_normalized(&mut self, other: &[f64]) {
        let sum: f64 = other.iter().sum();
        if sum > 0.0 {
            for (acc, &v) in self.votes.iter_mut().zip(other) {
                *acc += v / sum;
            }
        }
    }
}

/// Position of the largest value; ties resolve to the lowest index.
/// An all-zero (or all-equal) slice therefore yields 0.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
