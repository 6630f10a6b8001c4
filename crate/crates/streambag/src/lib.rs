//! Streaming ensemble classification with locality instrumentation.
//!
//! The crate implements online-bagging ensemble variants (OzaBag and its
//! ADWIN/ASHT extensions, leveraging bagging, adaptive random forests, and
//! streaming random patches) over incremental Hoeffding trees, three
//! interchangeable execution strategies (sequential, parallel per instance,
//! and mini-batch), and a reuse-distance engine for analyzing the memory
//! locality of each strategy's member-access pattern.

pub mod data;
pub mod drift;
pub mod ensembles;
pub mod error;
pub mod eval;
pub mod executor;
pub mod hoeffding;
pub mod io;
pub mod locality;
pub mod rng;

pub use data::{Attribute, AttributeKind, Instance, Prediction, Schema};
pub use error::{Error, Result};
