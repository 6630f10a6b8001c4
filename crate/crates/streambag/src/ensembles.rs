//! The six online-bagging ensemble variants.
//!
//! Every variant follows the same loop: each member draws a Poisson weight per
//! instance from its own RNG substream and trains its base learner with that
//! weight. The variants differ in the Poisson parameter, the base learner, and
//! the adaptive machinery layered on top:
//!
//! * `OB` plain online bagging, lambda 1.
//! * `OBASHT` online bagging over size-capped trees on a geometric ladder.
//! * `OBAdwin` online bagging plus one global ADWIN on the ensemble error;
//!   a detected change replaces the worst member.
//! * `LBag` leveraging bagging: lambda 6 and a per-member ADWIN that resets
//!   the member on drift.
//! * `ARF` adaptive random forest: lambda 6, per-leaf random attribute
//!   subsets, and a warning/drift detector pair per member. A warning starts
//!   a background tree; a drift promotes it.
//! * `SRP` streaming random patches: lambda 6 and a fixed random attribute
//!   patch per member.
//!
//! Detector resets follow the usual one-sided convention: a window change only
//! counts when the post-change error estimate is higher than before, so a
//! member improving during warm-up is never reset.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{argmax, Instance, Prediction, Schema};
use crate::drift::Adwin;
use crate::error::{Error, Result};
use crate::hoeffding::{AttrPolicy, BoundedTree, HoeffdingTree, Learner, TreeParams};
use crate::rng::{self, model_stream_id, weight_stream_id, RngStream};

/// ADWIN delta for LBag member detectors and the OBAdwin global detector.
pub const DEFAULT_ADWIN_DELTA: f64 = 0.002;
/// ARF warning-level delta (less conservative than the drift level).
pub const WARNING_DELTA: f64 = 0.01;
/// ARF drift-level delta.
pub const DRIFT_DELTA: f64 = 0.001;
/// Fraction of attributes in an SRP member's patch.
pub const SRP_SUBSPACE_FRACTION: f64 = 0.6;
/// Rows of the OBASHT size ladder: member i is capped at 2^(i*ROWS/m) splits.
pub const SIZE_LADDER_ROWS: usize = 10;

/// Window length for the prequential error used to pick OBAdwin's worst member.
const ERROR_WINDOW_LEN: usize = 1000;
/// Per-member Poisson draws retained for seed-matched sweep checks.
const WEIGHT_LOG_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "OB")]
    Ob,
    #[serde(rename = "OBASHT")]
    ObAsht,
    #[serde(rename = "OBAdwin")]
    ObAdwin,
    #[serde(rename = "LBag")]
    LBag,
    #[serde(rename = "ARF")]
    Arf,
    #[serde(rename = "SRP")]
    Srp,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Ob, Variant::ObAsht, Variant::ObAdwin, Variant::LBag, Variant::Arf, Variant::Srp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ob => "OB",
            Variant::ObAsht => "OBASHT",
            Variant::ObAdwin => "OBAdwin",
            Variant::LBag => "LBag",
            Variant::Arf => "ARF",
            Variant::Srp => "SRP",
        }
    }

    /// Poisson parameter: 1 for the plain bagging family, 6 for the
    /// leveraging family.
    pub fn lambda(self) -> f64 {
        match self {
            Variant::Ob | Variant::ObAsht | Variant::ObAdwin => 1.0,
            Variant::LBag | Variant::Arf | Variant::Srp => 6.0,
        }
    }

    /// Whether members carry their own drift detector.
    pub fn member_drift_detector(self) -> bool {
        matches!(self, Variant::LBag | Variant::Arf)
    }

    /// Whether the ensemble monitors its aggregate error globally.
    pub fn global_detector(self) -> bool {
        matches!(self, Variant::ObAdwin)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ob" => Ok(Variant::Ob),
            "obasht" => Ok(Variant::ObAsht),
            "obadwin" => Ok(Variant::ObAdwin),
            "lbag" => Ok(Variant::LBag),
            "arf" => Ok(Variant::Arf),
            "srp" => Ok(Variant::Srp),
            _ => Err(Error::domain(format!(
                "unknown algorithm {s:?} (expected one of OB, OBASHT, OBAdwin, LBag, ARF, SRP)"
            ))),
        }
    }
}

/// Ensemble parameters. `lambda` is bound to the variant by the constructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub variant: Variant,
    pub ensemble_size: usize,
    pub lambda: f64,
    pub seed: u64,
    pub tree: TreeParams,
}

impl EnsembleConfig {
    pub fn new(variant: Variant, ensemble_size: usize, seed: u64) -> Result<Self> {
        if ensemble_size == 0 {
            return Err(Error::domain("ensemble size must be >= 1"));
        }
        Ok(EnsembleConfig {
            variant,
            ensemble_size,
            lambda: variant.lambda(),
            seed,
            tree: TreeParams::default(),
        })
    }

    /// Attribute-subset size the variant trains on, out of `n_features`.
    pub fn subspace_size(&self, n_features: usize) -> usize {
        match self.variant {
            Variant::Arf => arf_subspace_size(n_features),
            Variant::Srp => srp_patch_size(n_features, SRP_SUBSPACE_FRACTION),
            _ => n_features,
        }
    }

    fn validate(&self, schema: &Schema) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::domain("ensemble size must be >= 1"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::domain("lambda must be positive"));
        }
        self.tree.validate()?;
        let f = schema.n_attributes();
        let s = self.subspace_size(f);
        if s == 0 || s > f {
            return Err(Error::domain(format!("subspace size {s} out of range for {f} attributes")));
        }
        Ok(())
    }
}

/// Subset size used by ARF at each leaf: ceil(sqrt(F)) + 1, clamped to [1, F].
pub fn arf_subspace_size(n_features: usize) -> usize {
    let s = (n_features as f64).sqrt().ceil() as usize + 1;
    s.clamp(1, n_features.max(1))
}

/// Patch size used by SRP: max(2, round(fraction * F)), clamped to [1, F].
pub fn srp_patch_size(n_features: usize, fraction: f64) -> usize {
    let s = (fraction * n_features as f64).round() as usize;
    s.max(2).clamp(1, n_features.max(1))
}

/// Draws a fresh per-leaf attribute subset for ARF.
pub fn arf_node_subspace(rng: &mut RngStream, n_features: usize) -> Vec<usize> {
    rng.distinct_indices(n_features, arf_subspace_size(n_features))
}

/// Draws an SRP member's attribute patch from its model substream.
pub fn srp_make_patch(schema: &Schema, rng: &mut RngStream, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!("subspace fraction must lie in (0, 1], got {fraction}")));
    }
    let f = schema.n_attributes();
    Ok(rng.distinct_indices(f, srp_patch_size(f, fraction)))
}

/// OBASHT size ladder: member `i` of `m` gets 2^floor(i*ROWS/m) split nodes.
pub fn asht_size_cap(member: usize, ensemble_size: usize) -> usize {
    1usize << (member * SIZE_LADDER_ROWS / ensemble_size)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Warning,
    Drift,
    Replacement,
}

impl ChangeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Warning => "warning",
            ChangeKind::Drift => "drift",
            ChangeKind::Replacement => "replacement",
        }
    }
}

/// Where a change event originated: one member, or the ensemble-wide detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Member(u32),
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub instance: u64,
    pub scope: Scope,
    pub kind: ChangeKind,
}

/// Ordered record of detector events across a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChangeLog {
    events: Vec<ChangeEvent>,
}

impl ChangeLog {
    pub fn new() -> Self {
        ChangeLog::default()
    }

    pub fn events(&self) -> &[ChangeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Absorbs one batch worth of events in deterministic order: by instance,
    /// then member (global last), preserving emission order within a member.
    pub fn merge_batch(&mut self, mut batch: Vec<ChangeEvent>) {
        batch.sort_by_key(|e| (e.instance, e.scope));
        debug_assert!(
            self.events.last().map_or(true, |last| {
                batch.first().map_or(true, |first| first.instance >= last.instance)
            }),
            "change-log instance indices must be non-decreasing"
        );
        self.events.extend(batch);
    }

    pub fn count(&self, kind: ChangeKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Detected changes: drifts and replacements. Warnings are advisories.
    pub fn change_count(&self) -> usize {
        self.events.len() - self.count(ChangeKind::Warning)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "instance_index,member,kind")?;
        for e in &self.events {
            match e.scope {
                Scope::Member(i) => writeln!(w, "{},{},{}", e.instance, i, e.kind.as_str())?,
                Scope::Global => writeln!(w, "{},GLOBAL,{}", e.instance, e.kind.as_str())?,
            }
        }
        Ok(())
    }
}

/// Last-`ERROR_WINDOW_LEN` prequential error rate of one member.
#[derive(Debug, Clone, PartialEq, Default)]
struct ErrorWindow {
    buf: VecDeque<bool>,
    errors: u32,
}

impl ErrorWindow {
    fn push(&mut self, err: bool) {
        if self.buf.len() == ERROR_WINDOW_LEN {
            if self.buf.pop_front() == Some(true) {
                self.errors -= 1;
            }
        }
        self.buf.push_back(err);
        self.errors += err as u32;
    }

    fn rate(&self) -> f64 {
        if self.buf.is_empty() {
            0.0
        } else {
            self.errors as f64 / self.buf.len() as f64
        }
    }

    fn clear(&mut self) {
        self.buf.clear();
        self.errors = 0;
    }
}

/// Outcome of training one member on one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberBatchOutcome {
    pub events: Vec<ChangeEvent>,
    /// Offsets within the batch where the Poisson weight was positive, in
    /// order; this is exactly the member's contribution to the access trace.
    pub trained: Vec<u32>,
}

/// One ensemble member: a base learner plus its adaptive state. Members own
/// their RNG substreams, so training them is independent of every other
/// member and of the execution schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    index: u32,
    variant: Variant,
    lambda: f64,
    learner: Learner,
    /// Poisson draws: decides which instances this member effectively trains
    /// on (its bootstrap instance subset).
    weight_rng: RngStream,
    /// Model randomness: per-leaf subsets for ARF, the patch draw for SRP.
    model_rng: RngStream,
    warning: Option<Adwin>,
    drift: Option<Adwin>,
    background: Option<Learner>,
    feature_patch: Option<Arc<Vec<usize>>>,
    error_window: Option<ErrorWindow>,
    weight_log: Vec<u64>,
}

/// True when the detector signalled a change and the error estimate came out
/// worse than before; improvements never trigger resets.
fn worsened(detector: &mut Adwin, err: f64) -> Result<bool> {
    let before = detector.estimate();
    Ok(detector.add(err)? && detector.estimate() > before)
}

impl Member {
    fn build(config: &EnsembleConfig, schema: &Arc<Schema>, index: usize) -> Result<Member> {
        let weight_rng = RngStream::new(config.seed, weight_stream_id(index));
        let mut model_rng = RngStream::new(config.seed, model_stream_id(index));
        let mut feature_patch = None;
        let learner = match config.variant {
            Variant::Ob | Variant::ObAdwin | Variant::LBag => Learner::Tree(HoeffdingTree::new(
                Arc::clone(schema),
                config.tree,
                AttrPolicy::All,
            )?),
            Variant::ObAsht => {
                let tree = HoeffdingTree::new(Arc::clone(schema), config.tree, AttrPolicy::All)?;
                Learner::Bounded(BoundedTree::new(tree, asht_size_cap(index, config.ensemble_size))?)
            }
            Variant::Arf => Learner::Tree(HoeffdingTree::new(
                Arc::clone(schema),
                config.tree,
                AttrPolicy::RandomPerLeaf(arf_subspace_size(schema.n_attributes())),
            )?),
            Variant::Srp => {
                let patch =
                    Arc::new(srp_make_patch(schema, &mut model_rng, SRP_SUBSPACE_FRACTION)?);
                feature_patch = Some(Arc::clone(&patch));
                Learner::Tree(HoeffdingTree::new(
                    Arc::clone(schema),
                    config.tree,
                    AttrPolicy::Fixed(patch),
                )?)
            }
        };
        let (warning, drift) = match config.variant {
            Variant::LBag => (None, Some(Adwin::new(DEFAULT_ADWIN_DELTA)?)),
            Variant::Arf => (Some(Adwin::new(WARNING_DELTA)?), Some(Adwin::new(DRIFT_DELTA)?)),
            _ => (None, None),
        };
        let error_window = config.variant.global_detector().then(ErrorWindow::default);
        Ok(Member {
            index: index as u32,
            variant: config.variant,
            lambda: config.lambda,
            learner,
            weight_rng,
            model_rng,
            warning,
            drift,
            background: None,
            feature_patch,
            error_window,
            weight_log: Vec::new(),
        })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn background(&self) -> Option<&Learner> {
        self.background.as_ref()
    }

    pub fn feature_patch(&self) -> Option<&[usize]> {
        self.feature_patch.as_deref().map(Vec::as_slice)
    }

    /// First `WEIGHT_LOG_LEN` Poisson draws of this member, for seed-matched
    /// comparisons across batch sizes.
    pub fn weight_log(&self) -> &[u64] {
        &self.weight_log
    }

    /// Windowed prequential error rate (0 while the window is empty).
    pub fn windowed_error(&self) -> f64 {
        self.error_window.as_ref().map_or(0.0, ErrorWindow::rate)
    }

    pub fn class_votes(&self, x: &Instance) -> Vec<f64> {
        self.learner.class_votes(x)
    }

    pub fn predict(&self, x: &Instance) -> Result<Prediction> {
        self.learner.predict(x)
    }

    fn needs_error(&self) -> bool {
        self.warning.is_some() || self.drift.is_some() || self.error_window.is_some()
    }

    /// Trains this member on a batch: per instance, draw the Poisson weight,
    /// train with it when positive (the background learner too), then update
    /// the detectors with the pre-training 0/1 error. Warning spawns a fresh
    /// background learner; drift promotes it (or resets when none exists).
    pub fn train_batch(&mut self, batch: &[Instance], base_index: u64) -> Result<MemberBatchOutcome> {
        let mut events = Vec::new();
        let mut trained = Vec::new();
        for (off, x) in batch.iter().enumerate() {
            let instance = base_index + off as u64;
            let k = rng::poisson(&mut self.weight_rng, self.lambda)?;
            if self.weight_log.len() < WEIGHT_LOG_LEN {
                self.weight_log.push(k);
            }
            let err = if self.needs_error() {
                let predicted = argmax(&self.learner.class_votes(x)) as u32;
                Some(predicted != x.label())
            } else {
                None
            };
            if let Some(window) = self.error_window.as_mut() {
                window.push(err.unwrap_or(false));
            }
            if k > 0 {
                trained.push(off as u32);
                self.learner.train(x, k, &mut self.model_rng)?;
                if let Some(bg) = self.background.as_mut() {
                    bg.train(x, k, &mut self.model_rng)?;
                }
            }
            let err = err.map_or(0.0, f64::from);
            let warned = match self.warning.as_mut() {
                Some(det) => worsened(det, err)?,
                None => false,
            };
            if warned {
                events.push(ChangeEvent {
                    instance,
                    scope: Scope::Member(self.index),
                    kind: ChangeKind::Warning,
                });
                self.background = Some(self.learner.fresh());
                self.warning = Some(Adwin::new(WARNING_DELTA)?);
            }
            let drifted = match self.drift.as_mut() {
                Some(det) => worsened(det, err)?,
                None => false,
            };
            if drifted {
                events.push(ChangeEvent {
                    instance,
                    scope: Scope::Member(self.index),
                    kind: ChangeKind::Drift,
                });
                self.learner = match self.background.take() {
                    Some(bg) => bg,
                    None => self.learner.fresh(),
                };
                let delta = self.drift.as_ref().expect("drift detector present").delta();
                self.drift = Some(Adwin::new(delta)?);
                if self.warning.is_some() {
                    self.warning = Some(Adwin::new(WARNING_DELTA)?);
                }
            }
        }
        Ok(MemberBatchOutcome { events, trained })
    }

    /// Replacement by the global detector: fresh learner, cleared error
    /// history; the RNG substreams keep advancing where they were.
    fn reset_for_replacement(&mut self) {
        self.learner = self.learner.fresh();
        self.background = None;
        if let Some(window) = self.error_window.as_mut() {
            window.clear();
        }
    }
}

/// An ensemble of `Member`s behind a classify/train-member interface.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    schema: Arc<Schema>,
    config: EnsembleConfig,
    members: Vec<Member>,
    global: Option<Adwin>,
}

impl Ensemble {
    pub fn new(config: EnsembleConfig, schema: Arc<Schema>) -> Result<Self> {
        config.validate(&schema)?;
        let members = (0..config.ensemble_size)
            .map(|i| Member::build(&config, &schema, i))
            .collect::<Result<Vec<_>>>()?;
        let global = if config.variant.global_detector() {
            Some(Adwin::new(DEFAULT_ADWIN_DELTA)?)
        } else {
            None
        };
        Ok(Ensemble { schema, config, members, global })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn size(&self) -> usize {
        self.config.ensemble_size
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, index: usize) -> &Member {
        &self.members[index]
    }

    /// Removes all members for the training phase (ownership moves to the
    /// workers); the ensemble is not usable until they are restored.
    pub(crate) fn take_members(&mut self) -> Vec<Member> {
        std::mem::take(&mut self.members)
    }

    pub(crate) fn restore_members(&mut self, members: Vec<Member>) {
        debug_assert_eq!(members.len(), self.config.ensemble_size);
        debug_assert!(members.iter().enumerate().all(|(i, m)| m.index as usize == i));
        self.members = members;
    }

    pub(crate) fn members_mut(&mut self) -> &mut [Member] {
        &mut self.members
    }

    fn check_conforms(&self, x: &Instance) -> Result<()> {
        if x.values().len() != self.schema.n_attributes() {
            return Err(Error::schema("instance does not conform to the ensemble's schema"));
        }
        Ok(())
    }

    /// Aggregates per-member votes, each normalized to unit mass (soft
    /// voting). Read-only: no member state changes.
    pub fn classify(&self, x: &Instance) -> Result<Prediction> {
        self.check_conforms(x)?;
        let mut agg = Prediction::zeros(self.schema.n_classes());
        for member in &self.members {
            agg.add_normalized(&member.class_votes(x));
        }
        Ok(agg)
    }

    pub fn classify_batch(&self, batch: &[Instance]) -> Result<Vec<Prediction>> {
        if batch.is_empty() {
            return Err(Error::domain("classify_batch requires a non-empty batch"));
        }
        batch.iter().map(|x| self.classify(x)).collect()
    }

    /// OBAdwin's serial per-batch step: feeds the ensemble's 0/1 errors to the
    /// global detector; each worsening change replaces the member with the
    /// highest windowed error (ties to the lower index) by a fresh learner.
    /// No-op for every other variant.
    pub fn global_change_step(
        &mut self,
        base_index: u64,
        errors: &[f64],
    ) -> Result<Vec<ChangeEvent>> {
        let Some(detector) = self.global.as_mut() else {
            return Ok(Vec::new());
        };
        let mut events = Vec::new();
        for (off, &err) in errors.iter().enumerate() {
            if worsened(detector, err)? {
                let mut worst = 0;
                for (i, member) in self.members.iter().enumerate().skip(1) {
                    if member.windowed_error() > self.members[worst].windowed_error() {
                        worst = i;
                    }
                }
                self.members[worst].reset_for_replacement();
                events.push(ChangeEvent {
                    instance: base_index + off as u64,
                    scope: Scope::Global,
                    kind: ChangeKind::Replacement,
                });
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Attribute;

    fn numeric_schema(n_attrs: usize, n_classes: usize) -> Arc<Schema> {
        let attrs = (0..n_attrs).map(|i| Attribute::numeric(format!("x{i}"))).collect();
        let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
        Arc::new(Schema::new(attrs, classes).unwrap())
    }

    /// label = [x0 > 0.5], optionally inverted, drawn from the scaffold stream.
    fn threshold_batch(schema: &Schema, seed: u64, n: usize, inverted: bool) -> Vec<Instance> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                let values: Vec<f64> =
                    (0..schema.n_attributes()).map(|_| rng.next_f64()).collect();
                let mut label = (values[0] > 0.5) as u32;
                if inverted {
                    label ^= 1;
                }
                Instance::new(schema, values, label).unwrap()
            })
            .collect()
    }

    fn ensemble(variant: Variant, m: usize, schema: &Arc<Schema>, seed: u64) -> Ensemble {
        let config = EnsembleConfig::new(variant, m, seed).unwrap();
        Ensemble::new(config, Arc::clone(schema)).unwrap()
    }

    /// Trains a member's learner directly, bypassing the Poisson draw.
    fn force_train(member: &mut Member, x: &Instance, weight: u64) {
        let Member { learner, model_rng, .. } = member;
        learner.train(x, weight, model_rng).unwrap();
    }

    #[test]
    fn config_binds_lambda_to_the_variant() {
        for variant in Variant::ALL {
            let config = EnsembleConfig::new(variant, 10, 1).unwrap();
            assert_eq!(config.lambda, variant.lambda());
        }
        assert_eq!(Variant::Ob.lambda(), 1.0);
        assert_eq!(Variant::LBag.lambda(), 6.0);
        assert!(EnsembleConfig::new(Variant::Ob, 0, 1).is_err());
    }

    #[test]
    fn effective_zero_weight_rate_matches_the_lambda_family() {
        let schema = numeric_schema(1, 2);
        let x = Instance::new(&schema, vec![0.3], 0).unwrap();
        let batch = vec![x; 10_000];
        for (variant, expect) in [(Variant::Ob, 1.0 - (-1.0f64).exp()), (Variant::LBag, 1.0 - (-6.0f64).exp())]
        {
            let mut e = ensemble(variant, 1, &schema, 9);
            let outcome = e.members_mut()[0].train_batch(&batch, 0).unwrap();
            let rate = outcome.trained.len() as f64 / batch.len() as f64;
            assert!(
                (rate - expect).abs() < 0.02,
                "{variant}: trained fraction {rate}, expected about {expect}"
            );
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for variant in Variant::ALL {
            assert_eq!(variant.name().parse::<Variant>().unwrap(), variant);
            assert_eq!(variant.name().to_lowercase().parse::<Variant>().unwrap(), variant);
        }
        assert!("bagging".parse::<Variant>().is_err());
        let json = serde_json::to_string(&Variant::ObAdwin).unwrap();
        assert_eq!(json, "\"OBAdwin\"");
    }

    #[test]
    fn subspace_sizes_follow_the_variant_rules() {
        assert_eq!(arf_subspace_size(54), 9);
        assert_eq!(arf_subspace_size(7), 4);
        assert_eq!(arf_subspace_size(1), 1);
        assert_eq!(srp_patch_size(10, 0.6), 6);
        assert_eq!(srp_patch_size(1, 0.6), 1);
        assert_eq!(srp_patch_size(3, 0.6), 2);
        let config = EnsembleConfig::new(Variant::Ob, 5, 1).unwrap();
        assert_eq!(config.subspace_size(12), 12);
    }

    #[test]
    fn srp_patches_cover_requested_sizes_and_stay_in_range() {
        let schema = numeric_schema(10, 2);
        let mut rng = RngStream::new(3, 2);
        let all = srp_make_patch(&schema, &mut rng, 1.0).unwrap();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let patch = srp_make_patch(&schema, &mut rng, 0.6).unwrap();
        assert_eq!(patch.len(), 6);
        assert!(patch.windows(2).all(|w| w[0] < w[1]), "patch must be sorted and distinct");
        assert!(patch.iter().all(|&a| a < 10));
        assert!(srp_make_patch(&schema, &mut rng, 0.0).is_err());
        assert!(srp_make_patch(&schema, &mut rng, 1.5).is_err());
    }

    #[test]
    fn sibling_streams_draw_distinct_patches() {
        // 12-of-20 subsets: ~126k possibilities, so equal sibling draws would
        // expose substream correlation rather than coincidence
        let schema = numeric_schema(20, 2);
        let mut distinct = 0;
        for seed in 0..100 {
            let a = srp_make_patch(&schema, &mut RngStream::new(seed, 2), 0.6).unwrap();
            let b = srp_make_patch(&schema, &mut RngStream::new(seed, 4), 0.6).unwrap();
            distinct += (a != b) as u32;
        }
        assert!(distinct >= 99, "only {distinct}/100 sibling patches differed");
    }

    #[test]
    fn arf_node_subspace_draws_the_pinned_size() {
        let mut rng = RngStream::new(1, 2);
        let subset = arf_node_subspace(&mut rng, 54);
        assert_eq!(subset.len(), 9);
        assert!(subset.iter().all(|&a| a < 54));
        assert_eq!(arf_node_subspace(&mut rng, 1), vec![0]);
    }

    #[test]
    fn asht_ladder_caps_members_geometrically() {
        assert_eq!(asht_size_cap(0, 4), 1);
        assert_eq!(asht_size_cap(1, 4), 4);
        assert_eq!(asht_size_cap(2, 4), 32);
        assert_eq!(asht_size_cap(3, 4), 128);
        let schema = numeric_schema(2, 2);
        let e = ensemble(Variant::ObAsht, 4, &schema, 1);
        let caps: Vec<usize> = e
            .members()
            .iter()
            .map(|m| match m.learner() {
                Learner::Bounded(b) => b.max_split_nodes(),
                Learner::Tree(_) => panic!("OBASHT members must be bounded trees"),
            })
            .collect();
        assert_eq!(caps, vec![1, 4, 32, 128]);
        let e100 = ensemble(Variant::ObAsht, 100, &schema, 1);
        let Learner::Bounded(last) = e100.member(99).learner() else { panic!() };
        assert_eq!(last.max_split_nodes(), 512);
    }

    #[test]
    fn single_member_ensemble_prediction_equals_the_member() {
        let schema = numeric_schema(2, 2);
        let mut e = ensemble(Variant::LBag, 1, &schema, 4);
        let batch = threshold_batch(&schema, 11, 400, false);
        e.members_mut()[0].train_batch(&batch, 0).unwrap();
        let x = &batch[0];
        let ensemble_pred = e.classify(x).unwrap();
        let member_votes = e.member(0).class_votes(x);
        let total: f64 = member_votes.iter().sum();
        for (agg, raw) in ensemble_pred.votes().iter().zip(&member_votes) {
            assert!((agg - raw / total).abs() < 1e-12);
        }
        assert_eq!(ensemble_pred.argmax(), argmax(&member_votes));
    }

    #[test]
    fn untrained_ensemble_votes_all_zeros() {
        let schema = numeric_schema(3, 4);
        let e = ensemble(Variant::Ob, 5, &schema, 2);
        let x = Instance::new(&schema, vec![0.1, 0.2, 0.3], 0).unwrap();
        let pred = e.classify(&x).unwrap();
        assert_eq!(pred.votes(), &[0.0; 4]);
        assert_eq!(pred.argmax(), 0);
    }

    #[test]
    fn majority_of_hard_voting_members_wins() {
        let schema = numeric_schema(1, 2);
        let mut e = ensemble(Variant::Ob, 3, &schema, 7);
        let class1 = Instance::new(&schema, vec![0.5], 1).unwrap();
        let class0 = Instance::new(&schema, vec![0.5], 0).unwrap();
        force_train(&mut e.members_mut()[0], &class1, 5);
        force_train(&mut e.members_mut()[1], &class1, 5);
        force_train(&mut e.members_mut()[2], &class0, 5);
        let pred = e.classify(&class0).unwrap();
        assert_eq!(pred.argmax(), 1);
        assert_eq!(pred.votes(), &[1.0, 2.0]);
    }

    #[test]
    fn classify_rejects_foreign_schemas_and_empty_batches() {
        let schema = numeric_schema(2, 2);
        let other = numeric_schema(3, 2);
        let e = ensemble(Variant::Ob, 2, &schema, 1);
        let foreign = Instance::new(&other, vec![0.1, 0.2, 0.3], 0).unwrap();
        assert!(e.classify(&foreign).is_err());
        assert!(e.classify_batch(&[]).is_err());
    }

    #[test]
    fn classify_never_mutates_members() {
        let schema = numeric_schema(2, 2);
        let mut e = ensemble(Variant::LBag, 4, &schema, 3);
        let batch = threshold_batch(&schema, 5, 300, false);
        for member in e.members_mut() {
            member.train_batch(&batch, 0).unwrap();
        }
        let before = e.clone();
        e.classify_batch(&batch[..50]).unwrap();
        assert_eq!(e, before);
    }

    #[test]
    fn zero_weight_instances_update_detectors_but_not_the_learner() {
        let schema = numeric_schema(2, 2);
        let mut e = ensemble(Variant::LBag, 1, &schema, 6);
        // a vanishing lambda forces every Poisson draw to zero
        e.members_mut()[0].lambda = 1e-12;
        let batch = threshold_batch(&schema, 21, 200, false);
        let learner_before = e.member(0).learner.clone();
        let width_before = e.member(0).drift.as_ref().unwrap().width();
        let outcome = e.members_mut()[0].train_batch(&batch, 0).unwrap();
        assert!(outcome.trained.is_empty());
        assert_eq!(e.member(0).learner, learner_before);
        assert_eq!(e.member(0).drift.as_ref().unwrap().width(), width_before + 200);
    }

    #[test]
    fn member_states_are_independent_of_training_order() {
        let schema = numeric_schema(2, 2);
        let batch = threshold_batch(&schema, 8, 60, false);
        let mut a = ensemble(Variant::LBag, 4, &schema, 12);
        let mut b = a.clone();
        for i in [0, 1, 2, 3] {
            a.members_mut()[i].train_batch(&batch, 0).unwrap();
        }
        for i in [2, 0, 3, 1] {
            b.members_mut()[i].train_batch(&batch, 0).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn weight_log_caps_at_one_hundred_draws() {
        let schema = numeric_schema(1, 2);
        let mut e = ensemble(Variant::Ob, 1, &schema, 5);
        let batch = threshold_batch(&schema, 9, 250, false);
        e.members_mut()[0].train_batch(&batch, 0).unwrap();
        assert_eq!(e.member(0).weight_log().len(), 100);
    }

    #[test]
    fn lbag_member_never_resets_on_an_accurate_stationary_stream() {
        let schema = numeric_schema(2, 2);
        let mut e = ensemble(Variant::LBag, 1, &schema, 13);
        let stream = threshold_batch(&schema, 31, 10_000, false);
        let outcome = e.members_mut()[0].train_batch(&stream, 0).unwrap();
        let drifts = outcome.events.iter().filter(|ev| ev.kind == ChangeKind::Drift).count();
        assert_eq!(drifts, 0, "member reset on a stationary stream: {:?}", outcome.events);
    }

    #[test]
    fn arf_warning_precedes_drift_and_promotes_the_background_tree() {
        let schema = numeric_schema(2, 2);
        let mut e = ensemble(Variant::Arf, 1, &schema, 17);
        let stationary = threshold_batch(&schema, 41, 4000, false);
        e.members_mut()[0].train_batch(&stationary, 0).unwrap();
        assert!(e.member(0).background().is_none());

        let shifted = threshold_batch(&schema, 42, 4000, true);
        let mut first_warning = None;
        let mut first_drift = None;
        for (i, x) in shifted.iter().enumerate() {
            let instance = 4000 + i as u64;
            let had_background = e.member(0).background().is_some();
            let outcome =
                e.members_mut()[0].train_batch(std::slice::from_ref(x), instance).unwrap();
            for ev in &outcome.events {
                match ev.kind {
                    ChangeKind::Warning if first_warning.is_none() => {
                        first_warning = Some(ev.instance);
                    }
                    ChangeKind::Drift if first_drift.is_none() => {
                        first_drift = Some(ev.instance);
                        assert!(had_background, "drift fired with no background tree in place");
                        assert!(e.member(0).background().is_none());
                        let votes: f64 = e.member(0).class_votes(x).iter().sum();
                        assert!(votes > 0.0, "promoted tree should carry training history");
                    }
                    _ => {}
                }
            }
            if first_drift.is_some() {
                break;
            }
        }
        let (warn, drift) = (first_warning.expect("no warning"), first_drift.expect("no drift"));
        assert!(warn < drift, "warning at {warn} must precede drift at {drift}");
    }

    #[test]
    fn obadwin_replaces_the_worst_member_on_global_change() {
        let schema = numeric_schema(1, 2);
        let mut e = ensemble(Variant::ObAdwin, 8, &schema, 19);
        let x = Instance::new(&schema, vec![0.4], 1).unwrap();
        for member in e.members_mut() {
            force_train(member, &x, 3);
        }
        for (i, member) in e.members_mut().iter_mut().enumerate() {
            for _ in 0..500 {
                member.error_window.as_mut().unwrap().push(i == 7);
            }
        }
        for _ in 0..600 {
            let events = e.global_change_step(0, &[0.0]).unwrap();
            assert!(events.is_empty(), "no change expected while errors stay flat");
        }
        let before = e.clone();
        let mut replaced_at = None;
        for step in 0..400u64 {
            let events = e.global_change_step(600 + step, &[1.0]).unwrap();
            if let Some(ev) = events.first() {
                assert_eq!(ev.scope, Scope::Global);
                assert_eq!(ev.kind, ChangeKind::Replacement);
                assert_eq!(ev.instance, 600 + step);
                replaced_at = Some(step);
                break;
            }
        }
        assert!(replaced_at.is_some(), "global detector never fired");
        assert_eq!(e.size(), 8, "replacement must not change the member count");
        assert_eq!(e.member(7).class_votes(&x), vec![0.0, 0.0], "worst member must be fresh");
        assert_eq!(e.member(7).windowed_error(), 0.0, "error window must clear on replacement");
        for i in 0..7 {
            assert_eq!(e.member(i).learner, before.member(i).learner, "member {i} must survive");
        }
    }

    #[test]
    fn obadwin_breaks_worst_member_ties_toward_the_lower_index() {
        let schema = numeric_schema(1, 2);
        let mut e = ensemble(Variant::ObAdwin, 4, &schema, 23);
        let x = Instance::new(&schema, vec![0.4], 0).unwrap();
        for member in e.members_mut() {
            force_train(member, &x, 2);
        }
        for member in e.members_mut() {
            for _ in 0..100 {
                member.error_window.as_mut().unwrap().push(true);
            }
        }
        for _ in 0..600 {
            e.global_change_step(0, &[0.0]).unwrap();
        }
        let mut any = false;
        for step in 0..400 {
            if !e.global_change_step(600 + step, &[1.0]).unwrap().is_empty() {
                any = true;
                break;
            }
        }
        assert!(any);
        assert_eq!(e.member(0).class_votes(&x), vec![0.0, 0.0]);
        assert_ne!(e.member(1).class_votes(&x), vec![0.0, 0.0]);
    }

    #[test]
    fn global_step_is_a_no_op_without_a_global_detector() {
        let schema = numeric_schema(1, 2);
        let mut e = ensemble(Variant::LBag, 3, &schema, 2);
        let before = e.clone();
        assert!(e.global_change_step(0, &[1.0, 1.0, 1.0]).unwrap().is_empty());
        assert_eq!(e, before);
    }

    #[test]
    fn change_log_merges_batches_in_member_order_and_exports_csv() {
        let mut log = ChangeLog::new();
        log.merge_batch(vec![
            ChangeEvent { instance: 5, scope: Scope::Member(3), kind: ChangeKind::Drift },
            ChangeEvent { instance: 4, scope: Scope::Member(3), kind: ChangeKind::Warning },
            ChangeEvent { instance: 4, scope: Scope::Member(1), kind: ChangeKind::Drift },
            ChangeEvent { instance: 5, scope: Scope::Global, kind: ChangeKind::Replacement },
        ]);
        let instances: Vec<u64> = log.events().iter().map(|e| e.instance).collect();
        assert_eq!(instances, vec![4, 4, 5, 5]);
        assert_eq!(log.events()[0].scope, Scope::Member(1));
        assert_eq!(log.events()[1].scope, Scope::Member(3));
        assert_eq!(log.events()[3].scope, Scope::Global, "global events sort after members");
        assert_eq!(log.change_count(), 3);
        assert_eq!(log.count(ChangeKind::Warning), 1);

        let mut csv = Vec::new();
        log.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(
            text,
            "instance_index,member,kind\n4,1,drift\n4,3,warning\n5,3,drift\n5,GLOBAL,replacement\n"
        );
    }

    #[test]
    fn warning_and_drift_keep_emission_order_within_a_member() {
        let mut log = ChangeLog::new();
        log.merge_batch(vec![
            ChangeEvent { instance: 9, scope: Scope::Member(2), kind: ChangeKind::Warning },
            ChangeEvent { instance: 9, scope: Scope::Member(2), kind: ChangeKind::Drift },
        ]);
        assert_eq!(log.events()[0].kind, ChangeKind::Warning);
        assert_eq!(log.events()[1].kind, ChangeKind::Drift);
    }

    #[test]
    fn member_wiring_matches_the_variant() {
        let schema = numeric_schema(10, 2);
        for variant in Variant::ALL {
            let e = ensemble(variant, 3, &schema, 31);
            for member in e.members() {
                assert_eq!(member.drift.is_some(), variant.member_drift_detector());
                assert_eq!(member.warning.is_some(), variant == Variant::Arf);
                assert_eq!(member.error_window.is_some(), variant == Variant::ObAdwin);
                assert_eq!(member.feature_patch().is_some(), variant == Variant::Srp);
                assert!(member.background().is_none());
            }
            assert_eq!(e.global.is_some(), variant == Variant::ObAdwin);
        }
        let srp = ensemble(Variant::Srp, 2, &schema, 31);
        assert_eq!(srp.member(0).feature_patch().unwrap().len(), 6);
        assert_ne!(srp.member(0).feature_patch(), srp.member(1).feature_patch());
    }
}
