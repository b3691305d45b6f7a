//! Cross-subject evaluation: fold construction, training with
//! validation-based model selection, per-movement and pooled experiments,
//! and aggregation of the resulting accuracies.
//!
//! Every fold puts exactly one subject in the test set; validation subjects
//! are drawn cyclically from the subject ordering, and no subject ever
//! appears in more than one of train/validation/test. Whole runs are
//! deterministic functions of (samples, config, seed): fold seeds are derived
//! by mixing the experiment seed with the target, mode, and fold index, so a
//! movement's report does not depend on which other movements ran alongside
//! it.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dataset::{MovementSample, SampleMeta, SkeletonDefinition};
use crate::features::{build_dataset_tensor, FeatureError, FeatureMode, PaddedBatch};
use crate::nn::{build_res_tcn, ModelConfig, NnError, ResTcnModel, Tensor3};
use crate::SeedRng;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Network shape knobs (everything except what the data dictates).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArchConfig {
    pub initial_filters: usize,
    pub kernel_len: usize,
    pub unit_filters: Vec<usize>,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            initial_filters: 8,
            kernel_len: 8,
            unit_filters: alloc::vec![64, 64, 64, 128, 128, 128, 256, 256, 256],
            bn_eps: 1e-5,
            bn_momentum: 0.9,
        }
    }
}

/// Optimization schedule. The batch size is clamped to the training-set size
/// at run time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub l1_weight: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 128,
            learning_rate: 0.01,
            momentum: 0.9,
            l1_weight: 1e-4,
            dropout: 0.5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ProtocolError> {
        if self.batch_size == 0
            || self.learning_rate <= 0.0
            || !(0.0..1.0).contains(&self.momentum)
            || self.l1_weight < 0.0
            || !(0.0..1.0).contains(&self.dropout)
        {
            return Err(ProtocolError::Config(format!(
                "bad train config: batch {}, lr {}, momentum {}, l1 {}, dropout {}",
                self.batch_size, self.learning_rate, self.momentum, self.l1_weight, self.dropout
            )));
        }
        Ok(())
    }
}

/// How validation subjects are picked relative to the test subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FoldLayout {
    /// Validation = the subjects following the test subject cyclically
    /// (default count 3, giving 6/3/1 on ten subjects).
    Spec,
    /// Validation = the subjects preceding the test subject cyclically
    /// (count 2, giving 7/2/1 on ten subjects).
    Paper,
}

/// Everything one experiment needs besides the samples themselves.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentConfig {
    pub mode: FeatureMode,
    pub layout: FoldLayout,
    pub val_count: usize,
    /// Input Euler angles are degrees (the stock recordings) or radians.
    pub degrees: bool,
    /// Optional per-channel standardization of features; off by default.
    pub normalize: bool,
    pub arch: ArchConfig,
    pub train: TrainConfig,
}

impl ExperimentConfig {
    pub fn new(mode: FeatureMode) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            layout: FoldLayout::Spec,
            val_count: 3,
            degrees: true,
            normalize: false,
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// What one experiment classifies: a single movement or all of them pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentTarget {
    Movement(u8),
    General,
}

impl ExperimentTarget {
    pub fn name(&self) -> String {
        match self {
            ExperimentTarget::Movement(m) => format!("{m}"),
            ExperimentTarget::General => String::from("general"),
        }
    }

    pub fn from_name(name: &str) -> Option<ExperimentTarget> {
        if name == "general" {
            return Some(ExperimentTarget::General);
        }
        name.parse().ok().map(ExperimentTarget::Movement)
    }

    fn code(&self) -> u64 {
        match self {
            ExperimentTarget::General => 0,
            ExperimentTarget::Movement(m) => *m as u64,
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ExperimentTarget {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ExperimentTarget {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ExperimentTarget::from_name(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad experiment target `{s}`")))
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolError {
    Config(String),
    Shape(String),
    /// A subject lacks one of the two labels for the selected target.
    MissingLabel { subject: u8, label: &'static str },
    /// No samples match the selected target.
    NoSamples(String),
    /// Training diverged.
    NonFiniteLoss { epoch: usize },
    Feature(FeatureError),
    Nn(NnError),
}

impl From<FeatureError> for ProtocolError {
    fn from(e: FeatureError) -> Self {
        ProtocolError::Feature(e)
    }
}

impl From<NnError> for ProtocolError {
    fn from(e: NnError) -> Self {
        ProtocolError::Nn(e)
    }
}

impl core::fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ProtocolError::Config(msg) => write!(f, "config: {msg}"),
            ProtocolError::Shape(msg) => write!(f, "shape: {msg}"),
            ProtocolError::MissingLabel { subject, label } => {
                write!(f, "subject {subject} has no {label} samples for this target")
            }
            ProtocolError::NoSamples(msg) => write!(f, "no samples: {msg}"),
            ProtocolError::NonFiniteLoss { epoch } => {
                write!(f, "training loss became non-finite at epoch {epoch}")
            }
            ProtocolError::Feature(e) => write!(f, "features: {e}"),
            ProtocolError::Nn(e) => write!(f, "network: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProtocolError {}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

/// One cross-validation fold: a single test subject, a validation set, and
/// the remaining training subjects. The three sets are pairwise disjoint and
/// cover all subjects.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldSpec {
    pub fold: usize,
    pub test_subject: u8,
    pub val_subjects: Vec<u8>,
    pub train_subjects: Vec<u8>,
}

/// Build one fold per subject. `subjects` is an ordered list; fold `i` tests
/// `subjects[i]`, takes `val_count` validation subjects cyclically after it
/// ([`FoldLayout::Spec`]) or before it ([`FoldLayout::Paper`]), and trains on
/// the rest. An empty validation set (`val_count` 0) is allowed; training
/// then self-validates (see [`train_model`]).
pub fn make_folds(
    subjects: &[u8],
    val_count: usize,
    layout: FoldLayout,
) -> Result<Vec<FoldSpec>, ProtocolError> {
    let n = subjects.len();
    if n < val_count + 2 {
        return Err(ProtocolError::Config(format!(
            "{n} subjects cannot supply 1 test + {val_count} validation + nonempty train"
        )));
    }
    for (i, s) in subjects.iter().enumerate() {
        if subjects[i + 1..].contains(s) {
            return Err(ProtocolError::Config(format!("duplicate subject {s}")));
        }
    }
    let mut folds = Vec::with_capacity(n);
    for i in 0..n {
        let mut val_subjects: Vec<u8> = (1..=val_count)
            .map(|k| match layout {
                FoldLayout::Spec => subjects[(i + k) % n],
                FoldLayout::Paper => subjects[(i + n - k) % n],
            })
            .collect();
        val_subjects.sort_unstable();
        let mut train_subjects: Vec<u8> = subjects
            .iter()
            .copied()
            .filter(|s| *s != subjects[i] && !val_subjects.contains(s))
            .collect();
        train_subjects.sort_unstable();
        folds.push(FoldSpec {
            fold: i,
            test_subject: subjects[i],
            val_subjects,
            train_subjects,
        });
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStat {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// The checkpoint that scored best on validation (decoded).
    pub model: ResTcnModel,
    pub best_val_accuracy: f64,
    /// Epoch of the retained checkpoint; 0 means the initialized model
    /// (only possible when `epochs` is 0).
    pub best_epoch: usize,
    pub history: Vec<EpochStat>,
}

/// One evaluated sample: its identity, true class, and predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    pub meta: SampleMeta,
    pub label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Prediction>,
}

fn to_tensor(batch: &PaddedBatch) -> Tensor3 {
    Tensor3::from_vec(
        batch.len(),
        batch.t_max(),
        batch.dim(),
        batch.data().to_vec(),
    )
    .expect("batch data is dense")
}

fn gather(batch: &PaddedBatch, indices: &[usize]) -> (Tensor3, Vec<usize>) {
    let stride = batch.t_max() * batch.dim();
    let mut data = Vec::with_capacity(indices.len() * stride);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend_from_slice(batch.sample(i));
        labels.push(batch.labels()[i]);
    }
    (
        Tensor3::from_vec(indices.len(), batch.t_max(), batch.dim(), data)
            .expect("gathered data is dense"),
        labels,
    )
}

/// Inference-mode evaluation: argmax prediction per sample (exact probability
/// ties go to class 0), accuracy = correct / total.
pub fn evaluate(model: &ResTcnModel, test: &PaddedBatch) -> Result<Evaluation, ProtocolError> {
    if test.is_empty() {
        return Err(ProtocolError::Shape("empty evaluation batch".into()));
    }
    let probs = model.forward_infer(&to_tensor(test))?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut correct = 0usize;
    for i in 0..test.len() {
        let row = probs.row(i);
        let mut best = 0usize;
        for (k, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = k;
            }
        }
        let label = test.labels()[i];
        if best == label {
            correct += 1;
        }
        predictions.push(Prediction {
            meta: test.metas()[i],
            label,
            predicted: best,
        });
    }
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        predictions,
    })
}

/// Train for the configured number of epochs, shuffling the batch order each
/// epoch with a seed offset by the epoch index, and retain the checkpoint
/// with the best validation accuracy (earliest epoch wins ties).
///
/// An empty validation batch makes training self-validate on the training
/// set, which keeps two-subject toy setups runnable; real experiments always
/// pass a non-empty validation set.
///
/// With `epochs` 0 the initialized model is returned (`best_epoch` 0, empty
/// history), scored once on the validation set.
pub fn train_model(
    train: &PaddedBatch,
    val: &PaddedBatch,
    config: &ExperimentConfig,
    seed: u64,
    progress: &mut dyn FnMut(&EpochStat),
) -> Result<TrainOutcome, ProtocolError> {
    config.train.validate()?;
    if train.is_empty() {
        return Err(ProtocolError::Shape("empty training batch".into()));
    }
    let self_validating = val.is_empty();
    let val = if self_validating { train } else { val };
    if val.t_max() != train.t_max() || val.dim() != train.dim() {
        return Err(ProtocolError::Shape(format!(
            "train {}x{} vs val {}x{}",
            train.t_max(),
            train.dim(),
            val.t_max(),
            val.dim()
        )));
    }

    let model_config = ModelConfig {
        input_channels: train.dim(),
        class_count: 2,
        initial_filters: config.arch.initial_filters,
        kernel_len: config.arch.kernel_len,
        unit_filters: config.arch.unit_filters.clone(),
        dropout: config.train.dropout,
        bn_eps: config.arch.bn_eps,
        bn_momentum: config.arch.bn_momentum,
        seed,
    };
    let mut model = build_res_tcn(&model_config)?;

    if config.train.epochs == 0 {
        let accuracy = evaluate(&model, val)?.accuracy;
        return Ok(TrainOutcome {
            model,
            best_val_accuracy: accuracy,
            best_epoch: 0,
            history: Vec::new(),
        });
    }

    let n = train.len();
    let batch_size = config.train.batch_size.min(n);
    let mut history = Vec::with_capacity(config.train.epochs);
    let mut best: Option<(f64, usize, Vec<u8>)> = None;
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.train.epochs {
        let mut rng = SeedRng::seed_from_u64(seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let (x, labels) = gather(train, chunk);
            let loss = model.train_step(
                &x,
                &labels,
                config.train.learning_rate,
                config.train.momentum,
                config.train.l1_weight,
                &mut rng,
            )?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / n as f64;
        if !train_loss.is_finite() {
            return Err(ProtocolError::NonFiniteLoss { epoch });
        }
        let val_accuracy = evaluate(&model, val)?.accuracy;
        let stat = EpochStat {
            epoch,
            train_loss,
            val_accuracy,
        };
        progress(&stat);
        history.push(stat);
        let is_better = match &best {
            None => true,
            Some((best_acc, _, _)) => val_accuracy > *best_acc,
        };
        if is_better {
            best = Some((val_accuracy, epoch, model.encode()));
        }
    }

    let (best_val_accuracy, best_epoch, bytes) = best.expect("at least one epoch ran");
    let model = ResTcnModel::decode(&bytes).expect("own checkpoint decodes");
    Ok(TrainOutcome {
        model,
        best_val_accuracy,
        best_epoch,
        history,
    })
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldResult {
    pub fold: usize,
    pub test_subject: u8,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubjectAccuracy {
    pub subject: u8,
    pub accuracy: f64,
}

/// Full record of one experiment: configuration echo, per-fold results, and
/// the aggregate numbers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub target: ExperimentTarget,
    pub mode: FeatureMode,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldResult>,
    pub mean_test_accuracy: f64,
    pub per_subject: Vec<SubjectAccuracy>,
}

/// A featurized experiment ready to run: the full batch (padded once over
/// the whole collection) and the fold assignments. Folds are independent of
/// each other, so callers may run them in any order or in parallel and
/// assemble the report afterwards.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub target: ExperimentTarget,
    pub batch: PaddedBatch,
    pub folds: Vec<FoldSpec>,
}

impl PreparedExperiment {
    fn indices_for(&self, subjects: &[u8]) -> Vec<usize> {
        self.batch
            .metas()
            .iter()
            .enumerate()
            .filter(|(_, m)| subjects.contains(&m.subject))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Select the target's samples, check label completeness per subject, build
/// the feature tensor (padding to the longest sample of the selection), and
/// lay out the folds.
pub fn prepare_experiment(
    samples: &[MovementSample],
    target: ExperimentTarget,
    config: &ExperimentConfig,
    skel: &SkeletonDefinition,
) -> Result<PreparedExperiment, ProtocolError> {
    let selected: Vec<MovementSample> = samples
        .iter()
        .filter(|s| match target {
            ExperimentTarget::Movement(m) => s.meta().movement == m,
            ExperimentTarget::General => true,
        })
        .cloned()
        .collect();
    if selected.is_empty() {
        return Err(ProtocolError::NoSamples(format!(
            "target {}",
            target.name()
        )));
    }

    let mut subjects: Vec<u8> = selected.iter().map(|s| s.meta().subject).collect();
    subjects.sort_unstable();
    subjects.dedup();
    for &subject in &subjects {
        let has = |label: crate::dataset::Label| {
            selected
                .iter()
                .any(|s| s.meta().subject == subject && s.meta().label == label)
        };
        if !has(crate::dataset::Label::Correct) {
            return Err(ProtocolError::MissingLabel {
                subject,
                label: "correct",
            });
        }
        if !has(crate::dataset::Label::Incorrect) {
            return Err(ProtocolError::MissingLabel {
                subject,
                label: "incorrect",
            });
        }
    }

    let batch = build_dataset_tensor(&selected, config.mode, skel, config.degrees, config.normalize)?;
    let folds = make_folds(&subjects, config.val_count, config.layout)?;
    Ok(PreparedExperiment {
        target,
        batch,
        folds,
    })
}

/// Derive the per-fold seed from the experiment seed, target, mode, and fold
/// index (splitmix64 chain), so each fold's run is self-contained.
pub fn fold_seed(seed: u64, target: ExperimentTarget, mode: FeatureMode, fold: usize) -> u64 {
    fn splitmix64(state: u64) -> u64 {
        let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mode_code = match mode {
        FeatureMode::Positions => 1u64,
        FeatureMode::Angles => 2u64,
    };
    splitmix64(splitmix64(splitmix64(seed ^ target.code()) ^ mode_code) ^ fold as u64)
}

/// Train and evaluate a single fold of a prepared experiment.
pub fn run_fold(
    prepared: &PreparedExperiment,
    fold_index: usize,
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&EpochStat),
) -> Result<FoldResult, ProtocolError> {
    let fold = &prepared.folds[fold_index];
    // Subject leakage is structurally impossible; fail hard if it ever isn't.
    assert!(
        !fold.train_subjects.contains(&fold.test_subject)
            && !fold.val_subjects.contains(&fold.test_subject)
            && fold
                .val_subjects
                .iter()
                .all(|s| !fold.train_subjects.contains(s)),
        "fold {} leaks subjects",
        fold_index
    );

    let train_idx = prepared.indices_for(&fold.train_subjects);
    let val_idx = prepared.indices_for(&fold.val_subjects);
    let test_idx = prepared.indices_for(&[fold.test_subject]);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(ProtocolError::NoSamples(format!(
            "fold {fold_index} has an empty train or test split"
        )));
    }

    let train_batch = prepared.batch.select(&train_idx);
    let val_batch = prepared.batch.select(&val_idx);
    let test_batch = prepared.batch.select(&test_idx);

    let seed = fold_seed(config.train.seed, prepared.target, config.mode, fold_index);
    let outcome = train_model(&train_batch, &val_batch, config, seed, progress)?;
    let eval = evaluate(&outcome.model, &test_batch)?;
    Ok(FoldResult {
        fold: fold_index,
        test_subject: fold.test_subject,
        best_val_accuracy: outcome.best_val_accuracy,
        best_epoch: outcome.best_epoch,
        test_accuracy: eval.accuracy,
        predictions: eval.predictions,
    })
}

/// Combine fold results (given in fold order) into the report.
pub fn assemble_report(
    prepared: &PreparedExperiment,
    config: &ExperimentConfig,
    folds: Vec<FoldResult>,
) -> ExperimentReport {
    assert_eq!(folds.len(), prepared.folds.len(), "missing fold results");
    let mean_test_accuracy =
        folds.iter().map(|f| f.test_accuracy).sum::<f64>() / folds.len() as f64;
    let mut per_subject: Vec<SubjectAccuracy> = folds
        .iter()
        .map(|f| SubjectAccuracy {
            subject: f.test_subject,
            accuracy: f.test_accuracy,
        })
        .collect();
    per_subject.sort_unstable_by_key(|s| s.subject);
    for pair in per_subject.windows(2) {
        assert!(
            pair[0].subject != pair[1].subject,
            "subject tested more than once"
        );
    }
    ExperimentReport {
        target: prepared.target,
        mode: config.mode,
        config: config.clone(),
        folds,
        mean_test_accuracy,
        per_subject,
    }
}

/// The whole cross-validation for one movement: prepare, run every fold
/// serially, assemble.
pub fn run_cross_validation(
    samples: &[MovementSample],
    movement: u8,
    config: &ExperimentConfig,
    skel: &SkeletonDefinition,
    progress: &mut dyn FnMut(usize, &EpochStat),
) -> Result<ExperimentReport, ProtocolError> {
    run_target(
        samples,
        ExperimentTarget::Movement(movement),
        config,
        skel,
        progress,
    )
}

/// Pooled variant: one binary classifier over all movements together.
pub fn run_general_model(
    samples: &[MovementSample],
    config: &ExperimentConfig,
    skel: &SkeletonDefinition,
    progress: &mut dyn FnMut(usize, &EpochStat),
) -> Result<ExperimentReport, ProtocolError> {
    run_target(samples, ExperimentTarget::General, config, skel, progress)
}

fn run_target(
    samples: &[MovementSample],
    target: ExperimentTarget,
    config: &ExperimentConfig,
    skel: &SkeletonDefinition,
    progress: &mut dyn FnMut(usize, &EpochStat),
) -> Result<ExperimentReport, ProtocolError> {
    let prepared = prepare_experiment(samples, target, config, skel)?;
    let mut folds = Vec::with_capacity(prepared.folds.len());
    for i in 0..prepared.folds.len() {
        folds.push(run_fold(&prepared, i, config, &mut |stat| {
            progress(i, stat)
        })?);
    }
    Ok(assemble_report(&prepared, config, folds))
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateRow {
    pub target: ExperimentTarget,
    pub mode: FeatureMode,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeMean {
    pub mode: FeatureMode,
    /// Mean over per-movement experiments (the pooled model is excluded).
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubjectRow {
    pub target: ExperimentTarget,
    pub mode: FeatureMode,
    pub subject: u8,
    pub accuracy: f64,
}

/// Cross-experiment summary: one row per (target, mode) plus per-mode means
/// over movements, and the flat per-subject table. Stored means are reused
/// verbatim, never recomputed from fold records.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AggregateSummary {
    pub rows: Vec<AggregateRow>,
    pub mode_means: Vec<ModeMean>,
    pub subject_rows: Vec<SubjectRow>,
}

fn sort_key(target: ExperimentTarget, mode: FeatureMode) -> (u8, u8, u8) {
    let t = match target {
        ExperimentTarget::Movement(m) => (0, m),
        ExperimentTarget::General => (1, 0),
    };
    let m = match mode {
        FeatureMode::Positions => 0,
        FeatureMode::Angles => 1,
    };
    (t.0, t.1, m)
}

pub fn aggregate(reports: &[ExperimentReport]) -> Result<AggregateSummary, ProtocolError> {
    if reports.is_empty() {
        return Err(ProtocolError::Config("no reports to aggregate".into()));
    }
    let mut sorted: Vec<&ExperimentReport> = reports.iter().collect();
    sorted.sort_by_key(|r| sort_key(r.target, r.mode));
    for pair in sorted.windows(2) {
        if pair[0].target == pair[1].target && pair[0].mode == pair[1].mode {
            return Err(ProtocolError::Config(format!(
                "duplicate report for target {} mode {}",
                pair[0].target.name(),
                pair[0].mode.name()
            )));
        }
    }

    let rows: Vec<AggregateRow> = sorted
        .iter()
        .map(|r| AggregateRow {
            target: r.target,
            mode: r.mode,
            mean_accuracy: r.mean_test_accuracy,
        })
        .collect();

    let mut mode_means = Vec::new();
    for mode in [FeatureMode::Positions, FeatureMode::Angles] {
        let movement_rows: Vec<f64> = sorted
            .iter()
            .filter(|r| r.mode == mode && matches!(r.target, ExperimentTarget::Movement(_)))
            .map(|r| r.mean_test_accuracy)
            .collect();
        if !movement_rows.is_empty() {
            mode_means.push(ModeMean {
                mode,
                mean_accuracy: movement_rows.iter().sum::<f64>() / movement_rows.len() as f64,
            });
        }
    }

    let subject_rows: Vec<SubjectRow> = sorted
        .iter()
        .flat_map(|r| {
            r.per_subject.iter().map(|s| SubjectRow {
                target: r.target,
                mode: r.mode,
                subject: s.subject,
                accuracy: s.accuracy,
            })
        })
        .collect();

    Ok(AggregateSummary {
        rows,
        mode_means,
        subject_rows,
    })
}
