//! Binary valence/arousal classifiers.
//!
//! A model is trained per (device, target, scope). Device models use the
//! device's own listening epochs, general models add channel-mapped public
//! epochs to the training side and are tested on self-collected data only.

pub mod prep;
pub mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use prep::{standardize_apply, standardize_fit, stratified_folds, stratified_split, Standardizer, MIN_STD};
pub use svm::{box_bounds, rbf, scale_gamma, solve_dual, svm_train, DualSolution, KernelSource, RbfKernel, Svm, SvmParams};

use crate::datamodel::{
    DeviceProfile, EmotionQuadrant, Epoch, FeatureDescriptor, LabeledEpoch, Origin, Scope, Target,
    TrainedModel, TrainingMetrics,
};
use crate::dsp::extract_channel_features;
use crate::error::{Error, Result};
use crate::featsel::{project, sbs_select, SelectionResult, TARGET_FEATURES};

pub const TEST_FRACTION: f64 = 0.2;
/// Fewest epochs a device model is trained from.
pub const MIN_EPOCHS: usize = 20;
pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    pub c: f64,
    /// Feature count kept by selection.
    pub k: usize,
    /// Add the self-collected training split to the general model's
    /// training set.
    pub general_includes_self: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            c: DEFAULT_C,
            k: TARGET_FEATURES,
            general_includes_self: true,
        }
    }
}

/// Feature rows of `epochs` over `channels`, with their shared descriptors.
pub fn feature_matrix(
    epochs: &[&Epoch],
    channels: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<FeatureDescriptor>)> {
    let vectors: Vec<_> = epochs
        .par_iter()
        .map(|e| extract_channel_features(e, channels))
        .collect::<Result<_>>()?;
    let descriptors = vectors
        .first()
        .map(|v| v.descriptors.clone())
        .unwrap_or_default();
    Ok((vectors.into_iter().map(|v| v.values).collect(), descriptors))
}

/// Selection, standardization and SVM fitted on one training set.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub selection: SelectionResult,
    pub scaler: Standardizer,
    pub svm: Svm,
}

impl FittedPipeline {
    pub fn decision(&self, features: &[f64]) -> Result<f64> {
        let reduced = crate::featsel::apply_selection(features, &self.selection)?;
        Ok(self.svm.decision(&self.scaler.apply(&reduced)?))
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[bool]) -> Result<f64> {
        if x.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0;
        for (row, &label) in x.iter().zip(y) {
            if (self.decision(row)? > 0.0) == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / x.len() as f64)
    }
}

/// SBS down to `k` when the dimension exceeds `k`, then standardize and fit.
pub fn fit_pipeline(x: &[Vec<f64>], y: &[bool], opts: &TrainOptions) -> Result<FittedPipeline> {
    let d = svm::check_training_input(x, y)?;
    let selection = if d > opts.k {
        sbs_select(x, y, opts.k, opts.c, opts.seed)?
    } else {
        SelectionResult::identity(d)
    };
    let reduced: Vec<Vec<f64>> = x
        .iter()
        .map(|r| project(r, &selection.selected_indices))
        .collect::<Result<_>>()?;
    let scaler = Standardizer::fit(&reduced)?;
    let z = scaler.apply_all(&reduced)?;
    let params = SvmParams::new(opts.c, scale_gamma(&z));
    let svm = svm_train(&z, y, &params)?;
    Ok(FittedPipeline {
        selection,
        scaler,
        svm,
    })
}

fn assemble(
    pipeline: FittedPipeline,
    target: Target,
    scope: Scope,
    device_id: &str,
    input_channels: Vec<String>,
    feature_descriptors: Vec<FeatureDescriptor>,
    training_metrics: TrainingMetrics,
) -> TrainedModel {
    TrainedModel {
        target,
        scope,
        device_id: device_id.to_string(),
        input_channels,
        feature_descriptors,
        selected_indices: pipeline.selection.selected_indices,
        removal_trace: pipeline.selection.removal_trace,
        feature_mean: pipeline.scaler.mean,
        feature_std: pipeline.scaler.std,
        support_vectors: pipeline.svm.support_vectors,
        dual_coefficients: pipeline.svm.dual_coefficients,
        bias: pipeline.svm.bias,
        rbf_gamma: pipeline.svm.gamma,
        regularization_c: pipeline.svm.c,
        training_metrics,
    }
}

fn check_device(epochs: &[LabeledEpoch], profile: &DeviceProfile) -> Result<()> {
    match epochs.iter().find(|e| e.device_id != profile.device_id) {
        Some(e) => Err(Error::ProfileMismatch {
            expected: profile.device_id.clone(),
            got: e.device_id.clone(),
        }),
        None => Ok(()),
    }
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn fit_and_score(
    train_x: &[Vec<f64>],
    train_y: &[bool],
    test_x: &[Vec<f64>],
    test_y: &[bool],
    opts: &TrainOptions,
) -> Result<(FittedPipeline, TrainingMetrics)> {
    let pipeline = fit_pipeline(train_x, train_y, opts)?;
    let metrics = TrainingMetrics {
        train_acc: pipeline.accuracy(train_x, train_y)?,
        test_acc: pipeline.accuracy(test_x, test_y)?,
        n_train: train_x.len(),
        n_test: test_x.len(),
    };
    Ok((pipeline, metrics))
}

/// Device model from one device's self-collected epochs, 80/20 stratified.
pub fn train_device_model(
    epochs: &[LabeledEpoch],
    target: Target,
    profile: &DeviceProfile,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    if epochs.len() < MIN_EPOCHS {
        return Err(Error::InsufficientData {
            got: epochs.len(),
            required: MIN_EPOCHS,
        });
    }
    check_device(epochs, profile)?;
    let y: Vec<bool> = epochs.iter().map(|e| e.label(target)).collect();
    if y.iter().all(|&l| l) || y.iter().all(|&l| !l) {
        return Err(Error::SingleClassData);
    }
    let channels = profile.included_channels();
    let refs: Vec<&Epoch> = epochs.iter().map(|e| &e.epoch).collect();
    let (x, descriptors) = feature_matrix(&refs, &channels)?;
    let (train, test) = stratified_split(&y, TEST_FRACTION, opts.seed);
    let (pipeline, metrics) = fit_and_score(
        &pick(&x, &train),
        &pick(&y, &train),
        &pick(&x, &test),
        &pick(&y, &test),
        opts,
    )?;
    Ok(assemble(
        pipeline,
        target,
        Scope::Device,
        &profile.device_id,
        channels,
        descriptors,
        metrics,
    ))
}

/// General model: public epochs (already mapped to the profile's
/// substitution channels) for training, self-collected epochs split 80/20
/// with only the 20% used for testing.
pub fn train_general_model(
    self_epochs: &[LabeledEpoch],
    public_epochs: &[LabeledEpoch],
    target: Target,
    profile: &DeviceProfile,
    opts: &TrainOptions,
) -> Result<TrainedModel> {
    let channels = profile.substitution_channels();
    if channels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "profile {} has no public-channel substitutions",
            profile.device_id
        )));
    }
    check_device(self_epochs, profile)?;
    if let Some(e) = public_epochs.iter().find(|e| e.origin != Origin::Public) {
        return Err(Error::InvalidInput(format!(
            "public training set contains a {:?} epoch from {}",
            e.origin, e.device_id
        )));
    }
    let self_y: Vec<bool> = self_epochs.iter().map(|e| e.label(target)).collect();
    let n_pos = self_y.iter().filter(|&&l| l).count();
    if n_pos < 2 || self_y.len() - n_pos < 2 {
        return Err(Error::InsufficientData {
            got: n_pos.min(self_y.len() - n_pos),
            required: 2,
        });
    }
    let self_refs: Vec<&Epoch> = self_epochs.iter().map(|e| &e.epoch).collect();
    let pub_refs: Vec<&Epoch> = public_epochs.iter().map(|e| &e.epoch).collect();
    let (self_x, descriptors) = feature_matrix(&self_refs, &channels)?;
    let (pub_x, _) = feature_matrix(&pub_refs, &channels)?;
    let pub_y: Vec<bool> = public_epochs.iter().map(|e| e.label(target)).collect();

    let (self_train, self_test) = stratified_split(&self_y, TEST_FRACTION, opts.seed);
    let mut train_x = pub_x;
    let mut train_y = pub_y;
    if opts.general_includes_self {
        train_x.extend(pick(&self_x, &self_train));
        train_y.extend(pick(&self_y, &self_train));
    }
    let (pipeline, metrics) = fit_and_score(
        &train_x,
        &train_y,
        &pick(&self_x, &self_test),
        &pick(&self_y, &self_test),
        opts,
    )?;
    Ok(assemble(
        pipeline,
        target,
        Scope::General,
        &profile.device_id,
        channels,
        descriptors,
        metrics,
    ))
}

/// One model's verdict on an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub positive: bool,
    pub decision: f64,
}

/// Classifies a raw epoch recorded on `device_id`.
pub fn predict(model: &TrainedModel, device_id: &str, epoch: &Epoch) -> Result<Prediction> {
    if device_id != model.device_id {
        return Err(Error::ProfileMismatch {
            expected: model.device_id.clone(),
            got: device_id.to_string(),
        });
    }
    let features = match extract_channel_features(epoch, &model.input_channels) {
        Ok(f) => f,
        Err(Error::MissingChannel(_)) => {
            return Err(Error::ProfileMismatch {
                expected: model.input_channels.join(","),
                got: epoch.channels.join(","),
            })
        }
        Err(e) => return Err(e),
    };
    predict_features(model, &features.values)
}

/// Classifies a full (pre-selection) feature vector.
pub fn predict_features(model: &TrainedModel, features: &[f64]) -> Result<Prediction> {
    if features.len() != model.feature_descriptors.len() {
        return Err(Error::DimensionMismatch {
            expected: model.feature_descriptors.len(),
            got: features.len(),
        });
    }
    if features.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSignal(
            "every band power is zero".into(),
        ));
    }
    let reduced = project(features, &model.selected_indices)?;
    let z = standardize_apply(&reduced, &model.feature_mean, &model.feature_std)?;
    let svm = Svm {
        support_vectors: model.support_vectors.clone(),
        dual_coefficients: model.dual_coefficients.clone(),
        bias: model.bias,
        gamma: model.rbf_gamma,
        c: model.regularization_c,
    };
    let decision = svm.decision(&z);
    Ok(Prediction {
        positive: decision > 0.0,
        decision,
    })
}

/// Combines a valence and an arousal model into a quadrant.
pub fn detect_quadrant(
    valence: &TrainedModel,
    arousal: &TrainedModel,
    device_id: &str,
    epoch: &Epoch,
) -> Result<EmotionQuadrant> {
    if valence.target != Target::Valence || arousal.target != Target::Arousal {
        return Err(Error::InvalidInput(
            "expected a valence model and an arousal model".into(),
        ));
    }
    let v = predict(valence, device_id, epoch)?;
    let a = predict(arousal, device_id, epoch)?;
    Ok(EmotionQuadrant::from_labels(v.positive, a.positive))
}

/// Valence and arousal accuracies of a model pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub v_train: f64,
    pub v_test: f64,
    pub a_train: f64,
    pub a_test: f64,
}

impl AccuracyReport {
    pub fn from_models(valence: &TrainedModel, arousal: &TrainedModel) -> Self {
        Self {
            v_train: valence.training_metrics.train_acc,
            v_test: valence.training_metrics.test_acc,
            a_train: arousal.training_metrics.train_acc,
            a_test: arousal.training_metrics.test_acc,
        }
    }
}
