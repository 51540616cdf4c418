use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamConfig, AdamState};
use super::transformer::{
    compress, forward_cached, input_tokens, loss_and_gradients_targets, loss_ce, Target,
};
use super::weights::{init_weights, InputNorm, ModelConfig, Weights};
use crate::error::{Error, Result};
use crate::features::{window_features, FeatureVector, FEATURE_DIM, LAYOUT_ID};
use crate::synth::{synth_noise_window, ClassLabel, Dataset, N_CLASSES};

const MIN_INPUT_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Signature-free windows added to training with a uniform target, as a
    /// fraction of the labelled training set. Keeps posteriors flat when no
    /// imagery is present.
    pub rest_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            seed: 0,
            adam: AdamConfig::default(),
            rest_fraction: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn n_rest(&self, n_train: usize) -> usize {
        (self.rest_fraction.max(0.0) * n_train as f64).round() as usize
    }
}

/// Features of the signature-free windows used as uniform-target examples.
pub fn rest_features(n: usize, seed: u64) -> Result<Vec<FeatureVector>> {
    (0..n)
        .map(|i| {
            let s = seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(i as u64 + 1);
            window_features(&synth_noise_window(s))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub layout_id: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub n_train: usize,
    pub n_rest: usize,
    pub n_val: usize,
    /// Validation accuracy of the untrained (initialized) weights.
    pub initial_val_accuracy: f64,
    pub epochs: Vec<EpochStats>,
    pub final_val_accuracy: f64,
    pub final_confusion: [[u64; N_CLASSES]; N_CLASSES],
}

impl TrainReport {
    pub fn best_train_loss_epoch(&self) -> usize {
        self.epochs
            .iter()
            .min_by(|a, b| a.train_loss.total_cmp(&b.train_loss))
            .map_or(0, |e| e.epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Row = true class, column = predicted class.
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
}

impl Evaluation {
    pub fn from_predictions(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
        Ok(Self { accuracy: trace as f64 / total as f64, confusion })
    }
}

fn check_dataset(d: &Dataset) -> Result<()> {
    if d.layout_id != LAYOUT_ID {
        return Err(Error::LayoutMismatch { expected: LAYOUT_ID.into(), found: d.layout_id.clone() });
    }
    Ok(())
}

/// Preprocessed feature vectors for every window of a dataset.
pub fn dataset_features(d: &Dataset) -> Result<Vec<FeatureVector>> {
    check_dataset(d)?;
    d.windows.iter().map(window_features).collect()
}

/// Per-slot mean and standard deviation of the compressed training features.
pub fn fit_input_norm(features: &[FeatureVector]) -> InputNorm {
    let n = features.len().max(1) as f64;
    let compressed: Vec<Vec<f64>> = features.iter().map(|f| compress(&f.values)).collect();
    let mut shift = vec![0.0; FEATURE_DIM];
    for c in &compressed {
        for (s, v) in shift.iter_mut().zip(c) {
            *s += v / n;
        }
    }
    let mut scale = vec![0.0; FEATURE_DIM];
    for c in &compressed {
        for ((s, v), m) in scale.iter_mut().zip(c).zip(&shift) {
            *s += (v - m).powi(2) / n;
        }
    }
    scale.iter_mut().for_each(|s| *s = s.sqrt().max(MIN_INPUT_SCALE));
    InputNorm { shift, scale }
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

fn evaluate_tokens(w: &Weights, tokens: &[Vec<f64>], labels: &[ClassLabel]) -> Result<(Evaluation, f64)> {
    let mut preds = Vec::with_capacity(tokens.len());
    let mut loss = 0.0;
    for (t, l) in tokens.iter().zip(labels) {
        let logits = forward_cached(w, t).logits;
        loss += loss_ce(&logits, *l);
        preds.push(ClassLabel::ALL[argmax(&logits)]);
    }
    let eval = Evaluation::from_predictions(labels, &preds)?;
    Ok((eval, loss / tokens.len().max(1) as f64))
}

/// Accuracy and confusion matrix of `w` over a dataset.
pub fn evaluate(w: &Weights, d: &Dataset) -> Result<Evaluation> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let feats = dataset_features(d)?;
    evaluate_features(w, &feats, &d.labels)
}

pub fn evaluate_features(w: &Weights, feats: &[FeatureVector], labels: &[ClassLabel]) -> Result<Evaluation> {
    let tokens: Vec<Vec<f64>> = feats.iter().map(|f| input_tokens(&w.norm, f)).collect();
    Ok(evaluate_tokens(w, &tokens, labels)?.0)
}

/// Mini-batch training with Adam. Shuffling is seeded per epoch, so the
/// result is a pure function of the inputs.
pub fn train(
    d_train: &Dataset,
    d_val: &Dataset,
    cfg: &ModelConfig,
    tc: &TrainConfig,
) -> Result<(Weights, TrainReport)> {
    if d_train.layout_id != d_val.layout_id {
        return Err(Error::LayoutMismatch {
            expected: d_train.layout_id.clone(),
            found: d_val.layout_id.clone(),
        });
    }
    let train_feats = dataset_features(d_train)?;
    let val_feats = dataset_features(d_val)?;
    let rest = rest_features(tc.n_rest(train_feats.len()), tc.seed)?;
    train_on_features(&train_feats, &d_train.labels, &rest, &val_feats, &d_val.labels, cfg, tc)
}

/// Training from precomputed features. `rest_feats` get a uniform target.
pub fn train_on_features(
    train_feats: &[FeatureVector],
    train_labels: &[ClassLabel],
    rest_feats: &[FeatureVector],
    val_feats: &[FeatureVector],
    val_labels: &[ClassLabel],
    cfg: &ModelConfig,
    tc: &TrainConfig,
) -> Result<(Weights, TrainReport)> {
    if tc.epochs == 0 || tc.batch_size == 0 {
        return Err(Error::InvalidParameter("epochs and batch_size must be positive".into()));
    }
    if train_feats.is_empty() || val_feats.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut w = init_weights(cfg, tc.seed)?;
    w.norm = fit_input_norm(train_feats);
    let train_tokens: Vec<Vec<f64>> = train_feats
        .iter()
        .chain(rest_feats)
        .map(|f| input_tokens(&w.norm, f))
        .collect();
    let targets: Vec<Target> = train_labels
        .iter()
        .map(|l| Target::Class(*l))
        .chain(rest_feats.iter().map(|_| Target::Uniform))
        .collect();
    let val_tokens: Vec<Vec<f64>> = val_feats.iter().map(|f| input_tokens(&w.norm, f)).collect();

    let initial_val_accuracy = evaluate_tokens(&w, &val_tokens, val_labels)?.0.accuracy;
    let mut state = AdamState::new(&w);
    let mut order: Vec<usize> = (0..train_tokens.len()).collect();
    let mut epochs = Vec::with_capacity(tc.epochs);
    let mut last_eval = None;
    for epoch in 1..=tc.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0;
        for chunk in order.chunks(tc.batch_size) {
            let batch: Vec<(&[f64], Target)> = chunk
                .iter()
                .map(|&i| (train_tokens[i].as_slice(), targets[i]))
                .collect();
            let (loss, grads) = loss_and_gradients_targets(&w, &batch);
            adam_update(&mut w, &grads, &mut state, &tc.adam);
            loss_sum += loss;
            n_batches += 1;
        }
        let (eval, val_loss) = evaluate_tokens(&w, &val_tokens, val_labels)?;
        epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            val_loss,
            val_accuracy: eval.accuracy,
        });
        last_eval = Some(eval);
    }
    let last = last_eval.expect("at least one epoch");
    let report = TrainReport {
        layout_id: LAYOUT_ID.into(),
        model: cfg.clone(),
        train: tc.clone(),
        n_train: train_feats.len(),
        n_rest: rest_feats.len(),
        n_val: val_tokens.len(),
        initial_val_accuracy,
        epochs,
        final_val_accuracy: last.accuracy,
        final_confusion: last.confusion,
    };
    Ok((w, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_predictors() {
        let truth: Vec<ClassLabel> = (0..10).map(|i| ClassLabel::ALL[i % 5]).collect();
        let e = Evaluation::from_predictions(&truth, &truth).unwrap();
        assert_eq!(e.accuracy, 1.0);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(e.confusion[i][j], if i == j { 2 } else { 0 });
            }
        }
        let zeros = vec![ClassLabel::ALL[0]; 10];
        let e = Evaluation::from_predictions(&truth, &zeros).unwrap();
        assert_eq!(e.accuracy, 0.2);
        assert_eq!(e.confusion.iter().flatten().sum::<u64>(), 10);
        assert!(matches!(Evaluation::from_predictions(&[], &[]), Err(Error::EmptyDataset)));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut d = crate::synth::build_dataset(2, 0).unwrap();
        let (a, mut b) = crate::synth::split_dataset(&d, 0.5, 0).unwrap();
        b.layout_id = "other".into();
        let err = train(&a, &b, &ModelConfig::default(), &TrainConfig::default());
        assert!(matches!(err, Err(Error::LayoutMismatch { .. })));
        d.layout_id = "other".into();
        let w = init_weights(&ModelConfig::default(), 0).unwrap();
        assert!(matches!(evaluate(&w, &d), Err(Error::LayoutMismatch { .. })));
    }
}
