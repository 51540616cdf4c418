//! Transformer classifier over per-channel feature tokens.

mod adam;
mod tensor;
mod train;
mod transformer;
mod weights;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use tensor::Tensor;
pub use train::{
    dataset_features, evaluate, evaluate_features, fit_input_norm, rest_features, train,
    train_on_features,
    EpochStats, Evaluation, TrainConfig, TrainReport,
};
pub use transformer::{
    backward, compress, forward, forward_cached, gradients, input_tokens, loss_and_gradients,
    loss_and_gradients_targets, loss_ce, loss_target, softmax, ForwardCache, Target,
};
pub use weights::{
    glorot_bound, init_weights, read_weights, write_weights, Gradients, InputNorm, Layer,
    ModelConfig, Weights, WEIGHTS_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::FeatureVector;
use crate::synth::{ClassLabel, N_CLASSES};

/// Class probabilities from the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: [f64; N_CLASSES],
}

impl Posterior {
    pub fn from_logits(logits: &[f64]) -> Self {
        let p = softmax(logits);
        let mut probs = [0.0; N_CLASSES];
        probs.copy_from_slice(&p);
        Self { probs }
    }

    pub fn uniform() -> Self {
        Self { probs: [1.0 / N_CLASSES as f64; N_CLASSES] }
    }

    pub fn one_hot(c: ClassLabel) -> Self {
        let mut probs = [0.0; N_CLASSES];
        probs[c.index()] = 1.0;
        Self { probs }
    }

    pub fn argmax(&self) -> ClassLabel {
        let mut best = 0;
        for i in 1..N_CLASSES {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        ClassLabel::ALL[best]
    }

    pub fn is_valid(&self) -> bool {
        self.probs.iter().all(|p| (0.0..=1.0).contains(p))
            && (self.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

/// Posterior for one feature vector.
pub fn predict(w: &Weights, f: &FeatureVector) -> Result<Posterior> {
    Ok(Posterior::from_logits(&forward(w, f)?))
}
