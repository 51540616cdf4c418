//! Fixed-layout feature extraction.
//!
//! Per channel, in canonical channel order, 13 slots:
//!
//! | slot  | content                                   |
//! |-------|-------------------------------------------|
//! | 0..5  | band power delta, theta, alpha, beta, gamma (µV², Welch) |
//! | 5..8  | mean, variance, skewness (1 s sub-windows, 50 % overlap, averaged) |
//! | 8..13 | db4 wavelet energy D1, D2, D3, D4, A4     |
//!
//! Channel `c` occupies `[13 c, 13 c + 13)`. The layout is identified by
//! [`LAYOUT_ID`], which is written into dataset and weights files.

mod dwt;
mod stats;
mod welch;

pub use dwt::{dwt_energies, dwt_step, wavedec, DB4_SCALING, DEFAULT_LEVELS};
pub use stats::{moments, sliding_stats, Moments, DEFAULT_SUB_OVERLAP, DEFAULT_SUB_WIN_SECONDS};
pub use welch::{band_power, hann, welch_psd, Spectrum, DEFAULT_OVERLAP, DEFAULT_SEG_LEN};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelId, EegWindow, BANDS, N_CHANNELS};

pub const LAYOUT_ID: &str = "psyframe-feat-v1";
pub const FEATURES_PER_CHANNEL: usize = 13;
pub const FEATURE_DIM: usize = N_CHANNELS * FEATURES_PER_CHANNEL;

/// Offsets of each family within a channel's 13 slots.
pub const BAND_POWER_SLOTS: std::ops::Range<usize> = 0..5;
pub const STAT_SLOTS: std::ops::Range<usize> = 5..8;
pub const WAVELET_SLOTS: std::ops::Range<usize> = 8..13;

const SLOT_NAMES: [&str; FEATURES_PER_CHANNEL] = [
    "delta_power",
    "theta_power",
    "alpha_power",
    "beta_power",
    "gamma_power",
    "mean",
    "variance",
    "skewness",
    "wavelet_d1",
    "wavelet_d2",
    "wavelet_d3",
    "wavelet_d4",
    "wavelet_a4",
];

/// Slot names in layout order, e.g. `"O1.alpha_power"`.
pub fn slot_names() -> Vec<String> {
    ChannelId::ALL
        .iter()
        .flat_map(|c| SLOT_NAMES.iter().map(move |s| format!("{}.{s}", c.name())))
        .collect()
}

pub fn slot_index(ch: ChannelId, slot: usize) -> usize {
    ch.index() * FEATURES_PER_CHANNEL + slot
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::Shape {
                name: "feature vector".into(),
                expected: vec![FEATURE_DIM],
                found: vec![values.len()],
            });
        }
        Ok(Self { layout: LAYOUT_ID.to_string(), values })
    }

    pub fn check_layout(&self) -> Result<()> {
        if self.layout != LAYOUT_ID || self.values.len() != FEATURE_DIM {
            return Err(Error::LayoutMismatch {
                expected: LAYOUT_ID.into(),
                found: self.layout.clone(),
            });
        }
        Ok(())
    }

    pub fn channel(&self, ch: ChannelId) -> &[f64] {
        let start = ch.index() * FEATURES_PER_CHANNEL;
        &self.values[start..start + FEATURES_PER_CHANNEL]
    }

    pub fn get(&self, ch: ChannelId, slot: usize) -> f64 {
        self.values[slot_index(ch, slot)]
    }

    /// Band powers as `[channel][band]`.
    pub fn band_powers(&self) -> Vec<[f64; 5]> {
        ChannelId::ALL
            .iter()
            .map(|&c| {
                let s = self.channel(c);
                [s[0], s[1], s[2], s[3], s[4]]
            })
            .collect()
    }
}

/// Runs all three feature families with default parameters and packs them.
pub fn assemble_features(w: &EegWindow) -> Result<FeatureVector> {
    let spectrum = welch_psd(w, DEFAULT_SEG_LEN, DEFAULT_OVERLAP)?;
    let powers = BANDS
        .iter()
        .map(|b| band_power(&spectrum, b))
        .collect::<Result<Vec<_>>>()?;
    let stats = sliding_stats(w, DEFAULT_SUB_WIN_SECONDS, DEFAULT_SUB_OVERLAP)?;
    let energies = dwt_energies(w, DEFAULT_LEVELS)?;

    let mut values = Vec::with_capacity(FEATURE_DIM);
    for ch in 0..N_CHANNELS {
        values.extend(powers.iter().map(|p| p[ch]));
        let m = stats[ch];
        values.extend([m.mean, m.variance, m.skewness]);
        values.extend_from_slice(&energies[ch]);
    }
    debug_assert_eq!(values.len(), FEATURE_DIM);
    FeatureVector::new(values)
}

/// Standard preprocessing (band-pass, z-score) followed by [`assemble_features`].
pub fn window_features(w: &EegWindow) -> Result<FeatureVector> {
    assemble_features(&crate::signal::preprocess(w, crate::signal::standard_filter())?)
}
