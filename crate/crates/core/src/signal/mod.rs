//! EEG window representation, frequency bands and preprocessing.

mod filter;
mod normalize;

pub use filter::{apply_filter, design_bandpass, Biquad, FilterSpec};
/// Band-pass then z-score, the standard preprocessing chain.
pub fn preprocess(w: &EegWindow, f: &FilterSpec) -> Result<EegWindow> {
    Ok(zscore_normalize(&apply_filter(w, f)?))
}

/// The shared 1-50 Hz order-4 design.
pub fn standard_filter() -> &'static FilterSpec {
    static SPEC: std::sync::OnceLock<FilterSpec> = std::sync::OnceLock::new();
    SPEC.get_or_init(FilterSpec::standard)
}

pub use normalize::{gate_artifacts, zscore_normalize, zscore_row, GateDecision, DEFAULT_AMP_LIMIT_UV};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rate of every window in the system, in Hz.
pub const FS: f64 = 128.0;
/// Sampling rate as an integer sample count per second.
pub const FS_HZ: usize = 128;
pub const N_CHANNELS: usize = 14;
/// Default window length in seconds (256 samples).
pub const DEFAULT_WINDOW_SECONDS: usize = 2;

/// Scalp electrode site. Declaration order is the canonical row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    AF3,
    F7,
    F3,
    FC5,
    T7,
    P7,
    O1,
    O2,
    P8,
    T8,
    FC6,
    F4,
    F8,
    AF4,
}

impl ChannelId {
    pub const ALL: [ChannelId; N_CHANNELS] = [
        ChannelId::AF3,
        ChannelId::F7,
        ChannelId::F3,
        ChannelId::FC5,
        ChannelId::T7,
        ChannelId::P7,
        ChannelId::O1,
        ChannelId::O2,
        ChannelId::P8,
        ChannelId::T8,
        ChannelId::FC6,
        ChannelId::F4,
        ChannelId::F8,
        ChannelId::AF4,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::AF3 => "AF3",
            ChannelId::F7 => "F7",
            ChannelId::F3 => "F3",
            ChannelId::FC5 => "FC5",
            ChannelId::T7 => "T7",
            ChannelId::P7 => "P7",
            ChannelId::O1 => "O1",
            ChannelId::O2 => "O2",
            ChannelId::P8 => "P8",
            ChannelId::T8 => "T8",
            ChannelId::FC6 => "FC6",
            ChannelId::F4 => "F4",
            ChannelId::F8 => "F8",
            ChannelId::AF4 => "AF4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

/// Named frequency band, `[lo, hi)` in Hz (gamma is closed at 50 Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub band: Band,
    pub lo: f64,
    pub hi: f64,
}

pub const BANDS: [BandDef; 5] = [
    BandDef { band: Band::Delta, lo: 1.0, hi: 4.0 },
    BandDef { band: Band::Theta, lo: 4.0, hi: 8.0 },
    BandDef { band: Band::Alpha, lo: 8.0, hi: 12.0 },
    BandDef { band: Band::Beta, lo: 12.0, hi: 30.0 },
    BandDef { band: Band::Gamma, lo: 30.0, hi: 50.0 },
];

impl Band {
    pub fn def(self) -> BandDef {
        BANDS[self as usize]
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }
}

/// A block of 14-channel EEG in microvolts, rows in canonical channel order.
///
/// Samples are stored row-major: `data[ch * n_samples + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EegWindow {
    data: Vec<f64>,
    n_samples: usize,
    pub start_tick: u64,
}

impl EegWindow {
    /// Builds a window from row-major samples. The length must be a whole
    /// number of seconds at [`FS`] and every sample finite.
    pub fn from_flat(data: Vec<f64>, n_samples: usize, start_tick: u64) -> Result<Self> {
        if n_samples == 0 || n_samples % FS_HZ != 0 {
            return Err(Error::InvalidWindow(format!(
                "n_samples {n_samples} is not a positive multiple of {FS_HZ}"
            )));
        }
        if data.len() != N_CHANNELS * n_samples {
            return Err(Error::InvalidWindow(format!(
                "expected {} samples, got {}",
                N_CHANNELS * n_samples,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                channel: pos / n_samples,
                index: pos % n_samples,
            });
        }
        Ok(Self { data, n_samples, start_tick })
    }

    pub fn from_rows(rows: &[Vec<f64>], start_tick: u64) -> Result<Self> {
        if rows.len() != N_CHANNELS {
            return Err(Error::InvalidWindow(format!(
                "expected {N_CHANNELS} channels, got {}",
                rows.len()
            )));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidWindow("ragged channel rows".into()));
        }
        Self::from_flat(rows.concat(), n, start_tick)
    }

    pub fn zeros(n_samples: usize, start_tick: u64) -> Result<Self> {
        Self::from_flat(vec![0.0; N_CHANNELS * n_samples], n_samples, start_tick)
    }

    pub fn fs(&self) -> f64 {
        FS
    }

    pub fn channels(&self) -> &'static [ChannelId; N_CHANNELS] {
        &ChannelId::ALL
    }

    pub fn n_channels(&self) -> usize {
        N_CHANNELS
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn row(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn channel(&self, ch: ChannelId) -> &[f64] {
        self.row(ch.index())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Applies `f` to every row, producing a new window of the same shape.
    pub(crate) fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut out = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            let mapped = f(row)?;
            debug_assert_eq!(mapped.len(), self.n_samples);
            out.extend_from_slice(&mapped);
        }
        Self::from_flat(out, self.n_samples, self.start_tick)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_order_is_canonical() {
        let names: Vec<_> = ChannelId::ALL.iter().map(|c| c.name()).collect();
        assert_eq!(
            names,
            ["AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4"]
        );
        for (i, c) in ChannelId::ALL.iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(ChannelId::from_name(c.name()), Some(*c));
        }
    }

    #[test]
    fn bands_tile_one_to_fifty() {
        assert_eq!(BANDS[0].lo, 1.0);
        assert_eq!(BANDS[4].hi, 50.0);
        for pair in BANDS.windows(2) {
            assert!(pair[0].lo < pair[0].hi);
            assert_eq!(pair[0].hi, pair[1].lo);
        }
    }

    #[test]
    fn window_rejects_bad_shapes() {
        assert!(EegWindow::from_flat(vec![0.0; 14 * 100], 100, 0).is_err());
        assert!(EegWindow::from_flat(vec![0.0; 13 * 256], 256, 0).is_err());
        let mut data = vec![0.0; 14 * 256];
        data[300] = f64::NAN;
        match EegWindow::from_flat(data, 256, 0) {
            Err(Error::NonFinite { channel, index }) => assert_eq!((channel, index), (1, 44)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
