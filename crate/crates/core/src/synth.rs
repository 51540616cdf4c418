//! Deterministic synthetic motor-imagery EEG, datasets and stratified splits.
//!
//! Every window is 1/f-shaped background (a sum of random-phase sinusoids on
//! a 0.5 Hz grid) plus white sensor noise. A class adds a band-limited
//! oscillation on its signature channels whose power is `boost_gain - 1`
//! times the background power already in that band.

use std::f64::consts::PI;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::LAYOUT_ID;
use crate::signal::{Band, BandDef, ChannelId, EegWindow, FS, FS_HZ, N_CHANNELS};

pub const N_CLASSES: usize = 5;
pub const SIGNATURE_TABLE_VERSION: &str = "sig-v1";
pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_N_PER_CLASS: usize = 100;
pub const DEFAULT_BOOST_GAIN: f64 = 4.0;
pub const DEFAULT_SNR: f64 = 10.0;
/// Background amplitude scale; gives a channel std of roughly 12 µV.
const BACKGROUND_SCALE: f64 = 5.0;
/// Windows whose peak would exceed this are scaled down to it.
const PEAK_CEILING_UV: f64 = 90.0;

/// Motor-imagery class, `0..5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ClassLabel(u8);

const CLASS_NAMES: [&str; N_CLASSES] = [
    "Pull Forward with Both Hands",
    "Left Leg on the Pedal",
    "Push with 2 Hands",
    "Right Leg on the Pedal",
    "Push Upward with Both Hands",
];

impl ClassLabel {
    pub const ALL: [ClassLabel; N_CLASSES] =
        [ClassLabel(0), ClassLabel(1), ClassLabel(2), ClassLabel(3), ClassLabel(4)];

    pub fn new(id: u8) -> Result<Self> {
        if (id as usize) < N_CLASSES {
            Ok(Self(id))
        } else {
            Err(Error::InvalidParameter(format!("class id {id} not in 0..5")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        CLASS_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        CLASS_NAMES.iter().position(|n| *n == name).map(|i| Self(i as u8))
    }
}

impl TryFrom<u8> for ClassLabel {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ClassLabel> for u8 {
    fn from(c: ClassLabel) -> u8 {
        c.0
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.0, self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSignature {
    pub class: ClassLabel,
    pub band: Band,
    pub channels: Vec<ChannelId>,
    /// Band power on boosted channels relative to background, > 1.
    pub boost_gain: f64,
    /// Background power over white sensor-noise power.
    pub snr: f64,
}

/// The default signature table.
pub fn default_signatures() -> Vec<ClassSignature> {
    use ChannelId::*;
    let table: [(Band, Vec<ChannelId>); N_CLASSES] = [
        (Band::Alpha, vec![O1, O2]),
        (Band::Beta, vec![FC6, F4]),
        (Band::Beta, vec![FC5, FC6]),
        (Band::Beta, vec![FC5, F3]),
        (Band::Theta, vec![AF3, AF4]),
    ];
    table
        .into_iter()
        .enumerate()
        .map(|(i, (band, channels))| ClassSignature {
            class: ClassLabel(i as u8),
            band,
            channels,
            boost_gain: DEFAULT_BOOST_GAIN,
            snr: DEFAULT_SNR,
        })
        .collect()
}

pub fn signature(c: ClassLabel) -> ClassSignature {
    default_signatures().swap_remove(c.index())
}

pub fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the combined inputs
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id reserved for windows without a class signature.
const NOISE_STREAM: u64 = N_CLASSES as u64;

/// Adds `amp * sin(2 pi f t + phase)` sampled at [`FS`], stepping a unit
/// phasor instead of calling `sin` per sample.
fn add_sinusoid(row: &mut [f64], amp: f64, freq: f64, phase: f64) {
    let (step_s, step_c) = (2.0 * PI * freq / FS).sin_cos();
    let (mut s, mut c) = phase.sin_cos();
    for x in row.iter_mut() {
        *x += amp * s;
        (s, c) = (s * step_c + c * step_s, c * step_c - s * step_s);
    }
}

const N_BACKGROUND: u32 = 120;

/// Mean background power in `[lo, hi)`: components at 0.5 Hz steps with
/// amplitude `5 f^-1/2 U`, `U ~ U(0.5, 1.5)`, so `E[U^2] = 13/12`.
pub fn expected_background_power(b: &BandDef) -> f64 {
    (1..=N_BACKGROUND)
        .map(|m| 0.5 * m as f64)
        .filter(|f| *f >= b.lo && *f < b.hi)
        .map(|f| BACKGROUND_SCALE * BACKGROUND_SCALE / f * (13.0 / 12.0) / 2.0)
        .sum()
}

/// Generates one window. `class == None` yields background and sensor noise
/// only. Deterministic in `(class, seed, signature)`.
pub fn synth_window_with(
    class: Option<&ClassSignature>,
    seed: u64,
    n_samples: usize,
    start_tick: u64,
) -> EegWindow {
    let stream = class.map_or(NOISE_STREAM, |s| s.class.id() as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, stream, 0));
    let snr = class.map_or(DEFAULT_SNR, |s| s.snr);

    let mut data = Vec::with_capacity(N_CHANNELS * n_samples);
    for ch in ChannelId::ALL {
        let mut row = vec![0.0; n_samples];
        let mut total_power = 0.0;
        for m in 1..=N_BACKGROUND {
            let f = 0.5 * m as f64;
            let amp = BACKGROUND_SCALE * f.powf(-0.5) * rng.random_range(0.5..1.5);
            let phase = rng.random_range(0.0..2.0 * PI);
            add_sinusoid(&mut row, amp, f, phase);
            total_power += amp * amp / 2.0;
        }

        // One rhythm in the inner half of the band, sized against the expected
        // (not realized) background so the boost ratio does not inherit the
        // background's per-window variance.
        if let Some(sig) = class.filter(|s| s.channels.contains(&ch)) {
            let b = sig.band.def();
            let width = b.hi - b.lo;
            let osc_power = (sig.boost_gain - 1.0).max(0.0) * expected_background_power(&b);
            let f = rng.random_range(b.lo + 0.25 * width..b.hi - 0.25 * width);
            let phase = rng.random_range(0.0..2.0 * PI);
            add_sinusoid(&mut row, (2.0 * osc_power).sqrt(), f, phase);
        }

        let noise_std = (total_power / snr).sqrt();
        for x in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x += noise_std * z;
        }
        data.extend_from_slice(&row);
    }

    let peak = data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if peak > PEAK_CEILING_UV {
        let s = PEAK_CEILING_UV / peak;
        data.iter_mut().for_each(|x| *x *= s);
    }
    EegWindow::from_flat(data, n_samples, start_tick).expect("generated window is valid")
}

/// Two-second window for class `c` with the default signature table.
pub fn synth_window(c: ClassLabel, seed: u64) -> EegWindow {
    synth_window_with(Some(&signature(c)), seed, 2 * FS_HZ, 0)
}

/// Two-second window with no class signature.
pub fn synth_noise_window(seed: u64) -> EegWindow {
    synth_window_with(None, seed, 2 * FS_HZ, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<EegWindow>,
    pub labels: Vec<ClassLabel>,
    pub layout_id: String,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        let mut counts = [0; N_CLASSES];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// SHA-256 over labels, start ticks and the little-endian bytes of every sample.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.layout_id.as_bytes());
        for (w, l) in self.windows.iter().zip(&self.labels) {
            h.update([l.id()]);
            h.update(w.start_tick.to_le_bytes());
            for v in w.as_flat() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            windows: idx.iter().map(|&i| self.windows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            layout_id: self.layout_id.clone(),
            seed: self.seed,
        }
    }
}

/// `5 * n_per_class` windows ordered by (class, index).
pub fn build_dataset(n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidParameter("n_per_class must be at least 1".into()));
    }
    let sigs = default_signatures();
    let mut windows = Vec::with_capacity(N_CLASSES * n_per_class);
    let mut labels = Vec::with_capacity(N_CLASSES * n_per_class);
    for sig in &sigs {
        for i in 0..n_per_class {
            let tick = windows.len() as u64;
            let wseed = mix_seed(seed, sig.class.id() as u64 + 16, i as u64);
            windows.push(synth_window_with(Some(sig), wseed, 2 * FS_HZ, tick));
            labels.push(sig.class);
        }
    }
    Ok(Dataset { windows, labels, layout_id: LAYOUT_ID.into(), seed })
}

/// Stratified shuffle split: per class, `floor(train_fraction * count)` go to
/// train. Both halves keep the input's relative order.
pub fn split_dataset(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 99, 0));
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..d.len()).filter(|&i| d.labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Stratify { class: class.id(), count: idx.len() });
        }
        idx.shuffle(&mut rng);
        let n_train = (train_fraction * idx.len() as f64).floor() as usize;
        train_idx.extend_from_slice(&idx[..n_train]);
        val_idx.extend_from_slice(&idx[n_train..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    Ok((d.subset(&train_idx), d.subset(&val_idx)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "manifest")]
struct DatasetManifest {
    version: u32,
    layout_id: String,
    fs: f64,
    channels: Vec<String>,
    n_samples: usize,
    counts: Vec<usize>,
    seed: u64,
    signature_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "window")]
struct WindowRecord {
    label: ClassLabel,
    start_tick: u64,
    samples: Vec<f64>,
}

/// Writes the dataset as JSON lines: one manifest record, then one record per
/// window with row-major samples.
pub fn write_dataset<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let manifest = DatasetManifest {
        version: DATASET_FORMAT_VERSION,
        layout_id: d.layout_id.clone(),
        fs: FS,
        channels: ChannelId::ALL.iter().map(|c| c.name().to_string()).collect(),
        n_samples: d.windows.first().map_or(2 * FS_HZ, |w| w.n_samples()),
        counts: d.class_counts().to_vec(),
        seed: d.seed,
        signature_version: SIGNATURE_TABLE_VERSION.into(),
    };
    serde_json::to_writer(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    for (w, l) in d.windows.iter().zip(&d.labels) {
        let rec = WindowRecord {
            label: *l,
            start_tick: w.start_tick,
            samples: w.as_flat().to_vec(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty dataset file".into()))??;
    let manifest: DatasetManifest = serde_json::from_str(&header)?;
    if manifest.version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", manifest.version)));
    }
    let expected: Vec<&str> = ChannelId::ALL.iter().map(|c| c.name()).collect();
    if manifest.channels != expected || manifest.fs != FS {
        return Err(Error::Format("channel list or sampling rate does not match".into()));
    }
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: WindowRecord = serde_json::from_str(&line)?;
        windows.push(EegWindow::from_flat(rec.samples, manifest.n_samples, rec.start_tick)?);
        labels.push(rec.label);
    }
    let d = Dataset { windows, labels, layout_id: manifest.layout_id, seed: manifest.seed };
    if d.class_counts().to_vec() != manifest.counts {
        return Err(Error::Format("class counts disagree with manifest".into()));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{gate_artifacts, DEFAULT_AMP_LIMIT_UV};

    #[test]
    fn labels_are_a_bijection() {
        for c in ClassLabel::ALL {
            assert_eq!(ClassLabel::from_name(c.name()), Some(c));
        }
        assert_eq!(ClassLabel::new(1).unwrap().name(), "Left Leg on the Pedal");
        assert!(ClassLabel::new(5).is_err());
    }

    #[test]
    fn signatures_are_distinct() {
        let sigs = default_signatures();
        for (i, a) in sigs.iter().enumerate() {
            assert!(a.boost_gain > 1.0);
            for b in &sigs[i + 1..] {
                let mut ca = a.channels.clone();
                let mut cb = b.channels.clone();
                ca.sort();
                cb.sort();
                assert!(a.band != b.band || ca != cb);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let c = ClassLabel::new(2).unwrap();
        assert_eq!(synth_window(c, 11), synth_window(c, 11));
        let a = synth_window(c, 11);
        let b = synth_window(c, 12);
        let diff = a
            .as_flat()
            .iter()
            .zip(b.as_flat())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff > 0.0);
    }

    #[test]
    fn windows_pass_the_gate() {
        for seed in 0..40 {
            for c in ClassLabel::ALL {
                let w = synth_window(c, seed);
                assert!(gate_artifacts(&w, DEFAULT_AMP_LIMIT_UV).unwrap().is_accept());
            }
            assert!(gate_artifacts(&synth_noise_window(seed), DEFAULT_AMP_LIMIT_UV)
                .unwrap()
                .is_accept());
        }
    }

    #[test]
    fn dataset_sizes_and_order() {
        let d = build_dataset(3, 5).unwrap();
        assert_eq!(d.len(), 15);
        assert_eq!(d.class_counts(), [3; 5]);
        let ids: Vec<u8> = d.labels.iter().map(|l| l.id()).collect();
        assert_eq!(ids, [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4]);
        assert_eq!(build_dataset(1, 5).unwrap().len(), 5);
        assert!(build_dataset(0, 5).is_err());
        assert_eq!(d.content_hash(), build_dataset(3, 5).unwrap().content_hash());
        assert_ne!(d.content_hash(), build_dataset(3, 6).unwrap().content_hash());
    }

    #[test]
    fn stratified_split() {
        let d = build_dataset(10, 1).unwrap();
        let (train, val) = split_dataset(&d, 0.8, 3).unwrap();
        assert_eq!(train.class_counts(), [8; 5]);
        assert_eq!(val.class_counts(), [2; 5]);
        let ticks = |d: &Dataset| d.windows.iter().map(|w| w.start_tick).collect::<Vec<_>>();
        let (mut t, v) = (ticks(&train), ticks(&val));
        assert!(t.iter().all(|x| !v.contains(x)));
        t.extend(v);
        t.sort();
        assert_eq!(t, (0..50).collect::<Vec<u64>>());

        let tiny = build_dataset(1, 1).unwrap();
        assert!(matches!(split_dataset(&tiny, 0.8, 0), Err(Error::Stratify { .. })));
        assert!(split_dataset(&d, 1.0, 0).is_err());
    }

    #[test]
    fn dataset_file_round_trip() {
        let d = build_dataset(2, 9).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        let first = buf.split(|b| *b == b'\n').next().unwrap();
        let manifest: serde_json::Value = serde_json::from_slice(first).unwrap();
        assert_eq!(manifest["layout_id"], LAYOUT_ID);
        assert_eq!(manifest["counts"], serde_json::json!([2, 2, 2, 2, 2]));
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.content_hash(), d.content_hash());
    }
}
