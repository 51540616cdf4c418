use std::f64::consts::PI;

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{BandDef, EegWindow};

pub const DEFAULT_SEG_LEN: usize = 128;
pub const DEFAULT_OVERLAP: f64 = 0.5;

/// One-sided power spectral density per channel, µV²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub psd: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn df(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    /// Rectangle-rule integral of each channel's PSD over bins in `[lo, hi]`.
    pub fn sum_power(&self, lo: f64, hi: f64) -> Vec<f64> {
        let df = self.df();
        self.psd
            .iter()
            .map(|row| {
                self.freqs
                    .iter()
                    .zip(row)
                    .filter(|(f, _)| **f >= lo && **f <= hi)
                    .map(|(_, p)| p * df)
                    .sum()
            })
            .collect()
    }
}

/// Periodic Hann taper.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate: mean-removed Hann segments, averaged periodograms,
/// density scaling `1 / (fs * sum(w^2))`, one-sided doubling of every bin
/// except DC and Nyquist. The result integrates to the signal variance.
pub fn welch_psd(w: &EegWindow, seg_len: usize, overlap: f64) -> Result<Spectrum> {
    let n = w.n_samples();
    if seg_len > n {
        return Err(Error::SegmentTooLong { seg_len, n_samples: n });
    }
    if seg_len < 2 {
        return Err(Error::InvalidParameter(format!("segment length {seg_len} < 2")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap {overlap} not in [0, 1)")));
    }
    let fs = w.fs();
    let step = (seg_len - (overlap * seg_len as f64).floor() as usize).max(1);
    let n_segments = (n - seg_len) / step + 1;
    let taper = hann(seg_len);
    let scale = 1.0 / (fs * taper.iter().map(|v| v * v).sum::<f64>());
    let n_bins = seg_len / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);

    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    let psd = w
        .rows()
        .map(|row| {
            let mut acc = vec![0.0; n_bins];
            for s in 0..n_segments {
                let seg = &row[s * step..s * step + seg_len];
                let mean = seg.iter().sum::<f64>() / seg_len as f64;
                for ((b, x), t) in buf.iter_mut().zip(seg).zip(&taper) {
                    *b = Complex64::new((x - mean) * t, 0.0);
                }
                fft.process(&mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            for (k, a) in acc.iter_mut().enumerate() {
                let one_sided = if k == 0 || (seg_len % 2 == 0 && k == n_bins - 1) {
                    1.0
                } else {
                    2.0
                };
                *a *= one_sided * scale / n_segments as f64;
            }
            acc
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / seg_len as f64).collect();
    Ok(Spectrum { freqs, psd })
}

/// Trapezoidal integral of the piecewise-linear PSD over `[band.lo, band.hi)`,
/// with end points interpolated so adjacent bands tile exactly.
pub fn band_power(s: &Spectrum, band: &BandDef) -> Result<Vec<f64>> {
    let (lo, hi) = (band.lo, band.hi);
    let f_max = *s.freqs.last().expect("spectrum has bins");
    if !(lo < hi) || lo < s.freqs[0] || hi > f_max {
        return Err(Error::EmptyBand { lo, hi });
    }
    let inner: Vec<usize> = (0..s.freqs.len())
        .filter(|&k| s.freqs[k] >= lo && s.freqs[k] < hi)
        .collect();
    if inner.is_empty() {
        return Err(Error::EmptyBand { lo, hi });
    }
    Ok(s.psd
        .iter()
        .map(|row| {
            let mut pts: Vec<(f64, f64)> = Vec::with_capacity(inner.len() + 2);
            pts.push((lo, interp(&s.freqs, row, lo)));
            pts.extend(inner.iter().filter(|&&k| s.freqs[k] > lo).map(|&k| (s.freqs[k], row[k])));
            pts.push((hi, interp(&s.freqs, row, hi)));
            pts.windows(2)
                .map(|p| 0.5 * (p[0].1 + p[1].1) * (p[1].0 - p[0].0))
                .sum::<f64>()
                .max(0.0)
        })
        .collect())
}

fn interp(freqs: &[f64], vals: &[f64], f: f64) -> f64 {
    let df = freqs[1] - freqs[0];
    let pos = (f - freqs[0]) / df;
    let k = (pos.floor() as usize).min(freqs.len() - 2);
    let t = pos - k as f64;
    vals[k] * (1.0 - t) + vals[k + 1] * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::BANDS;

    fn sine_window(freq: f64, amp: f64) -> EegWindow {
        let row: Vec<f64> = (0..256)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / 128.0).sin())
            .collect();
        EegWindow::from_rows(&vec![row; 14], 0).unwrap()
    }

    /// Plain O(n^2) DFT magnitude, independent of the FFT path.
    fn dft_power(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, v)| {
                    let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                    (re + v * ang.cos(), im + v * ang.sin())
                });
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn peak_matches_dft_oracle() {
        let w = sine_window(10.0, 1.0);
        let s = welch_psd(&w, 128, 0.5).unwrap();
        assert_eq!(s.freqs.len(), 65);
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let oracle = dft_power(w.row(0));
        // oracle has 0.5 Hz bins over 2 s; welch has 1 Hz bins
        let oracle_hz = argmax(&oracle) as f64 * 0.5;
        let welch_hz = s.freqs[argmax(&s.psd[0])];
        assert_eq!(oracle_hz, 10.0);
        assert_eq!(welch_hz, oracle_hz);
    }

    #[test]
    fn parseval_for_unit_sine() {
        let s = welch_psd(&sine_window(10.0, 1.0), 128, 0.5).unwrap();
        let total: f64 = s.psd[0].iter().sum::<f64>() * s.df();
        assert!((total - 0.5).abs() <= 0.15 * 0.5, "integral {total}");
    }

    #[test]
    fn zero_window_zero_psd() {
        let s = welch_psd(&EegWindow::zeros(256, 0).unwrap(), 128, 0.5).unwrap();
        assert!(s.psd.iter().flatten().all(|v| *v == 0.0));
        for b in &BANDS {
            assert!(band_power(&s, b).unwrap().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn segment_longer_than_window() {
        let w = EegWindow::zeros(256, 0).unwrap();
        assert!(matches!(welch_psd(&w, 512, 0.5), Err(Error::SegmentTooLong { .. })));
        assert!(welch_psd(&w, 128, 1.0).is_err());
    }

    #[test]
    fn alpha_sine_band_split() {
        let s = welch_psd(&sine_window(10.0, 1.0), 128, 0.5).unwrap();
        let total: f64 = BANDS.iter().map(|b| band_power(&s, b).unwrap()[0]).sum();
        let alpha = band_power(&s, &BANDS[2]).unwrap()[0];
        let gamma = band_power(&s, &BANDS[4]).unwrap()[0];
        assert!(alpha >= 0.9 * total);
        assert!(gamma <= 0.02 * total);
    }

    #[test]
    fn empty_band_is_error() {
        let s = welch_psd(&sine_window(10.0, 1.0), 128, 0.5).unwrap();
        let narrow = BandDef { band: crate::signal::Band::Alpha, lo: 8.2, hi: 8.7 };
        assert!(matches!(band_power(&s, &narrow), Err(Error::EmptyBand { .. })));
        let beyond = BandDef { band: crate::signal::Band::Gamma, lo: 50.0, hi: 70.0 };
        assert!(band_power(&s, &beyond).is_err());
    }
}
