use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EegWindow;
use crate::error::{Error, Result};

/// One second-order section, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z_inv2 = z_inv * z_inv;
        let num = self.b[0] + z_inv * self.b[1] + z_inv2 * self.b[2];
        let den = self.a[0] + z_inv * self.a[1] + z_inv2 * self.a[2];
        num / den
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    /// Initial state for a unit step already in steady state
    /// (transposed direct form II).
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        let y = (b0 + b1 + b2) / (1.0 + a1 + a2);
        [y - b0, b2 - a2 * y]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

/// Digital Butterworth band-pass realized as a cascade of second-order
/// sections. A prototype of order `order` yields `2 * order` poles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub lo: f64,
    pub hi: f64,
    pub fs: f64,
    pub order: usize,
    pub sections: Vec<Biquad>,
}

impl FilterSpec {
    /// The standard 1-50 Hz, order-4 preprocessing filter.
    pub fn standard() -> Self {
        design_bandpass(1.0, 50.0, super::FS, 4).expect("standard band is valid")
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.fs;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn gain_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Expanded transfer-function numerator, highest power of `z^-1` last.
    pub fn numerator(&self) -> Vec<f64> {
        self.sections.iter().fold(vec![1.0], |acc, s| poly_mul(&acc, &s.b))
    }

    pub fn denominator(&self) -> Vec<f64> {
        self.sections.iter().fold(vec![1.0], |acc, s| poly_mul(&acc, &s.a))
    }

    /// Causal pass through the cascade with per-section initial states.
    fn run(&self, x: &[f64], init_scale: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut scale = init_scale;
        for s in &self.sections {
            let zi = s.step_state();
            let mut z1 = zi[0] * scale;
            let mut z2 = zi[1] * scale;
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + z1;
                z1 = s.b[1] * xin - s.a[1] * out + z2;
                z2 = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
            scale *= s.dc_gain();
        }
        y
    }

    /// Samples of odd extension added at each end before the forward-backward pass.
    pub fn pad_len(&self, n: usize) -> usize {
        let settle = (3.0 * self.fs / self.lo).ceil() as usize;
        (3 * (2 * self.sections.len() + 1)).max(settle).min(n.saturating_sub(1))
    }

    /// Zero-phase filtering of one channel: odd extension at both ends,
    /// forward pass, reversed pass, crop.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len(n);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let mut fwd = self.run(&ext, ext[0]);
        fwd.reverse();
        let mut back = self.run(&fwd, fwd[0]);
        back.reverse();
        back[pad..pad + n].to_vec()
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Designs a Butterworth band-pass by bilinear transform of the analog
/// prototype, with pre-warped band edges.
///
/// `order` is the prototype order; the digital filter has `2 * order` poles
/// grouped into `order` sections, each with zeros at `z = 1` and `z = -1`.
/// The cascade is normalized to unit gain at the pre-warped geometric centre.
pub fn design_bandpass(lo: f64, hi: f64, fs: f64, order: usize) -> Result<FilterSpec> {
    let band_err = |reason| Error::InvalidBand { lo, hi, fs, reason };
    if !(lo.is_finite() && hi.is_finite() && fs.is_finite()) || fs <= 0.0 {
        return Err(band_err("edges and sampling rate must be finite and positive"));
    }
    if lo <= 0.0 {
        return Err(band_err("lower edge must be positive"));
    }
    if lo >= hi {
        return Err(band_err("lower edge must be below upper edge"));
    }
    if hi >= fs / 2.0 {
        return Err(band_err("upper edge must be below Nyquist"));
    }
    if !(2..=8).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }

    let k = 2.0 * fs;
    let w_lo = k * (PI * lo / fs).tan();
    let w_hi = k * (PI * hi / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;
    let bilinear = |s: Complex64| (k + s) / (k - s);

    let mut sections = Vec::with_capacity(order);
    for idx in 1..=order {
        let theta = PI * (2 * idx + order - 1) as f64 / (2 * order) as f64;
        let proto = Complex64::from_polar(1.0, theta);
        // Conjugate prototype poles map to conjugate digital poles; the lower
        // half-plane partner is covered by the section built from this one.
        if proto.im < -1e-12 {
            continue;
        }
        let half = proto * (bw / 2.0);
        let disc = (half * half - w0_sq).sqrt();
        let (s1, s2) = (half + disc, half - disc);
        if proto.im.abs() <= 1e-12 {
            // Real prototype pole: its two band-pass poles are a conjugate
            // pair (or both real), so they fit one section.
            let (z1, z2) = (bilinear(s1), bilinear(s2));
            sections.push(section_from_poles(z1, z2));
        } else {
            for s in [s1, s2] {
                let z = bilinear(s);
                sections.push(section_from_poles(z, z.conj()));
            }
        }
    }
    debug_assert_eq!(sections.len(), order);

    let mut spec = FilterSpec { lo, hi, fs, order, sections };
    let centre = (w0_sq.sqrt() / k).atan() * fs / PI;
    let gain = spec.response(centre).norm();
    let per_section = gain.powf(-1.0 / order as f64);
    for s in &mut spec.sections {
        for b in &mut s.b {
            *b *= per_section;
        }
    }
    let radius = spec.max_pole_radius();
    if radius >= 1.0 {
        return Err(Error::UnstableFilter(radius));
    }
    Ok(spec)
}

fn section_from_poles(p1: Complex64, p2: Complex64) -> Biquad {
    Biquad {
        b: [1.0, 0.0, -1.0],
        a: [1.0, -(p1 + p2).re, (p1 * p2).re],
    }
}

/// Zero-phase band-pass of every channel. Output has the input's shape.
pub fn apply_filter(w: &EegWindow, f: &FilterSpec) -> Result<EegWindow> {
    if !f.is_stable() {
        return Err(Error::UnstableFilter(f.max_pole_radius()));
    }
    if let Some(pos) = w.as_flat().iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            channel: pos / w.n_samples(),
            index: pos % w.n_samples(),
        });
    }
    w.map_rows(|row| Ok(f.filtfilt(row)))
}
