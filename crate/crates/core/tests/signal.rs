use proptest::prelude::*;
use psyframe::signal::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_window(seed: u64, n: usize) -> EegWindow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..N_CHANNELS * n).map(|_| rng.random_range(-50.0..50.0)).collect();
    EegWindow::from_flat(data, n, 0).unwrap()
}

/// Direct-form evaluation of the expanded transfer function, independent of
/// the biquad cascade.
fn tf_magnitude(b: &[f64], a: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / fs;
    let eval = |c: &[f64]| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, ck) in c.iter().enumerate() {
            re += ck * (w * k as f64).cos();
            im -= ck * (w * k as f64).sin();
        }
        (re * re + im * im).sqrt()
    };
    eval(b) / eval(a)
}

#[test]
fn frequency_grid_oracle() {
    let f = design_bandpass(1.0, 50.0, 128.0, 4).unwrap();
    let (b, a) = (f.numerator(), f.denominator());
    let g10 = 20.0 * tf_magnitude(&b, &a, 10.0, 128.0).log10();
    assert!(g10.abs() <= 1.0, "10 Hz gain {g10} dB");
    // passband stays within 3 dB over a grid inside the edges
    for i in 0..=80 {
        let fr = 3.0 + 0.5 * i as f64;
        let g = 20.0 * tf_magnitude(&b, &a, fr, 128.0).log10();
        assert!(g.abs() < 3.0, "{fr} Hz: {g} dB");
    }
    // stopband from 60 Hz to Nyquist
    for fr in [60.0, 61.0, 62.0, 63.0, 63.9] {
        let att = g10 - 20.0 * tf_magnitude(&b, &a, fr, 128.0).log10();
        assert!(att >= 20.0, "{fr} Hz attenuation {att}");
    }
}

#[test]
fn stable_and_bounded_impulse_energy() {
    for (lo, hi, order) in [(1.0, 50.0, 4), (8.0, 12.0, 2), (0.5, 60.0, 8), (4.0, 30.0, 6)] {
        let f = design_bandpass(lo, hi, 128.0, order).unwrap();
        assert!(f.is_stable());
        assert!(f.max_pole_radius() < 1.0);
    }
}

#[test]
fn gate_examples() {
    let mut w = random_window(1, 256);
    let scale = 80.0 / w.max_abs();
    let rows: Vec<Vec<f64>> = w.rows().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    w = EegWindow::from_rows(&rows, 0).unwrap();
    assert!(gate_artifacts(&w, 100.0).unwrap().is_accept());
    let mut spiked = rows.clone();
    spiked[3][100] = 150.0;
    let w2 = EegWindow::from_rows(&spiked, 0).unwrap();
    assert!(!gate_artifacts(&w2, 100.0).unwrap().is_accept());
    assert!(gate_artifacts(&w2, 0.0).is_err());
}

#[test]
fn reversed_band_is_error() {
    assert!(design_bandpass(50.0, 1.0, 128.0, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filtering_is_linear(sx in any::<u64>(), sy in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let f = standard_filter();
        let x = random_window(sx, 256);
        let y = random_window(sy, 256);
        let combo: Vec<f64> = x.as_flat().iter().zip(y.as_flat()).map(|(p, q)| a * p + b * q).collect();
        let lhs = apply_filter(&EegWindow::from_flat(combo, 256, 0).unwrap(), f).unwrap();
        let fx = apply_filter(&x, f).unwrap();
        let fy = apply_filter(&y, f).unwrap();
        let scale = lhs.max_abs().max(1e-12);
        for ((l, p), q) in lhs.as_flat().iter().zip(fx.as_flat()).zip(fy.as_flat()) {
            prop_assert!((l - (a * p + b * q)).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zscore_idempotent(seed in any::<u64>()) {
        let once = zscore_normalize(&random_window(seed, 256));
        let twice = zscore_normalize(&once);
        for (p, q) in once.as_flat().iter().zip(twice.as_flat()) {
            prop_assert!((p - q).abs() < 1e-9);
        }
        for row in once.rows() {
            let m = row.iter().sum::<f64>() / row.len() as f64;
            let v = row.iter().map(|x| (x - m).powi(2)).sum::<f64>() / row.len() as f64;
            prop_assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
    }
}
