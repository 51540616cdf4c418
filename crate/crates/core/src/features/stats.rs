use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::EegWindow;

pub const DEFAULT_SUB_WIN_SECONDS: f64 = 1.0;
pub const DEFAULT_SUB_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
}

/// Mean, population variance and standardized third central moment.
/// Skewness is 0 when the variance is below `1e-12`.
pub fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (m2, m3) = x.iter().fold((0.0, 0.0), |(m2, m3), v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (variance, m3) = (m2 / n, m3 / n);
    let skewness = if variance < 1e-12 { 0.0 } else { m3 / variance.powf(1.5) };
    Moments { mean, variance, skewness }
}

/// Per-channel moments averaged over overlapping sub-windows.
pub fn sliding_stats(w: &EegWindow, sub_win: f64, overlap: f64) -> Result<Vec<Moments>> {
    let n = w.n_samples();
    let sub = (sub_win * w.fs()).round() as usize;
    if sub == 0 || sub > n {
        return Err(Error::InvalidParameter(format!(
            "sub-window of {sub} samples does not fit a {n}-sample window"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap {overlap} not in [0, 1)")));
    }
    let step = (sub - (overlap * sub as f64).floor() as usize).max(1);
    let count = (n - sub) / step + 1;
    Ok(w.rows()
        .map(|row| {
            let mut acc = Moments { mean: 0.0, variance: 0.0, skewness: 0.0 };
            for i in 0..count {
                let m = moments(&row[i * step..i * step + sub]);
                acc.mean += m.mean;
                acc.variance += m.variance;
                acc.skewness += m.skewness;
            }
            let c = count as f64;
            Moments {
                mean: acc.mean / c,
                variance: acc.variance / c,
                skewness: acc.skewness / c,
            }
        })
        .collect())
}
