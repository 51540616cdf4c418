use serde::{Deserialize, Serialize};

use super::EegWindow;
use crate::error::{Error, Result};

pub const DEFAULT_AMP_LIMIT_UV: f64 = 100.0;
const DEGENERATE_STD: f64 = 1e-12;

/// Z-score with population standard deviation. Rows with std below
/// `1e-12` map to zeros.
pub fn zscore_row(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < DEGENERATE_STD {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

pub fn zscore_normalize(w: &EegWindow) -> EegWindow {
    w.map_rows(|row| Ok(zscore_row(row)))
        .expect("z-score preserves shape and finiteness")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum GateDecision {
    Accept,
    Reject { reason: String },
}

impl GateDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, GateDecision::Accept)
    }
}

/// Rejects a window when any sample's magnitude exceeds `amp_limit` µV.
pub fn gate_artifacts(w: &EegWindow, amp_limit: f64) -> Result<GateDecision> {
    if !(amp_limit > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "amplitude limit must be positive, got {amp_limit}"
        )));
    }
    for (ch, row) in w.rows().enumerate() {
        if let Some((i, v)) = row.iter().enumerate().find(|(_, v)| v.abs() > amp_limit) {
            return Ok(GateDecision::Reject {
                reason: format!(
                    "{} sample {i}: |{v:.1}| uV exceeds {amp_limit} uV",
                    super::ChannelId::ALL[ch].name()
                ),
            });
        }
    }
    Ok(GateDecision::Accept)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_zscore() {
        let z = zscore_row(&[1.0, 2.0, 3.0]);
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in z.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(zscore_row(&[5.0, 5.0, 5.0]), vec![0.0; 3]);
    }

    #[test]
    fn window_rows_have_unit_moments() {
        let rows: Vec<Vec<f64>> = (0..14)
            .map(|c| (0..256).map(|i| ((i * (c + 3)) % 17) as f64 * 0.7 - c as f64).collect())
            .collect();
        let mut rows = rows;
        rows[5] = vec![2.5; 256];
        let w = EegWindow::from_rows(&rows, 0).unwrap();
        let z = zscore_normalize(&w);
        for (ch, row) in z.rows().enumerate() {
            let mean = row.iter().sum::<f64>() / 256.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 256.0;
            assert!(mean.abs() < 1e-9);
            if ch == 5 {
                assert!(row.iter().all(|v| *v == 0.0));
            } else {
                assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gate_thresholds() {
        let mut rows = vec![vec![0.0; 256]; 14];
        rows[3][10] = -80.0;
        let w = EegWindow::from_rows(&rows, 0).unwrap();
        assert_eq!(gate_artifacts(&w, 100.0).unwrap(), GateDecision::Accept);
        rows[7][100] = 150.0;
        let w = EegWindow::from_rows(&rows, 0).unwrap();
        assert!(!gate_artifacts(&w, 100.0).unwrap().is_accept());
        assert!(gate_artifacts(&w, 0.0).is_err());
        assert!(gate_artifacts(&w, f64::NAN).is_err());
    }
}
