use crate::error::{Error, Result};
use crate::signal::EegWindow;

pub const DEFAULT_LEVELS: usize = 4;

/// Daubechies scaling filter with four vanishing moments (8 taps).
pub const DB4_SCALING: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

fn wavelet_filter() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (j, v) in g.iter_mut().enumerate() {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4_SCALING[7 - j];
    }
    g
}

/// One analysis level with periodic extension: returns (approximation, detail),
/// each half the input length.
pub fn dwt_step(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let g = wavelet_filter();
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..DB4_SCALING.len() {
            let v = x[(2 * k + j) % n];
            a += DB4_SCALING[j] * v;
            d += g[j] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// Multi-level decomposition of one signal. Returns details `D1..D{levels}`
/// followed by the final approximation.
pub fn wavedec(x: &[f64], levels: usize) -> Result<Vec<Vec<f64>>> {
    let div = 1usize << levels;
    if levels == 0 || x.len() % div != 0 || x.len() < div {
        return Err(Error::NotDyadic { len: x.len(), levels });
    }
    let mut out = Vec::with_capacity(levels + 1);
    let mut current = x.to_vec();
    for _ in 0..levels {
        let (a, d) = dwt_step(&current);
        out.push(d);
        current = a;
    }
    out.push(current);
    Ok(out)
}

/// Sum of squared coefficients per level, `[D1, .., D{levels}, A{levels}]`,
/// for every channel.
pub fn dwt_energies(w: &EegWindow, levels: usize) -> Result<Vec<Vec<f64>>> {
    w.rows()
        .map(|row| {
            Ok(wavedec(row, levels)?
                .iter()
                .map(|c| c.iter().map(|v| v * v).sum())
                .collect())
        })
        .collect()
}
