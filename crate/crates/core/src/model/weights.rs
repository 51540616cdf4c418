use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::features::{FEATURES_PER_CHANNEL, FEATURE_DIM, LAYOUT_ID};
use crate::signal::N_CHANNELS;

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    /// Channel tokens plus the summary token.
    pub n_tokens: usize,
    pub token_dim: usize,
    pub d_ff: usize,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            n_heads: 2,
            n_layers: 2,
            n_tokens: N_CHANNELS + 1,
            token_dim: FEATURES_PER_CHANNEL,
            d_ff: 128,
            n_classes: 5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.n_classes != 5 {
            return bad(format!("n_classes must be 5, got {}", self.n_classes));
        }
        if self.n_tokens != N_CHANNELS + 1 || self.token_dim != FEATURES_PER_CHANNEL {
            return bad("token layout must be 14 channel tokens of 13 features plus a summary token".into());
        }
        if self.n_layers == 0 || self.d_ff == 0 {
            return bad("n_layers and d_ff must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Fixed per-slot affine map applied to log-compressed features before the
/// token projection. Fitted on training data, never trained by gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputNorm {
    pub fn identity() -> Self {
        Self { shift: vec![0.0; FEATURE_DIM], scale: vec![1.0; FEATURE_DIM] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub ln1_gain: Tensor,
    pub ln1_bias: Tensor,
    pub wq: Tensor,
    pub bq: Tensor,
    pub wk: Tensor,
    pub bk: Tensor,
    pub wv: Tensor,
    pub bv: Tensor,
    pub wo: Tensor,
    pub bo: Tensor,
    pub ln2_gain: Tensor,
    pub ln2_bias: Tensor,
    pub ff1_w: Tensor,
    pub ff1_b: Tensor,
    pub ff2_w: Tensor,
    pub ff2_b: Tensor,
}

/// All trainable arrays plus the frozen input normalization.
///
/// The same type doubles as the gradient container; `norm` is ignored there.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub cfg: ModelConfig,
    /// Initialization seed, carried into the weights file manifest.
    pub seed: u64,
    pub norm: InputNorm,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
    /// Learned per-channel token bias; makes attention position-aware.
    pub channel_emb: Tensor,
    pub summary_token: Tensor,
    pub layers: Vec<Layer>,
    pub lnf_gain: Tensor,
    pub lnf_bias: Tensor,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

pub type Gradients = Weights;

impl Layer {
    fn fields(&self) -> [(&'static str, &Tensor); 16] {
        [
            ("ln1_gain", &self.ln1_gain),
            ("ln1_bias", &self.ln1_bias),
            ("wq", &self.wq),
            ("bq", &self.bq),
            ("wk", &self.wk),
            ("bk", &self.bk),
            ("wv", &self.wv),
            ("bv", &self.bv),
            ("wo", &self.wo),
            ("bo", &self.bo),
            ("ln2_gain", &self.ln2_gain),
            ("ln2_bias", &self.ln2_bias),
            ("ff1_w", &self.ff1_w),
            ("ff1_b", &self.ff1_b),
            ("ff2_w", &self.ff2_w),
            ("ff2_b", &self.ff2_b),
        ]
    }

    fn fields_mut(&mut self) -> [(&'static str, &mut Tensor); 16] {
        [
            ("ln1_gain", &mut self.ln1_gain),
            ("ln1_bias", &mut self.ln1_bias),
            ("wq", &mut self.wq),
            ("bq", &mut self.bq),
            ("wk", &mut self.wk),
            ("bk", &mut self.bk),
            ("wv", &mut self.wv),
            ("bv", &mut self.bv),
            ("wo", &mut self.wo),
            ("bo", &mut self.bo),
            ("ln2_gain", &mut self.ln2_gain),
            ("ln2_bias", &mut self.ln2_bias),
            ("ff1_w", &mut self.ff1_w),
            ("ff1_b", &mut self.ff1_b),
            ("ff2_w", &mut self.ff2_w),
            ("ff2_b", &mut self.ff2_b),
        ]
    }
}

impl Weights {
    /// Every array zero, layer-norm gains included.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, ff, t) = (cfg.d_model, cfg.d_ff, cfg.token_dim);
        let layer = || Layer {
            ln1_gain: Tensor::zeros(&[d]),
            ln1_bias: Tensor::zeros(&[d]),
            wq: Tensor::zeros(&[d, d]),
            bq: Tensor::zeros(&[d]),
            wk: Tensor::zeros(&[d, d]),
            bk: Tensor::zeros(&[d]),
            wv: Tensor::zeros(&[d, d]),
            bv: Tensor::zeros(&[d]),
            wo: Tensor::zeros(&[d, d]),
            bo: Tensor::zeros(&[d]),
            ln2_gain: Tensor::zeros(&[d]),
            ln2_bias: Tensor::zeros(&[d]),
            ff1_w: Tensor::zeros(&[d, ff]),
            ff1_b: Tensor::zeros(&[ff]),
            ff2_w: Tensor::zeros(&[ff, d]),
            ff2_b: Tensor::zeros(&[d]),
        };
        Self {
            cfg: cfg.clone(),
            seed: 0,
            norm: InputNorm::identity(),
            proj_w: Tensor::zeros(&[t, d]),
            proj_b: Tensor::zeros(&[d]),
            channel_emb: Tensor::zeros(&[N_CHANNELS, d]),
            summary_token: Tensor::zeros(&[1, d]),
            layers: (0..cfg.n_layers).map(|_| layer()).collect(),
            lnf_gain: Tensor::zeros(&[d]),
            lnf_bias: Tensor::zeros(&[d]),
            head_w: Tensor::zeros(&[d, cfg.n_classes]),
            head_b: Tensor::zeros(&[cfg.n_classes]),
        }
    }

    /// Trainable arrays in a fixed order with stable names.
    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("proj_w".into(), &self.proj_w),
            ("proj_b".into(), &self.proj_b),
            ("channel_emb".into(), &self.channel_emb),
            ("summary_token".into(), &self.summary_token),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in l.fields() {
                out.push((format!("layers.{i}.{n}"), t));
            }
        }
        out.extend([
            ("lnf_gain".into(), &self.lnf_gain),
            ("lnf_bias".into(), &self.lnf_bias),
            ("head_w".into(), &self.head_w),
            ("head_b".into(), &self.head_b),
        ]);
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("proj_w".into(), &mut self.proj_w),
            ("proj_b".into(), &mut self.proj_b),
            ("channel_emb".into(), &mut self.channel_emb),
            ("summary_token".into(), &mut self.summary_token),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            for (n, t) in l.fields_mut() {
                out.push((format!("layers.{i}.{n}"), t));
            }
        }
        out.push(("lnf_gain".into(), &mut self.lnf_gain));
        out.push(("lnf_bias".into(), &mut self.lnf_bias));
        out.push(("head_w".into(), &mut self.head_w));
        out.push(("head_b".into(), &mut self.head_b));
        out
    }

    pub fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
            && self.norm.shift.iter().chain(&self.norm.scale).all(|v| v.is_finite())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.cfg)
    }

    /// Euclidean norm over every trainable array.
    pub fn global_norm(&self) -> f64 {
        self.named()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}


/// Glorot-uniform matrices, zero biases, unit layer-norm gains.
pub fn init_weights(cfg: &ModelConfig, seed: u64) -> Result<Weights> {
    cfg.validate()?;
    let mut w = Weights::zeros(cfg);
    w.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in w.named_mut() {
        if name.ends_with("gain") {
            t.data.fill(1.0);
        } else if t.shape.len() == 2 {
            let bound = glorot_bound(&t.shape);
            for v in t.data.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
    }
    Ok(w)
}

pub fn glorot_bound(shape: &[usize]) -> f64 {
    (6.0 / (shape[0] + shape[1]) as f64).sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename = "manifest")]
struct WeightsManifest {
    format_version: u32,
    layout_id: String,
    seed: u64,
    config: ModelConfig,
    n_params: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename = "array")]
struct ArrayRecord {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    data: String,
}

fn encode_f64(data: &[f64]) -> String {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

fn decode_f64(s: &str) -> Result<Vec<f64>> {
    let bytes = B64.decode(s).map_err(|e| Error::Format(format!("base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format("array byte length not a multiple of 8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// JSON lines: a manifest, then one record per array with little-endian
/// `f64` bytes in base64. The input normalization is stored as
/// `norm.shift` and `norm.scale`.
pub fn write_weights<W: Write>(w: &Weights, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let manifest = WeightsManifest {
        format_version: WEIGHTS_FORMAT_VERSION,
        layout_id: LAYOUT_ID.into(),
        seed: w.seed,
        config: w.cfg.clone(),
        n_params: w.n_params(),
    };
    serde_json::to_writer(&mut out, &manifest)?;
    out.write_all(b"\n")?;
    let norm = [
        ("norm.shift".to_string(), vec![FEATURE_DIM], &w.norm.shift),
        ("norm.scale".to_string(), vec![FEATURE_DIM], &w.norm.scale),
    ];
    let arrays = norm
        .into_iter()
        .chain(w.named().into_iter().map(|(n, t)| (n, t.shape.clone(), &t.data)));
    for (name, shape, data) in arrays {
        let rec = ArrayRecord { name, shape, dtype: "f64le".into(), data: encode_f64(data) };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_weights<R: Read>(input: R) -> Result<Weights> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty weights file".into()))??;
    let manifest: WeightsManifest = serde_json::from_str(&header)?;
    if manifest.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported weights version {}",
            manifest.format_version
        )));
    }
    if manifest.layout_id != LAYOUT_ID {
        return Err(Error::LayoutMismatch { expected: LAYOUT_ID.into(), found: manifest.layout_id });
    }
    manifest.config.validate()?;
    let mut w = Weights::zeros(&manifest.config);
    w.seed = manifest.seed;
    let mut seen = std::collections::HashSet::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArrayRecord = serde_json::from_str(&line)?;
        if rec.dtype != "f64le" {
            return Err(Error::Format(format!("unsupported dtype {}", rec.dtype)));
        }
        let data = decode_f64(&rec.data)?;
        let target: &mut Vec<f64> = match rec.name.as_str() {
            "norm.shift" => &mut w.norm.shift,
            "norm.scale" => &mut w.norm.scale,
            name => {
                let t = w
                    .named_mut()
                    .into_iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, t)| t)
                    .ok_or_else(|| Error::Format(format!("unknown array {name}")))?;
                if t.shape != rec.shape {
                    return Err(Error::Shape {
                        name: rec.name.clone(),
                        expected: t.shape.clone(),
                        found: rec.shape.clone(),
                    });
                }
                &mut t.data
            }
        };
        if data.len() != target.len() || rec.shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape {
                name: rec.name.clone(),
                expected: vec![target.len()],
                found: vec![data.len()],
            });
        }
        *target = data;
        seen.insert(rec.name);
    }
    let expected = w.named().len() + 2;
    if seen.len() != expected {
        return Err(Error::Format(format!("expected {expected} arrays, found {}", seen.len())));
    }
    if !w.is_finite() {
        return Err(Error::Format("weights contain non-finite values".into()));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = ModelConfig::default();
        let a = init_weights(&cfg, 3).unwrap();
        assert_eq!(a, init_weights(&cfg, 3).unwrap());
        assert_ne!(a, init_weights(&cfg, 4).unwrap());
        assert!(a.is_finite());
        for (name, t) in a.named() {
            if name.ends_with("gain") {
                assert!(t.data.iter().all(|v| *v == 1.0), "{name}");
            } else if t.shape.len() == 2 {
                let b = glorot_bound(&t.shape);
                assert!(t.data.iter().all(|v| v.abs() <= b), "{name}");
                assert!(t.data.iter().any(|v| *v != 0.0), "{name}");
            } else {
                assert!(t.data.iter().all(|v| *v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn parameter_count() {
        let w = init_weights(&ModelConfig::default(), 0).unwrap();
        // proj 13*32+32, channel_emb 14*32, summary 32,
        // per layer 2*64 + 4*(32*32+32) + 32*128+128 + 128*32+32, final ln 64, head 32*5+5
        let layer = 2 * 64 + 4 * (32 * 32 + 32) + 32 * 128 + 128 + 128 * 32 + 32;
        assert_eq!(w.n_params(), 448 + 448 + 32 + 2 * layer + 64 + 165);
    }

    #[test]
    fn bad_configs() {
        let cfg = ModelConfig { n_heads: 3, ..ModelConfig::default() };
        assert!(init_weights(&cfg, 0).is_err());
        let cfg = ModelConfig { n_classes: 4, ..ModelConfig::default() };
        assert!(init_weights(&cfg, 0).is_err());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let mut w = init_weights(&ModelConfig::default(), 8).unwrap();
        w.norm.shift[3] = -1.0 / 3.0;
        w.norm.scale[7] = std::f64::consts::PI;
        let mut buf = Vec::new();
        write_weights(&w, &mut buf).unwrap();
        let back = read_weights(buf.as_slice()).unwrap();
        assert_eq!(back, w);

        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replacen(LAYOUT_ID, "psyframe-feat-v0", 1);
        assert!(matches!(read_weights(tampered.as_bytes()), Err(Error::LayoutMismatch { .. })));
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(read_weights(truncated.as_bytes()).is_err());
    }
}
