use thiserror::Error;

/// Errors produced anywhere in the decode/control stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band edges: lo={lo} Hz, hi={hi} Hz, fs={fs} Hz ({reason})")]
    InvalidBand {
        lo: f64,
        hi: f64,
        fs: f64,
        reason: &'static str,
    },
    #[error("invalid filter order {0}: must be in [2, 8]")]
    InvalidOrder(usize),
    #[error("unstable filter: pole magnitude {0} >= 1")]
    UnstableFilter(f64),
    #[error("non-finite sample at channel {channel}, index {index}")]
    NonFinite { channel: usize, index: usize },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("segment length {seg_len} exceeds window length {n_samples}")]
    SegmentTooLong { seg_len: usize, n_samples: usize },
    #[error("band [{lo}, {hi}) Hz selects no spectrum bins")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("window length {len} is not divisible by 2^{levels}")]
    NotDyadic { len: usize, levels: usize },
    #[error("layout mismatch: expected {expected:?}, found {found:?}")]
    LayoutMismatch { expected: String, found: String },
    #[error("cannot stratify: class {class} has {count} sample(s), need at least 2")]
    Stratify { class: u8, count: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
