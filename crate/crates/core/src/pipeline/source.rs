use std::fs::File;

use crate::error::{Error, Result};
use crate::signal::EegWindow;
use crate::synth::{mix_seed, read_dataset, signature, synth_window_with, ClassLabel};

use super::config::SourceConfig;

const HOP_STREAM: u64 = 0x51;

/// Decode-window provider. Synthetic sources draw a fresh window per hop,
/// keyed by `(seed, tick)`, so any hop can be regenerated independently.
#[derive(Debug, Clone)]
pub enum Source {
    Synth { seed: u64 },
    Replay { windows: Vec<(EegWindow, ClassLabel)>, pos: usize },
}

impl Source {
    pub fn open(cfg: &SourceConfig, n_samples: usize) -> Result<Self> {
        match cfg {
            SourceConfig::Synth { seed } => Ok(Source::Synth { seed: *seed }),
            SourceConfig::Replay { path } => {
                let d = read_dataset(File::open(path)?)?;
                if let Some(w) = d.windows.iter().find(|w| w.n_samples() != n_samples) {
                    return Err(Error::Format(format!(
                        "replay windows have {} samples, pipeline expects {n_samples}",
                        w.n_samples()
                    )));
                }
                Ok(Source::Replay { windows: d.windows.into_iter().zip(d.labels).collect(), pos: 0 })
            }
        }
    }

    /// Window for hop `tick`, with the class it was drawn from. `None` once a
    /// replay source is exhausted.
    pub fn next(
        &mut self,
        tick: u64,
        class: Option<ClassLabel>,
        n_samples: usize,
    ) -> Option<(EegWindow, Option<ClassLabel>)> {
        match self {
            Source::Synth { seed } => {
                let sig = class.map(signature);
                let w = synth_window_with(
                    sig.as_ref(),
                    mix_seed(*seed, HOP_STREAM, tick),
                    n_samples,
                    tick,
                );
                Some((w, class))
            }
            Source::Replay { windows, pos } => {
                let (w, l) = windows.get(*pos)?.clone();
                *pos += 1;
                Some((w, Some(l)))
            }
        }
    }
}
