use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psyframe::pipeline::{
    load_model, replay_session, run_eval, run_session, run_synth, run_train, serve, PipelineConfig,
};
use psyframe::synth::ClassLabel;

#[derive(Parser)]
#[command(name = "psyframe", version, about = "EEG imagery decoding to simulated robot moves")]
struct Cli {
    /// TOML config file; unspecified keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the effective config and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset.
    Synth {
        /// Dataset file to write.
        #[arg(long)]
        out: PathBuf,
        /// Overrides train.n_per_class.
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Overrides train.data_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and write weights plus a report.
    Train {
        /// Dataset file; defaults to the configured synthetic dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides train.epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Weights file; overrides model_path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of the saved model.
    Eval {
        /// Dataset file; defaults to the validation split of the configured dataset.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Weights file; overrides model_path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Headless decode loop; prints one JSON tick per line.
    Run {
        /// Overrides hops.
        #[arg(long)]
        hops: Option<u64>,
        /// Write a session log for `replay`.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Hold `class` for `hops` hops from `start`, as START:HOPS:CLASS.
        #[arg(long, value_parser = parse_schedule)]
        schedule: Vec<(u64, u64, u8)>,
        /// Weights file; overrides model_path.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Print only a summary line.
        #[arg(long)]
        quiet: bool,
    },
    /// Re-run a session log and check every tick is bit-identical.
    Replay {
        /// Session log written by `run --log` or `serve --log`.
        log: PathBuf,
    },
    /// Line-delimited JSON control and telemetry service.
    Serve {
        /// TCP port on 127.0.0.1; 0 picks a free one. Overrides service_port.
        #[arg(long)]
        port: Option<u16>,
        /// Wall-clock time between hops. Overrides serve.pace_ms.
        #[arg(long)]
        pace_ms: Option<u64>,
        /// Write a session log of applied controls and ticks.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Weights file; overrides model_path.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn parse_schedule(s: &str) -> Result<(u64, u64, u8), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err("expected START:HOPS:CLASS".into());
    };
    let n = |x: &str| x.parse::<u64>().map_err(|e| e.to_string());
    let class = c.parse::<u8>().map_err(|e| e.to_string())?;
    ClassLabel::new(class).map_err(|e| e.to_string())?;
    Ok((n(a)?, n(b)?, class))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> psyframe::Result<ExitCode> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    apply_overrides(&mut cfg, cli.command.as_ref())?;
    cfg.validate()?;
    if cli.show_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(command) = cli.command else {
        eprintln!("no command given; see --help");
        return Ok(ExitCode::FAILURE);
    };

    match command {
        Command::Synth { out, .. } => {
            let d = run_synth(&cfg, &out)?;
            println!("wrote {} windows to {} (sha256 {})", d.len(), out.display(), d.content_hash());
        }
        Command::Train { data, .. } => {
            let r = run_train(&cfg, data.as_deref())?;
            for e in &r.epochs {
                eprintln!(
                    "epoch {:>3}  train_loss {:.4}  val_loss {:.4}  val_acc {:.3}",
                    e.epoch, e.train_loss, e.val_loss, e.val_accuracy
                );
            }
            println!(
                "val accuracy {:.3} (untrained {:.3}); weights {}; report {}",
                r.final_val_accuracy,
                r.initial_val_accuracy,
                cfg.model_path.display(),
                cfg.train.report_path.display()
            );
        }
        Command::Eval { data, .. } => {
            let e = run_eval(&cfg, data.as_deref())?;
            println!("{}", serde_json::to_string(&e)?);
        }
        Command::Run { log, quiet, .. } => {
            let model = load_model(&cfg.model_path)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            let mut triggers = 0;
            // A closed stdout (e.g. piped into head) stops printing but not the run.
            let mut printing = !quiet;
            let n = run_session(&cfg, &model, log.as_deref(), |r| {
                triggers += usize::from(r.triggered.is_some());
                if printing {
                    let line = serde_json::to_string(r)? + "\n";
                    match out.write_all(line.as_bytes()) {
                        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => printing = false,
                        other => other?,
                    }
                }
                Ok(())
            })?;
            eprintln!("{n} hops, {triggers} triggers");
        }
        Command::Replay { log } => {
            let s = replay_session(&log)?;
            println!("{}", serde_json::to_string(&s)?);
            if !s.identical() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Serve { .. } => {
            let model = load_model(&cfg.model_path)?;
            let h = serve(cfg.clone(), model, cfg.service_port)?;
            eprintln!("listening on {}", h.addr);
            h.wait();
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn apply_overrides(cfg: &mut PipelineConfig, cmd: Option<&Command>) -> psyframe::Result<()> {
    match cmd {
        Some(Command::Synth { n_per_class, seed, .. }) => {
            if let Some(n) = n_per_class {
                cfg.train.n_per_class = *n;
            }
            if let Some(s) = seed {
                cfg.train.data_seed = *s;
            }
        }
        Some(Command::Train { epochs, model, .. }) => {
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
            if let Some(m) = model {
                cfg.model_path = m.clone();
            }
        }
        Some(Command::Eval { model, .. }) => {
            if let Some(m) = model {
                cfg.model_path = m.clone();
            }
        }
        Some(Command::Run { hops, schedule, model, .. }) => {
            if let Some(h) = hops {
                cfg.hops = *h;
            }
            for &(start, hops, class) in schedule {
                cfg.schedule.push(psyframe::pipeline::ScheduleEntry {
                    start,
                    hops,
                    class: ClassLabel::new(class)?,
                });
            }
            if let Some(m) = model {
                cfg.model_path = m.clone();
            }
        }
        Some(Command::Serve { port, pace_ms, log, model }) => {
            if let Some(p) = port {
                cfg.service_port = *p;
            }
            if let Some(p) = pace_ms {
                cfg.serve.pace_ms = *p;
            }
            if log.is_some() {
                cfg.serve.log_path = log.clone();
            }
            if let Some(m) = model {
                cfg.model_path = m.clone();
            }
        }
        Some(Command::Replay { .. }) | None => {}
    }
    Ok(())
}
