use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use pulsealign_cli::{
    run_pipeline, stage_annotate, stage_dejitter, stage_filter, synthesize, write_synth,
    Overrides, PipelineConfig, StageError, UsageError,
};
use pulsealign_core::ingest::{
    load_processed, load_stream, write_annotations, write_json, write_overlay, write_processed,
    write_stream,
};
use pulsealign_core::timebase::timegap_stats;
use pulsealign_core::{compare_methods, overlay_export, StreamKind};

#[derive(Parser)]
#[command(name = "pulsealign", version, about = "Align, de-jitter and label camera + sensor recordings")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON pipeline configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid extension before the first timestamp, ms
    #[arg(long, global = true)]
    delta_ms: Option<f64>,
    /// Timestep outlier threshold, standard deviations
    #[arg(long, global = true)]
    m: Option<f64>,
    #[arg(long, global = true)]
    sg_window: Option<usize>,
    #[arg(long, global = true)]
    sg_order: Option<usize>,
    #[arg(long, global = true)]
    band_low_hz: Option<f64>,
    #[arg(long, global = true)]
    band_high_hz: Option<f64>,
    /// Butterworth prototype order
    #[arg(long, global = true)]
    order: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print timegap mean and std (ms)
    Stats {
        input: PathBuf,
        #[arg(long, default_value = "frame")]
        kind: StreamKind,
    },
    /// De-jitter one stream
    Dejitter {
        input: PathBuf,
        #[arg(long, default_value = "frame")]
        kind: StreamKind,
        /// Corrected stream CSV
        #[arg(long)]
        out: PathBuf,
        /// De-jitter report JSON
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        /// Print dropped-sample times (absolute us), one per line
        #[arg(long)]
        report_drops: bool,
    },
    /// Table of raw / Kalman / de-jittered / theoretical timegap statistics
    Compare {
        input: PathBuf,
        #[arg(long, default_value = "frame")]
        kind: StreamKind,
        #[arg(long)]
        exclusions: Option<PathBuf>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Smooth and bandpass a de-jittered sensor stream
    Filter {
        /// De-jittered sensor CSV
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label de-jittered frames with processed sensor values
    Annotate {
        /// De-jittered frame CSV
        #[arg(long)]
        frames: PathBuf,
        /// Processed sensor CSV
        #[arg(long)]
        processed: PathBuf,
        /// Recorded frame CSV, for the frame_ts_us column
        #[arg(long)]
        raw_frames: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        overlay: Option<PathBuf>,
    },
    /// Generate a synthetic frame + sensor recording with ground truth
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long)]
        hr_bpm: Option<f64>,
    },
    /// Run every stage and write all artifacts
    Pipeline {
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        sensor: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            delta_ms: self.delta_ms,
            m: self.m,
            sg_window: self.sg_window,
            sg_order: self.sg_order,
            band_low_hz: self.band_low_hz,
            band_high_hz: self.band_high_hz,
            order: self.order,
        }
    }

    fn config(&self) -> Result<PipelineConfig, UsageError> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dejitter_cfg(cfg: &PipelineConfig, kind: StreamKind) -> &pulsealign_core::DejitterConfig {
    match kind {
        StreamKind::Frame => &cfg.frame_dejitter,
        StreamKind::Sensor => &cfg.sensor_dejitter,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.global.config()?;
    match cli.command {
        Command::Stats { input, kind } => {
            let s = load_stream(&input, kind)?;
            let g = timegap_stats(&s.timestamps)?;
            println!("gaps {}  mean {:.3} ms  std {:.3} ms", g.n, g.mean_ms(), g.std_ms());
        }
        Command::Dejitter {
            input,
            kind,
            out,
            report,
            exclusions,
            report_drops,
        } => {
            let raw = load_stream(&input, kind)?;
            let d = stage_dejitter(&raw, exclusions.as_deref(), dejitter_cfg(&cfg, kind), &cfg.kalman)?;
            write_stream(&out, &d.stream)?;
            if let Some(p) = report {
                write_json(p, &d.report)?;
            }
            if report_drops {
                for us in &d.report.drops {
                    println!("{us}");
                }
            }
            eprintln!(
                "T {:.6} ms  drops {}  gaps {:.3} +- {:.3} ms -> {:.3} +- {:.3} ms",
                d.report.t_s * 1e3,
                d.report.n_drops,
                d.report.gaps_before.mean_ms,
                d.report.gaps_before.std_ms,
                d.report.gaps_after.mean_ms,
                d.report.gaps_after.std_ms,
            );
        }
        Command::Compare {
            input,
            kind,
            exclusions,
            out,
            json,
        } => {
            let raw = load_stream(&input, kind)?;
            let s = match exclusions {
                Some(p) => {
                    pulsealign_core::ingest::apply_exclusions(
                        &raw,
                        &pulsealign_core::ingest::load_exclusions(p)?,
                    )?
                    .0
                }
                None => raw,
            };
            let c = compare_methods(&s.timestamps, dejitter_cfg(&cfg, kind), &cfg.kalman)?;
            match out {
                Some(p) => c.write_csv(p)?,
                None => print!("{}", c.to_csv()),
            }
            if let Some(p) = json {
                write_json(p, &pulsealign_cli::method_rows(&c))?;
            }
        }
        Command::Filter { input, out } => {
            let s = load_stream(&input, StreamKind::Sensor)?;
            let f = stage_filter(&s, cfg.sensor_dejitter.m, &cfg.savgol, &cfg.bandpass)
                .map_err(|e| StageError { stage: "filter", source: e })?;
            write_processed(&out, &f.signal, &f.raw, f.origin)?;
        }
        Command::Annotate {
            frames,
            processed,
            raw_frames,
            out,
            overlay,
        } => {
            let fr = load_stream(&frames, StreamKind::Frame)?;
            let raw = raw_frames
                .map(|p| load_stream(p, StreamKind::Frame))
                .transpose()?;
            let (signal, _, origin) = load_processed(&processed)?;
            let a = stage_annotate(&fr, raw.as_ref(), &signal, origin)?;
            if let Some(p) = overlay {
                write_overlay(p, &overlay_export(&a.frames, &signal), origin)?;
            }
            write_annotations(&out, &a.frames, origin)?;
            eprintln!("{} frames labeled, {} skipped", a.frames.len(), a.skipped_head);
        }
        Command::Synth {
            out_dir,
            duration_s,
            hr_bpm,
        } => {
            let mut sc = cfg.synth.clone();
            if let Some(d) = duration_s {
                sc.duration_s = d;
            }
            if let Some(h) = hr_bpm {
                sc.hr_bpm = h;
            }
            let out = synthesize(&sc)?;
            write_synth(&out, &out_dir)
                .with_context(|| format!("writing {}", out_dir.display()))?;
        }
        Command::Pipeline {
            frames,
            sensor,
            out_dir,
        } => {
            let mut cfg = cfg;
            cfg.frames = frames.or(cfg.frames);
            cfg.sensor = sensor.or(cfg.sensor);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            let s = run_pipeline(&cfg)?;
            let dir = cfg.out_dir.as_deref().unwrap_or(Path::new("."));
            eprintln!(
                "{} frames labeled ({} skipped), artifacts in {}",
                s.n_annotations,
                s.skipped_head,
                dir.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = e.downcast_ref::<UsageError>().is_some()
                || e
                    .downcast_ref::<StageError>()
                    .is_some_and(|s| s.source.downcast_ref::<UsageError>().is_some());
            eprintln!("error: {e:#}");
            if usage {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
