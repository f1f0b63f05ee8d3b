//! Pipeline driver for the event-based eye-tracking toolkit: synthesize
//! recordings, encode representations, preview augmentations, train,
//! evaluate, and dump predictions — all steered by one TOML configuration
//! plus command-line overrides (flags win).
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 numeric failure (non-finite loss).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mambapupil_core::autograd::checkpoint::CheckpointError;
use mambapupil_core::autograd::Scalar;
use mambapupil_core::config::{
    load_config, load_recordings, load_sequences, ConfigError, DataConfig, Precision, RunConfig,
    SynthPreset,
};
use mambapupil_core::data::{
    augmented_segment, batch_inputs, plain_segment, split_train_val, Representation, SegmentData,
};
use mambapupil_core::events::{load_events, save_events, save_labels, window_stream, DataError, EventStream};
use mambapupil_core::model::Model;
use mambapupil_core::rep::{save_brep, BrepError, Grid3};
use mambapupil_core::synth::generate_dataset;
use mambapupil_core::train::{
    self, compute_metrics, make_segments, metrics_csv, predictions_csv, EvalRow, TrainError,
};

/// Environment variable naming the default configuration file.
const CONFIG_ENV: &str = "MAMBAPUPIL_CONFIG";

#[derive(Parser)]
#[command(
    name = "mambapupil",
    version,
    about = "Event-based eye tracking: synthesize data, encode, train, evaluate, predict"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; falls back to $MAMBAPUPIL_CONFIG, then to
    /// built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override (applies to synthesis and training).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training epoch count override.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Model variant override: full | uni_gru | no_ssm | uni_gru_no_ssm.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Numeric precision override: f32 | f64.
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Directory artifacts are written into.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic event recordings with ground-truth labels
    /// (seqNNN_events.csv / seqNNN_labels.csv pairs).
    Synth {
        /// Trajectory preset override:
        /// mixed | fixation | pursuit | saccade | blink | random.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Window and encode the configured recordings into representation
    /// dumps (<stem>_wNNNNN.brep).
    Encode {
        /// Cap on the number of windows dumped per recording.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Sample one augmentation plan, apply it to a segment of the first
    /// configured recording, and dump before/after grids.
    AugmentPreview {
        /// Segment start window.
        #[arg(long, default_value_t = 0)]
        start: usize,
    },
    /// Train a model on the configured recordings; writes metrics.csv and
    /// the best-validation checkpoint.
    Train,
    /// Evaluate a checkpoint on the configured recordings; writes
    /// metrics.json and predictions.csv. Idempotent on identical inputs.
    Eval {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run a checkpoint over event files (labels not required); writes
    /// predictions.csv. Windows past the last full segment are skipped.
    Predict {
        /// Checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// Process failure with its contractual exit code.
enum CliError {
    /// Bad invocation or configuration (exit 1).
    Usage(String),
    /// Missing or malformed data/artifact files (exit 2).
    Data(String),
    /// Training diverged to a non-finite loss (exit 3).
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BrepError> for CliError {
    fn from(e: BrepError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Invalid(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; everything
            // else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let out = &cli.common.out;
    match &cli.command {
        Command::Synth { preset } => cmd_synth(&cfg, out, preset.as_deref()),
        Command::Encode { limit } => cmd_encode(&cfg, out, *limit),
        Command::AugmentPreview { start } => cmd_augment_preview(&cfg, out, *start),
        Command::Train => match cfg.precision {
            Precision::F32 => cmd_train::<f32>(&cfg, out),
            Precision::F64 => cmd_train::<f64>(&cfg, out),
        },
        Command::Eval { checkpoint } => match cfg.precision {
            Precision::F32 => cmd_eval::<f32>(&cfg, checkpoint, out),
            Precision::F64 => cmd_eval::<f64>(&cfg, checkpoint, out),
        },
        Command::Predict { checkpoint } => match cfg.precision {
            Precision::F32 => cmd_predict::<f32>(&cfg, checkpoint, out),
            Precision::F64 => cmd_predict::<f64>(&cfg, checkpoint, out),
        },
    }
}

/// Loads the configuration (flag path, then $MAMBAPUPIL_CONFIG, then
/// defaults) and applies the command-line overrides on top.
fn resolve_config(common: &Common) -> Result<RunConfig, CliError> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => load_config(&p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(epochs) = common.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(v) = &common.variant {
        cfg.variant = v
            .parse()
            .map_err(|e: String| CliError::Usage(format!("--variant: {e}")))?;
    }
    if let Some(p) = &common.precision {
        cfg.precision = match p.as_str() {
            "f32" => Precision::F32,
            "f64" => Precision::F64,
            other => {
                return Err(CliError::Usage(format!(
                    "--precision must be f32 or f64, got {other}"
                )))
            }
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_preset(name: &str) -> Result<SynthPreset, CliError> {
    Ok(match name {
        "mixed" => SynthPreset::Mixed,
        "fixation" => SynthPreset::Fixation,
        "pursuit" => SynthPreset::Pursuit,
        "saccade" => SynthPreset::Saccade,
        "blink" => SynthPreset::Blink,
        "random" => SynthPreset::Random,
        other => {
            return Err(CliError::Usage(format!(
                "--preset must be one of mixed|fixation|pursuit|saccade|blink|random, got {other}"
            )))
        }
    })
}

fn cmd_synth(cfg: &RunConfig, out: &Path, preset: Option<&str>) -> Result<(), CliError> {
    let mut synth = cfg.synth.clone();
    if let Some(name) = preset {
        synth.preset = parse_preset(name)?;
        // An explicit trajectory list in the file would shadow the preset;
        // the flag override wins.
        synth.trajectories = None;
    }
    synth.validate().map_err(CliError::Usage)?;
    std::fs::create_dir_all(out)?;
    let trajectories = synth.trajectories();
    for i in 0..synth.count {
        let (stream, track) = generate_dataset(
            &trajectories,
            &synth.scene,
            synth.label_rate_hz,
            synth.seed + i as u64,
        );
        save_events(out.join(format!("seq{i:03}_events.csv")), &stream)?;
        save_labels(
            out.join(format!("seq{i:03}_labels.csv")),
            &track,
            synth.scene.resolution,
        )?;
    }
    println!(
        "wrote {} recording pair(s) to {}",
        synth.count,
        out.display()
    );
    Ok(())
}

fn cmd_encode(cfg: &RunConfig, out: &Path, limit: Option<usize>) -> Result<(), CliError> {
    let recordings = load_recordings(&cfg.data)?;
    std::fs::create_dir_all(out)?;
    let spec = &cfg.data.encode;
    let bits = match spec.rep {
        Representation::BinaRep { bits } => bits,
        // The dump container keeps a bits byte for the temporal-code case;
        // other representations store 0 there.
        _ => 0,
    };
    let mut total = 0usize;
    for (stem, stream, _track) in &recordings {
        let windows = window_stream(stream, spec.window_us, spec.hop_us);
        let n = limit.unwrap_or(windows.len()).min(windows.len());
        for (i, window) in windows[..n].iter().enumerate() {
            let grid = spec.encode(window);
            save_brep(out.join(format!("{stem}_w{i:05}.brep")), bits, &grid)?;
            total += 1;
        }
    }
    println!(
        "encoded {total} window(s) from {} recording(s) into {}",
        recordings.len(),
        out.display()
    );
    Ok(())
}

fn cmd_augment_preview(cfg: &RunConfig, out: &Path, start: usize) -> Result<(), CliError> {
    let seqs = load_sequences(&cfg.data)?;
    let seq = seqs
        .first()
        .ok_or_else(|| CliError::Data("no recordings configured".into()))?;
    let len = cfg.train.segments.seq_len.min(seq.len());
    if len == 0 {
        return Err(CliError::Data(
            "the first recording produced no windows".into(),
        ));
    }
    let start = start.min(seq.len() - len);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let (grid_h, grid_w) = seq.spec.grid;
    let plan = mambapupil_core::augment::sample_plan(
        &cfg.augment,
        grid_w,
        grid_h,
        seq.spec.window_us,
        &mut rng,
    );
    let before = plain_segment(seq, start, len);
    let after = augmented_segment(seq, start, len, &plan);

    std::fs::create_dir_all(out)?;
    let bits = match seq.spec.rep {
        Representation::BinaRep { bits } => bits,
        _ => 0,
    };
    for (i, (b, a)) in before.grids.iter().zip(&after.grids).enumerate() {
        save_brep(out.join(format!("preview_w{i:03}_before.brep")), bits, b)?;
        save_brep(out.join(format!("preview_w{i:03}_after.brep")), bits, a)?;
    }
    println!("plan: {plan:?}");
    println!(
        "wrote {} before/after grid pair(s) to {}",
        len,
        out.display()
    );
    Ok(())
}

fn cmd_train<S: Scalar>(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let seqs = load_sequences(&cfg.data)?;
    let (train_seqs, val_seqs) = split_train_val(seqs)?;
    std::fs::create_dir_all(out)?;
    let checkpoint = out.join("checkpoint.mpck");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let mut model = Model::<S>::new(&cfg.model, cfg.variant, &mut rng);
    println!(
        "training {} ({} parameters, {:?}) on {} train / {} validation sequence(s)",
        model.variant.name(),
        model.num_params(),
        cfg.precision,
        train_seqs.len(),
        val_seqs.len()
    );
    let report = train::train(
        &mut model,
        &train_seqs,
        &val_seqs,
        &cfg.train,
        &cfg.augment,
        Some(&checkpoint),
    )?;
    std::fs::write(out.join("metrics.csv"), metrics_csv(&report.history))?;

    let best = &report.best;
    println!(
        "finished {} epoch(s); best epoch {}: p5={:.4} p10={:.4} p15={:.4} p_error={:.3}px",
        report.history.len(),
        report.best_epoch,
        best.p5,
        best.p10,
        best.p15,
        best.p_error
    );
    println!("checkpoint: {}", checkpoint.display());
    println!("metrics:    {}", out.join("metrics.csv").display());
    Ok(())
}

/// The checkpoint's input contract must match what the data section will
/// feed it; a mismatch dies inside the conv stack otherwise.
fn check_model_input<S: Scalar>(cfg: &RunConfig, model: &Model<S>) -> Result<(), CliError> {
    let channels = cfg.data.encode.rep.channels();
    let grid = cfg.data.encode.grid;
    if channels != model.config.in_channels || grid != model.config.resolution {
        return Err(CliError::Data(format!(
            "checkpoint expects {}-channel {}x{} input but the data section encodes {}-channel {}x{}",
            model.config.in_channels,
            model.config.resolution.0,
            model.config.resolution.1,
            channels,
            grid.0,
            grid.1
        )));
    }
    Ok(())
}

fn cmd_eval<S: Scalar>(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let mut model = Model::<S>::load_checkpoint(checkpoint)?;
    check_model_input(cfg, &model)?;
    let seqs = load_sequences(&cfg.data)?;
    let rows = train::eval_rows(
        &mut model,
        &seqs,
        &cfg.train.segments,
        cfg.train.batch_size,
    )?;

    let (pred, label): (Vec<_>, Vec<_>) = rows
        .rows
        .iter()
        .filter(|r| !(cfg.train.skip_closed && r.closed))
        .map(|r| (r.pred, r.label))
        .unzip();
    if pred.is_empty() {
        return Err(CliError::Data(
            "no evaluation samples left after filtering closed eyes".into(),
        ));
    }
    let metrics = compute_metrics(&pred, &label, cfg.train.pixel_space);

    std::fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(&metrics)
        .expect("metrics always serialize")
        + "\n";
    std::fs::write(out.join("metrics.json"), json)?;
    std::fs::write(out.join("predictions.csv"), predictions_csv(&rows.rows))?;
    println!(
        "evaluated {} window(s): p5={:.4} p10={:.4} p15={:.4} p_error={:.3}px",
        metrics.n, metrics.p5, metrics.p10, metrics.p15, metrics.p_error
    );
    println!("metrics:     {}", out.join("metrics.json").display());
    println!("predictions: {}", out.join("predictions.csv").display());
    Ok(())
}

/// Event streams for prediction: labels are not required, so this scans
/// `dir` for `*_events.csv` (or takes the single `events` path) directly.
fn event_streams(cfg: &DataConfig) -> Result<Vec<(String, EventStream)>, CliError> {
    if let Some(dir) = &cfg.dir {
        let mut names: Vec<String> = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix("_events.csv") {
                names.push(stem.to_string());
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(CliError::Data(format!(
                "no *_events.csv recordings found in {}",
                dir.display()
            )));
        }
        names
            .into_iter()
            .map(|stem| {
                let stream = load_events(dir.join(format!("{stem}_events.csv")), cfg.resolution)?;
                Ok((stem, stream))
            })
            .collect()
    } else if let Some(events) = &cfg.events {
        let stream = load_events(events, cfg.resolution)?;
        let stem = events
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "recording".into());
        Ok(vec![(stem, stream)])
    } else {
        Err(CliError::Usage(
            "predict needs data.dir or data.events in the configuration".into(),
        ))
    }
}

fn cmd_predict<S: Scalar>(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let mut model = Model::<S>::load_checkpoint(checkpoint)?;
    check_model_input(cfg, &model)?;
    let streams = event_streams(&cfg.data)?;
    let spec = &cfg.data.encode;
    let seg = &cfg.train.segments;

    let mut all_rows: Vec<EvalRow> = Vec::new();
    for (_stem, stream) in &streams {
        let windows = window_stream(stream, spec.window_us, spec.hop_us);
        let grids: Vec<Grid3> = windows.iter().map(|w| spec.encode(w)).collect();
        let starts = make_segments(windows.len(), seg.seq_len, seg.eval_stride())?;
        for chunk in starts.chunks(cfg.train.batch_size.max(1)) {
            let segments: Vec<SegmentData> = chunk
                .iter()
                .map(|&s| SegmentData {
                    grids: grids[s..s + seg.seq_len].to_vec(),
                    labels: Vec::new(),
                })
                .collect();
            let refs: Vec<&SegmentData> = segments.iter().collect();
            let pred = model.predict(&batch_inputs::<S>(&refs));
            let data = pred.to_vec();
            for (b, &s) in chunk.iter().enumerate() {
                for t in 0..seg.seq_len {
                    let base = (b * seg.seq_len + t) * 2;
                    all_rows.push(EvalRow {
                        t: windows[s + t].t_end,
                        pred: (data[base].to_f64(), data[base + 1].to_f64()),
                        label: (0.0, 0.0),
                        closed: false,
                    });
                }
            }
        }
    }

    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("predictions.csv"), predictions_csv(&all_rows))?;
    println!(
        "predicted {} window(s) from {} recording(s)",
        all_rows.len(),
        streams.len()
    );
    println!("predictions: {}", out.join("predictions.csv").display());
    Ok(())
}
