//! Segment construction, the segment-RMSE loss, tracking metrics, and the
//! training/evaluation loops.

use std::path::Path;

use mambapupil_autograd::checkpoint::CheckpointError;
use mambapupil_autograd::ops;
use mambapupil_autograd::optim::{Adam, WarmRestartSchedule};
use mambapupil_autograd::{backward, Scalar, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::{
    batch_inputs, batch_labels, mix_seed, plain_segment, train_segment, SegmentData, Sequence,
};
use crate::events::DataError;
use crate::model::Model;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sequence has {n_windows} windows, shorter than one {seq_len}-window segment")]
    TooShort { n_windows: usize, seq_len: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: training diverged")]
    NonFinite { epoch: usize, batch: usize },
    #[error("{0}")]
    Invalid(String),
}

/// How sequences are cut into fixed-length training/evaluation samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentSpec {
    pub seq_len: usize,
    pub train_stride: usize,
    /// Defaults to `seq_len` (non-overlapping tiling) when absent.
    pub eval_stride: Option<usize>,
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self {
            seq_len: 45,
            train_stride: 5,
            eval_stride: None,
        }
    }
}

impl SegmentSpec {
    pub fn eval_stride(&self) -> usize {
        self.eval_stride.unwrap_or(self.seq_len)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.seq_len == 0 {
            return Err("train.seq_len must be positive".into());
        }
        if !(1..=self.seq_len).contains(&self.train_stride) {
            return Err(format!(
                "train.train_stride must lie in 1..={}, got {}",
                self.seq_len, self.train_stride
            ));
        }
        if let Some(s) = self.eval_stride {
            if !(1..=self.seq_len).contains(&s) {
                return Err(format!(
                    "train.eval_stride must lie in 1..={}, got {s}",
                    self.seq_len
                ));
            }
        }
        Ok(())
    }
}

/// Segment start indices 0, stride, 2*stride, ... while start + len fits.
pub fn make_segments(
    n_windows: usize,
    seq_len: usize,
    stride: usize,
) -> Result<Vec<usize>, TrainError> {
    assert!(seq_len > 0 && stride > 0, "segment length and stride must be positive");
    if n_windows < seq_len {
        return Err(TrainError::TooShort { n_windows, seq_len });
    }
    Ok((0..=n_windows - seq_len).step_by(stride).collect())
}

/// Per-segment RMS over every coordinate of every timestep, averaged over
/// the batch: mean_b sqrt( (1/(2L)) * sum_{t,axis} (pred - label)^2 ).
pub fn segment_loss<S: Scalar>(pred: &Tensor<S>, label: &Tensor<S>) -> Tensor<S> {
    assert_eq!(pred.shape(), label.shape(), "loss: prediction/label shapes differ");
    let diff = ops::sub(pred, label);
    let sq = ops::mul(&diff, &diff);
    let per_segment = ops::mean_trailing(&sq);
    ops::mean_all(&ops::sqrt(&per_segment))
}

/// Euclidean tracking accuracy in pixel space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    /// Fraction of samples within 5 / 10 / 15 pixels (inclusive).
    pub p5: f64,
    pub p10: f64,
    pub p15: f64,
    /// Mean pixel distance.
    pub p_error: f64,
    /// Number of samples measured.
    pub n: usize,
}

/// Distances are measured in `pixel_space` = (W, H) units after
/// de-normalizing; predictions clamp to [0,1] first, labels are trusted.
pub fn compute_metrics(
    pred: &[(f64, f64)],
    label: &[(f64, f64)],
    pixel_space: (u32, u32),
) -> TrackingMetrics {
    assert_eq!(pred.len(), label.len(), "metrics: prediction/label counts differ");
    assert!(!pred.is_empty(), "metrics need at least one sample");
    let (w, h) = (f64::from(pixel_space.0), f64::from(pixel_space.1));
    let mut within = [0usize; 3];
    let mut total = 0.0;
    for (&(px, py), &(lx, ly)) in pred.iter().zip(label) {
        let dx = (px.clamp(0.0, 1.0) - lx) * w;
        let dy = (py.clamp(0.0, 1.0) - ly) * h;
        let d = dx.hypot(dy);
        for (slot, thresh) in within.iter_mut().zip([5.0, 10.0, 15.0]) {
            if d <= thresh {
                *slot += 1;
            }
        }
        total += d;
    }
    let n = pred.len();
    TrackingMetrics {
        p5: within[0] as f64 / n as f64,
        p10: within[1] as f64 / n as f64,
        p15: within[2] as f64 / n as f64,
        p_error: total / n as f64,
        n,
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(from = "TrainSettingsToml")]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(flatten)]
    pub segments: SegmentSpec,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Warm-restart schedule: first cycle length in epochs and the factor
    /// each later cycle is stretched by.
    pub lr_cycle: u64,
    pub lr_cycle_mult: u64,
    pub seed: u64,
    /// Exclude eye-closed samples from metrics (never from the loss).
    pub skip_closed: bool,
    /// Metric pixel space (W, H).
    pub pixel_space: (u32, u32),
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 32,
            segments: SegmentSpec::default(),
            lr_max: 1e-3,
            lr_min: 1e-5,
            lr_cycle: 50,
            lr_cycle_mult: 2,
            seed: 0,
            skip_closed: false,
            pixel_space: (80, 60),
        }
    }
}

/// Flat deserialization mirror of [`TrainSettings`]. The segment keys are
/// flattened into the `[train]` table on serialization, and serde cannot
/// enforce `deny_unknown_fields` across a `flatten` boundary — so strict
/// parsing lists every key here and rebuilds the nested form in `From`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrainSettingsToml {
    epochs: usize,
    batch_size: usize,
    seq_len: usize,
    train_stride: usize,
    eval_stride: Option<usize>,
    lr_max: f64,
    lr_min: f64,
    lr_cycle: u64,
    lr_cycle_mult: u64,
    seed: u64,
    skip_closed: bool,
    pixel_space: (u32, u32),
}

impl Default for TrainSettingsToml {
    fn default() -> Self {
        let t = TrainSettings::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            seq_len: t.segments.seq_len,
            train_stride: t.segments.train_stride,
            eval_stride: t.segments.eval_stride,
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            lr_cycle: t.lr_cycle,
            lr_cycle_mult: t.lr_cycle_mult,
            seed: t.seed,
            skip_closed: t.skip_closed,
            pixel_space: t.pixel_space,
        }
    }
}

impl From<TrainSettingsToml> for TrainSettings {
    fn from(t: TrainSettingsToml) -> Self {
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            segments: SegmentSpec {
                seq_len: t.seq_len,
                train_stride: t.train_stride,
                eval_stride: t.eval_stride,
            },
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            lr_cycle: t.lr_cycle,
            lr_cycle_mult: t.lr_cycle_mult,
            seed: t.seed,
            skip_closed: t.skip_closed,
            pixel_space: t.pixel_space,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<(), String> {
        if self.epochs == 0 {
            return Err("train.epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return Err("train.batch_size must be positive".into());
        }
        self.segments.validate()?;
        if !(self.lr_max > 0.0) || !(self.lr_min >= 0.0) || self.lr_min > self.lr_max {
            return Err(format!(
                "learning rates need 0 <= lr_min <= lr_max and lr_max > 0, got [{}, {}]",
                self.lr_min, self.lr_max
            ));
        }
        if self.lr_cycle == 0 || self.lr_cycle_mult == 0 {
            return Err("train.lr_cycle and train.lr_cycle_mult must be at least 1".into());
        }
        if self.pixel_space.0 == 0 || self.pixel_space.1 == 0 {
            return Err("train.pixel_space extents must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub p5: f64,
    pub p10: f64,
    pub p15: f64,
    pub p_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best: TrackingMetrics,
}

const SHUFFLE_SALT: u64 = 0x5348_5546;
const DROPOUT_SALT: u64 = 0x44524f50;

/// Runs the full training loop: shuffled augmented segment batches, Adam
/// under a cosine warm-restart schedule, per-epoch validation, and a
/// best-validation-p_error checkpoint (when a path is given). Fully
/// deterministic for a fixed seed when `S` = f64.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    train_seqs: &[Sequence],
    val_seqs: &[Sequence],
    settings: &TrainSettings,
    augment_cfg: &AugmentConfig,
    checkpoint_path: Option<&Path>,
) -> Result<TrainReport, TrainError> {
    settings.validate().map_err(TrainError::Invalid)?;
    augment_cfg.validate().map_err(TrainError::Invalid)?;
    if train_seqs.is_empty() || val_seqs.is_empty() {
        return Err(TrainError::Invalid(
            "training and validation each need at least one sequence".into(),
        ));
    }
    let seg = &settings.segments;
    let mut train_index: Vec<(usize, usize)> = Vec::new();
    for (i, s) in train_seqs.iter().enumerate() {
        for start in make_segments(s.len(), seg.seq_len, seg.train_stride)? {
            train_index.push((i, start));
        }
    }
    for s in val_seqs {
        make_segments(s.len(), seg.seq_len, seg.eval_stride())?;
    }

    let params = model.trainable();
    let mut adam = Adam::<S>::new();
    let schedule = WarmRestartSchedule::new(
        settings.lr_max,
        settings.lr_min,
        settings.lr_cycle,
        settings.lr_cycle_mult,
    );

    let mut history = Vec::with_capacity(settings.epochs);
    let mut best_epoch = 0usize;
    let mut best: Option<TrackingMetrics> = None;
    for epoch in 1..=settings.epochs {
        let lr = schedule.lr_at((epoch - 1) as u64);
        let mut order = train_index.clone();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(settings.seed, epoch as u64, SHUFFLE_SALT));
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(settings.seed, epoch as u64, DROPOUT_SALT));

        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (batch_idx, chunk) in order.chunks(settings.batch_size).enumerate() {
            let segments: Vec<SegmentData> = chunk
                .iter()
                .map(|&(i, start)| {
                    train_segment(&train_seqs[i], i, start, seg.seq_len, augment_cfg, epoch as u64)
                })
                .collect();
            let refs: Vec<&SegmentData> = segments.iter().collect();
            let inputs = batch_inputs::<S>(&refs);
            let (labels, _) = batch_labels::<S>(&refs);
            let pred = model.forward(&inputs, true, &mut dropout_rng);
            let loss = segment_loss(&pred, &labels);
            let loss_value = loss.item().to_f64();
            if !loss_value.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: batch_idx });
            }
            backward(&loss);
            adam.step(&params, lr);
            for p in &params {
                p.zero_grad();
            }
            loss_sum += loss_value * chunk.len() as f64;
            loss_count += chunk.len();
        }
        let train_loss = loss_sum / loss_count as f64;

        let (val_loss, metrics) = validate(model, val_seqs, settings)?;
        history.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            p5: metrics.p5,
            p10: metrics.p10,
            p15: metrics.p15,
            p_error: metrics.p_error,
        });
        if best.map_or(true, |b| metrics.p_error < b.p_error) {
            best = Some(metrics);
            best_epoch = epoch;
            if let Some(path) = checkpoint_path {
                model.save_checkpoint(path)?;
            }
        }
    }
    Ok(TrainReport {
        history,
        best_epoch,
        best: best.expect("at least one epoch ran"),
    })
}

/// Evaluation loss and metrics over non-overlapping segments of `seqs`.
pub fn validate<S: Scalar>(
    model: &mut Model<S>,
    seqs: &[Sequence],
    settings: &TrainSettings,
) -> Result<(f64, TrackingMetrics), TrainError> {
    let rows = eval_rows(model, seqs, &settings.segments, settings.batch_size)?;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for (loss, count) in &rows.segment_losses {
        loss_sum += loss * *count as f64;
        loss_count += count;
    }
    let (pred, label): (Vec<_>, Vec<_>) = rows
        .rows
        .iter()
        .filter(|r| !(settings.skip_closed && r.closed))
        .map(|r| (r.pred, r.label))
        .unzip();
    if pred.is_empty() {
        return Err(TrainError::Invalid(
            "no evaluation samples left after filtering closed eyes".into(),
        ));
    }
    let metrics = compute_metrics(&pred, &label, settings.pixel_space);
    Ok((loss_sum / loss_count as f64, metrics))
}

/// One evaluated window: timestamp, normalized prediction and label, closed
/// flag from the label track.
#[derive(Debug, Clone, Copy)]
pub struct EvalRow {
    pub t: i64,
    pub pred: (f64, f64),
    pub label: (f64, f64),
    pub closed: bool,
}

pub struct EvalRows {
    pub rows: Vec<EvalRow>,
    /// (mean batch loss, segment count) pairs for aggregate loss reporting.
    pub segment_losses: Vec<(f64, usize)>,
}

/// Runs the model in eval mode over non-overlapping segments of every
/// sequence, collecting per-window predictions in time order per sequence.
pub fn eval_rows<S: Scalar>(
    model: &mut Model<S>,
    seqs: &[Sequence],
    seg: &SegmentSpec,
    batch_size: usize,
) -> Result<EvalRows, TrainError> {
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for (i, s) in seqs.iter().enumerate() {
        for start in make_segments(s.len(), seg.seq_len, seg.eval_stride())? {
            jobs.push((i, start));
        }
    }
    let mut rows = Vec::new();
    let mut segment_losses = Vec::new();
    for chunk in jobs.chunks(batch_size.max(1)) {
        let segments: Vec<SegmentData> = chunk
            .iter()
            .map(|&(i, start)| plain_segment(&seqs[i], start, seg.seq_len))
            .collect();
        let refs: Vec<&SegmentData> = segments.iter().collect();
        let inputs = batch_inputs::<S>(&refs);
        let (labels, _) = batch_labels::<S>(&refs);
        let pred = model.predict(&inputs);
        let loss = segment_loss(&pred, &labels).item().to_f64();
        segment_losses.push((loss, chunk.len()));
        let data = pred.to_vec();
        for (b, &(i, start)) in chunk.iter().enumerate() {
            for t in 0..seg.seq_len {
                let base = (b * seg.seq_len + t) * 2;
                let window = &seqs[i].windows[start + t];
                let label = &seqs[i].labels[start + t];
                rows.push(EvalRow {
                    t: window.t_end,
                    pred: (data[base].to_f64(), data[base + 1].to_f64()),
                    label: (label.cx, label.cy),
                    closed: label.closed,
                });
            }
        }
    }
    Ok(EvalRows {
        rows,
        segment_losses,
    })
}

/// Serializes the per-epoch log as `epoch,train_loss,val_loss,p5,p10,p15,p_error`.
pub fn metrics_csv(history: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,p5,p10,p15,p_error\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.epoch, row.train_loss, row.val_loss, row.p5, row.p10, row.p15, row.p_error
        ));
    }
    out
}

/// Serializes predictions as `t,cx,cy` (normalized coordinates).
pub fn predictions_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("t,cx,cy\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.t, row.pred.0, row.pred.1));
    }
    out
}
