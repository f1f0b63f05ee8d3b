//! Dataset assembly: windowed, encoded, label-aligned sequences; per-segment
//! training-time augmentation; and batch tensor packing for the network.

use mambapupil_autograd::{Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentConfig, AugmentPlan};
use crate::events::{
    align_labels, align_labels_clamped, window_stream, window_stream_from, DataError, EventStream,
    LabelSample, LabelTrack, Window,
};
use crate::rep::{encode_bina_rep, encode_frame, encode_voxel, Grid3};

/// Which dense representation feeds the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Representation {
    BinaRep { bits: u8 },
    Voxel { bins: usize },
    Frame,
}

impl Representation {
    pub fn channels(&self) -> usize {
        match self {
            Representation::BinaRep { .. } | Representation::Frame => 2,
            Representation::Voxel { bins } => *bins,
        }
    }
}

/// Windowing plus representation parameters shared by every pipeline stage.
///
/// Serialization inlines the representation tag (`kind` plus its payload)
/// next to the windowing keys. serde cannot combine strict unknown-field
/// checking with that flattening, so the strict TOML entry point lives in
/// the config module's mirror type rather than here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeSpec {
    pub window_us: i64,
    pub hop_us: i64,
    #[serde(flatten)]
    pub rep: Representation,
    /// Representation grid extent (height, width); the sensor resolution
    /// must be an integer multiple per axis.
    pub grid: (usize, usize),
}

impl Default for EncodeSpec {
    fn default() -> Self {
        Self {
            window_us: 50_000,
            hop_us: 50_000,
            rep: Representation::BinaRep { bits: 4 },
            grid: (60, 80),
        }
    }
}

impl EncodeSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.window_us <= 0 || self.hop_us <= 0 {
            return Err("data.window_us and data.hop_us must be positive".into());
        }
        match self.rep {
            Representation::BinaRep { bits } if !(1..=24).contains(&bits) => {
                return Err(format!("data.bits must lie in 1..=24, got {bits}"));
            }
            Representation::Voxel { bins } if bins == 0 => {
                return Err("data.bins must be positive".into());
            }
            _ => {}
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err("data.grid extents must be positive".into());
        }
        Ok(())
    }

    pub fn encode(&self, window: &Window) -> Grid3 {
        let (h, w) = self.grid;
        match self.rep {
            Representation::BinaRep { bits } => encode_bina_rep(window, bits, h, w).grid,
            Representation::Voxel { bins } => encode_voxel(window, bins, h, w),
            Representation::Frame => encode_frame(window, h, w),
        }
    }
}

/// One recording, windowed and encoded, with one label per window. The raw
/// stream and track are retained so the temporal-shift augmentation can
/// re-window and re-encode from scratch.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub stream: EventStream,
    pub track: LabelTrack,
    pub spec: EncodeSpec,
    pub windows: Vec<Window>,
    pub grids: Vec<Grid3>,
    pub labels: Vec<LabelSample>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Windows a stream, encodes every window, and aligns labels. Trailing
/// windows that outrun the label track are trimmed; a label gap anywhere
/// else is an error.
pub fn build_sequence(
    stream: EventStream,
    track: LabelTrack,
    spec: &EncodeSpec,
) -> Result<Sequence, DataError> {
    spec.validate().map_err(DataError::Invalid)?;
    // The nominal output label rate implied by the hop, when it is exact and
    // divides the track rate; alignment itself only needs nearest-sample.
    let out_rate = if spec.hop_us > 0
        && 1_000_000 % spec.hop_us == 0
        && track.rate_hz % ((1_000_000 / spec.hop_us) as u32) == 0
    {
        (1_000_000 / spec.hop_us) as u32
    } else {
        track.rate_hz
    };
    let mut windows = window_stream(&stream, spec.window_us, spec.hop_us);
    while !windows.is_empty() {
        match align_labels(&track, &windows, out_rate) {
            Ok(labels) => {
                let grids = windows.iter().map(|w| spec.encode(w)).collect();
                return Ok(Sequence {
                    stream,
                    track,
                    spec: *spec,
                    windows,
                    grids,
                    labels,
                });
            }
            Err(DataError::BeyondLabels { t_end, .. })
                if t_end == windows.last().unwrap().t_end =>
            {
                windows.pop();
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Sequence {
        stream,
        track,
        spec: *spec,
        windows: Vec::new(),
        grids: Vec::new(),
        labels: Vec::new(),
    })
}

/// Splitmix-style mixer deriving one independent RNG seed from (base seed,
/// epoch, segment identity) so augmentation draws are stable no matter how
/// segments are batched or ordered.
pub fn mix_seed(a: u64, b: u64, c: u64) -> u64 {
    let mut z = a ^ b.rotate_left(21) ^ c.rotate_left(42);
    for _ in 0..3 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// A length-`len` training sample: grids and labels, possibly augmented.
pub struct SegmentData {
    pub grids: Vec<Grid3>,
    pub labels: Vec<LabelSample>,
}

/// The un-augmented segment `[start, start+len)` of a sequence.
pub fn plain_segment(seq: &Sequence, start: usize, len: usize) -> SegmentData {
    assert!(start + len <= seq.len(), "segment exceeds the sequence");
    SegmentData {
        grids: seq.grids[start..start + len].to_vec(),
        labels: seq.labels[start..start + len].to_vec(),
    }
}

/// Applies one augmentation plan to a segment. A temporal shift re-windows
/// the raw events from the shifted origin (same window count) and re-aligns
/// labels with clamping at the track edges; the spatial transforms then act
/// on the resulting grids in a fixed order: flip, shift, cutout.
pub fn augmented_segment(
    seq: &Sequence,
    start: usize,
    len: usize,
    plan: &AugmentPlan,
) -> SegmentData {
    let (mut grids, mut labels) = match plan.tshift_us {
        Some(offset) => {
            let origin = start as i64 * seq.spec.hop_us + offset;
            let windows = window_stream_from(
                &seq.stream,
                origin,
                seq.spec.window_us,
                seq.spec.hop_us,
                Some(len),
            );
            let grids: Vec<Grid3> = windows.iter().map(|w| seq.spec.encode(w)).collect();
            let labels = align_labels_clamped(&seq.track, &windows);
            (grids, labels)
        }
        None => {
            let s = plain_segment(seq, start, len);
            (s.grids, s.labels)
        }
    };
    if let Some(axis) = plan.flip {
        (grids, labels) = augment::spatial_flip(&grids, &labels, axis);
    }
    if let Some((dx, dy)) = plan.shift {
        (grids, labels) = augment::spatial_shift(&grids, &labels, dx, dy);
    }
    if let Some(rect) = plan.cutout {
        grids = augment::event_cutout(&grids, rect).expect("sampled cutout rect is in bounds");
    }
    SegmentData { grids, labels }
}

/// Draws a segment's plan with an RNG derived from (seed, epoch, sequence
/// index, window start) and applies it.
pub fn train_segment(
    seq: &Sequence,
    seq_idx: usize,
    start: usize,
    len: usize,
    cfg: &AugmentConfig,
    epoch: u64,
) -> SegmentData {
    let salt = ((seq_idx as u64) << 32) | start as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch, salt));
    let (h, w) = seq.spec.grid;
    let plan = augment::sample_plan(cfg, w, h, seq.spec.window_us, &mut rng);
    augmented_segment(seq, start, len, &plan)
}

/// Packs segments into the network input tensor (B,T,C,H,W).
pub fn batch_inputs<S: Scalar>(segments: &[&SegmentData]) -> Tensor<S> {
    assert!(!segments.is_empty(), "cannot batch zero segments");
    let t = segments[0].grids.len();
    let g0 = &segments[0].grids[0];
    let (c, h, w) = (g0.channels, g0.height, g0.width);
    let mut data = Vec::with_capacity(segments.len() * t * c * h * w);
    for seg in segments {
        assert_eq!(seg.grids.len(), t, "ragged segment lengths in a batch");
        for grid in &seg.grids {
            assert_eq!(
                (grid.channels, grid.height, grid.width),
                (c, h, w),
                "mismatched grid shapes in a batch"
            );
            data.extend(grid.data.iter().map(|&v| S::from_f64(v)));
        }
    }
    Tensor::from_vec(&[segments.len(), t, c, h, w], data)
}

/// Packs the matching labels into (B,T,2) plus the per-window closed flags.
pub fn batch_labels<S: Scalar>(segments: &[&SegmentData]) -> (Tensor<S>, Vec<bool>) {
    assert!(!segments.is_empty(), "cannot batch zero segments");
    let t = segments[0].labels.len();
    let mut data = Vec::with_capacity(segments.len() * t * 2);
    let mut closed = Vec::with_capacity(segments.len() * t);
    for seg in segments {
        assert_eq!(seg.labels.len(), t, "ragged label lengths in a batch");
        for l in &seg.labels {
            data.push(S::from_f64(l.cx));
            data.push(S::from_f64(l.cy));
            closed.push(l.closed);
        }
    }
    (Tensor::from_vec(&[segments.len(), t, 2], data), closed)
}

/// Sequence-level train/validation split: the last quarter of the sequences
/// (at least one) validates, the rest train.
pub fn split_train_val<T>(sequences: Vec<T>) -> Result<(Vec<T>, Vec<T>), DataError> {
    let n = sequences.len();
    if n < 2 {
        return Err(DataError::Invalid(format!(
            "need at least 2 sequences to split train/validation, got {n}"
        )));
    }
    let n_val = (n / 4).max(1);
    let mut train = sequences;
    let val = train.split_off(n - n_val);
    Ok((train, val))
}
