//! Declarative run configuration: one TOML file covering data, model,
//! training, augmentation, and synthesis, with cross-field validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::{build_sequence, EncodeSpec, Representation, Sequence};
use crate::events::{load_events, load_labels, DataError};
use crate::model::{ModelConfig, Variant};
use crate::synth::{mixed_trajectories, Motion, SceneModel, Trajectory, FRAME_DT_US};
use crate::train::TrainSettings;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPreset {
    /// Fixations, pursuits, saccades, blinks, and random wander.
    Mixed,
    Fixation,
    Pursuit,
    Saccade,
    Blink,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub scene: SceneModel,
    pub preset: SynthPreset,
    /// Duration of each generated recording.
    pub duration_us: i64,
    /// Number of recordings (seeded seed, seed+1, ...).
    pub count: usize,
    pub label_rate_hz: u32,
    pub seed: u64,
    /// Explicit trajectory list; overrides `preset` when present.
    pub trajectories: Option<Vec<Trajectory>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scene: SceneModel::default(),
            preset: SynthPreset::Mixed,
            duration_us: 15_000_000,
            count: 4,
            label_rate_hz: 100,
            seed: 0,
            trajectories: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.scene.validate().map_err(|e| format!("synth.scene: {e}"))?;
        if self.duration_us < FRAME_DT_US {
            return Err("synth.duration_us must cover at least one frame".into());
        }
        if self.count == 0 {
            return Err("synth.count must be positive".into());
        }
        if self.label_rate_hz == 0 || 1_000_000 % self.label_rate_hz != 0 {
            return Err("synth.label_rate_hz must be positive and divide 1 MHz".into());
        }
        if let Some(trs) = &self.trajectories {
            for tr in trs {
                tr.validate(&self.scene).map_err(|e| format!("synth.trajectories: {e}"))?;
            }
        }
        Ok(())
    }

    /// The trajectory list this config describes (explicit list or preset).
    pub fn trajectories(&self) -> Vec<Trajectory> {
        if let Some(trs) = &self.trajectories {
            return trs.clone();
        }
        let (w, h) = (
            f64::from(self.scene.resolution.0),
            f64::from(self.scene.resolution.1),
        );
        let c = (w / 2.0, h / 2.0);
        let lo = (w * 0.25, h * 0.35);
        let hi = (w * 0.75, h * 0.65);
        let whole = (self.duration_us.max(FRAME_DT_US) + FRAME_DT_US - 1) / FRAME_DT_US
            * FRAME_DT_US;
        let halves = |m1: Motion, m2: Motion| {
            let leg = ((whole / 2).max(FRAME_DT_US) + FRAME_DT_US - 1) / FRAME_DT_US * FRAME_DT_US;
            vec![
                Trajectory { duration_us: leg, motion: m1 },
                Trajectory { duration_us: leg, motion: m2 },
            ]
        };
        match self.preset {
            SynthPreset::Mixed => mixed_trajectories(&self.scene, self.duration_us),
            SynthPreset::Fixation => vec![Trajectory {
                duration_us: whole,
                motion: Motion::Fixation { center: c },
            }],
            SynthPreset::Pursuit => halves(
                Motion::SmoothPursuit { from: lo, to: hi },
                Motion::SmoothPursuit { from: hi, to: lo },
            ),
            SynthPreset::Saccade => halves(
                Motion::Saccade { from: lo, to: hi },
                Motion::Saccade { from: hi, to: lo },
            ),
            SynthPreset::Blink => vec![Trajectory {
                duration_us: whole,
                motion: Motion::Blink { center: c, close: 0.35, open: 0.65 },
            }],
            SynthPreset::Random => vec![Trajectory {
                duration_us: whole,
                motion: Motion::Random {
                    center: c,
                    amplitude: w.min(h) * 0.25,
                    hops: 8,
                },
            }],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "DataConfigToml")]
pub struct DataConfig {
    /// Directory of paired `<name>_events.csv` / `<name>_labels.csv` files.
    pub dir: Option<PathBuf>,
    /// Single-recording alternative to `dir`.
    pub events: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Sensor resolution (W, H) declared for event files.
    pub resolution: (u16, u16),
    /// Sampling rate declared for label files.
    pub label_rate_hz: u32,
    #[serde(flatten)]
    pub encode: EncodeSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            events: None,
            labels: None,
            resolution: (640, 480),
            label_rate_hz: 100,
            encode: EncodeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RepKind {
    BinaRep,
    Voxel,
    Frame,
}

/// Flat deserialization mirror of [`DataConfig`]. The public struct nests
/// the windowing/representation block and flattens it on serialization, and
/// serde cannot enforce `deny_unknown_fields` across a `flatten` boundary —
/// so strict parsing goes through this mirror, which lists every `[data]`
/// key directly and rebuilds the nested form in `TryFrom`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DataConfigToml {
    dir: Option<PathBuf>,
    events: Option<PathBuf>,
    labels: Option<PathBuf>,
    resolution: (u16, u16),
    label_rate_hz: u32,
    window_us: i64,
    hop_us: i64,
    /// Representation selector; defaults to `bina_rep`.
    kind: Option<RepKind>,
    bits: Option<u8>,
    bins: Option<usize>,
    grid: (usize, usize),
}

impl Default for DataConfigToml {
    fn default() -> Self {
        let d = DataConfig::default();
        Self {
            dir: d.dir,
            events: d.events,
            labels: d.labels,
            resolution: d.resolution,
            label_rate_hz: d.label_rate_hz,
            window_us: d.encode.window_us,
            hop_us: d.encode.hop_us,
            kind: None,
            bits: None,
            bins: None,
            grid: d.encode.grid,
        }
    }
}

impl TryFrom<DataConfigToml> for DataConfig {
    type Error = String;

    fn try_from(t: DataConfigToml) -> Result<Self, String> {
        let rep = match t.kind.unwrap_or(RepKind::BinaRep) {
            RepKind::BinaRep => {
                if t.bins.is_some() {
                    return Err("data.bins applies only to kind = \"voxel\"".into());
                }
                Representation::BinaRep { bits: t.bits.unwrap_or(4) }
            }
            RepKind::Voxel => {
                if t.bits.is_some() {
                    return Err("data.bits applies only to kind = \"bina_rep\"".into());
                }
                let bins = t
                    .bins
                    .ok_or_else(|| String::from("data.bins is required when kind = \"voxel\""))?;
                Representation::Voxel { bins }
            }
            RepKind::Frame => {
                if t.bits.is_some() || t.bins.is_some() {
                    return Err("data.bits and data.bins do not apply to kind = \"frame\"".into());
                }
                Representation::Frame
            }
        };
        Ok(Self {
            dir: t.dir,
            events: t.events,
            labels: t.labels,
            resolution: t.resolution,
            label_rate_hz: t.label_rate_hz,
            encode: EncodeSpec {
                window_us: t.window_us,
                hop_us: t.hop_us,
                rep,
                grid: t.grid,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub precision: Precision,
    pub variant: Variant,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSettings,
    pub augment: AugmentConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            precision: Precision::F32,
            variant: Variant::Full,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainSettings::default(),
            augment: AugmentConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    /// Field-level and cross-field validation with config-path diagnostics.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| ConfigError::Invalid(msg);
        self.data.encode.validate().map_err(invalid)?;
        self.model.validate().map_err(invalid)?;
        self.train.validate().map_err(invalid)?;
        self.augment.validate().map_err(invalid)?;
        self.synth.validate().map_err(invalid)?;
        if self.data.label_rate_hz == 0 {
            return Err(invalid("data.label_rate_hz must be positive".into()));
        }

        let channels = self.data.encode.rep.channels();
        if channels != self.model.in_channels {
            return Err(invalid(format!(
                "data representation produces {channels} channels but model.in_channels is {}",
                self.model.in_channels
            )));
        }
        let (gh, gw) = self.data.encode.grid;
        if (gh, gw) != self.model.resolution {
            return Err(invalid(format!(
                "data.grid {gh}x{gw} must equal model.resolution {}x{}",
                self.model.resolution.0, self.model.resolution.1
            )));
        }
        let (sw, sh) = (self.data.resolution.0 as usize, self.data.resolution.1 as usize);
        if sw % gw != 0 || sh % gh != 0 {
            return Err(invalid(format!(
                "data.resolution {sw}x{sh} must be an integer multiple of the {gw}x{gh} grid"
            )));
        }
        if self.augment.cutout_width.0 > gw || self.augment.cutout_height.0 > gh {
            return Err(invalid(
                "augment cutout minimum extents exceed the representation grid".into(),
            ));
        }
        Ok(())
    }
}

/// Reads and validates a TOML run configuration.
pub fn load_config<P: AsRef<Path>>(path: P) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

/// Loads every recording the data section points at: all sorted
/// `<name>_events.csv` / `<name>_labels.csv` pairs under `dir`, or the
/// single explicit `events`/`labels` pair.
pub fn load_recordings(cfg: &DataConfig) -> Result<Vec<(String, crate::events::EventStream, crate::events::LabelTrack)>, DataError> {
    if let Some(dir) = &cfg.dir {
        let mut names: Vec<String> = Vec::new();
        let listing = std::fs::read_dir(dir).map_err(|e| {
            DataError::Invalid(format!("cannot read data directory {}: {e}", dir.display()))
        })?;
        for entry in listing {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix("_events.csv") {
                names.push(stem.to_string());
            }
        }
        names.sort();
        if names.is_empty() {
            return Err(DataError::Invalid(format!(
                "no *_events.csv recordings found in {}",
                dir.display()
            )));
        }
        let mut out = Vec::with_capacity(names.len());
        for stem in names {
            let events_path = dir.join(format!("{stem}_events.csv"));
            let labels_path = dir.join(format!("{stem}_labels.csv"));
            let stream = load_events(&events_path, cfg.resolution)?;
            let track = load_labels(&labels_path, cfg.resolution, cfg.label_rate_hz)?;
            out.push((stem, stream, track));
        }
        Ok(out)
    } else {
        let (events, labels) = match (&cfg.events, &cfg.labels) {
            (Some(e), Some(l)) => (e, l),
            _ => {
                return Err(DataError::Invalid(
                    "data config needs either `dir` or both `events` and `labels`".into(),
                ))
            }
        };
        let stream = load_events(events, cfg.resolution)?;
        let track = load_labels(labels, cfg.resolution, cfg.label_rate_hz)?;
        let stem = events
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "recording".into());
        Ok(vec![(stem, stream, track)])
    }
}

/// Loads and windows/encodes every configured recording into sequences.
pub fn load_sequences(cfg: &DataConfig) -> Result<Vec<Sequence>, DataError> {
    load_recordings(cfg)?
        .into_iter()
        .map(|(_, stream, track)| build_sequence(stream, track, &cfg.encode))
        .collect()
}
