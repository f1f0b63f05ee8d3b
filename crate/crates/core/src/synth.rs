//! Synthetic event-camera eye simulator: a dark pupil disc (plus optional
//! iris ring) moves over a uniform background following parametric
//! trajectories; per-pixel log-intensity threshold crossings emit events with
//! interpolated timestamps, exactly like a real sensor's fire-and-rebase
//! contrast detector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventStream, LabelSample, LabelTrack};

/// Internal simulation frame period: 1 kHz sampling, timestamps in µs.
pub const FRAME_DT_US: i64 = 1_000;

/// Static scene description. Only log-intensity *differences* matter to the
/// event model; `background` sets the resting level, the pupil (and the
/// optional iris annulus) sit `contrast` below it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SceneModel {
    pub resolution: (u16, u16),
    pub background: f64,
    pub pupil_radius: f64,
    pub pupil_contrast: f64,
    /// Optional annulus between the pupil radius and this radius, at its own
    /// contrast below background.
    pub iris_ring: Option<(f64, f64)>,
    /// Firing threshold C of the log-intensity change detector.
    pub threshold: f64,
    /// Uniform sensor-noise events per second across the whole array
    /// (Poisson); 0 disables noise.
    pub noise_rate_hz: f64,
}

impl Default for SceneModel {
    fn default() -> Self {
        Self {
            resolution: (96, 72),
            background: 1.0,
            pupil_radius: 9.0,
            pupil_contrast: 0.8,
            iris_ring: Some((16.0, 0.3)),
            threshold: 0.2,
            noise_rate_hz: 0.0,
        }
    }
}

impl SceneModel {
    pub fn validate(&self) -> Result<(), String> {
        let (w, h) = (f64::from(self.resolution.0), f64::from(self.resolution.1));
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err("scene resolution must be positive".into());
        }
        if !(self.threshold > 0.0) {
            return Err(format!("scene threshold must be > 0, got {}", self.threshold));
        }
        if !(self.pupil_radius > 0.0) || self.pupil_radius >= w.min(h) / 2.0 {
            return Err(format!(
                "pupil radius {} must lie in (0, min(W,H)/2)",
                self.pupil_radius
            ));
        }
        if let Some((r, _)) = self.iris_ring {
            if r <= self.pupil_radius {
                return Err("iris ring radius must exceed the pupil radius".into());
            }
        }
        if self.noise_rate_hz < 0.0 {
            return Err("noise rate must be non-negative".into());
        }
        Ok(())
    }
}

/// Gaze motion over one segment; positions are in scene pixel coordinates.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Motion {
    Fixation {
        center: (f64, f64),
    },
    /// Rapid jump with a smoothstep velocity profile.
    Saccade {
        from: (f64, f64),
        to: (f64, f64),
    },
    /// Constant-velocity drift.
    SmoothPursuit {
        from: (f64, f64),
        to: (f64, f64),
    },
    /// Eyelid sweeps shut and reopens while the gaze holds still. `close`
    /// and `open` are fractions of the segment duration: the lid ramps shut
    /// over [0, close], holds over [close, open], reopens over [open, 1].
    Blink {
        center: (f64, f64),
        close: f64,
        open: f64,
    },
    /// Piecewise-linear wander between `hops` uniform waypoints inside
    /// `center ± amplitude` (drawn from the dataset RNG).
    Random {
        center: (f64, f64),
        amplitude: f64,
        hops: usize,
    },
}

/// Serde note: the motion tag is flattened next to `duration_us`, which
/// rules out `deny_unknown_fields` here — unrecognized keys in a trajectory
/// entry are ignored rather than rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trajectory {
    pub duration_us: i64,
    #[serde(flatten)]
    pub motion: Motion,
}

impl Trajectory {
    pub fn validate(&self, scene: &SceneModel) -> Result<(), String> {
        if self.duration_us <= 0 {
            return Err("trajectory duration must be positive".into());
        }
        if self.duration_us % FRAME_DT_US != 0 {
            return Err(format!(
                "trajectory duration {} must be a multiple of the {} µs frame period",
                self.duration_us, FRAME_DT_US
            ));
        }
        let (w, h) = (f64::from(scene.resolution.0), f64::from(scene.resolution.1));
        let inside = |p: (f64, f64)| p.0 >= 0.0 && p.0 <= w && p.1 >= 0.0 && p.1 <= h;
        let ok = match &self.motion {
            Motion::Fixation { center } => inside(*center),
            Motion::Saccade { from, to } | Motion::SmoothPursuit { from, to } => {
                inside(*from) && inside(*to)
            }
            Motion::Blink { center, close, open } => {
                if !(0.0 <= *close && close <= open && *open <= 1.0) {
                    return Err("blink needs 0 <= close <= open <= 1".into());
                }
                inside(*center)
            }
            Motion::Random { center, amplitude, hops } => {
                if *amplitude < 0.0 {
                    return Err("random-walk amplitude must be non-negative".into());
                }
                if *hops == 0 {
                    return Err("random walk needs at least one hop".into());
                }
                inside(*center)
            }
        };
        if ok {
            Ok(())
        } else {
            Err("trajectory positions must stay within the frame".into())
        }
    }
}

/// A trajectory with all randomness already drawn: pure position/eyelid
/// functions of the within-segment fraction u in [0,1].
#[derive(Debug, Clone)]
pub struct RealizedTrajectory {
    pub duration_us: i64,
    motion: RealizedMotion,
}

#[derive(Debug, Clone)]
enum RealizedMotion {
    Fixation { center: (f64, f64) },
    Saccade { from: (f64, f64), to: (f64, f64) },
    SmoothPursuit { from: (f64, f64), to: (f64, f64) },
    Blink { center: (f64, f64), close: f64, open: f64 },
    Piecewise { points: Vec<(f64, f64)> },
}

fn lerp(a: (f64, f64), b: (f64, f64), u: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u)
}

impl Trajectory {
    /// Draws any random parameters (waypoints) and freezes the motion.
    pub fn realize<R: Rng>(&self, scene: &SceneModel, rng: &mut R) -> RealizedTrajectory {
        let (w, h) = (f64::from(scene.resolution.0), f64::from(scene.resolution.1));
        let motion = match &self.motion {
            Motion::Fixation { center } => RealizedMotion::Fixation { center: *center },
            Motion::Saccade { from, to } => RealizedMotion::Saccade { from: *from, to: *to },
            Motion::SmoothPursuit { from, to } => {
                RealizedMotion::SmoothPursuit { from: *from, to: *to }
            }
            Motion::Blink { center, close, open } => RealizedMotion::Blink {
                center: *center,
                close: *close,
                open: *open,
            },
            Motion::Random { center, amplitude, hops } => {
                let mut points = Vec::with_capacity(hops + 1);
                points.push(*center);
                for _ in 0..*hops {
                    let x = (center.0 + rng.gen_range(-amplitude..=*amplitude)).clamp(0.0, w);
                    let y = (center.1 + rng.gen_range(-amplitude..=*amplitude)).clamp(0.0, h);
                    points.push((x, y));
                }
                RealizedMotion::Piecewise { points }
            }
        };
        RealizedTrajectory {
            duration_us: self.duration_us,
            motion,
        }
    }
}

impl RealizedTrajectory {
    /// Pupil center at within-segment fraction `u` in [0,1].
    pub fn position(&self, u: f64) -> (f64, f64) {
        let u = u.clamp(0.0, 1.0);
        match &self.motion {
            RealizedMotion::Fixation { center } | RealizedMotion::Blink { center, .. } => *center,
            RealizedMotion::Saccade { from, to } => {
                let s = u * u * (3.0 - 2.0 * u);
                lerp(*from, *to, s)
            }
            RealizedMotion::SmoothPursuit { from, to } => lerp(*from, *to, u),
            RealizedMotion::Piecewise { points } => {
                let segs = points.len() - 1;
                if segs == 0 {
                    return points[0];
                }
                let pos = u * segs as f64;
                let i = (pos.floor() as usize).min(segs - 1);
                lerp(points[i], points[i + 1], pos - i as f64)
            }
        }
    }

    /// Eyelid closure fraction at `u`: 0 fully open, 1 fully shut.
    pub fn eyelid(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.motion {
            RealizedMotion::Blink { close, open, .. } => {
                if u < *close {
                    if *close > 0.0 { u / close } else { 1.0 }
                } else if u <= *open {
                    1.0
                } else if *open < 1.0 {
                    (1.0 - u) / (1.0 - open)
                } else {
                    1.0
                }
            }
            _ => 0.0,
        }
    }
}

/// Renders the scene's log-intensity grid (H rows of W values, row-major)
/// for a pupil center in pixel coordinates and an eyelid closure fraction.
/// The eyelid occludes from the top: the first `round(eyelid*H)` rows revert
/// to background.
pub fn render_log_intensity(scene: &SceneModel, center: (f64, f64), eyelid: f64) -> Vec<f64> {
    let (w, h) = (scene.resolution.0 as usize, scene.resolution.1 as usize);
    let mut grid = vec![scene.background; w * h];
    let lid_rows = ((eyelid.clamp(0.0, 1.0) * h as f64).round() as usize).min(h);
    let r2_pupil = scene.pupil_radius * scene.pupil_radius;
    for y in lid_rows..h {
        let py = y as f64 + 0.5;
        for x in 0..w {
            let px = x as f64 + 0.5;
            let d2 = (px - center.0).powi(2) + (py - center.1).powi(2);
            let v = if d2 <= r2_pupil {
                scene.background - scene.pupil_contrast
            } else if let Some((ri, ci)) = scene.iris_ring {
                if d2 <= ri * ri {
                    scene.background - ci
                } else {
                    scene.background
                }
            } else {
                scene.background
            };
            grid[y * w + x] = v;
        }
    }
    grid
}

/// Streaming threshold detector. Feed time-ordered frames; per pixel, each
/// full multiple of the threshold between the current log intensity and the
/// pixel's residual fires one event, the residual rebasing by `polarity * C`
/// per event. The first frame only initializes residuals.
pub struct EventEmitter {
    threshold: f64,
    resolution: (u16, u16),
    residual: Option<Vec<f64>>,
    prev_t: i64,
    pub events: Vec<Event>,
}

impl EventEmitter {
    pub fn new(scene: &SceneModel) -> Self {
        assert!(scene.threshold > 0.0, "event threshold must be positive");
        Self {
            threshold: scene.threshold,
            resolution: scene.resolution,
            residual: None,
            prev_t: 0,
            events: Vec::new(),
        }
    }

    pub fn push_frame(&mut self, t: i64, grid: &[f64]) {
        let (w, h) = (self.resolution.0 as usize, self.resolution.1 as usize);
        assert_eq!(grid.len(), w * h, "frame size mismatch");
        let Some(residual) = self.residual.as_mut() else {
            self.residual = Some(grid.to_vec());
            self.prev_t = t;
            return;
        };
        assert!(t > self.prev_t, "frames must be strictly time-ordered");
        let dt = (t - self.prev_t) as f64;
        let mut fresh: Vec<Event> = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let delta = grid[i] - residual[i];
                let n = (delta.abs() / self.threshold).floor() as i64;
                if n == 0 {
                    continue;
                }
                let p: i8 = if delta > 0.0 { 1 } else { -1 };
                let step = f64::from(p) * self.threshold;
                for k in 1..=n {
                    // Timestamp at the k-th threshold crossing, linearly
                    // interpolated across the inter-frame interval.
                    let frac = (k as f64 * self.threshold) / delta.abs();
                    let et = self.prev_t + (frac * dt).round() as i64;
                    fresh.push(Event {
                        t: et.min(t - 1).max(self.prev_t),
                        x: x as u16,
                        y: y as u16,
                        p,
                    });
                }
                residual[i] += n as f64 * step;
            }
        }
        fresh.sort_by_key(|e| e.t);
        self.events.extend(fresh);
        self.prev_t = t;
    }

    pub fn finish(self) -> EventStream {
        EventStream {
            resolution: self.resolution,
            events: self.events,
        }
    }
}

/// Batch form of the threshold detector over pre-rendered `(t, grid)` frames.
pub fn emit_events(scene: &SceneModel, frames: &[(i64, Vec<f64>)]) -> EventStream {
    let mut emitter = EventEmitter::new(scene);
    for (t, grid) in frames {
        emitter.push_frame(*t, grid);
    }
    emitter.finish()
}

/// Simulates the trajectory list laid end to end at a 1 kHz internal frame
/// rate, returning the event stream plus ground-truth labels sampled from
/// the exact trajectory at `label_rate_hz` (with `closed` set while the
/// eyelid covers at least half the eye). Pure function of its arguments.
pub fn generate_dataset(
    trajectories: &[Trajectory],
    scene: &SceneModel,
    label_rate_hz: u32,
    seed: u64,
) -> (EventStream, LabelTrack) {
    assert!(!trajectories.is_empty(), "need at least one trajectory");
    assert!(label_rate_hz > 0, "label rate must be positive");
    assert_eq!(
        1_000_000 % i64::from(label_rate_hz),
        0,
        "label rate must divide 1 MHz so label timestamps stay integral"
    );
    scene.validate().expect("invalid scene");
    for tr in trajectories {
        tr.validate(scene).expect("invalid trajectory");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let realized: Vec<RealizedTrajectory> =
        trajectories.iter().map(|tr| tr.realize(scene, &mut rng)).collect();
    let mut starts = Vec::with_capacity(realized.len());
    let mut total = 0i64;
    for tr in &realized {
        starts.push(total);
        total += tr.duration_us;
    }

    // Sample (position, eyelid) from the exact trajectory at time t; the
    // final instant belongs to the last segment with u = 1.
    let sample = |t: i64| -> ((f64, f64), f64) {
        let idx = match starts.binary_search(&t) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let idx = idx.min(realized.len() - 1);
        let tr = &realized[idx];
        let u = (t - starts[idx]) as f64 / tr.duration_us as f64;
        (tr.position(u), tr.eyelid(u))
    };

    let mut emitter = EventEmitter::new(scene);
    let (w, h) = (scene.resolution.0 as usize, scene.resolution.1 as usize);
    let noise_lambda = scene.noise_rate_hz * (FRAME_DT_US as f64 / 1e6);
    let poisson = (noise_lambda > 0.0).then(|| Poisson::new(noise_lambda).unwrap());
    let mut t = 0;
    while t <= total {
        let (center, eyelid) = sample(t);
        let grid = render_log_intensity(scene, center, eyelid);
        let had_state = emitter.residual.is_some();
        emitter.push_frame(t, &grid);
        if let (true, Some(poisson)) = (had_state, &poisson) {
            let k = poisson.sample(&mut rng) as u64;
            let mut noise: Vec<Event> = (0..k)
                .map(|_| Event {
                    t: rng.gen_range(t - FRAME_DT_US..t),
                    x: rng.gen_range(0..w as u16),
                    y: rng.gen_range(0..h as u16),
                    p: if rng.gen::<bool>() { 1 } else { -1 },
                })
                .collect();
            noise.sort_by_key(|e| e.t);
            // Merge with the signal events that share this interval.
            emitter.events.extend(noise);
            let lo = emitter
                .events
                .iter()
                .rposition(|e| e.t < t - FRAME_DT_US)
                .map_or(0, |i| i + 1);
            emitter.events[lo..].sort_by_key(|e| e.t);
        }
        t += FRAME_DT_US;
    }
    let events = emitter.finish();

    let period = 1_000_000 / i64::from(label_rate_hz);
    let mut samples = Vec::new();
    let mut lt = 0;
    let (wf, hf) = (w as f64, h as f64);
    while lt <= total {
        let (pos, eyelid) = sample(lt);
        samples.push(LabelSample {
            t: lt,
            cx: pos.0 / wf,
            cy: pos.1 / hf,
            closed: eyelid >= 0.5,
        });
        lt += period;
    }
    (
        events,
        LabelTrack {
            rate_hz: label_rate_hz,
            samples,
        },
    )
}

/// A varied default scenario: fixation, saccades, pursuit, blinks, and random
/// wander tiling `duration_us` (rounded up to whole milliseconds per leg).
pub fn mixed_trajectories(scene: &SceneModel, duration_us: i64) -> Vec<Trajectory> {
    let (w, h) = (f64::from(scene.resolution.0), f64::from(scene.resolution.1));
    let c = (w / 2.0, h / 2.0);
    let m = w.min(h);
    let lo = (w * 0.25, h * 0.35);
    let hi = (w * 0.75, h * 0.65);
    let template = [
        Trajectory { duration_us: 0, motion: Motion::Fixation { center: c } },
        Trajectory { duration_us: 0, motion: Motion::SmoothPursuit { from: lo, to: hi } },
        Trajectory { duration_us: 0, motion: Motion::Saccade { from: hi, to: lo } },
        Trajectory {
            duration_us: 0,
            motion: Motion::Blink { center: lo, close: 0.3, open: 0.6 },
        },
        Trajectory {
            duration_us: 0,
            motion: Motion::Random { center: c, amplitude: m * 0.2, hops: 4 },
        },
        Trajectory { duration_us: 0, motion: Motion::SmoothPursuit { from: c, to: hi } },
    ];
    let n = template.len() as i64;
    let leg = ((duration_us + n - 1) / n + FRAME_DT_US - 1) / FRAME_DT_US * FRAME_DT_US;
    template
        .into_iter()
        .map(|mut tr| {
            tr.duration_us = leg.max(FRAME_DT_US);
            tr
        })
        .collect()
}
