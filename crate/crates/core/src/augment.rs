//! Training-time stochastic transforms over (representation sequence, label
//! sequence) pairs: spatial flip, spatial shift, temporal shift, and
//! Event-Cutout. The transforms themselves are pure; all randomness enters
//! through the explicit RNG handed to [`sample_plan`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::events::LabelSample;
use crate::rep::Grid3;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("cutout rectangle ({x0},{y0}) {w}x{h} exceeds the {fw}x{fh} frame")]
    RectOutOfBounds {
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        fw: usize,
        fh: usize,
    },
}

/// Per-sequence augmentation policy. Each technique fires independently with
/// its own probability; sizes are in representation-grid pixels and the
/// temporal shift bound is a multiple of the window length.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub flip_prob: f64,
    pub shift_prob: f64,
    pub tshift_prob: f64,
    pub cutout_prob: f64,
    /// Largest |dx| and |dy| for the spatial shift, in grid pixels.
    pub max_shift: (i32, i32),
    /// Largest |temporal offset|, in units of one window length.
    pub max_tshift_windows: f64,
    /// Cutout rectangle extent bounds, in grid pixels.
    pub cutout_width: (usize, usize),
    pub cutout_height: (usize, usize),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        // Size defaults assume the 80x60 default grid: shifts up to 10% of
        // each dimension, cutout rectangles covering 10-50% per dimension.
        Self {
            flip_prob: 0.5,
            shift_prob: 0.5,
            tshift_prob: 0.5,
            cutout_prob: 0.5,
            max_shift: (8, 6),
            max_tshift_windows: 1.0,
            cutout_width: (8, 40),
            cutout_height: (6, 30),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// Defaults scaled to a `w` x `h` grid (10% shifts, 10-50% cutouts).
    pub fn default_for(w: usize, h: usize) -> Self {
        let frac = |n: usize, p: f64| ((n as f64 * p).round() as usize).max(1);
        Self {
            max_shift: (frac(w, 0.10) as i32, frac(h, 0.10) as i32),
            cutout_width: (frac(w, 0.10), frac(w, 0.50)),
            cutout_height: (frac(h, 0.10), frac(h, 0.50)),
            ..Self::default()
        }
    }

    /// All probabilities zero: the pipeline becomes the identity map.
    pub fn disabled() -> Self {
        Self {
            flip_prob: 0.0,
            shift_prob: 0.0,
            tshift_prob: 0.0,
            cutout_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("flip_prob", self.flip_prob),
            ("shift_prob", self.shift_prob),
            ("tshift_prob", self.tshift_prob),
            ("cutout_prob", self.cutout_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("augment.{name} must lie in [0,1], got {p}"));
            }
        }
        if self.max_shift.0 < 0 || self.max_shift.1 < 0 {
            return Err("augment.max_shift must be non-negative".into());
        }
        if !(self.max_tshift_windows >= 0.0) {
            return Err("augment.max_tshift_windows must be non-negative".into());
        }
        if self.cutout_width.0 > self.cutout_width.1 || self.cutout_height.0 > self.cutout_height.1
        {
            return Err("augment cutout bounds must satisfy min <= max".into());
        }
        if self.cutout_width.0 == 0 || self.cutout_height.0 == 0 {
            return Err("augment cutout minimum extents must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipAxis {
    /// Mirror in x: column x maps to W-1-x, label cx maps to 1-cx.
    Horizontal,
    /// Mirror in y: row y maps to H-1-y, label cy maps to 1-cy.
    Vertical,
}

/// Everything random about one sequence's augmentation, drawn up front in a
/// fixed order so equal seeds give equal plans regardless of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPlan {
    pub flip: Option<FlipAxis>,
    pub shift: Option<(i32, i32)>,
    pub tshift_us: Option<i64>,
    pub cutout: Option<CutoutRect>,
}

impl AugmentPlan {
    pub fn identity() -> Self {
        Self {
            flip: None,
            shift: None,
            tshift_us: None,
            cutout: None,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.flip.is_none()
            && self.shift.is_none()
            && self.tshift_us.is_none()
            && self.cutout.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoutRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

/// Draws one sequence's plan. Decision order is fixed (flip, shift, temporal
/// shift, cutout), with each technique's parameters drawn immediately after
/// its gate fires; `window_us` converts the temporal bound to microseconds.
pub fn sample_plan<R: Rng>(
    cfg: &AugmentConfig,
    grid_w: usize,
    grid_h: usize,
    window_us: i64,
    rng: &mut R,
) -> AugmentPlan {
    let mut plan = AugmentPlan::identity();
    if rng.gen::<f64>() < cfg.flip_prob {
        plan.flip = Some(FlipAxis::Horizontal);
    }
    if rng.gen::<f64>() < cfg.shift_prob {
        let dx = sample_symmetric(rng, cfg.max_shift.0);
        let dy = sample_symmetric(rng, cfg.max_shift.1);
        plan.shift = Some((dx, dy));
    }
    if rng.gen::<f64>() < cfg.tshift_prob {
        let max_us = (cfg.max_tshift_windows * window_us as f64).round() as i64;
        plan.tshift_us = Some(temporal_shift_offset(max_us, rng));
    }
    if rng.gen::<f64>() < cfg.cutout_prob {
        plan.cutout = Some(sample_cutout_rect(cfg, grid_w, grid_h, rng));
    }
    plan
}

fn sample_symmetric<R: Rng>(rng: &mut R, max: i32) -> i32 {
    if max == 0 {
        0
    } else {
        rng.gen_range(-max..=max)
    }
}

fn sample_cutout_rect<R: Rng>(
    cfg: &AugmentConfig,
    grid_w: usize,
    grid_h: usize,
    rng: &mut R,
) -> CutoutRect {
    let clamp_range = |(lo, hi): (usize, usize), n: usize| (lo.min(n), hi.min(n));
    let (wlo, whi) = clamp_range(cfg.cutout_width, grid_w);
    let (hlo, hhi) = clamp_range(cfg.cutout_height, grid_h);
    let w = rng.gen_range(wlo..=whi);
    let h = rng.gen_range(hlo..=hhi);
    let x0 = rng.gen_range(0..=grid_w - w);
    let y0 = rng.gen_range(0..=grid_h - h);
    CutoutRect { x0, y0, w, h }
}

/// Uniform offset in [-max_tshift_us, +max_tshift_us].
pub fn temporal_shift_offset<R: Rng>(max_tshift_us: i64, rng: &mut R) -> i64 {
    assert!(max_tshift_us >= 0, "temporal shift bound must be non-negative");
    if max_tshift_us == 0 {
        0
    } else {
        rng.gen_range(-max_tshift_us..=max_tshift_us)
    }
}

fn flip_grid(grid: &Grid3, axis: FlipAxis) -> Grid3 {
    let mut out = Grid3::zeros(grid.channels, grid.height, grid.width);
    for c in 0..grid.channels {
        for y in 0..grid.height {
            for x in 0..grid.width {
                let (sy, sx) = match axis {
                    FlipAxis::Horizontal => (y, grid.width - 1 - x),
                    FlipAxis::Vertical => (grid.height - 1 - y, x),
                };
                out.set(c, y, x, grid.get(c, sy, sx));
            }
        }
    }
    out
}

/// Mirrors every grid along `axis` and reflects the normalized labels
/// (cx' = 1-cx for horizontal, cy' = 1-cy for vertical).
pub fn spatial_flip(
    seq: &[Grid3],
    labels: &[LabelSample],
    axis: FlipAxis,
) -> (Vec<Grid3>, Vec<LabelSample>) {
    let grids = seq.iter().map(|g| flip_grid(g, axis)).collect();
    let labels = labels
        .iter()
        .map(|l| {
            let mut l = l.clone();
            match axis {
                FlipAxis::Horizontal => l.cx = 1.0 - l.cx,
                FlipAxis::Vertical => l.cy = 1.0 - l.cy,
            }
            l
        })
        .collect();
    (grids, labels)
}

fn shift_grid(grid: &Grid3, dx: i32, dy: i32) -> Grid3 {
    let mut out = Grid3::zeros(grid.channels, grid.height, grid.width);
    for c in 0..grid.channels {
        for y in 0..grid.height {
            for x in 0..grid.width {
                let sx = x as i64 - dx as i64;
                let sy = y as i64 - dy as i64;
                if sx >= 0 && sy >= 0 && (sx as usize) < grid.width && (sy as usize) < grid.height {
                    out.set(c, y, x, grid.get(c, sy as usize, sx as usize));
                }
            }
        }
    }
    out
}

/// Translates every grid by (dx, dy) pixels with zero fill; content pushed
/// past the frame edge is dropped. Labels move by the same fraction of the
/// frame and clamp to [0,1].
pub fn spatial_shift(
    seq: &[Grid3],
    labels: &[LabelSample],
    dx: i32,
    dy: i32,
) -> (Vec<Grid3>, Vec<LabelSample>) {
    let grids: Vec<Grid3> = seq.iter().map(|g| shift_grid(g, dx, dy)).collect();
    let (w, h) = seq
        .first()
        .map(|g| (g.width as f64, g.height as f64))
        .unwrap_or((1.0, 1.0));
    let labels = labels
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.cx = (l.cx + dx as f64 / w).clamp(0.0, 1.0);
            l.cy = (l.cy + dy as f64 / h).clamp(0.0, 1.0);
            l
        })
        .collect();
    (grids, labels)
}

/// Zeroes all channels of all timesteps on [x0, x0+w) x [y0, y0+h); every
/// other cell is copied bit-identically. Labels are deliberately untouched:
/// the network must keep predicting the pupil through the occlusion.
pub fn event_cutout(seq: &[Grid3], rect: CutoutRect) -> Result<Vec<Grid3>, AugmentError> {
    let out: Vec<Grid3> = seq
        .iter()
        .map(|g| {
            if rect.x0 + rect.w > g.width || rect.y0 + rect.h > g.height {
                return Err(AugmentError::RectOutOfBounds {
                    x0: rect.x0,
                    y0: rect.y0,
                    w: rect.w,
                    h: rect.h,
                    fw: g.width,
                    fh: g.height,
                });
            }
            let mut g = g.clone();
            for c in 0..g.channels {
                for y in rect.y0..rect.y0 + rect.h {
                    for x in rect.x0..rect.x0 + rect.w {
                        g.set(c, y, x, 0.0);
                    }
                }
            }
            Ok(g)
        })
        .collect::<Result<_, _>>()?;
    Ok(out)
}
