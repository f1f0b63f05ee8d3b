//! Dense representations of event windows: accumulation frames, the N-bit
//! Bina-rep temporal encoding, and bilinear-in-time voxel grids.

use std::io::Read;
use std::path::Path;

use crate::events::Window;

/// Row-major `(channels, height, width)` grid of f64 values. Encodings are
/// computed and stored at full precision; conversion to the training scalar
/// type happens at batch assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Grid3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx(c, y, x);
        self.data[i] = v;
    }
}

/// Bina-rep output: `grid` has 2 channels (0 = positive polarity, 1 =
/// negative) with values k/(2^bits - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct BinaRep {
    pub bits: u8,
    pub grid: Grid3,
}

/// Polarity channel index: positive events in channel 0, negative in 1.
#[inline]
pub fn polarity_channel(p: i8) -> usize {
    usize::from(p <= 0)
}

/// Downscale factors from the window's sensor resolution to the grid
/// resolution. Panics unless both divide exactly (e.g. 640x480 -> 80x60).
fn scale_factors(window: &Window, h: usize, w: usize) -> (usize, usize) {
    let (sw, sh) = (window.resolution.0 as usize, window.resolution.1 as usize);
    assert!(h > 0 && w > 0, "encode: target resolution must be positive");
    assert!(
        sw % w == 0 && sh % h == 0,
        "encode: sensor resolution {sw}x{sh} must divide the target {w}x{h}"
    );
    (sw / w, sh / h)
}

/// Per-pixel, per-polarity event counts at the downscaled resolution.
pub fn encode_frame(window: &Window, h: usize, w: usize) -> Grid3 {
    let (fx, fy) = scale_factors(window, h, w);
    let mut grid = Grid3::zeros(2, h, w);
    for e in &window.events {
        let (x, y) = (e.x as usize / fx, e.y as usize / fy);
        let i = grid.idx(polarity_channel(e.p), y, x);
        grid.data[i] += 1.0;
    }
    grid
}

/// The N-bit temporal binarization: the window is cut into `bits` equal
/// sub-intervals (index 0 oldest). Per polarity and cell, sub-interval `i`
/// contributes bit weight `2^i` when at least one event hits it, so the most
/// recent sub-interval carries the most significant bit. The weighted sum is
/// normalized by `2^bits - 1` into [0,1].
pub fn encode_bina_rep(window: &Window, bits: u8, h: usize, w: usize) -> BinaRep {
    assert!(bits >= 1, "bina-rep bits must be at least 1");
    assert!(bits <= 24, "bina-rep bits above 24 exceed exact f64 integer range");
    let duration = window.t_end - window.t_start;
    assert!(duration > 0, "bina-rep window duration must be positive");

    let (fx, fy) = scale_factors(window, h, w);
    let mut masks = vec![0u32; 2 * h * w];
    for e in &window.events {
        debug_assert!(e.t >= window.t_start && e.t < window.t_end);
        // Chronological sub-interval index in 0..bits.
        let sub = ((e.t - window.t_start) * i64::from(bits) / duration) as u32;
        let (x, y) = (e.x as usize / fx, e.y as usize / fy);
        let c = polarity_channel(e.p);
        masks[(c * h + y) * w + x] |= 1 << sub;
    }

    let denom = f64::from((1u32 << bits) - 1);
    let mut grid = Grid3::zeros(2, h, w);
    for (g, &m) in grid.data.iter_mut().zip(&masks) {
        *g = f64::from(m) / denom;
    }
    BinaRep { bits, grid }
}

/// Bilinear-in-time voxel grid: bin centers sit at normalized times
/// `i/(n_bins-1)`; each event splits its polarity between the two nearest
/// centers with linear weights (all mass to bin 0 when `n_bins` = 1).
pub fn encode_voxel(window: &Window, n_bins: usize, h: usize, w: usize) -> Grid3 {
    assert!(n_bins >= 1, "voxel grid needs at least one bin");
    let duration = (window.t_end - window.t_start) as f64;
    assert!(duration > 0.0, "voxel window duration must be positive");

    let (fx, fy) = scale_factors(window, h, w);
    let mut grid = Grid3::zeros(n_bins, h, w);
    for e in &window.events {
        let (x, y) = (e.x as usize / fx, e.y as usize / fy);
        let p = f64::from(e.p);
        if n_bins == 1 {
            let i = grid.idx(0, y, x);
            grid.data[i] += p;
            continue;
        }
        let tn = (e.t - window.t_start) as f64 / duration;
        let pos = tn * (n_bins - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let i = grid.idx(lo, y, x);
        grid.data[i] += p * (1.0 - frac);
        if frac > 0.0 {
            let i = grid.idx(lo + 1, y, x);
            grid.data[i] += p * frac;
        }
    }
    grid
}

// ---------------------------------------------------------------------------
// Binary dump format for golden-file tests: 16-byte header then f32 payload.
//
//   "BREP"  u8 bits  u8 channels  u16 height (LE)  u16 width (LE)  6 x 0x00
//   channels*height*width little-endian f32 values
// ---------------------------------------------------------------------------

pub const BREP_MAGIC: [u8; 4] = *b"BREP";
pub const BREP_MAX_CHANNELS: usize = 64;
pub const BREP_MAX_EXTENT: usize = 4096;
pub const BREP_MAX_ELEMENTS: usize = 1 << 24;

#[derive(Debug, thiserror::Error)]
pub enum BrepError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a representation dump (bad magic)")]
    BadMagic,
    #[error("malformed representation dump: {0}")]
    Corrupt(String),
}

pub fn write_brep<W: std::io::Write>(w: &mut W, bits: u8, grid: &Grid3) -> Result<(), BrepError> {
    if grid.channels > BREP_MAX_CHANNELS {
        return Err(BrepError::Corrupt(format!("{} channels exceed the limit", grid.channels)));
    }
    if grid.height > BREP_MAX_EXTENT || grid.width > BREP_MAX_EXTENT {
        return Err(BrepError::Corrupt("grid extent exceeds the limit".into()));
    }
    w.write_all(&BREP_MAGIC)?;
    w.write_all(&[bits, grid.channels as u8])?;
    w.write_all(&(grid.height as u16).to_le_bytes())?;
    w.write_all(&(grid.width as u16).to_le_bytes())?;
    w.write_all(&[0u8; 6])?;
    for &v in &grid.data {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn save_brep<P: AsRef<Path>>(path: P, bits: u8, grid: &Grid3) -> Result<(), BrepError> {
    let mut buf = Vec::with_capacity(16 + grid.data.len() * 4);
    write_brep(&mut buf, bits, grid)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Parses a dump, returning `(bits, grid)`. Rejects bad magic, oversized
/// dimensions, and truncated or oversized payloads without panicking.
pub fn read_brep<R: Read>(r: &mut R) -> Result<(u8, Grid3), BrepError> {
    // Check the magic before demanding the rest of the header, so a wrong
    // file type reports BadMagic even when it is shorter than a header.
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != BREP_MAGIC {
        return Err(BrepError::BadMagic);
    }
    let mut header = [0u8; 12];
    r.read_exact(&mut header)?;
    let bits = header[0];
    let channels = header[1] as usize;
    let height = u16::from_le_bytes([header[2], header[3]]) as usize;
    let width = u16::from_le_bytes([header[4], header[5]]) as usize;
    if channels == 0 || channels > BREP_MAX_CHANNELS {
        return Err(BrepError::Corrupt(format!("channel count {channels} out of range")));
    }
    if height == 0 || height > BREP_MAX_EXTENT || width == 0 || width > BREP_MAX_EXTENT {
        return Err(BrepError::Corrupt(format!("extent {height}x{width} out of range")));
    }
    let elements = channels * height * width;
    if elements > BREP_MAX_ELEMENTS {
        return Err(BrepError::Corrupt(format!("{elements} elements exceed the limit")));
    }
    let mut data = vec![0.0f64; elements];
    let mut buf = [0u8; 4];
    for v in data.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from(f32::from_le_bytes(buf));
    }
    // The payload must end exactly here.
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => {}
        _ => return Err(BrepError::Corrupt("trailing bytes after payload".into())),
    }
    Ok((
        bits,
        Grid3 {
            channels,
            height,
            width,
            data,
        },
    ))
}

pub fn load_brep<P: AsRef<Path>>(path: P) -> Result<(u8, Grid3), BrepError> {
    let bytes = std::fs::read(path)?;
    read_brep_bytes(&bytes)
}

pub fn read_brep_bytes(bytes: &[u8]) -> Result<(u8, Grid3), BrepError> {
    let mut cur = bytes;
    read_brep(&mut cur)
}
