//! Debug dumps: multi-channel 32-bit float grids (`GRD1`) and grayscale PNG
//! previews.
//!
//! Grid layout, little-endian: magic `GRD1`, `u32` width, height, channels,
//! then `width * height * channels` `f32` values, pixel-major.

use std::path::Path;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::ferns::ScoreMaps;
use crate::imagecore::io::save_image_png8;
use crate::imagecore::Image;

pub const GRID_MAGIC: [u8; 4] = *b"GRD1";

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Grid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values for {width}x{height}x{channels} grid",
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// `(min, max)` of one channel over finite values.
    pub fn range(&self, c: usize) -> (f32, f32) {
        self.channel(c)
            .into_iter()
            .filter(|v| v.is_finite())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(&GRID_MAGIC);
        for v in [self.width, self.height, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || bytes[..4] != GRID_MAGIC {
            return Err(Error::Format("not a GRD1 grid".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
        let (w, h, c) = (word(0), word(1), word(2));
        let n = w
            .checked_mul(h)
            .and_then(|n| n.checked_mul(c))
            .ok_or_else(|| Error::Format("grid size overflows".into()))?;
        if bytes.len() != 16 + 4 * n {
            return Err(Error::Format(format!("grid size mismatch: {} bytes for {w}x{h}x{c}", bytes.len())));
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Grid::new(w, h, c, data).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Grid::from_bytes(&bytes).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// One channel stretched to `[0, 1]` for viewing.
    pub fn preview(&self, c: usize) -> Image {
        let (lo, hi) = self.range(c);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let ch = self.channel(c);
        Image::from_fn(self.width, self.height, |x, y| (ch[y * self.width + x] - lo) / span)
    }
}

/// Posteriors as a 3-channel grid (interior, border, exterior).
pub fn score_grid(scores: &ScoreMaps) -> Grid {
    let (w, h) = scores.dims();
    let data = scores.posteriors().iter().flat_map(|p| p.map(|v| v as f32)).collect();
    Grid::new(w, h, 3, data).expect("score dimensions")
}

/// Data costs, one channel per label (background first).
pub fn data_cost_grid(model: &EnergyModel) -> Grid {
    let data = model.data_costs().iter().map(|&v| v as f32).collect();
    Grid::new(model.width(), model.height(), model.num_labels(), data).expect("model dimensions")
}

/// Smallest weight of the edges touching each pixel.
pub fn weight_grid(model: &EnergyModel) -> Grid {
    let mut min_w = vec![1.0f32; model.num_pixels()];
    for e in model.edges() {
        for p in [e.p, e.q] {
            min_w[p as usize] = min_w[p as usize].min(e.weight as f32);
        }
    }
    Grid::new(model.width(), model.height(), 1, min_w).expect("model dimensions")
}

/// Writes `<prefix>.<name>.grd` plus a PNG preview of each channel, up to
/// `max_previews` channels. Returns the written paths.
pub fn write_dump(grid: &Grid, prefix: &str, name: &str, max_previews: usize) -> Result<Vec<String>> {
    let mut written = Vec::new();
    let path = format!("{prefix}.{name}.grd");
    grid.save(&path)?;
    written.push(path);
    for c in 0..grid.channels.min(max_previews) {
        let path = format!("{prefix}.{name}.{c}.png");
        save_image_png8(&grid.preview(c), &path)?;
        written.push(path);
    }
    Ok(written)
}
