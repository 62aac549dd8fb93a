//! Synthetic fluorescence-like scenes with known cell labels.
//!
//! Cells are Voronoi regions of seeded centers clipped to a disc around each
//! center. Centers are placed in aggregates so neighbouring cells share
//! walls. A bright membrane runs along every cell outline and fills a narrow
//! gap between touching cells; the gap is background in the ground truth.

use image::{ImageBuffer, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::imagecore::{connected_components, BinaryMask, Connectivity, Image, LabelMap};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub min_cells: usize,
    pub max_cells: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Width of the ridge between touching cells and along cell outlines.
    pub membrane_width: f64,
    pub membrane_level: f64,
    pub interior_level: f64,
    pub background_level: f64,
    /// Standard deviation of the interior texture.
    pub speckle: f64,
    /// Spatial correlation (Gaussian sigma, pixels) of the interior texture.
    pub speckle_scale: f64,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 512,
            height: 512,
            min_cells: 15,
            max_cells: 30,
            min_radius: 12.0,
            max_radius: 18.0,
            membrane_width: 2.0,
            membrane_level: 0.85,
            interior_level: 0.35,
            background_level: 0.1,
            speckle: 0.08,
            speckle_scale: 4.0,
            blur_sigma: 1.0,
            noise_sigma: 0.04,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParameter(m));
        if self.width < 8 || self.height < 8 {
            return fail(format!("scene {}x{} is too small", self.width, self.height));
        }
        if self.min_cells == 0 || self.min_cells > self.max_cells {
            return fail(format!("bad cell count range {}..={}", self.min_cells, self.max_cells));
        }
        if !(self.min_radius >= 3.0 && self.min_radius <= self.max_radius) {
            return fail(format!("bad radius range {}..{}", self.min_radius, self.max_radius));
        }
        if !(self.membrane_width >= 1.0 && self.membrane_width < self.min_radius) {
            return fail(format!("membrane width {} out of range", self.membrane_width));
        }
        for (name, v) in [
            ("membrane level", self.membrane_level),
            ("interior level", self.interior_level),
            ("background level", self.background_level),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} not in [0, 1]"));
            }
        }
        for (name, v) in [
            ("speckle", self.speckle),
            ("speckle scale", self.speckle_scale),
            ("blur sigma", self.blur_sigma),
            ("noise sigma", self.noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: Image,
    pub ground_truth: LabelMap,
    pub params: SceneParams,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    x: f64,
    y: f64,
    r: f64,
}

const MAX_ATTEMPTS: usize = 20_000;
const EDGE_MARGIN: f64 = 4.0;

fn place_cells(params: &SceneParams, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Cell>> {
    let (w, h) = (params.width as f64, params.height as f64);
    let smallest = params.min_radius + EDGE_MARGIN;
    if 2.0 * smallest > w || 2.0 * smallest > h {
        return Err(Error::Packing {
            requested: count,
            reason: format!("radius {} does not fit in {}x{}", params.min_radius, params.width, params.height),
        });
    }
    let mut cells: Vec<Cell> = Vec::with_capacity(count);
    for _ in 0..MAX_ATTEMPTS {
        if cells.len() == count {
            break;
        }
        let r = rng.random_range(params.min_radius..=params.max_radius);
        let lo = r + EDGE_MARGIN;
        if 2.0 * lo > w || 2.0 * lo > h {
            continue;
        }
        let (x, y) = if cells.is_empty() || rng.random_bool(0.2) {
            (rng.random_range(lo..=w - lo), rng.random_range(lo..=h - lo))
        } else {
            let parent = cells[rng.random_range(0..cells.len())];
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = (parent.r + r) * rng.random_range(0.75..0.9);
            (parent.x + dist * angle.cos(), parent.y + dist * angle.sin())
        };
        if x < lo || y < lo || x > w - lo || y > h - lo {
            continue;
        }
        let crowded = cells.iter().any(|c| {
            let d = ((c.x - x).powi(2) + (c.y - y).powi(2)).sqrt();
            d < 0.7 * (c.r + r)
        });
        if !crowded {
            cells.push(Cell { x, y, r });
        }
    }
    if cells.len() < count {
        return Err(Error::Packing {
            requested: count,
            reason: format!("only {} placed after {MAX_ATTEMPTS} attempts", cells.len()),
        });
    }
    Ok(cells)
}

enum Region {
    Background,
    Gap,
    Cell { id: u32, rim: bool },
}

fn classify_pixel(px: f64, py: f64, cells: &[Cell], membrane: f64) -> Region {
    let dist = |c: &Cell| ((c.x - px).powi(2) + (c.y - py).powi(2)).sqrt();
    let (best, d_best) = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (i, dist(c)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let own = cells[best];
    if d_best > own.r {
        return Region::Background;
    }
    for (j, other) in cells.iter().enumerate() {
        if j == best {
            continue;
        }
        let dj = dist(other);
        if dj > other.r + membrane {
            continue;
        }
        let sep = ((own.x - other.x).powi(2) + (own.y - other.y).powi(2)).sqrt();
        // distance from the pixel to the bisector of the two centers
        if (dj * dj - d_best * d_best) / (2.0 * sep) < membrane / 2.0 {
            return Region::Gap;
        }
    }
    Region::Cell {
        id: best as u32 + 1,
        rim: d_best > own.r - membrane,
    }
}

/// Keeps the largest 8-connected piece of every cell; other pieces become
/// background in the ground truth.
fn keep_largest_pieces(labels: &mut [u32], w: usize, h: usize, num_cells: usize) {
    for id in 1..=num_cells as u32 {
        let mask = BinaryMask::from_fn(w, h, |x, y| labels[y * w + x] == id);
        let comps = connected_components(&mask, Connectivity::Eight);
        if comps.count() <= 1 {
            continue;
        }
        let keep = (0..comps.count()).max_by_key(|&k| comps.sizes[k]).unwrap() as u32 + 1;
        for (i, &c) in comps.labels.labels().iter().enumerate() {
            if c != 0 && c != keep {
                labels[i] = 0;
            }
        }
    }
}

fn gaussian_blur(w: usize, h: usize, data: Vec<f32>, sigma: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return data;
    }
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::from_raw(w as u32, h as u32, data).expect("buffer size");
    image::imageops::blur(&buf, sigma as f32).into_raw()
}

/// Smooth zero-mean noise with standard deviation `params.speckle`.
fn texture_field(w: usize, h: usize, params: &SceneParams, rng: &mut ChaCha8Rng) -> Result<Vec<f32>> {
    if params.speckle == 0.0 {
        return Ok(vec![0.0; w * h]);
    }
    let normal = Normal::new(0.0f32, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let white: Vec<f32> = (0..w * h).map(|_| normal.sample(rng)).collect();
    let mut field = gaussian_blur(w, h, white, params.speckle_scale);
    let n = field.len() as f64;
    let mean = field.iter().map(|&v| v as f64).sum::<f64>() / n;
    let sd = (field.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
    let k = if sd > 0.0 { params.speckle / sd } else { 0.0 };
    for v in &mut field {
        *v = ((*v as f64 - mean) * k) as f32;
    }
    Ok(field)
}

/// Renders a scene. Identical parameters and seed give identical scenes.
pub fn generate_scene(params: &SceneParams, rng_seed: u64) -> Result<SyntheticScene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let count = rng.random_range(params.min_cells..=params.max_cells);
    let cells = place_cells(params, count, &mut rng)?;
    let offsets: Vec<f64> = cells.iter().map(|_| rng.random_range(-0.04..=0.04)).collect();

    let (w, h) = (params.width, params.height);
    let texture = texture_field(w, h, params, &mut rng)?;
    let mut labels = vec![0u32; w * h];
    let mut raw = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let level = match classify_pixel(x as f64, y as f64, &cells, params.membrane_width) {
                Region::Background => params.background_level,
                Region::Gap => params.membrane_level,
                Region::Cell { id, rim } => {
                    labels[i] = id;
                    if rim {
                        params.membrane_level
                    } else {
                        params.interior_level + offsets[id as usize - 1] + texture[i] as f64
                    }
                }
            };
            raw[i] = level as f32;
        }
    }
    keep_largest_pieces(&mut labels, w, h, cells.len());

    let mut data = gaussian_blur(w, h, raw, params.blur_sigma);
    if params.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut data {
            *v += noise.sample(&mut rng) as f32;
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }

    Ok(SyntheticScene {
        image: Image::new(w, h, data)?,
        ground_truth: LabelMap::new(w, h, labels)?.compacted(),
        params: params.clone(),
        rng_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    fn small() -> SceneParams {
        SceneParams {
            width: 160,
            height: 160,
            min_cells: 4,
            max_cells: 6,
            min_radius: 14.0,
            max_radius: 20.0,
            ..SceneParams::default()
        }
    }

    #[test]
    fn single_cell_has_membrane_only_against_background() {
        let p = SceneParams {
            min_cells: 1,
            max_cells: 1,
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            ..small()
        };
        let s = generate_scene(&p, 3).unwrap();
        assert_eq!(s.ground_truth.cell_ids(), vec![1]);
        let (w, h) = s.ground_truth.dims();
        // bright pixels all belong to the cell and touch background
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                if s.image.get(x, y) > 0.7 {
                    assert_eq!(s.ground_truth.get(x, y), 1);
                }
            }
        }
    }

    #[test]
    fn noiseless_scene_classes_recoverable_by_threshold() {
        let p = SceneParams {
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            speckle: 0.0,
            ..small()
        };
        let s = generate_scene(&p, 11).unwrap();
        let (w, h) = s.ground_truth.dims();
        let lo = (p.background_level + p.interior_level - 0.12) / 2.0;
        let hi = (p.membrane_level + p.interior_level + 0.12) / 2.0;
        let mut seen = HashSet::new();
        for y in 0..h {
            for x in 0..w {
                let v = s.image.get(x, y) as f64;
                let class = if v < lo { 0 } else if v < hi { 1 } else { 2 };
                seen.insert(class);
                let truth = s.ground_truth.get(x, y);
                match class {
                    0 => assert_eq!(truth, 0),
                    1 => assert_ne!(truth, 0),
                    _ => {}
                }
            }
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn interior_texture_has_requested_spread() {
        // full-size scene: the texture is correlated, small scenes hold too few independent samples
        let p = SceneParams {
            blur_sigma: 0.0,
            noise_sigma: 0.0,
            ..SceneParams::default()
        };
        let s = generate_scene(&p, 5).unwrap();
        let flat = generate_scene(&SceneParams { speckle: 0.0, ..p.clone() }, 5).unwrap();
        let diffs: Vec<f64> = (0..s.image.data().len())
            .filter(|&i| flat.image.data()[i] < 0.6 && s.ground_truth.labels()[i] != 0)
            .map(|i| (s.image.data()[i] - flat.image.data()[i]) as f64)
            .collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!((std - p.speckle).abs() < 0.02, "texture std {std}");
    }

    #[test]
    fn same_seed_same_scene() {
        assert_eq!(generate_scene(&small(), 42).unwrap(), generate_scene(&small(), 42).unwrap());
        assert_ne!(generate_scene(&small(), 42).unwrap().image, generate_scene(&small(), 43).unwrap().image);
    }

    #[test]
    fn impossible_packing_is_an_error() {
        let p = SceneParams {
            width: 64,
            height: 64,
            min_cells: 40,
            max_cells: 40,
            min_radius: 12.0,
            max_radius: 12.0,
            ..SceneParams::default()
        };
        assert!(matches!(generate_scene(&p, 1), Err(Error::Packing { requested: 40, .. })));
        let p = SceneParams { width: 20, height: 20, ..small() };
        assert!(matches!(generate_scene(&p, 1), Err(Error::Packing { .. })));
    }

    #[test]
    fn cells_disjoint_connected_and_separated() {
        for seed in 0..4 {
            let s = generate_scene(&small(), seed).unwrap();
            let gt = &s.ground_truth;
            let (w, h) = gt.dims();
            for id in gt.cell_ids() {
                let comps = connected_components(&gt.mask_of(id), Connectivity::Eight);
                assert_eq!(comps.count(), 1, "cell {id} of scene {seed}");
            }
            // no two different cells are 8-adjacent
            for y in 0..h {
                for x in 0..w {
                    let a = gt.get(x, y);
                    if a == 0 {
                        continue;
                    }
                    for (dx, dy) in Connectivity::Eight.offsets() {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                            let b = gt.get(nx as usize, ny as usize);
                            assert!(b == 0 || b == a);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn default_scene_shape() {
        let s = generate_scene(&SceneParams::default(), 0).unwrap();
        assert_eq!(s.image.dims(), (512, 512));
        let n = s.ground_truth.cell_ids().len();
        assert!((15..=30).contains(&n), "{n} cells");
        let mut sizes: HashMap<u32, usize> = HashMap::new();
        for &l in s.ground_truth.labels() {
            *sizes.entry(l).or_default() += 1;
        }
        assert!(sizes.iter().filter(|(l, _)| **l != 0).all(|(_, &n)| n > 100));
    }
}
