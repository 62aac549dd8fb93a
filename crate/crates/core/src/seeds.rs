//! Seed extraction from the interior posterior map.
//!
//! Thresholds are swept from high to low. At each level the 8-connected
//! components of `{posterior >= t}` are examined; a component whose size is
//! in `[min_area, max_cell_area)` and which does not already hold an
//! accepted seed center contributes a new seed. Small segments at high
//! thresholds grow and merge as the threshold drops, so the size cap keeps
//! only segments that are still smaller than one cell.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imagecore::{connected_components, BinaryMask, Connectivity, Point};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub center: Point,
    /// Threshold at which the seed's component was accepted.
    pub birth_threshold: f64,
    pub component_size: usize,
}

impl Seed {
    /// A seed placed by hand.
    pub fn manual(center: Point) -> Self {
        Seed {
            center,
            birth_threshold: 1.0,
            component_size: 1,
        }
    }
}

/// Ordered seeds. Seed `i` owns label `i + 1`; label 0 is the background.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeedSet {
    pub seeds: Vec<Seed>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    /// Seed labels plus the background label.
    pub fn num_labels(&self) -> usize {
        self.seeds.len() + 1
    }

    pub fn centers(&self) -> impl Iterator<Item = Point> + '_ {
        self.seeds.iter().map(|s| s.center)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedParams {
    pub thresholds: Vec<f64>,
    pub min_area: usize,
    pub max_cell_area: usize,
}

impl Default for SeedParams {
    fn default() -> Self {
        SeedParams {
            thresholds: default_thresholds(),
            min_area: 30,
            max_cell_area: 4000,
        }
    }
}

/// 0.95, 0.90, ..., 0.50.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|k| (95 - 5 * k) as f64 / 100.0).collect()
}

impl SeedParams {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::InvalidParameter("empty threshold sweep".into()));
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::InvalidParameter("thresholds must lie in (0, 1)".into()));
        }
        if self.thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("thresholds must be strictly decreasing".into()));
        }
        if self.min_area >= self.max_cell_area {
            return Err(Error::InvalidParameter(format!(
                "min_area {} must be below max_cell_area {}",
                self.min_area, self.max_cell_area
            )));
        }
        Ok(())
    }
}

/// Runs the threshold sweep over a row-major interior posterior map.
/// An empty result means no component ever qualified.
pub fn extract_seeds(interior: &[f64], width: usize, height: usize, params: &SeedParams) -> Result<SeedSet> {
    params.validate()?;
    if interior.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            got: (interior.len(), 1),
        });
    }
    let mut seeds: Vec<Seed> = Vec::new();
    for &t in &params.thresholds {
        let mask = BinaryMask::new(width, height, interior.iter().map(|&v| v >= t).collect())?;
        let comps = connected_components(&mask, Connectivity::Eight);
        let n = comps.count();
        let mut has_seed = vec![false; n + 1];
        for s in &seeds {
            has_seed[comps.labels.get(s.center.x as usize, s.center.y as usize) as usize] = true;
        }
        // centroid accumulators per component
        let mut sx = vec![0.0f64; n + 1];
        let mut sy = vec![0.0f64; n + 1];
        for (i, &l) in comps.labels.labels().iter().enumerate() {
            if l != 0 {
                sx[l as usize] += (i % width) as f64;
                sy[l as usize] += (i / width) as f64;
            }
        }
        let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
        let accepted: Vec<bool> = (0..=n)
            .map(|k| {
                k > 0
                    && !has_seed[k]
                    && (params.min_area..params.max_cell_area).contains(&comps.sizes[k - 1])
            })
            .collect();
        for (i, &l) in comps.labels.labels().iter().enumerate() {
            let k = l as usize;
            if !accepted[k] {
                continue;
            }
            let size = comps.sizes[k - 1] as f64;
            let (cx, cy) = (sx[k] / size, sy[k] / size);
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            let d = (x - cx).powi(2) + (y - cy).powi(2);
            if best[k].is_none_or(|(bd, _)| d < bd) {
                best[k] = Some((d, i));
            }
        }
        for k in 1..=n {
            if let Some((_, i)) = best[k] {
                seeds.push(Seed {
                    center: Point::new((i % width) as i64, (i / width) as i64),
                    birth_threshold: t,
                    component_size: comps.sizes[k - 1],
                });
            }
        }
    }
    Ok(SeedSet { seeds })
}

/// Parses a seed override file: one `x y` pair per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_seeds(text: &str, width: usize, height: usize) -> Result<SeedSet> {
    let mut seeds = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let parsed = match parts.as_slice() {
            [x, y] => x.parse::<i64>().ok().zip(y.parse::<i64>().ok()),
            _ => None,
        };
        let (x, y) = parsed.ok_or_else(|| {
            Error::InvalidParameter(format!("seed line {}: expected `x y`, got `{line}`", lineno + 1))
        })?;
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            return Err(Error::OutOfBounds { x, y, width, height });
        }
        let p = Point::new(x, y);
        if seeds.iter().any(|s: &Seed| s.center == p) {
            continue;
        }
        seeds.push(Seed::manual(p));
    }
    Ok(SeedSet { seeds })
}

pub fn load_seeds(path: impl AsRef<Path>, width: usize, height: usize) -> Result<SeedSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_seeds(&text, width, height).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn format_seeds(seeds: &SeedSet) -> String {
    seeds
        .seeds
        .iter()
        .map(|s| format!("{} {}\n", s.center.x, s.center.y))
        .collect()
}
