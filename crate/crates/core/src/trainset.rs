//! Training-set derivation from annotated label maps.
//!
//! Interior pixels come from eroded cells, exterior pixels lie outside every
//! dilated cell, and border pixels sit in the dilation rings of at least two
//! different cells.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ferns::{PixelClass, TrainingSample};
use crate::imagecore::{dilate, erode, BinaryMask, LabelMap, Point};

/// Number of orientations each base sample is replicated at, `k * 36°`.
pub const DEFAULT_ORIENTATIONS: usize = 10;

/// Pairwise-disjoint class masks. Pixels in none of them are unlabeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMasks {
    pub interior: BinaryMask,
    pub border: BinaryMask,
    pub exterior: BinaryMask,
}

impl ClassMasks {
    pub fn get(&self, class: PixelClass) -> &BinaryMask {
        match class {
            PixelClass::Interior => &self.interior,
            PixelClass::Border => &self.border,
            PixelClass::Exterior => &self.exterior,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.interior.dims()
    }
}

/// Derives the class masks. Collisions resolve with precedence
/// border > interior > exterior.
pub fn derive_class_masks(
    annotation: &LabelMap,
    erosion_radius: usize,
    dilation_radius: usize,
) -> Result<ClassMasks> {
    let ids = annotation.cell_ids();
    if ids.is_empty() {
        return Err(Error::EmptyAnnotation);
    }
    let (w, h) = annotation.dims();
    let mut interior = BinaryMask::empty(w, h);
    let mut covered = BinaryMask::empty(w, h);
    let mut ring_hits = vec![0u16; w * h];

    for id in ids {
        let cell = annotation.mask_of(id);
        for i in erode(&cell, erosion_radius).indices() {
            interior.set(i % w, i / w, true);
        }
        let grown = dilate(&cell, dilation_radius);
        for i in grown.indices() {
            covered.set(i % w, i / w, true);
            if !cell.bits()[i] {
                ring_hits[i] = ring_hits[i].saturating_add(1);
            }
        }
    }

    let border = BinaryMask::new(w, h, ring_hits.iter().map(|&n| n >= 2).collect())?;
    let interior = BinaryMask::from_fn(w, h, |x, y| interior.get(x, y) && !border.get(x, y));
    let exterior = BinaryMask::from_fn(w, h, |x, y| {
        !covered.get(x, y) && !border.get(x, y) && !interior.get(x, y)
    });
    Ok(ClassMasks {
        interior,
        border,
        exterior,
    })
}

/// A sampled pixel before orientation replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BaseSample {
    pub source: usize,
    pub center: Point,
    pub class: PixelClass,
}

/// Draws up to `per_class` pixels per class, uniformly without replacement,
/// from the pooled masks of several images. `source` is the index into
/// `masks`.
pub fn draw_balanced(masks: &[&ClassMasks], per_class: usize, rng_seed: u64) -> Result<Vec<BaseSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();
    for class in PixelClass::ALL {
        let pool: Vec<(usize, usize, usize)> = masks
            .iter()
            .enumerate()
            .flat_map(|(src, m)| {
                let w = m.dims().0;
                m.get(class).indices().map(move |i| (src, i % w, i / w))
            })
            .collect();
        if pool.is_empty() {
            return Err(Error::EmptyClass(class.name()));
        }
        let take = per_class.min(pool.len());
        let mut picked = sample(&mut rng, pool.len(), take).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|k| {
            let (source, x, y) = pool[k];
            BaseSample {
                source,
                center: Point::new(x as i64, y as i64),
                class,
            }
        }));
    }
    Ok(out)
}

/// Replicates each base sample at `orientations` angles `k * 2π / orientations`.
pub fn with_orientations(base: &[BaseSample], orientations: usize) -> Vec<TrainingSample> {
    let n = orientations.max(1);
    base.iter()
        .flat_map(|b| {
            (0..n).map(move |k| TrainingSample {
                source: b.source,
                center: b.center,
                class: b.class,
                orientation: 2.0 * PI * k as f64 / n as f64,
            })
        })
        .collect()
}

/// Balanced sampling from one image's masks, replicated at the default ten
/// orientations.
pub fn sample_balanced(masks: &ClassMasks, per_class: usize, rng_seed: u64) -> Result<Vec<TrainingSample>> {
    let base = draw_balanced(&[masks], per_class, rng_seed)?;
    Ok(with_orientations(&base, DEFAULT_ORIENTATIONS))
}
