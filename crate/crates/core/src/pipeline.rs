//! End-to-end stages: train a fern model from annotated images, then score,
//! seed and segment new images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::energy::{build_energy, EnergyModel};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, CvReport, FernTrainer};
use crate::ferns::{generate_model, score_image, FernsModel, PixelClass, ScoreMaps};
use crate::imagecore::{Image, LabelMap};
use crate::optimizer::{cheapest_labeling, minimize_with, Labeling, SweepRecord};
use crate::seeds::{extract_seeds, SeedSet};
use crate::trainset::{derive_class_masks, draw_balanced, with_orientations, BaseSample};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: FernsModel,
    /// Base samples per class, before orientation replication.
    pub sample_counts: [usize; 3],
    pub cv: Option<CvReport>,
}

/// Balanced base samples pooled over all annotated images. Annotation `k`
/// must match image `k` in size.
pub fn training_samples(images: &[Image], annotations: &[LabelMap], cfg: &PipelineConfig) -> Result<Vec<BaseSample>> {
    if images.is_empty() || images.len() != annotations.len() {
        return Err(Error::InvalidParameter(format!(
            "need matching images and annotations, got {} and {}",
            images.len(),
            annotations.len()
        )));
    }
    let mut masks = Vec::with_capacity(images.len());
    for (img, ann) in images.iter().zip(annotations) {
        if img.dims() != ann.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                got: ann.dims(),
            });
        }
        masks.push(derive_class_masks(ann, cfg.erosion_radius, cfg.dilation_radius)?);
    }
    let refs: Vec<_> = masks.iter().collect();
    draw_balanced(&refs, cfg.fern.per_class, cfg.rng_seed)
}

pub fn fern_trainer(cfg: &PipelineConfig) -> FernTrainer {
    FernTrainer {
        num_ferns: cfg.fern.num_ferns,
        tests_per_fern: cfg.fern.tests_per_fern,
        window_radius: cfg.fern.window_radius,
        orientations: cfg.fern.orientations,
        rng_seed: cfg.rng_seed,
    }
}

/// Trains on every image, optionally running k-fold cross-validation on the
/// same balanced sample set first.
pub fn train(images: &[Image], annotations: &[LabelMap], cfg: &PipelineConfig, cv_folds: Option<usize>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let base = training_samples(images, annotations, cfg)?;
    let mut sample_counts = [0; 3];
    for s in &base {
        sample_counts[s.class.index()] += 1;
    }
    let cv = match cv_folds {
        Some(k) => Some(cross_validate(images, &base, k, cfg.rng_seed, &fern_trainer(cfg))?),
        None => None,
    };
    let untrained = generate_model(cfg.fern.num_ferns, cfg.fern.tests_per_fern, cfg.fern.window_radius, cfg.rng_seed)?;
    let model = untrained.train(images, &with_orientations(&base, cfg.fern.orientations))?;
    Ok(TrainOutcome {
        model,
        sample_counts,
        cv,
    })
}

#[derive(Debug, Clone)]
pub struct Segmentation {
    pub scores: ScoreMaps,
    pub seeds: SeedSet,
    pub energy: EnergyModel,
    pub labeling: Labeling,
    /// Initial energy followed by one entry per sweep.
    pub trace: Vec<f64>,
    /// Same as `trace`, with label counts; sweep 0 is the initialization.
    pub sweeps: Vec<SweepRecord>,
}

impl Segmentation {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("sweep,energy,labels_used\n");
        for r in &self.sweeps {
            out.push_str(&r.to_csv_line());
            out.push('\n');
        }
        out
    }
}

fn check_model(model: &FernsModel, cfg: &PipelineConfig) -> Result<()> {
    let f = &cfg.fern;
    if (model.num_ferns(), model.tests_per_fern(), model.window_radius())
        != (f.num_ferns, f.tests_per_fern, f.window_radius)
    {
        return Err(Error::Config(format!(
            "model has N={} S={} l={} but config expects N={} S={} l={}",
            model.num_ferns(),
            model.tests_per_fern(),
            model.window_radius(),
            f.num_ferns,
            f.tests_per_fern,
            f.window_radius
        )));
    }
    Ok(())
}

/// Seeds (extracted unless `seeds` is given), energy, and alpha-expansion
/// from the cheapest-label initialization.
pub fn segment_scores(scores: ScoreMaps, cfg: &PipelineConfig, seeds: Option<SeedSet>) -> Result<Segmentation> {
    let (w, h) = scores.dims();
    let seeds = match seeds {
        Some(s) => s,
        None => extract_seeds(&scores.interior_map(), w, h, &cfg.seeds)?,
    };
    let energy = build_energy(&scores, &seeds, &cfg.energy)?;
    let init = cheapest_labeling(&energy);
    let mut sweeps = vec![SweepRecord {
        sweep: 0,
        energy: crate::energy::evaluate_energy(&energy, &init)?,
        labels_used: init.used_labels().len(),
    }];
    let (labeling, trace) = minimize_with(&energy, &init, cfg.max_sweeps, |r, _| sweeps.push(r.clone()))?;
    Ok(Segmentation {
        scores,
        seeds,
        energy,
        labeling,
        trace,
        sweeps,
    })
}

pub fn segment(model: &FernsModel, image: &Image, cfg: &PipelineConfig, seeds: Option<SeedSet>) -> Result<Segmentation> {
    cfg.validate()?;
    check_model(model, cfg)?;
    segment_scores(score_image(model, image)?, cfg, seeds)
}

/// Grayscale image with each cell tinted by a color drawn from its label.
pub fn overlay_rgb(image: &Image, labels: &Labeling, alpha: f32) -> Result<Vec<[u8; 3]>> {
    if image.dims() != labels.dims() {
        return Err(Error::DimensionMismatch {
            expected: image.dims(),
            got: labels.dims(),
        });
    }
    let max = labels.labels().iter().copied().max().unwrap_or(0) as usize;
    let colors: Vec<[f32; 3]> = (0..=max)
        .map(|l| {
            let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
            [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()]
        })
        .collect();
    Ok(image
        .data()
        .iter()
        .zip(labels.labels())
        .map(|(&g, &l)| {
            let px = if l == 0 {
                [g; 3]
            } else {
                colors[l as usize].map(|c| (1.0 - alpha) * g + alpha * c)
            };
            px.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        })
        .collect())
}

/// Pixel-class accuracy of a score map against annotation-derived classes,
/// counting only labeled pixels.
pub fn pixel_accuracy(scores: &ScoreMaps, annotation: &LabelMap, cfg: &PipelineConfig) -> Result<f64> {
    let masks = derive_class_masks(annotation, cfg.erosion_radius, cfg.dilation_radius)?;
    let predicted = crate::ferns::classify_map(scores);
    let (mut hit, mut total) = (0usize, 0usize);
    for class in PixelClass::ALL {
        for i in masks.get(class).indices() {
            total += 1;
            hit += (predicted[i] == class) as usize;
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}
