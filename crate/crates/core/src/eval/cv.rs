use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ferns::{argmax_class, generate_model, log_scores, FernsModel, PixelClass};
use crate::imagecore::Image;
use crate::trainset::{with_orientations, BaseSample};

/// Rows are the true class, columns the predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: PixelClass, predicted: PixelClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }
}

pub trait SampleClassifier: Sync {
    fn classify(&self, images: &[Image], sample: &BaseSample) -> Result<PixelClass>;
}

/// Builds a classifier from the training part of one fold.
pub trait Trainer: Sync {
    type Model: SampleClassifier + Send;
    fn train(&self, images: &[Image], samples: &[BaseSample], fold: usize) -> Result<Self::Model>;
}

impl SampleClassifier for FernsModel {
    /// Held-out pixels are classified at orientation 0.
    fn classify(&self, images: &[Image], sample: &BaseSample) -> Result<PixelClass> {
        let image = images
            .get(sample.source)
            .ok_or_else(|| Error::Training(format!("sample refers to missing image {}", sample.source)))?;
        Ok(argmax_class(log_scores(self, image, sample.center)?))
    }
}

/// Trains a fresh fern ensemble on rotated copies of the fold's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FernTrainer {
    pub num_ferns: usize,
    pub tests_per_fern: usize,
    pub window_radius: usize,
    pub orientations: usize,
    pub rng_seed: u64,
}

impl Trainer for FernTrainer {
    type Model = FernsModel;

    fn train(&self, images: &[Image], samples: &[BaseSample], _fold: usize) -> Result<FernsModel> {
        let model = generate_model(self.num_ferns, self.tests_per_fern, self.window_radius, self.rng_seed)?;
        model.train(images, &with_orientations(samples, self.orientations))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracy: Vec<f64>,
    pub confusion: Vec<ConfusionMatrix>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across folds.
    pub std_accuracy: f64,
}

impl CvReport {
    pub fn pooled(&self) -> ConfusionMatrix {
        let mut all = ConfusionMatrix::default();
        for m in &self.confusion {
            for i in 0..3 {
                for j in 0..3 {
                    all.counts[i][j] += m.counts[i][j];
                }
            }
        }
        all
    }
}

/// Assigns each sample to a fold, class by class, after a seeded shuffle.
pub(crate) fn fold_assignment(samples: &[BaseSample], folds: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut fold_of = vec![0; samples.len()];
    for class in PixelClass::ALL {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].class == class).collect();
        if idx.len() < folds {
            return Err(Error::Training(format!(
                "class `{}` has {} samples, fewer than {folds} folds",
                class.name(),
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    Ok(fold_of)
}

/// Stratified k-fold cross-validation. Every sample is tested exactly once,
/// by a model trained on the other folds only.
pub fn cross_validate<T: Trainer>(
    images: &[Image],
    samples: &[BaseSample],
    folds: usize,
    rng_seed: u64,
    trainer: &T,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let fold_of = fold_assignment(samples, folds, rng_seed)?;
    let confusion = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) = samples
                .iter()
                .zip(&fold_of)
                .partition(|(_, &k)| k == f);
            let train: Vec<BaseSample> = train.into_iter().map(|(s, _)| *s).collect();
            let model = trainer.train(images, &train, f)?;
            let mut m = ConfusionMatrix::default();
            for (s, _) in test {
                m.record(s.class, model.classify(images, s)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;

    let fold_accuracy: Vec<f64> = confusion.iter().map(ConfusionMatrix::accuracy).collect();
    let n = folds as f64;
    let mean_accuracy = fold_accuracy.iter().sum::<f64>() / n;
    let var = fold_accuracy.iter().map(|a| (a - mean_accuracy).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(CvReport {
        fold_accuracy,
        confusion,
        mean_accuracy,
        std_accuracy: var.sqrt(),
    })
}
