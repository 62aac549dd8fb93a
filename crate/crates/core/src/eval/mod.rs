//! Validation: cross-validation of the pixel classifier, segmentation
//! metrics, and synthetic scenes.

mod cv;
mod metrics;
mod synth;

pub use cv::{cross_validate, ConfusionMatrix, CvReport, FernTrainer, SampleClassifier, Trainer};
pub use metrics::{segmentation_metrics, MetricsReport, SegmentationMetrics};
pub use synth::{generate_scene, SceneParams, SyntheticScene};
