//! Semi-naive Bayes classifier built from random ferns.
//!
//! A fern is a fixed list of pairwise intensity comparisons inside a square
//! window around the pixel of interest. The joint outcome of its tests
//! indexes a table of per-class log-probabilities; summing the looked-up
//! entries over all ferns gives a log-score per class.

mod model;
mod serialize;

pub use model::{
    argmax_class, classify_map, eval_fern, generate_model, log_scores, posteriors, score_image, BinaryTest, Fern,
    FernsModel, PixelClass, ScoreMaps, TrainingSample, MAX_TESTS_PER_FERN, NUM_CLASSES,
};
pub use serialize::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_MAGIC};
