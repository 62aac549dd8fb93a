use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imagecore::{Image, Point};

pub const NUM_CLASSES: usize = 3;

/// Table size is `2^S` rows per fern, so S is capped.
pub const MAX_TESTS_PER_FERN: usize = 20;

/// The three pixel classes, in the fixed order used for tables, scores and
/// tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PixelClass {
    Interior = 0,
    Border = 1,
    Exterior = 2,
}

impl PixelClass {
    pub const ALL: [PixelClass; 3] = [PixelClass::Interior, PixelClass::Border, PixelClass::Exterior];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PixelClass::Interior => "interior",
            PixelClass::Border => "border",
            PixelClass::Exterior => "exterior",
        }
    }
}

/// One pairwise comparison. Offsets are `(dy, dx)` relative to the window
/// center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryTest {
    pub a: (i8, i8),
    pub b: (i8, i8),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fern {
    tests: Vec<BinaryTest>,
    /// `2^S x 3` log class-conditional probabilities, row-major by outcome.
    table: Vec<f64>,
}

impl Fern {
    pub(crate) fn from_parts(tests: Vec<BinaryTest>, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), (1 << tests.len()) * NUM_CLASSES);
        Fern { tests, table }
    }

    pub fn tests(&self) -> &[BinaryTest] {
        &self.tests
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn num_outcomes(&self) -> usize {
        1 << self.tests.len()
    }

    #[inline]
    pub fn log_prob(&self, outcome: usize, class: PixelClass) -> f64 {
        self.table[outcome * NUM_CLASSES + class.index()]
    }

    /// Entropy in nats of the outcome distribution of one class.
    pub fn class_entropy(&self, class: PixelClass) -> f64 {
        (0..self.num_outcomes())
            .map(|o| {
                let lp = self.log_prob(o, class);
                -lp.exp() * lp
            })
            .sum()
    }

    fn rotated(&self, orientation: f64) -> Vec<[(i64, i64); 2]> {
        let (s, c) = orientation.sin_cos();
        let rot = |(dy, dx): (i8, i8)| -> (i64, i64) {
            let (dx, dy) = (dx as f64, dy as f64);
            let rx = (c * dx - s * dy).round() as i64;
            let ry = (s * dx + c * dy).round() as i64;
            (rx, ry)
        };
        self.tests.iter().map(|t| [rot(t.a), rot(t.b)]).collect()
    }
}

#[inline]
fn outcome_at(image: &Image, x: i64, y: i64, tests: &[[(i64, i64); 2]]) -> usize {
    let mut outcome = 0usize;
    for (j, [(ax, ay), (bx, by)]) in tests.iter().enumerate() {
        let va = image.get_clamped(x + ax, y + ay);
        let vb = image.get_clamped(x + bx, y + by);
        if va > vb {
            outcome |= 1 << j;
        }
    }
    outcome
}

/// Evaluates one fern at `center`, with test offsets rotated by
/// `orientation` radians and rounded to the nearest pixel. Bit `j` of the
/// outcome is test `j`.
pub fn eval_fern(image: &Image, center: Point, orientation: f64, fern: &Fern) -> Result<usize> {
    if !image.contains(center) {
        return Err(Error::OutOfBounds {
            x: center.x,
            y: center.y,
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(outcome_at(image, center.x, center.y, &fern.rotated(orientation)))
}

/// Ensemble of ferns sharing `S` tests and window radius `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FernsModel {
    ferns: Vec<Fern>,
    window_radius: usize,
    tests_per_fern: usize,
    trained: bool,
}

/// A training pixel. `source` indexes the image slice handed to
/// [`FernsModel::train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub source: usize,
    pub center: Point,
    pub class: PixelClass,
    pub orientation: f64,
}

/// Draws `num_ferns x tests_per_fern` tests with offsets uniform on the
/// `(2l+1)^2` window. Tables start uniform.
pub fn generate_model(
    num_ferns: usize,
    tests_per_fern: usize,
    window_radius: usize,
    rng_seed: u64,
) -> Result<FernsModel> {
    if num_ferns == 0 {
        return Err(Error::InvalidParameter("number of ferns must be >= 1".into()));
    }
    if !(1..=MAX_TESTS_PER_FERN).contains(&tests_per_fern) {
        return Err(Error::InvalidParameter(format!(
            "tests per fern must be in 1..={MAX_TESTS_PER_FERN}, got {tests_per_fern}"
        )));
    }
    if !(1..=i8::MAX as usize).contains(&window_radius) {
        return Err(Error::InvalidParameter(format!(
            "window radius must be in 1..=127, got {window_radius}"
        )));
    }
    let l = window_radius as i8;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let uniform = -((1u64 << tests_per_fern) as f64).ln();
    let ferns = (0..num_ferns)
        .map(|_| {
            let tests = (0..tests_per_fern)
                .map(|_| BinaryTest {
                    a: (rng.random_range(-l..=l), rng.random_range(-l..=l)),
                    b: (rng.random_range(-l..=l), rng.random_range(-l..=l)),
                })
                .collect();
            Fern::from_parts(tests, vec![uniform; (1 << tests_per_fern) * NUM_CLASSES])
        })
        .collect();
    Ok(FernsModel {
        ferns,
        window_radius,
        tests_per_fern,
        trained: false,
    })
}

impl FernsModel {
    pub(crate) fn from_parts(ferns: Vec<Fern>, window_radius: usize, tests_per_fern: usize) -> Self {
        FernsModel {
            ferns,
            window_radius,
            tests_per_fern,
            trained: true,
        }
    }

    pub fn ferns(&self) -> &[Fern] {
        &self.ferns
    }

    pub fn num_ferns(&self) -> usize {
        self.ferns.len()
    }

    pub fn tests_per_fern(&self) -> usize {
        self.tests_per_fern
    }

    pub fn window_radius(&self) -> usize {
        self.window_radius
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Laplace-smoothed frequency tables:
    /// `log((count(outcome, class) + 1) / (count(class) + 2^S))`.
    ///
    /// Fails when any class has no samples.
    pub fn train(&self, images: &[Image], samples: &[TrainingSample]) -> Result<FernsModel> {
        let mut class_counts = [0usize; NUM_CLASSES];
        for s in samples {
            let img = images.get(s.source).ok_or_else(|| {
                Error::Training(format!("sample refers to missing image {}", s.source))
            })?;
            if !img.contains(s.center) {
                return Err(Error::Training(format!(
                    "sample center ({}, {}) outside image {}",
                    s.center.x, s.center.y, s.source
                )));
            }
            class_counts[s.class.index()] += 1;
        }
        if let Some(c) = PixelClass::ALL.iter().find(|c| class_counts[c.index()] == 0) {
            return Err(Error::Training(format!("class {} has no samples", c.name())));
        }

        // rotated offsets, cached per distinct orientation
        let mut rotations: HashMap<u64, Vec<Vec<[(i64, i64); 2]>>> = HashMap::new();
        for s in samples {
            rotations
                .entry(s.orientation.to_bits())
                .or_insert_with(|| self.ferns.iter().map(|f| f.rotated(s.orientation)).collect());
        }

        let outcomes = 1usize << self.tests_per_fern;
        let ferns = self
            .ferns
            .par_iter()
            .enumerate()
            .map(|(k, fern)| {
                let mut counts = vec![0u64; outcomes * NUM_CLASSES];
                for s in samples {
                    let tests = &rotations[&s.orientation.to_bits()][k];
                    let o = outcome_at(&images[s.source], s.center.x, s.center.y, tests);
                    counts[o * NUM_CLASSES + s.class.index()] += 1;
                }
                let table = counts
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| {
                        let denom = (class_counts[i % NUM_CLASSES] + outcomes) as f64;
                        ((n + 1) as f64 / denom).ln()
                    })
                    .collect();
                Fern::from_parts(fern.tests.clone(), table)
            })
            .collect();

        Ok(FernsModel {
            ferns,
            window_radius: self.window_radius,
            tests_per_fern: self.tests_per_fern,
            trained: true,
        })
    }

    /// Mean over ferns of each class column's entropy (nats).
    pub fn class_entropies(&self) -> [f64; NUM_CLASSES] {
        let mut out = [0.0; NUM_CLASSES];
        for c in PixelClass::ALL {
            out[c.index()] =
                self.ferns.iter().map(|f| f.class_entropy(c)).sum::<f64>() / self.ferns.len() as f64;
        }
        out
    }

    fn unrotated(&self) -> Vec<Vec<[(i64, i64); 2]>> {
        self.ferns
            .iter()
            .map(|f| {
                f.tests
                    .iter()
                    .map(|t| {
                        [
                            (t.a.1 as i64, t.a.0 as i64),
                            (t.b.1 as i64, t.b.0 as i64),
                        ]
                    })
                    .collect()
            })
            .collect()
    }

    fn accumulate(&self, tests: &[Vec<[(i64, i64); 2]>], image: &Image, x: i64, y: i64) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (fern, t) in self.ferns.iter().zip(tests) {
            let o = outcome_at(image, x, y, t);
            let row = &fern.table[o * NUM_CLASSES..o * NUM_CLASSES + NUM_CLASSES];
            s[0] += row[0];
            s[1] += row[1];
            s[2] += row[2];
        }
        s
    }
}

/// Per-class log-scores at one pixel, orientation 0.
pub fn log_scores(model: &FernsModel, image: &Image, pixel: Point) -> Result<[f64; 3]> {
    if !model.trained {
        return Err(Error::Untrained);
    }
    if !image.contains(pixel) {
        return Err(Error::OutOfBounds {
            x: pixel.x,
            y: pixel.y,
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(model.accumulate(&model.unrotated(), image, pixel.x, pixel.y))
}

/// Softmax of the log-scores, shifted by the maximum for stability.
pub fn posteriors(scores: [f64; 3]) -> [f64; 3] {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = scores.map(|s| (s - m).exp());
    let z: f64 = e.iter().sum();
    e.map(|v| v / z)
}

/// Per-pixel log-scores and posteriors over a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMaps {
    width: usize,
    height: usize,
    log_scores: Vec<[f64; 3]>,
    posteriors: Vec<[f64; 3]>,
}

impl ScoreMaps {
    /// Builds maps from log-scores, deriving posteriors.
    pub fn from_log_scores(width: usize, height: usize, log_scores: Vec<[f64; 3]>) -> Result<Self> {
        if log_scores.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} score triples for {width}x{height}",
                log_scores.len()
            )));
        }
        let posteriors = log_scores.iter().map(|s| posteriors(*s)).collect();
        Ok(ScoreMaps {
            width,
            height,
            log_scores,
            posteriors,
        })
    }

    /// Builds maps directly from posterior triples; log-scores are their logs.
    pub fn from_posteriors(width: usize, height: usize, posteriors: Vec<[f64; 3]>) -> Result<Self> {
        if posteriors.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} posterior triples for {width}x{height}",
                posteriors.len()
            )));
        }
        for p in &posteriors {
            let sum: f64 = p.iter().sum();
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!("invalid posterior triple {p:?}")));
            }
        }
        let log_scores = posteriors.iter().map(|p| p.map(f64::ln)).collect();
        Ok(ScoreMaps {
            width,
            height,
            log_scores,
            posteriors,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn log_scores(&self) -> &[[f64; 3]] {
        &self.log_scores
    }

    pub fn posteriors(&self) -> &[[f64; 3]] {
        &self.posteriors
    }

    #[inline]
    pub fn posterior(&self, x: usize, y: usize) -> [f64; 3] {
        self.posteriors[y * self.width + x]
    }

    /// Interior posterior as a row-major map.
    pub fn interior_map(&self) -> Vec<f64> {
        self.posteriors.iter().map(|p| p[0]).collect()
    }
}

/// Scores every pixel. The image is padded once with clamp-to-edge so each
/// test becomes a fixed index offset; rows are evaluated in parallel.
pub fn score_image(model: &FernsModel, image: &Image) -> Result<ScoreMaps> {
    if !model.trained {
        return Err(Error::Untrained);
    }
    let (w, h) = image.dims();
    let l = model.window_radius;
    let pw = w + 2 * l;
    let mut padded = Vec::with_capacity(pw * (h + 2 * l));
    for py in 0..h + 2 * l {
        for px in 0..pw {
            padded.push(image.get_clamped(px as i64 - l as i64, py as i64 - l as i64));
        }
    }
    // index of (x + dx, y + dy) in `padded` is y * pw + x + delta
    let delta = |(dy, dx): (i8, i8)| ((dy as i64 + l as i64) * pw as i64 + dx as i64 + l as i64) as usize;
    let deltas: Vec<Vec<[usize; 2]>> = model
        .ferns
        .iter()
        .map(|f| f.tests.iter().map(|t| [delta(t.a), delta(t.b)]).collect())
        .collect();

    let mut log_scores = vec![[0.0f64; 3]; w * h];
    log_scores.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        let mut outcomes = vec![0usize; w];
        let base = y * pw;
        for (fern, d) in model.ferns.iter().zip(&deltas) {
            outcomes.iter_mut().for_each(|o| *o = 0);
            for (j, &[a, b]) in d.iter().enumerate() {
                let pa = &padded[base + a..base + a + w];
                let pb = &padded[base + b..base + b + w];
                for ((o, va), vb) in outcomes.iter_mut().zip(pa).zip(pb) {
                    *o |= ((va > vb) as usize) << j;
                }
            }
            for (s, &o) in row.iter_mut().zip(&outcomes) {
                let t = &fern.table[o * NUM_CLASSES..o * NUM_CLASSES + NUM_CLASSES];
                s[0] += t[0];
                s[1] += t[1];
                s[2] += t[2];
            }
        }
    });
    ScoreMaps::from_log_scores(w, h, log_scores)
}

/// Maximum a posteriori class per pixel. Ties go to the earlier class in
/// the order interior, border, exterior.
pub fn classify_map(scores: &ScoreMaps) -> Vec<PixelClass> {
    scores.log_scores.iter().map(|s| argmax_class(*s)).collect()
}

/// Class with the largest score; ties go to interior, then border.
pub fn argmax_class(s: [f64; 3]) -> PixelClass {
    let mut best = PixelClass::Interior;
    for c in [PixelClass::Border, PixelClass::Exterior] {
        if s[c.index()] > s[best.index()] {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| rng.random::<f32>())
    }

    fn random_samples(images: &[Image], n: usize, seed: u64) -> Vec<TrainingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let src = rng.random_range(0..images.len());
                let img = &images[src];
                TrainingSample {
                    source: src,
                    center: Point::new(
                        rng.random_range(0..img.width() as i64),
                        rng.random_range(0..img.height() as i64),
                    ),
                    class: PixelClass::ALL[i % 3],
                    orientation: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn generate_default_sized_model() {
        let m = generate_model(200, 10, 10, 1).unwrap();
        assert_eq!(m.num_ferns(), 200);
        for f in m.ferns() {
            assert_eq!(f.tests().len(), 10);
            assert_eq!(f.table().len(), 1024 * 3);
            for t in f.tests() {
                for (dy, dx) in [t.a, t.b] {
                    assert!((-10..=10).contains(&dy) && (-10..=10).contains(&dx));
                }
            }
        }
        assert!(!m.is_trained());
    }

    #[test]
    fn single_test_model_is_uniform() {
        let m = generate_model(1, 1, 3, 9).unwrap();
        assert_eq!(m.ferns()[0].table().len(), 6);
        for v in m.ferns()[0].table() {
            assert!((v.exp() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_model(5, 4, 6, 42).unwrap(), generate_model(5, 4, 6, 42).unwrap());
        assert_ne!(generate_model(5, 4, 6, 42).unwrap(), generate_model(5, 4, 6, 43).unwrap());
    }

    #[test]
    fn generation_rejects_bad_shapes() {
        assert!(generate_model(0, 4, 3, 0).is_err());
        assert!(generate_model(3, 21, 3, 0).is_err());
        assert!(generate_model(3, 0, 3, 0).is_err());
        assert!(generate_model(3, 4, 0, 0).is_err());
    }

    #[test]
    fn constant_image_gives_zero_outcome() {
        let img = Image::filled(9, 9, 0.4);
        let m = generate_model(4, 8, 4, 3).unwrap();
        for f in m.ferns() {
            assert_eq!(eval_fern(&img, Point::new(4, 4), 0.0, f).unwrap(), 0);
            assert_eq!(eval_fern(&img, Point::new(0, 8), 1.3, f).unwrap(), 0);
        }
    }

    #[test]
    fn bit_packing_order() {
        // test 0 true (bright > dark), test 1 false (dark > bright)
        let img = Image::from_fn(5, 5, |x, _| if x == 3 { 1.0 } else { 0.0 });
        let tests = vec![
            BinaryTest { a: (0, 1), b: (0, 0) },
            BinaryTest { a: (0, 0), b: (0, 1) },
        ];
        let fern = Fern::from_parts(tests, vec![0.0; 12]);
        assert_eq!(eval_fern(&img, Point::new(2, 2), 0.0, &fern).unwrap(), 0b01);
    }

    #[test]
    fn rotation_by_quarter_turn() {
        // offset (dy, dx) = (0, 1) rotated by +90 degrees lands on (dy, dx) = (1, 0)
        let img = Image::from_fn(5, 5, |x, y| if (x, y) == (2, 3) { 1.0 } else { 0.0 });
        let fern = Fern::from_parts(vec![BinaryTest { a: (0, 1), b: (0, 0) }], vec![0.0; 6]);
        let c = Point::new(2, 2);
        assert_eq!(eval_fern(&img, c, 0.0, &fern).unwrap(), 0);
        assert_eq!(eval_fern(&img, c, std::f64::consts::FRAC_PI_2, &fern).unwrap(), 1);
    }

    #[test]
    fn eval_matches_naive_loop() {
        let img = random_image(11, 11, 5);
        let m = generate_model(20, 7, 5, 8).unwrap();
        let c = Point::new(5, 5);
        for f in m.ferns() {
            let mut expect = 0;
            for (j, t) in f.tests().iter().enumerate() {
                let va = img.get((5 + t.a.1 as i64) as usize, (5 + t.a.0 as i64) as usize);
                let vb = img.get((5 + t.b.1 as i64) as usize, (5 + t.b.0 as i64) as usize);
                if va > vb {
                    expect += 1 << j;
                }
            }
            assert_eq!(eval_fern(&img, c, 0.0, f).unwrap(), expect);
        }
    }

    #[test]
    fn eval_out_of_bounds() {
        let m = generate_model(1, 2, 2, 0).unwrap();
        let img = Image::filled(4, 4, 0.0);
        assert!(eval_fern(&img, Point::new(4, 0), 0.0, &m.ferns()[0]).is_err());
    }

    #[test]
    fn laplace_smoothing_single_sample() {
        // fern whose two tests are both true at the sample: outcome 3
        let img = Image::from_fn(5, 5, |x, _| x as f32 / 4.0);
        let tests = vec![
            BinaryTest { a: (0, 1), b: (0, 0) },
            BinaryTest { a: (0, 2), b: (0, -1) },
        ];
        let model = FernsModel {
            ferns: vec![Fern::from_parts(tests, vec![0.0; 12])],
            window_radius: 2,
            tests_per_fern: 2,
            trained: false,
        };
        let c = Point::new(2, 2);
        let samples: Vec<TrainingSample> = PixelClass::ALL
            .iter()
            .map(|&class| TrainingSample { source: 0, center: c, class, orientation: 0.0 })
            .collect();
        let trained = model.train(std::slice::from_ref(&img), &samples).unwrap();
        let f = &trained.ferns()[0];
        let expect = [0.2f64, 0.2, 0.2, 0.4];
        for (o, e) in expect.iter().enumerate() {
            assert!((f.log_prob(o, PixelClass::Interior) - e.ln()).abs() < 1e-15);
        }
        assert!(trained.is_trained());
        assert_eq!(trained.ferns()[0].tests(), model.ferns()[0].tests());
    }

    #[test]
    fn missing_class_rejected() {
        let img = random_image(8, 8, 1);
        let m = generate_model(3, 3, 2, 0).unwrap();
        let samples = vec![TrainingSample {
            source: 0,
            center: Point::new(1, 1),
            class: PixelClass::Interior,
            orientation: 0.0,
        }];
        let err = m.train(&[img], &samples).unwrap_err();
        assert!(err.to_string().contains("border"));
    }

    #[test]
    fn duplicated_samples_follow_count_formula() {
        let images = vec![random_image(16, 16, 2), random_image(12, 20, 3)];
        let m = generate_model(6, 4, 3, 7).unwrap();
        let samples = random_samples(&images, 60, 4);
        let doubled: Vec<_> = samples.iter().chain(&samples).copied().collect();
        let t2 = m.train(&images, &doubled).unwrap();
        let tests = m.unrotated();
        for (k, fern) in t2.ferns().iter().enumerate() {
            let mut counts = vec![[0u64; 3]; 16];
            let mut per_class = [0u64; 3];
            for s in &samples {
                let o = outcome_at(&images[s.source], s.center.x, s.center.y, &tests[k]);
                counts[o][s.class.index()] += 1;
                per_class[s.class.index()] += 1;
            }
            for o in 0..16 {
                for c in PixelClass::ALL {
                    let expect =
                        ((2 * counts[o][c.index()] + 1) as f64 / (2 * per_class[c.index()] + 16) as f64).ln();
                    assert!((fern.log_prob(o, c) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn balanced_counts_give_uniform_columns() {
        // one sample per outcome of a single-test fern, for every class
        let img = Image::from_fn(4, 1, |x, _| [0.0, 1.0, 1.0, 0.0][x]);
        let fern = Fern::from_parts(vec![BinaryTest { a: (0, 1), b: (0, 0) }], vec![0.0; 6]);
        let model = FernsModel { ferns: vec![fern], window_radius: 1, tests_per_fern: 1, trained: false };
        let mut samples = Vec::new();
        for class in PixelClass::ALL {
            for x in [0, 1] {
                samples.push(TrainingSample { source: 0, center: Point::new(x, 0), class, orientation: 0.0 });
            }
        }
        let t = model.train(&[img], &samples).unwrap();
        for v in t.ferns()[0].table() {
            assert!((v.exp() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn columns_are_normalized_after_training() {
        let images = vec![random_image(20, 20, 10)];
        let m = generate_model(10, 6, 4, 1).unwrap();
        let t = m.train(&images, &random_samples(&images, 300, 2)).unwrap();
        for f in t.ferns() {
            for c in PixelClass::ALL {
                let total: f64 = (0..f.num_outcomes()).map(|o| f.log_prob(o, c).exp()).sum();
                assert!((total - 1.0).abs() < 1e-9);
                assert!(f.table().iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn single_fern_score_is_table_entry() {
        let img = Image::from_fn(3, 1, |x, _| x as f32 / 2.0);
        let table = vec![-0.1, -0.2, -0.3, -1.1, -1.2, -1.3];
        let fern = Fern::from_parts(vec![BinaryTest { a: (0, 1), b: (0, -1) }], table);
        let model = FernsModel::from_parts(vec![fern], 1, 1);
        assert_eq!(log_scores(&model, &img, Point::new(1, 0)).unwrap(), [-1.1, -1.2, -1.3]);
    }

    #[test]
    fn untrained_model_cannot_score() {
        let m = generate_model(2, 2, 1, 0).unwrap();
        let img = Image::filled(3, 3, 0.0);
        assert!(matches!(log_scores(&m, &img, Point::new(0, 0)), Err(Error::Untrained)));
        assert!(matches!(score_image(&m, &img), Err(Error::Untrained)));
    }

    #[test]
    fn scores_match_high_precision_oracle() {
        let images = vec![random_image(24, 24, 20)];
        let m = generate_model(50, 5, 4, 6)
            .unwrap()
            .train(&images, &random_samples(&images, 200, 9))
            .unwrap();
        let img = random_image(15, 13, 21);
        let tests = m.unrotated();
        for y in 0..13 {
            for x in 0..15 {
                let s = log_scores(&m, &img, Point::new(x, y)).unwrap();
                for c in PixelClass::ALL {
                    // Kahan-compensated sum of the same lookups
                    let (mut sum, mut comp) = (0.0f64, 0.0f64);
                    for (f, t) in m.ferns().iter().zip(&tests) {
                        let v = f.log_prob(outcome_at(&img, x, y, t), c) - comp;
                        let next = sum + v;
                        comp = (next - sum) - v;
                        sum = next;
                    }
                    assert!((s[c.index()] - sum).abs() < 1e-9);
                    assert!(s[c.index()] <= 0.0);
                }
            }
        }
    }

    #[test]
    fn score_image_matches_pointwise_calls() {
        let images = vec![random_image(24, 24, 30)];
        let m = generate_model(20, 6, 5, 2)
            .unwrap()
            .train(&images, &random_samples(&images, 150, 1))
            .unwrap();
        let img = random_image(17, 9, 31);
        let maps = score_image(&m, &img).unwrap();
        for y in 0..9 {
            for x in 0..17 {
                let s = log_scores(&m, &img, Point::new(x as i64, y as i64)).unwrap();
                assert_eq!(maps.log_scores()[y * 17 + x], s);
                assert_eq!(maps.posterior(x, y), posteriors(s));
            }
        }
        assert_eq!(classify_map(&maps), classify_map(&score_image(&m, &img).unwrap()));
    }

    #[test]
    fn one_pixel_and_constant_images() {
        let images = vec![random_image(24, 24, 40)];
        let m = generate_model(10, 4, 3, 5)
            .unwrap()
            .train(&images, &random_samples(&images, 90, 3))
            .unwrap();
        let maps = score_image(&m, &Image::filled(1, 1, 0.5)).unwrap();
        assert_eq!(maps.log_scores().len(), 1);
        let flat = score_image(&m, &Image::filled(12, 12, 0.7)).unwrap();
        // every comparison is false on a constant image, borders included
        assert!(flat.log_scores().iter().all(|s| *s == flat.log_scores()[0]));
    }

    #[test]
    fn posterior_spot_values() {
        let p = posteriors([-4.0, -4.0, -4.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = posteriors([0.0, -50.0, -50.0]);
        assert!(p[0] >= 1.0 - 1e-15 && p[1] < 1e-21 && p[2] < 1e-21);
        let p = posteriors([-1e6, -1e6 - 1.0, -2e6]);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn map_tie_break_and_order() {
        assert_eq!(argmax_class([-1.0, -2.0, -3.0]), PixelClass::Interior);
        assert_eq!(argmax_class([-1.0, -1.0, -5.0]), PixelClass::Interior);
        assert_eq!(argmax_class([-3.0, -1.0, -1.0]), PixelClass::Border);
        assert_eq!(argmax_class([-3.0, -2.0, -1.0]), PixelClass::Exterior);
        let maps = ScoreMaps::from_log_scores(2, 1, vec![[-1.0, -2.0, -3.0], [-3.0, -2.0, -1.0]]).unwrap();
        assert_eq!(classify_map(&maps), vec![PixelClass::Interior, PixelClass::Exterior]);
    }

    proptest! {
        #[test]
        fn posteriors_normalized_and_order_preserving(
            a in -500.0f64..0.0, b in -500.0f64..0.0, c in -500.0f64..0.0
        ) {
            let s = [a, b, c];
            let p = posteriors(s);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(argmax_class(s), argmax_class(p));
        }

        #[test]
        fn posteriors_shift_invariant(
            a in -100.0f64..0.0, b in -100.0f64..0.0, c in -100.0f64..0.0, k in -50.0f64..50.0
        ) {
            let p = posteriors([a, b, c]);
            let q = posteriors([a + k, b + k, c + k]);
            for i in 0..3 {
                prop_assert!((p[i] - q[i]).abs() < 1e-12);
            }
        }
    }
}
