//! Multi-label energy over seed labels plus a background label:
//!
//! ```text
//! E(f) = Σ_p D_p(f_p) + Σ_(p,q) W(p,q)·[f_p != f_q] + Σ_l h_l·[l used]
//! ```
//!
//! Seed data costs integrate border evidence `max(0, p_e - p_i, p_b - p_i)`
//! along the Bresenham line from the pixel to the seed. Background data
//! costs take the cheapest of a fan of short rays. All score expressions use
//! the softmax posteriors, so integrands are bounded.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ferns::ScoreMaps;
use crate::imagecore::line::LineWalk;
use crate::imagecore::Point;
use crate::optimizer::Labeling;
use crate::seeds::{Seed, SeedSet};

/// What the background rays integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundTerm {
    /// Exterior posterior `p_e`.
    Exterior,
    /// Non-exterior evidence `1 - p_e`: cheap where background is reachable
    /// within `d` pixels, expensive deep inside cells.
    NonExterior,
}

impl BackgroundTerm {
    pub fn name(self) -> &'static str {
        match self {
            BackgroundTerm::Exterior => "exterior",
            BackgroundTerm::NonExterior => "non-exterior",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exterior" => Some(BackgroundTerm::Exterior),
            "non-exterior" => Some(BackgroundTerm::NonExterior),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyParams {
    /// Background ray length `d` in samples.
    pub line_length: usize,
    pub alpha_w: f64,
    pub beta_w: f64,
    /// Cost of using any seed label; the background label is free.
    pub label_cost: f64,
    pub line_directions: usize,
    /// Seed costs are only integrated within this Euclidean distance.
    pub max_seed_distance: f64,
    pub background_term: BackgroundTerm,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            line_length: 5,
            alpha_w: 40.0,
            beta_w: 15.0,
            label_cost: 2.5,
            line_directions: 16,
            max_seed_distance: 50.0,
            background_term: BackgroundTerm::NonExterior,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.line_length < 1 {
            return fail("line length d must be >= 1");
        }
        if !(self.alpha_w > 0.0 && self.alpha_w.is_finite()) {
            return fail("alpha_w must be positive");
        }
        if !(self.beta_w > 0.0 && self.beta_w.is_finite()) {
            return fail("beta_w must be positive");
        }
        if !(self.label_cost >= 0.0 && self.label_cost.is_finite()) {
            return fail("label cost must be non-negative");
        }
        if self.line_directions < 1 {
            return fail("need at least one background line direction");
        }
        if !(self.max_seed_distance >= 0.0) {
            return fail("max seed distance must be non-negative");
        }
        Ok(())
    }

    /// Cost assigned to pixels beyond `max_seed_distance` of a seed: one more
    /// than the largest possible background cost.
    pub fn far_seed_cost(&self) -> f64 {
        self.line_length as f64 + 1.0
    }
}

#[inline]
fn border_evidence(p: [f64; 3]) -> f64 {
    0.0f64.max(p[2] - p[0]).max(p[1] - p[0])
}

fn check_pixel(scores: &ScoreMaps, p: Point) -> Result<()> {
    let (w, h) = scores.dims();
    if p.x < 0 || p.y < 0 || p.x as usize >= w || p.y as usize >= h {
        return Err(Error::OutOfBounds {
            x: p.x,
            y: p.y,
            width: w,
            height: h,
        });
    }
    Ok(())
}

fn seed_cost_unchecked(scores: &ScoreMaps, p: Point, seed: Point, params: &EnergyParams) -> f64 {
    let (dx, dy) = ((p.x - seed.x) as f64, (p.y - seed.y) as f64);
    if dx * dx + dy * dy > params.max_seed_distance * params.max_seed_distance {
        return params.far_seed_cost();
    }
    LineWalk::new(p, seed)
        .map(|q| border_evidence(scores.posterior(q.x as usize, q.y as usize)))
        .sum()
}

/// Line integral of border evidence from `p` to the seed center, both
/// endpoints included.
pub fn seed_data_cost(scores: &ScoreMaps, p: Point, seed: &Seed, params: &EnergyParams) -> Result<f64> {
    check_pixel(scores, p)?;
    check_pixel(scores, seed.center)?;
    Ok(seed_cost_unchecked(scores, p, seed.center, params))
}

fn ray_directions(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            (t.cos(), t.sin())
        })
        .collect()
}

fn background_cost_unchecked(
    scores: &ScoreMaps,
    p: Point,
    params: &EnergyParams,
    directions: &[(f64, f64)],
) -> f64 {
    let (w, h) = scores.dims();
    let integrand = |post: [f64; 3]| match params.background_term {
        BackgroundTerm::Exterior => post[2],
        BackgroundTerm::NonExterior => 1.0 - post[2],
    };
    let mut best = f64::INFINITY;
    for &(ux, uy) in directions {
        let mut total = 0.0;
        let mut last = integrand(scores.posterior(p.x as usize, p.y as usize));
        for k in 0..params.line_length {
            let x = (p.x as f64 + k as f64 * ux).round() as i64;
            let y = (p.y as f64 + k as f64 * uy).round() as i64;
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                last = integrand(scores.posterior(x as usize, y as usize));
            }
            total += last;
        }
        best = best.min(total);
    }
    best
}

/// Cheapest `d`-sample ray integral over `line_directions` equally spaced
/// directions starting at `p`. Samples past the image edge repeat the last
/// in-bounds value.
pub fn background_data_cost(scores: &ScoreMaps, p: Point, params: &EnergyParams) -> Result<f64> {
    check_pixel(scores, p)?;
    params.validate()?;
    Ok(background_cost_unchecked(scores, p, params, &ray_directions(params.line_directions)))
}

/// `max over k in {p, q} of min(p_b - p_i, p_b - p_e)`.
fn boundary_margin(scores: &ScoreMaps, p: Point, q: Point) -> f64 {
    [p, q]
        .iter()
        .map(|k| {
            let s = scores.posterior(k.x as usize, k.y as usize);
            (s[1] - s[0]).min(s[1] - s[2])
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `W = 1 - 1 / (1 + α e^{-β M})`, evaluated as a logistic to avoid
/// cancellation when `W` is small.
pub fn sigmoid_weight(margin: f64, alpha_w: f64, beta_w: f64) -> f64 {
    let z = alpha_w.ln() - beta_w * margin;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Smoothness weight between two 8-adjacent pixels.
pub fn edge_weight(scores: &ScoreMaps, p: Point, q: Point, params: &EnergyParams) -> Result<f64> {
    check_pixel(scores, p)?;
    check_pixel(scores, q)?;
    let (dx, dy) = ((p.x - q.x).abs(), (p.y - q.y).abs());
    if dx > 1 || dy > 1 || (dx, dy) == (0, 0) {
        return Err(Error::NotAdjacent {
            p: (p.x as usize, p.y as usize),
            q: (q.x as usize, q.y as usize),
        });
    }
    Ok(sigmoid_weight(boundary_margin(scores, p, q), params.alpha_w, params.beta_w))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub p: u32,
    pub q: u32,
    pub weight: f64,
}

/// Undirected 8-neighbour pairs of a grid: right, down, down-right, down-left.
pub fn grid_neighbor_pairs(width: usize, height: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(4 * width * height);
    for y in 0..height {
        for x in 0..width {
            let i = (y * width + x) as u32;
            if x + 1 < width {
                out.push((i, i + 1));
            }
            if y + 1 < height {
                out.push((i, i + width as u32));
                if x + 1 < width {
                    out.push((i, i + width as u32 + 1));
                }
                if x > 0 {
                    out.push((i, i + width as u32 - 1));
                }
            }
        }
    }
    out
}

/// Precomputed energy terms. Data costs are stored pixel-major:
/// `data_cost[p * num_labels + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    width: usize,
    height: usize,
    num_labels: usize,
    data_cost: Vec<f64>,
    edges: Vec<Edge>,
    label_cost: Vec<f64>,
}

impl EnergyModel {
    pub fn new(
        width: usize,
        height: usize,
        num_labels: usize,
        data_cost: Vec<f64>,
        edges: Vec<Edge>,
        label_cost: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if num_labels == 0 {
            return Err(Error::InvalidParameter("energy needs at least one label".into()));
        }
        if data_cost.len() != n * num_labels || label_cost.len() != num_labels {
            return Err(Error::InvalidParameter("energy term sizes disagree".into()));
        }
        let bad = |v: &f64| !(v.is_finite() && *v >= 0.0);
        if data_cost.iter().any(bad) || label_cost.iter().any(bad) {
            return Err(Error::InvalidParameter("costs must be finite and non-negative".into()));
        }
        for e in &edges {
            if e.p as usize >= n || e.q as usize >= n || e.p == e.q || bad(&e.weight) {
                return Err(Error::InvalidParameter(format!("invalid edge {e:?}")));
            }
        }
        Ok(EnergyModel {
            width,
            height,
            num_labels,
            data_cost,
            edges,
            label_cost,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    #[inline]
    pub fn data_cost(&self, pixel: usize, label: usize) -> f64 {
        self.data_cost[pixel * self.num_labels + label]
    }

    pub fn data_costs(&self) -> &[f64] {
        &self.data_cost
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn label_cost(&self, label: usize) -> f64 {
        self.label_cost[label]
    }

    pub fn label_costs(&self) -> &[f64] {
        &self.label_cost
    }

    pub(crate) fn check_labeling(&self, labeling: &Labeling) -> Result<()> {
        if labeling.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                got: labeling.dims(),
            });
        }
        if let Some(&l) = labeling.labels().iter().find(|&&l| l as usize >= self.num_labels) {
            return Err(Error::LabelOutOfRange {
                label: l as usize,
                num_labels: self.num_labels,
            });
        }
        Ok(())
    }

    /// Energy of a labeling known to be valid.
    pub(crate) fn energy_unchecked(&self, labels: &[u32]) -> f64 {
        let data: f64 = labels
            .iter()
            .enumerate()
            .map(|(p, &l)| self.data_cost(p, l as usize))
            .sum();
        let smooth: f64 = self
            .edges
            .iter()
            .filter(|e| labels[e.p as usize] != labels[e.q as usize])
            .map(|e| e.weight)
            .sum();
        let mut used = vec![false; self.num_labels];
        for &l in labels {
            used[l as usize] = true;
        }
        let label: f64 = used
            .iter()
            .zip(&self.label_cost)
            .filter(|(u, _)| **u)
            .map(|(_, c)| c)
            .sum();
        data + smooth + label
    }
}

/// Assembles the model: label 0 is the background, label `k` seed `k - 1`.
pub fn build_energy(scores: &ScoreMaps, seeds: &SeedSet, params: &EnergyParams) -> Result<EnergyModel> {
    params.validate()?;
    let (w, h) = scores.dims();
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    for s in &seeds.seeds {
        check_pixel(scores, s.center)?;
    }
    let num_labels = seeds.num_labels();
    let directions = ray_directions(params.line_directions);
    let mut data_cost = vec![0.0; w * h * num_labels];
    data_cost
        .par_chunks_mut(num_labels)
        .enumerate()
        .for_each(|(i, row)| {
            let p = Point::new((i % w) as i64, (i / w) as i64);
            row[0] = background_cost_unchecked(scores, p, params, &directions);
            for (k, seed) in seeds.seeds.iter().enumerate() {
                row[k + 1] = seed_cost_unchecked(scores, p, seed.center, params);
            }
        });

    let edges = grid_neighbor_pairs(w, h)
        .into_par_iter()
        .map(|(p, q)| {
            let pp = Point::new((p as usize % w) as i64, (p as usize / w) as i64);
            let qq = Point::new((q as usize % w) as i64, (q as usize / w) as i64);
            Edge {
                p,
                q,
                weight: sigmoid_weight(boundary_margin(scores, pp, qq), params.alpha_w, params.beta_w),
            }
        })
        .collect();

    let mut label_cost = vec![params.label_cost; num_labels];
    label_cost[0] = 0.0;
    EnergyModel::new(w, h, num_labels, data_cost, edges, label_cost)
}

/// Exact energy: data terms, cut edges, and each used label's cost once.
pub fn evaluate_energy(model: &EnergyModel, labeling: &Labeling) -> Result<f64> {
    model.check_labeling(labeling)?;
    Ok(model.energy_unchecked(labeling.labels()))
}
