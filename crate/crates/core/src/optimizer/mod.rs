//! Energy minimization: exact max-flow plus alpha-expansion with label costs.

mod expansion;
mod maxflow;

pub use expansion::{
    cheapest_labeling, expansion_move, minimize, minimize_with, solve_binary, SweepRecord,
};
pub use maxflow::{max_flow, FlowNetwork, MinCut};

use crate::error::{Error, Result};
use crate::imagecore::LabelMap;

/// Per-pixel label assignment, row-major. Label 0 is the background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl Labeling {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {width}x{height}",
                labels.len()
            )));
        }
        Ok(Labeling {
            width,
            height,
            labels,
        })
    }

    pub fn constant(width: usize, height: usize, label: u32) -> Self {
        Labeling {
            width,
            height,
            labels: vec![label; width * height],
        }
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

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    /// Sorted distinct labels present.
    pub fn used_labels(&self) -> Vec<u32> {
        let mut v = self.labels.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn to_label_map(&self) -> LabelMap {
        LabelMap::new(self.width, self.height, self.labels.clone()).expect("same dimensions")
    }
}

impl From<&LabelMap> for Labeling {
    fn from(map: &LabelMap) -> Self {
        Labeling {
            width: map.width(),
            height: map.height(),
            labels: map.labels().to_vec(),
        }
    }
}
