//! Pipeline configuration as a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys not listed in
//! [`PipelineConfig::KEYS`] are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::energy::{BackgroundTerm, EnergyParams};
use crate::error::{Error, Result};
use crate::ferns::MAX_TESTS_PER_FERN;
use crate::seeds::SeedParams;

#[derive(Debug, Clone, PartialEq)]
pub struct FernConfig {
    pub num_ferns: usize,
    pub tests_per_fern: usize,
    pub window_radius: usize,
    pub orientations: usize,
    pub per_class: usize,
}

impl Default for FernConfig {
    fn default() -> Self {
        FernConfig {
            num_ferns: 200,
            tests_per_fern: 10,
            window_radius: 10,
            orientations: 10,
            per_class: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub fern: FernConfig,
    pub erosion_radius: usize,
    pub dilation_radius: usize,
    pub seeds: SeedParams,
    pub energy: EnergyParams,
    pub max_sweeps: usize,
    pub rng_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fern: FernConfig::default(),
            erosion_radius: 3,
            dilation_radius: 2,
            seeds: SeedParams::default(),
            energy: EnergyParams::default(),
            max_sweeps: 10,
            rng_seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "fern.num_ferns",
        "fern.tests_per_fern",
        "fern.window_radius",
        "fern.orientations",
        "fern.per_class",
        "morphology.erosion_radius",
        "morphology.dilation_radius",
        "seeds.thresholds",
        "seeds.min_area",
        "seeds.max_cell_area",
        "energy.line_length",
        "energy.alpha_w",
        "energy.beta_w",
        "energy.label_cost",
        "energy.line_directions",
        "energy.max_seed_distance",
        "energy.background_term",
        "optimizer.max_sweeps",
        "rng_seed",
    ];

    /// Sets one field from its text form. Does not validate cross-field
    /// constraints; call [`PipelineConfig::validate`] afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "fern.num_ferns" => self.fern.num_ferns = parse(key, v)?,
            "fern.tests_per_fern" => self.fern.tests_per_fern = parse(key, v)?,
            "fern.window_radius" => self.fern.window_radius = parse(key, v)?,
            "fern.orientations" => self.fern.orientations = parse(key, v)?,
            "fern.per_class" => self.fern.per_class = parse(key, v)?,
            "morphology.erosion_radius" => self.erosion_radius = parse(key, v)?,
            "morphology.dilation_radius" => self.dilation_radius = parse(key, v)?,
            "seeds.thresholds" => {
                self.seeds.thresholds = v
                    .split(',')
                    .map(|t| parse(key, t.trim()))
                    .collect::<Result<_>>()?
            }
            "seeds.min_area" => self.seeds.min_area = parse(key, v)?,
            "seeds.max_cell_area" => self.seeds.max_cell_area = parse(key, v)?,
            "energy.line_length" => self.energy.line_length = parse(key, v)?,
            "energy.alpha_w" => self.energy.alpha_w = parse(key, v)?,
            "energy.beta_w" => self.energy.beta_w = parse(key, v)?,
            "energy.label_cost" => self.energy.label_cost = parse(key, v)?,
            "energy.line_directions" => self.energy.line_directions = parse(key, v)?,
            "energy.max_seed_distance" => self.energy.max_seed_distance = parse(key, v)?,
            "energy.background_term" => {
                self.energy.background_term = BackgroundTerm::parse(v)
                    .ok_or_else(|| Error::Config(format!("{key}: unknown term `{v}`")))?
            }
            "optimizer.max_sweeps" => self.max_sweeps = parse(key, v)?,
            "rng_seed" => self.rng_seed = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fern;
        if f.num_ferns == 0 {
            return Err(Error::Config("fern.num_ferns must be >= 1".into()));
        }
        if !(1..=MAX_TESTS_PER_FERN).contains(&f.tests_per_fern) {
            return Err(Error::Config(format!("fern.tests_per_fern must be in 1..={MAX_TESTS_PER_FERN}")));
        }
        if !(1..=127).contains(&f.window_radius) {
            return Err(Error::Config("fern.window_radius must be in 1..=127".into()));
        }
        if f.orientations == 0 || f.per_class == 0 {
            return Err(Error::Config("fern.orientations and fern.per_class must be >= 1".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("optimizer.max_sweeps must be >= 1".into()));
        }
        self.seeds.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.energy.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::parse_text(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        let e = &self.energy;
        let thresholds: Vec<String> = self.seeds.thresholds.iter().map(|t| t.to_string()).collect();
        let values: [String; 19] = [
            self.fern.num_ferns.to_string(),
            self.fern.tests_per_fern.to_string(),
            self.fern.window_radius.to_string(),
            self.fern.orientations.to_string(),
            self.fern.per_class.to_string(),
            self.erosion_radius.to_string(),
            self.dilation_radius.to_string(),
            thresholds.join(","),
            self.seeds.min_area.to_string(),
            self.seeds.max_cell_area.to_string(),
            e.line_length.to_string(),
            e.alpha_w.to_string(),
            e.beta_w.to_string(),
            e.label_cost.to_string(),
            e.line_directions.to_string(),
            e.max_seed_distance.to_string(),
            e.background_term.name().to_string(),
            self.max_sweeps.to_string(),
            self.rng_seed.to_string(),
        ];
        let mut out = String::from("# cellcut pipeline configuration\n");
        for (k, v) in Self::KEYS.iter().zip(values) {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }
}
