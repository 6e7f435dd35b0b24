use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::executor::DEFAULT_TIMEOUT_MS;
use crate::genome::DEFAULT_MAX_TEST_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Mio,
    /// Fresh random samples only; the archive is kept just to build the suite.
    Random,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Mio => "MIO",
            Algorithm::Random => "RANDOM",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MIO" => Ok(Algorithm::Mio),
            "RANDOM" => Ok(Algorithm::Random),
            _ => Err(format!("unknown algorithm {s:?} (expected MIO or RANDOM)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid search configuration: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub max_time_seconds: u64,
    /// When set, the budget is this many evaluations and wall-clock time is ignored.
    pub max_evaluations: Option<u64>,
    pub p_random_start: f64,
    pub population_per_target_start: usize,
    /// Fraction of the budget after which the search is fully focused.
    pub focus_fraction: f64,
    pub max_test_size: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub timeout_ms: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_time_seconds: 60,
            max_evaluations: None,
            p_random_start: 0.5,
            population_per_target_start: 10,
            focus_fraction: 0.5,
            max_test_size: DEFAULT_MAX_TEST_SIZE,
            seed: 0,
            algorithm: Algorithm::Mio,
            timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.p_random_start) {
            return Err(ConfigError(format!("p_random_start {} outside [0, 1]", self.p_random_start)));
        }
        if !(self.focus_fraction > 0.0 && self.focus_fraction <= 1.0) {
            return Err(ConfigError(format!("focus_fraction {} outside (0, 1]", self.focus_fraction)));
        }
        if self.population_per_target_start < 1 {
            return Err(ConfigError("population_per_target_start must be at least 1".into()));
        }
        if self.max_test_size < 1 {
            return Err(ConfigError("max_test_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Probability of a fresh random sample at budget fraction `t`:
    /// `p_random_start · max(0, 1 − t/focus_fraction)`.
    pub fn random_sampling_probability(&self, t: f64) -> f64 {
        self.p_random_start * (1.0 - t / self.focus_fraction).max(0.0)
    }

    /// Per-target population cap at budget fraction `t`:
    /// `max(1, round(n0 · (1 − t/focus_fraction)))`.
    pub fn population_limit(&self, t: f64) -> usize {
        let scale = (1.0 - t / self.focus_fraction).max(0.0);
        ((self.population_per_target_start as f64 * scale).round() as usize).max(1)
    }
}
