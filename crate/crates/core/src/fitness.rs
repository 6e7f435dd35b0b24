//! Per-target heuristic scores.
//!
//! Every testing target gets a score `h` in `[0, 1]`, where 1 means covered.
//! Statements are binary, branches are graded by their normalized distance, and
//! each endpoint has one target per status class (2xx, 4xx, 5xx).

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use log::warn;
use thiserror::Error;

use crate::driver::{CoverageKind, CoverageReport};
use crate::executor::ConcreteHttpCall;
use crate::genome::Individual;
use crate::schema::ActionTemplate;

#[derive(Debug, Error, PartialEq)]
pub enum FitnessError {
    #[error("branch distance must be finite and non-negative, got {0}")]
    InvalidDistance(f64),
    #[error("target {0} reported as both statement and branch")]
    ConflictingKinds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TargetKind {
    Statement,
    Branch,
    HttpStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TargetId {
    pub kind: TargetKind,
    pub name: String,
}

impl TargetId {
    pub fn new(kind: TargetKind, name: impl Into<String>) -> Self {
        Self { kind, name: name.into() }
    }

    /// `STATUS:<class>xx:<VERB>:<path>`.
    pub fn status(class: u16, template: &ActionTemplate) -> Self {
        Self::new(
            TargetKind::HttpStatus,
            format!("STATUS:{class}xx:{}:{}", template.verb, template.full_path()),
        )
    }

    pub fn is_fault(&self) -> bool {
        self.kind == TargetKind::HttpStatus && self.name.starts_with("STATUS:5xx:")
    }
}

impl fmt::Display for TargetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Status classes that become targets.
pub const STATUS_CLASSES: [u16; 3] = [2, 4, 5];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitnessValue {
    scores: BTreeMap<TargetId, f64>,
}

impl FitnessValue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Score of `target`; absent targets score 0.
    pub fn get(&self, target: &TargetId) -> f64 {
        self.scores.get(target).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, target: TargetId, h: f64) {
        debug_assert!((0.0..=1.0).contains(&h), "h = {h}");
        self.scores.insert(target, h.clamp(0.0, 1.0));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TargetId, f64)> {
        self.scores.iter().map(|(t, h)| (t, *h))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn covered(&self) -> impl Iterator<Item = &TargetId> {
        self.scores.iter().filter(|(_, h)| **h >= 1.0).map(|(t, _)| t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    /// Absent when the call timed out.
    pub status: Option<u16>,
    pub timed_out: bool,
    /// At most [`BODY_EXCERPT_LIMIT`] bytes of the response body.
    pub body_excerpt: String,
    pub extracted_location: Option<String>,
    /// The location came from a `Location` header rather than a body `id`.
    pub location_from_header: bool,
    pub elapsed_ms: u64,
}

pub const BODY_EXCERPT_LIMIT: usize = 2048;

impl ExecutionResult {
    pub fn timed_out(elapsed_ms: u64) -> Self {
        Self {
            status: None,
            timed_out: true,
            body_excerpt: String::new(),
            extracted_location: None,
            location_from_header: false,
            elapsed_ms,
        }
    }

    pub fn is_server_error(&self) -> bool {
        self.status.is_some_and(|s| (500..600).contains(&s))
    }
}

/// Truncates `body` to the excerpt limit on a char boundary.
pub fn body_excerpt(body: &str) -> String {
    if body.len() <= BODY_EXCERPT_LIMIT {
        return body.to_string();
    }
    let mut end = BODY_EXCERPT_LIMIT;
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    body[..end].to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedIndividual {
    pub individual: Individual,
    pub fitness: FitnessValue,
    pub results: Vec<ExecutionResult>,
    /// The calls as sent, one per result.
    pub calls: Vec<ConcreteHttpCall>,
    pub size: usize,
}

impl EvaluatedIndividual {
    pub fn reveals_fault(&self) -> bool {
        self.results.iter().any(ExecutionResult::is_server_error)
    }
}

/// `d / (d + 1)`, computed as `1 - 1 / (d + 1)` so rounding stays monotone
/// past 2^53.
pub fn normalize_distance(d: f64) -> Result<f64, FitnessError> {
    if !d.is_finite() || d < 0.0 {
        return Err(FitnessError::InvalidDistance(d));
    }
    Ok(1.0 - 1.0 / (d + 1.0))
}

/// Heuristic for an uncovered branch at distance `d`; 1 iff `d = 0`.
pub fn branch_heuristic(d: f64) -> Result<f64, FitnessError> {
    Ok(1.0 - normalize_distance(d)?)
}

/// Scores the status-class targets. Every known template contributes its three
/// class targets, at 0 unless an executed call landed in that class.
pub fn status_targets<'a>(
    executed: impl IntoIterator<Item = (&'a ExecutionResult, &'a ActionTemplate)>,
    known: &[Arc<ActionTemplate>],
) -> FitnessValue {
    let mut f = FitnessValue::new();
    for t in known {
        for class in STATUS_CLASSES {
            f.set(TargetId::status(class, t), 0.0);
        }
    }
    for (result, template) in executed {
        if let Some(class) = result.status.map(|s| s / 100) {
            if STATUS_CLASSES.contains(&class) {
                f.set(TargetId::status(class, template), 1.0);
            }
        }
    }
    f
}

/// Combines a driver coverage report with the status-class scores.
pub fn merge(report: &CoverageReport, status_part: FitnessValue) -> Result<FitnessValue, FitnessError> {
    let mut kinds: BTreeMap<&str, CoverageKind> = BTreeMap::new();
    let mut f = FitnessValue::new();
    for target in &report.targets {
        match kinds.entry(target.id.as_str()) {
            Entry::Occupied(e) if *e.get() != target.kind => {
                return Err(FitnessError::ConflictingKinds(target.id.clone()));
            }
            Entry::Occupied(_) => warn!("target {} reported twice, keeping the last entry", target.id),
            Entry::Vacant(e) => {
                e.insert(target.kind);
            }
        }
        let (kind, h) = match target.kind {
            CoverageKind::Statement => (TargetKind::Statement, if target.covered { 1.0 } else { 0.0 }),
            CoverageKind::Branch => {
                let h = match (target.covered, target.distance) {
                    (true, _) => 1.0,
                    (false, Some(d)) => branch_heuristic(d)?,
                    (false, None) => 0.0,
                };
                (TargetKind::Branch, h)
            }
        };
        f.set(TargetId::new(kind, target.id.clone()), h);
    }
    for (t, h) in status_part.scores {
        f.set(t, h);
    }
    Ok(f)
}
