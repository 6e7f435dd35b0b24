//! MIO search and the random baseline.
//!
//! Each step samples a test (fresh, or a mutant of an archive member), executes
//! it after a SUT reset, scores it against every target and feeds it to the
//! archive. Exploration decays linearly until `focus_fraction` of the budget,
//! after which only mutation of the best member per target is used.

mod archive;
mod config;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{Archive, ArchiveDelta, Member, TargetPopulation};
pub use config::{Algorithm, ConfigError, SearchConfig};

use crate::clock::Clock;
use crate::driver::{AuthCredential, CoverageReport, SutDriver};
use crate::executor::{execute, ConcreteHttpCall, Transport};
use crate::fitness::{merge, status_targets, EvaluatedIndividual, FitnessValue};
use crate::genome::{GenomeError, Individual, Sampler};
use crate::schema::ApiSchema;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub evaluations: u64,
    pub covered_targets: usize,
    pub total_targets: usize,
    pub faults_5xx: usize,
    pub elapsed_ms: u64,
    pub seed: u64,
}

impl SearchStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub suite: Vec<EvaluatedIndividual>,
    pub stats: SearchStats,
    /// Diagnostic when the search stopped before its budget (e.g. the SUT went down).
    pub aborted: Option<String>,
}

/// Where the next individual came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleOrigin {
    Fresh,
    Mutant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub evaluations: u64,
    pub covered_targets: usize,
    pub budget_used: f64,
}

/// The API and SUT the search runs against.
#[derive(Debug, Clone)]
pub struct SearchTarget {
    pub schema: Arc<ApiSchema>,
    pub base_url: String,
    pub credentials: Vec<AuthCredential>,
}

/// Called after every evaluation.
pub type ProgressHook<'a> = Box<dyn FnMut(&Progress) + 'a>;

/// Optional hooks around a run.
#[derive(Default)]
pub struct SearchHooks<'a> {
    /// Checked before each evaluation; set it to stop early and keep results.
    pub stop: Option<&'a AtomicBool>,
    pub on_progress: Option<ProgressHook<'a>>,
}

/// Picks the next individual to evaluate at budget fraction `t`.
pub fn sample_next<R: Rng + ?Sized>(
    archive: &Archive,
    sampler: &Sampler,
    config: &SearchConfig,
    t: f64,
    rng: &mut R,
) -> (Individual, SampleOrigin) {
    if config.algorithm == Algorithm::Random {
        return (sampler.sample_individual(rng), SampleOrigin::Fresh);
    }
    let p_random = config.random_sampling_probability(t);
    if p_random > 0.0 && rng.gen_bool(p_random.min(1.0)) {
        return (sampler.sample_individual(rng), SampleOrigin::Fresh);
    }
    let candidates = archive.uncovered_with_population();
    if candidates.is_empty() {
        return (sampler.sample_individual(rng), SampleOrigin::Fresh);
    }
    let target = candidates[rng.gen_range(0..candidates.len())];
    let members = &archive.population(target).expect("candidate has a population").members;
    let parent = &members[rng.gen_range(0..members.len())];
    (sampler.mutate_individual(&parent.ev.individual, rng), SampleOrigin::Mutant)
}

/// The final suite: the best test of every covered target plus the best of every
/// uncovered target with a population, without duplicate call sequences, in
/// order of the first target (by name) that selected each test.
pub fn extract_solution(archive: &Archive) -> Vec<EvaluatedIndividual> {
    let mut by_name: Vec<(&str, &TargetPopulation)> =
        archive.populations().map(|(t, p)| (t.name.as_str(), p)).collect();
    by_name.sort_by(|a, b| a.0.cmp(b.0));

    let mut seen: BTreeSet<Vec<CallKey>> = BTreeSet::new();
    let mut suite = Vec::new();
    for (_, pop) in by_name {
        let Some(best) = pop.best() else { continue };
        if seen.insert(best.ev.calls.iter().map(CallKey::from).collect()) {
            suite.push((*best.ev).clone());
        }
    }
    suite
}

/// Identity of a rendered call for deduplication.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CallKey(String, Vec<(String, String)>, Option<String>, Option<usize>);

impl From<&ConcreteHttpCall> for CallKey {
    fn from(c: &ConcreteHttpCall) -> Self {
        CallKey(
            format!("{} {}", c.verb, c.path_and_query()),
            c.headers.clone(),
            c.body.clone(),
            c.link.as_ref().map(|l| l.source_action),
        )
    }
}

enum Fatal {
    Driver(String),
    SutDown(String),
}

fn evaluate(
    ind: Individual,
    target: &SearchTarget,
    config: &SearchConfig,
    driver: &mut dyn SutDriver,
    transport: &mut dyn Transport,
    clock: &dyn Clock,
    marker: &mut String,
) -> Result<EvaluatedIndividual, Fatal> {
    let size = ind.len();
    if let Err(e) = driver.reset_state() {
        if e.is_unreachable() {
            return Err(Fatal::Driver(e.to_string()));
        }
        warn!("reset failed, skipping evaluation: {e}");
        return Ok(EvaluatedIndividual {
            individual: ind,
            fitness: FitnessValue::new(),
            results: vec![],
            calls: vec![],
            size,
        });
    }

    let report = execute(&ind, &target.base_url, &target.credentials, config.timeout_ms, transport, clock);
    if report.sut_down() {
        let e = report.failure.as_ref().map(ToString::to_string).unwrap_or_default();
        return Err(Fatal::SutDown(e));
    }

    let coverage = match driver.get_coverage(marker) {
        Ok((c, next)) => {
            *marker = next;
            c
        }
        Err(e) if e.is_unreachable() => return Err(Fatal::Driver(e.to_string())),
        Err(e) => {
            warn!("coverage unavailable for this evaluation: {e}");
            CoverageReport::default()
        }
    };

    let executed = report.results.iter().zip(&ind.actions).map(|(r, a)| (r, &*a.template));
    let status = status_targets(executed, &target.schema.templates);
    let fitness = match merge(&coverage, status.clone()) {
        Ok(f) => f,
        Err(e) => {
            warn!("discarding driver report: {e}");
            status
        }
    };
    Ok(EvaluatedIndividual { individual: ind, fitness, results: report.results, calls: report.calls, size })
}

/// Runs the configured search until the budget is spent.
///
/// The driver must already have started the SUT. The run is deterministic for a
/// fixed seed and a deterministic SUT when budgeted by evaluations.
pub fn run_search(
    target: &SearchTarget,
    config: &SearchConfig,
    driver: &mut dyn SutDriver,
    transport: &mut dyn Transport,
    clock: &dyn Clock,
    mut hooks: SearchHooks<'_>,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let sampler = Sampler::new(Arc::clone(&target.schema), target.credentials.len(), config.max_test_size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut archive = Archive::new();
    let mut marker = String::new();
    let started = clock.now_ms();
    let budget_ms = config.max_time_seconds.saturating_mul(1000);
    let mut evaluations = 0u64;
    let mut aborted = None;

    loop {
        if hooks.stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            break;
        }
        let t = match config.max_evaluations {
            Some(max) if evaluations >= max => break,
            Some(max) => evaluations as f64 / max as f64,
            None => {
                let elapsed = clock.now_ms().saturating_sub(started);
                if elapsed >= budget_ms {
                    break;
                }
                elapsed as f64 / budget_ms as f64
            }
        };

        let (ind, _) = sample_next(&archive, &sampler, config, t, &mut rng);
        match evaluate(ind, target, config, driver, transport, clock, &mut marker) {
            Ok(ev) => {
                archive.update(Arc::new(ev), config.population_limit(t));
            }
            Err(Fatal::Driver(msg)) => {
                aborted = Some(format!("driver unreachable: {msg}"));
                break;
            }
            Err(Fatal::SutDown(msg)) => {
                aborted = Some(format!("SUT is down: {msg}"));
                break;
            }
        }
        evaluations += 1;
        if let Some(cb) = hooks.on_progress.as_mut() {
            cb(&Progress { evaluations, covered_targets: archive.covered_count(), budget_used: t });
        }
    }

    let suite = extract_solution(&archive);
    let stats = SearchStats {
        evaluations,
        covered_targets: archive.covered_count(),
        total_targets: archive.total_targets(),
        faults_5xx: archive.covered().filter(|t| t.is_fault()).count(),
        elapsed_ms: clock.now_ms().saturating_sub(started),
        seed: config.seed,
    };
    Ok(SearchOutcome { suite, stats, aborted })
}
