//! Browser demo: runs the search against an in-memory sim SUT, plots the
//! branch heuristic and walks a mutation chain.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use evorest::clock::StepClock;
use evorest::driver::SutDriver;
use evorest::fitness::{branch_heuristic, normalize_distance};
use evorest::genome::render;
use evorest::search::{run_search, SearchHooks, SearchTarget};
use evorest::sim::{by_name, local_pair, SimSut};
use evorest::suite::{neutral_tests, render_java};
use evorest::{parse_schema, Algorithm, Sampler, SearchConfig};

/// Largest budget the page accepts, to keep the tab responsive.
pub const MAX_DEMO_EVALUATIONS: u64 = 20_000;

#[derive(Serialize)]
struct DemoRun {
    stats: serde_json::Value,
    covered: Vec<String>,
    neutral: serde_json::Value,
    java: String,
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Searches the named canned sim for `evaluations` tests; returns JSON with the
/// stats, the covered target names, the NEUTRAL_JSON suite and the JUnit 5 source.
pub fn demo(sut: &str, seed: u64, evaluations: u64, algorithm: &str) -> Result<String, String> {
    if evaluations > MAX_DEMO_EVALUATIONS {
        return Err(format!(
            "at most {MAX_DEMO_EVALUATIONS} evaluations in the browser"
        ));
    }
    let spec = by_name(sut).map_err(|e| e.to_string())?;
    let algorithm: Algorithm = algorithm.parse()?;
    let sim = SimSut::new(spec).map_err(|e| e.to_string())?;
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().map_err(|e| e.to_string())?;
    let info = driver.get_info().map_err(|e| e.to_string())?;
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).map_err(|e| e.to_string())?);
    let target = SearchTarget {
        schema,
        base_url,
        credentials: info.auth_info,
    };
    let config = SearchConfig {
        max_evaluations: Some(evaluations),
        seed,
        algorithm,
        ..SearchConfig::default()
    };
    let outcome = run_search(
        &target,
        &config,
        &mut driver,
        &mut transport,
        &StepClock::new(1),
        SearchHooks::default(),
    )
    .map_err(|e| e.to_string())?;
    let mut covered: Vec<String> = outcome
        .suite
        .iter()
        .flat_map(|ev| ev.fitness.covered().map(|t| t.name.clone()))
        .collect();
    covered.sort();
    covered.dedup();
    let run = DemoRun {
        stats: serde_json::from_str(&outcome.stats.to_json()).map_err(|e| e.to_string())?,
        covered,
        neutral: serde_json::to_value(neutral_tests(&outcome.suite)).map_err(|e| e.to_string())?,
        java: render_java(&outcome.suite, true, "DemoTest").map_err(|e| e.to_string())?,
    };
    json(&run)
}

/// `[d, normalized, heuristic]` rows for `points` distances spread over `[0, max_d]`.
pub fn curve(max_d: f64, points: usize) -> Result<String, String> {
    if !(max_d.is_finite() && max_d > 0.0) || points < 2 {
        return Err("need max_d > 0 and at least 2 points".into());
    }
    let rows = (0..points)
        .map(|i| {
            let d = max_d * i as f64 / (points - 1) as f64;
            Ok([d, normalize_distance(d)?, branch_heuristic(d)?])
        })
        .collect::<Result<Vec<_>, evorest::fitness::FitnessError>>()
        .map_err(|e| e.to_string())?;
    json(&rows)
}

#[derive(Serialize)]
struct WalkStep {
    step: usize,
    calls: Vec<String>,
}

/// Samples one test for the named sim and mutates it `steps` times, returning
/// each generation as rendered HTTP calls.
pub fn walk(sut: &str, seed: u64, steps: usize) -> Result<String, String> {
    let spec = by_name(sut).map_err(|e| e.to_string())?;
    let auth = spec.auth.len();
    let schema = Arc::new(
        parse_schema(SimSut::new(spec).map_err(|e| e.to_string())?.swagger_json())
            .map_err(|e| e.to_string())?,
    );
    let sampler = Sampler::new(schema, auth, 10).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ind = sampler.sample_individual(&mut rng);
    let mut out = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        if step > 0 {
            ind = sampler.mutate_individual(&ind, &mut rng);
        }
        let calls = render(&ind, "", &Default::default())
            .iter()
            .map(|c| format!("{} {}", c.verb, c.path_and_query()))
            .collect();
        out.push(WalkStep { step, calls });
    }
    json(&out)
}

#[wasm_bindgen]
pub fn run_demo(
    sut: &str,
    seed: u32,
    evaluations: u32,
    algorithm: &str,
) -> Result<String, JsError> {
    demo(sut, u64::from(seed), u64::from(evaluations), algorithm).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn heuristic_curve(max_d: f64, points: usize) -> Result<String, JsError> {
    curve(max_d, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mutation_walk(sut: &str, seed: u32, steps: usize) -> Result<String, JsError> {
    walk(sut, u64::from(seed), steps).map_err(|e| JsError::new(&e))
}
