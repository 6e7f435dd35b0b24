//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use serde_json::json;

use evorest::clock::StepClock;
use evorest::driver::SutDriver;
use evorest::schema::{ApiSchema, Verb};
use evorest::search::{run_search, Algorithm, SearchConfig, SearchHooks, SearchOutcome, SearchTarget};
use evorest::sim::{local_pair, SharedSim, SimEndpoint, SimResponse, SimSpec, SimSut};
use evorest::{parse_schema, TargetId, TargetKind};

/// Evaluation-budget config; wall-clock time plays no part.
pub fn config(seed: u64, evaluations: u64, algorithm: Algorithm) -> SearchConfig {
    SearchConfig { max_evaluations: Some(evaluations), seed, algorithm, ..SearchConfig::default() }
}

/// Searches `spec` in process with a deterministic clock.
pub fn local_run(spec: SimSpec, config: &SearchConfig) -> (SearchOutcome, SharedSim) {
    let sim = SimSut::new(spec).expect("valid spec");
    let (shared, mut driver, mut transport) = local_pair(sim);
    let base_url = driver.start_sut().expect("sim starts");
    let info = driver.get_info().expect("sim info");
    let schema = Arc::new(parse_schema(shared.borrow().swagger_json()).expect("sim swagger parses"));
    let target = SearchTarget { schema, base_url, credentials: info.auth_info };
    let clock = StepClock::new(1);
    let outcome = run_search(&target, config, &mut driver, &mut transport, &clock, SearchHooks::default())
        .expect("search runs");
    (outcome, shared)
}

pub fn schema_of(spec: &SimSpec) -> Arc<ApiSchema> {
    Arc::new(ApiSchema { base_path: spec.base(), templates: spec.templates(), raw_title: spec.name.clone() })
}

pub fn statement(name: &str) -> TargetId {
    TargetId::new(TargetKind::Statement, name)
}

pub fn covers(outcome: &SearchOutcome, target: &TargetId) -> bool {
    outcome.suite.iter().any(|ev| ev.fitness.get(target) >= 1.0)
}

/// A bare endpoint answering `200 {}`.
pub fn endpoint(label: &str, verb: Verb, path: &str) -> SimEndpoint {
    SimEndpoint {
        label: label.into(),
        verb,
        path: path.into(),
        params: vec![],
        body: None,
        requires_auth: false,
        stall_ms: 0,
        program: vec![],
        fallback: SimResponse::new(200, json!({})),
    }
}

pub fn spec(name: &str, endpoints: Vec<SimEndpoint>) -> SimSpec {
    SimSpec { name: name.into(), base_path: String::new(), auth: vec![], stores: vec![], endpoints }
}
