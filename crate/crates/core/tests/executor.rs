mod common;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use common::{endpoint, schema_of, spec};
use evorest::clock::StepClock;
use evorest::driver::SutDriver;
use evorest::executor::{execute, resolve_location, HttpRequest, HttpResponse, Transport, TransportError};
use evorest::genome::{Gene, ParamLocation, ResourceLink, Sampler};
use evorest::schema::{ParamKind, ParamSpec, Verb};
use evorest::sim::{by_name, local_pair, LocalTransport, ParamIn, SimParam, SimSpec, SimSut, Step, StoreOp};
use evorest::{AuthCredential, Individual};

/// Records every request before passing it on.
struct Recording {
    inner: LocalTransport,
    sent: Vec<HttpRequest>,
}

impl Transport for Recording {
    fn send(&mut self, request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
        self.sent.push(request.clone());
        self.inner.send(request, timeout)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn index_of(sampler: &Sampler, verb: Verb, path: &str) -> usize {
    sampler.schema().templates.iter().position(|t| t.verb == verb && t.full_path() == path).unwrap()
}

fn set_id(ind: &mut Individual, action: usize, id: i64) {
    for g in &mut ind.actions[action].genes {
        if g.location == ParamLocation::Path && g.name == "id" {
            if let Gene::Int64 { value, .. } = &mut g.gene {
                *value = id;
            }
        }
    }
}

/// `POST /r` creates after a stall, `GET /health` answers, `GET /r/{id}` reads.
fn stalling_spec() -> SimSpec {
    let mut create = endpoint("create_r", Verb::Post, "/r");
    create.stall_ms = 5_000;
    create.program = vec![Step::new("create_r_store").store(StoreOp::Create { store: "r".into() })];
    let health = endpoint("health", Verb::Get, "/health");
    let mut read = endpoint("read_r", Verb::Get, "/r/{id}");
    read.params = vec![SimParam { location: ParamIn::Path, spec: ParamSpec::new("id", ParamKind::Int64) }];
    read.program = vec![Step::new("read_r_load").store(StoreOp::Read { store: "r".into(), id: "path.id".into() })];
    let mut s = spec("stall", vec![create, health, read]);
    s.stores = vec!["r".into()];
    s
}

#[test]
fn timeout_in_the_middle_keeps_going_with_the_fallback_id() {
    let s = stalling_spec();
    let sampler = Sampler::new(schema_of(&s), 0, 10).unwrap();
    let mut r = rng(1);
    let health = index_of(&sampler, Verb::Get, "/health");
    let create = index_of(&sampler, Verb::Post, "/r");
    let read = index_of(&sampler, Verb::Get, "/r/{id}");
    let mut dependent = sampler.sample_action(read, &mut r);
    dependent.path_override = Some(ResourceLink { source_action: 1, creation_path: "/r".into() });
    let mut ind = Individual {
        actions: vec![sampler.sample_action(health, &mut r), sampler.sample_action(create, &mut r), dependent],
        auth_index: None,
    };
    set_id(&mut ind, 2, 12345);
    ind.validate(10, 0).unwrap();

    let (sim, mut driver, transport) = local_pair(SimSut::new(s).unwrap());
    let base = driver.start_sut().unwrap();
    let mut rec = Recording { inner: transport, sent: vec![] };
    let report = execute(&ind, &base, &[], 2000, &mut rec, &StepClock::new(1));

    assert_eq!(report.results.len(), 3);
    assert!(report.failure.is_none());
    assert_eq!(report.results[0].status, Some(200));
    assert!(report.results[1].timed_out);
    assert_eq!(report.results[1].status, None);
    assert_eq!(report.calls[2].path, "/r/12345");
    assert_eq!(report.results[2].status, Some(404));
    assert_eq!(sim.borrow().call_log(), ["GET /health", "POST /r", "GET /r/12345"]);
}

#[test]
fn creation_location_feeds_the_linked_call() {
    let s = by_name("crud-chain").unwrap();
    let sampler = Sampler::new(schema_of(&s), 1, 10).unwrap();
    let mut r = rng(2);
    let create = index_of(&sampler, Verb::Post, "/api/v1/activities");
    let delete = index_of(&sampler, Verb::Delete, "/api/v1/activities/{id}");
    let mut first = sampler.sample_action(create, &mut r);
    first.genes[0].gene = Gene::Object {
        fields: vec![
            ("name".into(), Gene::Str { value: "JIg".into(), min_len: 0, max_len: 32 }),
            ("age_min".into(), Gene::Int32 { value: 3, min: 0, max: 99 }),
        ],
    };
    let mut second = sampler.sample_action(delete, &mut r);
    second.path_override =
        Some(ResourceLink { source_action: 0, creation_path: "/api/v1/activities".into() });
    let mut ind = Individual { actions: vec![first, second], auth_index: Some(0) };
    set_id(&mut ind, 1, -324163273);

    let (_, mut driver, transport) = local_pair(SimSut::new(s.clone()).unwrap());
    let base = driver.start_sut().unwrap();
    let mut rec = Recording { inner: transport, sent: vec![] };
    let report = execute(&ind, &base, &s.auth, 2000, &mut rec, &StepClock::new(1));

    assert_eq!(report.results[0].status, Some(201));
    assert_eq!(report.results[0].extracted_location.as_deref(), Some("/api/v1/activities/1"));
    assert_eq!(report.calls[1].path, "/api/v1/activities/1");
    let link = report.calls[1].link.as_ref().unwrap();
    assert!(link.resolved);
    assert_eq!(link.unresolved_path, "/api/v1/activities/-324163273");
    assert_eq!(report.results[1].status, Some(204));
    for req in &rec.sent {
        assert!(req.headers.iter().any(|(n, v)| n == "Authorization" && v == "ApiKey administrator"));
    }
}

#[test]
fn anonymous_individuals_send_no_authorization_header() {
    let s = by_name("crud-chain").unwrap();
    let sampler = Sampler::new(schema_of(&s), 1, 10).unwrap();
    let (_, mut driver, transport) = local_pair(SimSut::new(s.clone()).unwrap());
    let base = driver.start_sut().unwrap();
    let mut rec = Recording { inner: transport, sent: vec![] };
    let mut r = rng(3);
    for _ in 0..200 {
        let mut ind = sampler.sample_individual(&mut r);
        ind.auth_index = None;
        driver.reset_state().unwrap();
        execute(&ind, &base, &s.auth, 2000, &mut rec, &StepClock::new(1));
    }
    assert!(!rec.sent.is_empty());
    assert!(rec.sent.iter().all(|req| !req.headers.iter().any(|(n, _)| n.eq_ignore_ascii_case("authorization"))));
}

#[test]
fn calls_run_in_action_order_and_repeat_identically_after_reset() {
    let s = by_name("crud-chain").unwrap();
    let sampler = Sampler::new(schema_of(&s), 1, 10).unwrap();
    let (sim, mut driver, mut transport) = local_pair(SimSut::new(s.clone()).unwrap());
    let base = driver.start_sut().unwrap();
    let mut r = rng(4);
    for _ in 0..100 {
        let ind = sampler.sample_individual(&mut r);
        driver.reset_state().unwrap();
        let first = execute(&ind, &base, &s.auth, 2000, &mut transport, &StepClock::new(1));
        let expected: Vec<String> =
            first.calls.iter().map(|c| format!("{} {}", c.verb, c.path_and_query())).collect();
        assert_eq!(sim.borrow().call_log(), expected.as_slice());

        driver.reset_state().unwrap();
        let second = execute(&ind, &base, &s.auth, 2000, &mut transport, &StepClock::new(1));
        let statuses = |rep: &evorest::executor::ExecutionReport| -> Vec<Option<u16>> {
            rep.results.iter().map(|x| x.status).collect()
        };
        assert_eq!(statuses(&first), statuses(&second));
    }
}

/// Fails with `Refused` from the given call on.
struct DownAfter {
    inner: LocalTransport,
    calls_left: usize,
}

impl Transport for DownAfter {
    fn send(&mut self, request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
        if self.calls_left == 0 {
            return Err(TransportError::Refused("connection refused".into()));
        }
        self.calls_left -= 1;
        self.inner.send(request, timeout)
    }
}

#[test]
fn refused_connection_stops_execution() {
    let s = spec("one", vec![endpoint("ping", Verb::Get, "/ping")]);
    let sampler = Sampler::new(schema_of(&s), 0, 10).unwrap();
    let action = || sampler.sample_action(0, &mut rng(0));
    let ind = Individual { actions: vec![action(), action(), action()], auth_index: None };
    let (_, mut driver, transport) = local_pair(SimSut::new(s).unwrap());
    let base = driver.start_sut().unwrap();
    let mut down = DownAfter { inner: transport, calls_left: 1 };
    let report = execute(&ind, &base, &[], 2000, &mut down, &StepClock::new(1));
    assert_eq!(report.results.len(), 1);
    assert!(report.sut_down());
}

#[test]
fn location_header_wins_over_body_id() {
    let response = HttpResponse {
        status: 201,
        headers: vec![("Location".into(), "http://h/api/v1/activities/9".into())],
        body: json!({"id": 3}).to_string(),
    };
    let (loc, from_header) =
        evorest::executor::extract_location("/api/v1/activities", &response).unwrap();
    assert_eq!(loc, "/api/v1/activities/9");
    assert!(from_header);
    let body_only = HttpResponse { status: 201, headers: vec![], body: json!({"id": 3}).to_string() };
    assert_eq!(
        evorest::executor::extract_location("/api/v1/activities", &body_only),
        Some(("/api/v1/activities/3".to_string(), false))
    );
}

#[test]
fn resolve_location_oracles() {
    assert_eq!(
        resolve_location("/api/v1/activities/77", "/api/v1/activities/-324163273/rating", "/api/v1/activities")
            .unwrap(),
        "/api/v1/activities/77/rating"
    );
    assert_eq!(resolve_location("/r/9", "/r/5", "/r").unwrap(), "/r/9");
    assert!(resolve_location("/r/9", "/other/5/x", "/r").is_err());
}

#[test]
fn credentials_without_auth_choice_are_ignored() {
    let cred = AuthCredential { label: "a".into(), headers: vec![("X-Key".into(), "k".into())] };
    let s = spec("one", vec![endpoint("ping", Verb::Get, "/ping")]);
    let sampler = Sampler::new(schema_of(&s), 1, 1).unwrap();
    let ind = Individual { actions: vec![sampler.sample_action(0, &mut rng(0))], auth_index: None };
    let (_, mut driver, transport) = local_pair(SimSut::new(s).unwrap());
    let base = driver.start_sut().unwrap();
    let mut rec = Recording { inner: transport, sent: vec![] };
    let report = execute(&ind, &base, &[cred], 2000, &mut rec, &StepClock::new(1));
    assert_eq!(report.calls[0].auth_label, None);
    assert!(!rec.sent[0].headers.iter().any(|(n, _)| n == "X-Key"));
}
