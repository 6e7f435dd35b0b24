//! Request handling for a simulated SUT and its driver.

use std::collections::BTreeMap;

use percent_encoding::percent_decode_str;
use serde_json::{json, Value};

use crate::driver::{
    AckDto, AuthDto, CoverageDto, CoveredTarget, ErrorDto, InfoDto, SutRunDto, SutStatusDto,
};
use crate::executor::HttpResponse;
use crate::schema::{PathSegment, PathTemplate, Verb};

use super::spec::{branch_id, Predicate, SimEndpoint, SimError, SimSpec, Step, StoreOp};
use super::swagger::swagger_document;

/// Distance reported when a guard's operand is absent or has the wrong type.
pub const MISSING_DISTANCE: f64 = 1e12;

pub const DEFAULT_SIM_BASE_URL: &str = "http://sim.local";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRequest {
    pub verb: Verb,
    /// Path plus optional query string, without scheme and host.
    pub target: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReply {
    pub response: HttpResponse,
    /// Processing time the endpoint simulates.
    pub stall_ms: u64,
}

#[derive(Debug, Clone, Default)]
struct Store {
    next_id: u64,
    items: BTreeMap<u64, Value>,
}

/// A deterministic SUT plus driver: the same request sequence always yields the
/// same responses and coverage reports.
#[derive(Debug, Clone)]
pub struct SimSut {
    spec: SimSpec,
    base: String,
    routes: Vec<PathTemplate>,
    swagger: String,
    base_url: String,
    running: bool,
    stores: BTreeMap<String, Store>,
    epoch: u64,
    log: Vec<CoveredTarget>,
    calls: Vec<String>,
}

impl SimSut {
    pub fn new(spec: SimSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let base = spec.base();
        let routes = spec.endpoints.iter().map(|e| PathTemplate::parse(&e.full_path(&base))).collect();
        let swagger = swagger_document(&spec).to_string();
        let mut sim = Self {
            spec,
            base,
            routes,
            swagger,
            base_url: DEFAULT_SIM_BASE_URL.to_string(),
            running: false,
            stores: BTreeMap::new(),
            epoch: 0,
            log: Vec::new(),
            calls: Vec::new(),
        };
        sim.clear_state();
        Ok(sim)
    }

    pub fn spec(&self) -> &SimSpec {
        &self.spec
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn set_base_url(&mut self, url: &str) {
        self.base_url = url.trim_end_matches('/').to_string();
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn swagger_json(&self) -> &str {
        &self.swagger
    }

    /// API calls served since the last reset, as `VERB /path?query`.
    pub fn call_log(&self) -> &[String] {
        &self.calls
    }

    pub fn store_len(&self, store: &str) -> usize {
        self.stores.get(store).map_or(0, |s| s.items.len())
    }

    fn clear_state(&mut self) {
        self.stores = self.spec.stores.iter().map(|s| (s.clone(), Store { next_id: 1, ..Store::default() })).collect();
        self.epoch += 1;
        self.log.clear();
        self.calls.clear();
    }

    pub fn handle(&mut self, req: &SimRequest) -> SimReply {
        let (path, query) = match req.target.split_once('?') {
            Some((p, q)) => (p, q),
            None => (req.target.as_str(), ""),
        };
        let quick = |response| SimReply { response, stall_ms: 0 };
        if path == "/swagger.json" && req.verb == Verb::Get {
            return quick(reply(200, self.swagger.clone()));
        }
        if let Some(rest) = path.strip_prefix("/controller/") {
            return quick(self.controller(req.verb, rest, query, req.body.as_deref()));
        }
        self.api(req, path, query)
    }

    fn controller(&mut self, verb: Verb, op: &str, query: &str, body: Option<&str>) -> HttpResponse {
        match (verb, op) {
            (Verb::Get, "info") => {
                let dto = InfoDto {
                    is_sut_running: self.running,
                    base_url_of_sut: self.base_url.clone(),
                    swagger_json_url: format!("{}/swagger.json", self.base_url),
                    package_prefixes: format!("sim.{}", self.spec.name),
                    auth_info: self.spec.auth.iter().map(AuthDto::from).collect(),
                };
                json_reply(200, &dto)
            }
            (Verb::Post, "sut") => match body.map(serde_json::from_str::<SutRunDto>) {
                Some(Ok(SutRunDto { running })) => {
                    if running && !self.running {
                        self.clear_state();
                    }
                    self.running = running;
                    json_reply(
                        200,
                        &SutStatusDto { is_sut_running: self.running, base_url_of_sut: self.base_url.clone() },
                    )
                }
                _ => error_reply(400, "expected {\"running\": bool}"),
            },
            (Verb::Post, "reset") => {
                self.clear_state();
                json_reply(200, &AckDto { ok: true })
            }
            (Verb::Get, "targets") => {
                let since = query_pairs(query)
                    .into_iter()
                    .find(|(k, _)| k == "since")
                    .map(|(_, v)| v)
                    .unwrap_or_default();
                let start = match since.split_once(':') {
                    Some((e, o)) if e.parse() == Ok(self.epoch) => {
                        o.parse::<usize>().ok().filter(|&o| o <= self.log.len()).unwrap_or(0)
                    }
                    _ => 0,
                };
                let dto = CoverageDto {
                    marker: format!("{}:{}", self.epoch, self.log.len()),
                    targets: aggregate(&self.log[start..]),
                };
                json_reply(200, &dto)
            }
            _ => error_reply(404, &format!("unknown controller operation {verb} /controller/{op}")),
        }
    }

    fn api(&mut self, req: &SimRequest, path: &str, query: &str) -> SimReply {
        let quick = |response| SimReply { response, stall_ms: 0 };
        if !self.running {
            return quick(error_reply(503, "SUT is not running"));
        }
        let segments: Vec<String> = path
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
            .collect();
        let mut path_matched = false;
        let mut found = None;
        for (i, route) in self.routes.iter().enumerate() {
            if let Some(bound) = match_route(route, &segments) {
                path_matched = true;
                if self.spec.endpoints[i].verb == req.verb {
                    found = Some((i, bound));
                    break;
                }
            }
        }
        let Some((index, path_values)) = found else {
            let status = if path_matched { 405 } else { 404 };
            return quick(error_reply(status, &format!("no route for {} {path}", req.verb)));
        };
        self.calls.push(format!("{} {}", req.verb, req.target));

        let endpoint = self.spec.endpoints[index].clone();
        let stall_ms = endpoint.stall_ms;
        let reply_with = |response| SimReply { response, stall_ms };

        if endpoint.requires_auth && !self.authorized(&req.headers) {
            return reply_with(error_reply(401, "missing or invalid credentials"));
        }
        let body = match req.body.as_deref().filter(|b| !b.trim().is_empty()) {
            Some(text) => match serde_json::from_str::<Value>(text) {
                Ok(v) => Some(v),
                Err(_) => return reply_with(error_reply(400, "malformed JSON body")),
            },
            None => None,
        };
        if body.is_none() && endpoint.body.as_ref().is_some_and(|b| b.required) {
            return reply_with(error_reply(400, "request body is required"));
        }

        let input = Input {
            endpoint: &endpoint,
            path: path_values,
            query: query_pairs(query),
            headers: &req.headers,
            body,
        };
        let response = match self.run(&endpoint.program, &input) {
            Some(r) => r,
            None => value_reply(endpoint.fallback.status, &endpoint.fallback.body),
        };
        reply_with(response)
    }

    fn authorized(&self, headers: &[(String, String)]) -> bool {
        self.spec.auth.iter().any(|cred| {
            cred.headers.iter().all(|(name, value)| {
                headers.iter().any(|(n, v)| n.eq_ignore_ascii_case(name) && v == value)
            })
        })
    }

    fn run(&mut self, steps: &[Step], input: &Input<'_>) -> Option<HttpResponse> {
        for step in steps {
            if let Some(p) = &step.when {
                let (holds, d_true, d_false) = evaluate(p, input);
                self.log.push(CoveredTarget::branch(
                    branch_id(&step.label, true),
                    holds,
                    (!holds).then_some(d_true),
                ));
                self.log.push(CoveredTarget::branch(
                    branch_id(&step.label, false),
                    !holds,
                    holds.then_some(d_false),
                ));
                if !holds {
                    continue;
                }
            }
            self.log.push(CoveredTarget::statement(step.label.clone(), true));
            if let Some(op) = &step.store {
                return Some(self.apply(op, input));
            }
            if let Some(r) = &step.respond {
                return Some(value_reply(r.status, &r.body));
            }
            if let Some(r) = self.run(&step.then, input) {
                return Some(r);
            }
        }
        None
    }

    fn apply(&mut self, op: &StoreOp, input: &Input<'_>) -> HttpResponse {
        let store = self.stores.get_mut(op.store()).expect("stores validated");
        let id = |r: &str| input.lookup(r).and_then(|v| v.as_number()).filter(|n| *n >= 0.0 && n.fract() == 0.0);
        let key = |r: &str| id(r).map(|n| n as u64);
        match op {
            StoreOp::Create { .. } => {
                let k = store.next_id;
                store.next_id += 1;
                store.items.insert(k, input.body.clone().unwrap_or_else(|| json!({})));
                value_reply(201, &json!({ "id": k }))
            }
            StoreOp::Read { id, .. } => match key(id).and_then(|k| store.items.get(&k).map(|v| (k, v))) {
                Some((k, v)) => {
                    let mut v = v.clone();
                    if let Value::Object(m) = &mut v {
                        m.insert("id".into(), json!(k));
                    }
                    value_reply(200, &v)
                }
                None => error_reply(404, "not found"),
            },
            StoreOp::Delete { id, .. } => match key(id).and_then(|k| store.items.remove(&k)) {
                Some(_) => reply(204, String::new()),
                None => error_reply(404, "not found"),
            },
            StoreOp::Touch { id, .. } => match key(id).filter(|k| store.items.contains_key(k)) {
                Some(_) => reply(204, String::new()),
                None => error_reply(404, "not found"),
            },
            StoreOp::List { .. } => {
                let all: Vec<Value> = store
                    .items
                    .iter()
                    .map(|(k, v)| {
                        let mut v = v.clone();
                        if let Value::Object(m) = &mut v {
                            m.insert("id".into(), json!(k));
                        }
                        v
                    })
                    .collect();
                value_reply(200, &Value::Array(all))
            }
        }
    }

    /// Base path of the simulated API.
    pub fn base_path(&self) -> &str {
        &self.base
    }
}

/// Folds a slice of the coverage log into one entry per target, in order of
/// first appearance: covered if any hit covered it, else the smallest distance.
fn aggregate(log: &[CoveredTarget]) -> Vec<CoveredTarget> {
    let mut out: Vec<CoveredTarget> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for t in log {
        match index.get(t.id.as_str()) {
            Some(&i) => {
                let cur = &mut out[i];
                if cur.covered {
                    continue;
                }
                if t.covered {
                    cur.covered = true;
                    cur.distance = None;
                } else if let (Some(a), Some(b)) = (cur.distance, t.distance) {
                    cur.distance = Some(a.min(b));
                }
            }
            None => {
                index.insert(&t.id, out.len());
                out.push(t.clone());
            }
        }
    }
    out
}

fn match_route(route: &PathTemplate, segments: &[String]) -> Option<BTreeMap<String, String>> {
    if route.segments().len() != segments.len() {
        return None;
    }
    let mut bound = BTreeMap::new();
    for (seg, part) in route.segments().iter().zip(segments) {
        match seg {
            PathSegment::Literal(l) if l == part => {}
            PathSegment::Literal(_) => return None,
            PathSegment::Placeholder(name) => {
                bound.insert(name.clone(), part.clone());
            }
        }
    }
    Some(bound)
}

fn query_pairs(query: &str) -> Vec<(String, String)> {
    query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            let decode = |s: &str| percent_decode_str(&s.replace('+', " ")).decode_utf8_lossy().into_owned();
            (decode(k), decode(v))
        })
        .collect()
}

struct Input<'a> {
    endpoint: &'a SimEndpoint,
    path: BTreeMap<String, String>,
    query: Vec<(String, String)>,
    headers: &'a [(String, String)],
    body: Option<Value>,
}

enum Operand<'a> {
    Raw(&'a str),
    Json(&'a Value),
}

impl Operand<'_> {
    fn as_number(&self) -> Option<f64> {
        match self {
            Operand::Raw(s) => s.trim().parse::<f64>().ok().filter(|n| n.is_finite()),
            Operand::Json(Value::Number(n)) => n.as_f64(),
            Operand::Json(Value::String(s)) => s.trim().parse::<f64>().ok().filter(|n| n.is_finite()),
            Operand::Json(_) => None,
        }
    }

    fn as_text(&self) -> Option<&str> {
        match self {
            Operand::Raw(s) => Some(s),
            Operand::Json(Value::String(s)) => Some(s),
            Operand::Json(_) => None,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Operand::Json(Value::Array(a)) => Some(a.len()),
            other => other.as_text().map(|s| s.chars().count()),
        }
    }
}

impl Input<'_> {
    fn lookup(&self, r: &str) -> Option<Operand<'_>> {
        let (head, rest) = r.split_once('.').unwrap_or((r, ""));
        match head {
            "path" => self.path.get(rest).map(|s| Operand::Raw(s)),
            "query" => self.query.iter().find(|(k, _)| k == rest).map(|(_, v)| Operand::Raw(v)),
            "header" => self
                .headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(rest))
                .map(|(_, v)| Operand::Raw(v)),
            "body" => {
                let mut v = self.body.as_ref()?;
                for field in rest.split('.').filter(|f| !f.is_empty()) {
                    v = v.as_object()?.get(field)?;
                }
                (!v.is_null()).then_some(Operand::Json(v))
            }
            _ => {
                debug_assert!(false, "{}: unchecked reference {r}", self.endpoint.label);
                None
            }
        }
    }
}

/// Character-wise distance between two strings: per-position code differences
/// plus a large penalty per missing or extra character.
fn string_distance(a: &str, b: &str) -> f64 {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let common: f64 = a.iter().zip(&b).map(|(x, y)| (*x as i64 - *y as i64).unsigned_abs() as f64).sum();
    common + 128.0 * a.len().abs_diff(b.len()) as f64
}

/// Returns whether `p` holds, with the distances to making it true and false.
fn evaluate(p: &Predicate, input: &Input<'_>) -> (bool, f64, f64) {
    let operand = input.lookup(p.param());
    match p {
        Predicate::Present { .. } => {
            let present = operand.is_some();
            (present, 1.0, 1.0)
        }
        Predicate::Eq { value, .. } => {
            let d = match (value, operand) {
                (_, None) => MISSING_DISTANCE,
                (Value::Number(n), Some(o)) => match (n.as_f64(), o.as_number()) {
                    (Some(want), Some(got)) => (got - want).abs(),
                    _ => MISSING_DISTANCE,
                },
                (Value::String(want), Some(o)) => match o.as_text() {
                    Some(got) => string_distance(got, want),
                    None => MISSING_DISTANCE,
                },
                (Value::Bool(want), Some(o)) => match &o {
                    Operand::Json(Value::Bool(got)) => f64::from(u8::from(got != want)),
                    Operand::Raw(s) => f64::from(u8::from(s.parse::<bool>().ok() != Some(*want))),
                    _ => MISSING_DISTANCE,
                },
                (_, Some(_)) => MISSING_DISTANCE,
            };
            (d == 0.0, d, 1.0)
        }
        Predicate::Lt { value, .. } => match operand.and_then(|o| o.as_number()) {
            Some(got) if got < *value => (true, 0.0, value - got),
            Some(got) => (false, got - value + 1.0, 0.0),
            None => (false, MISSING_DISTANCE, 0.0),
        },
        Predicate::LenEq { len, .. } => match operand.and_then(|o| o.len()) {
            Some(got) => {
                let d = got.abs_diff(*len) as f64;
                (d == 0.0, d, 1.0)
            }
            None => (false, MISSING_DISTANCE, 0.0),
        },
    }
}

fn reply(status: u16, body: String) -> HttpResponse {
    let headers = if body.is_empty() {
        vec![]
    } else {
        vec![("Content-Type".to_string(), "application/json".to_string())]
    };
    HttpResponse { status, headers, body }
}

fn value_reply(status: u16, body: &Value) -> HttpResponse {
    match body {
        Value::Null => reply(status, String::new()),
        v => reply(status, v.to_string()),
    }
}

fn json_reply<T: serde::Serialize>(status: u16, dto: &T) -> HttpResponse {
    reply(status, serde_json::to_string(dto).expect("plain DTO"))
}

fn error_reply(status: u16, message: &str) -> HttpResponse {
    json_reply(status, &ErrorDto { error: message.to_string() })
}
