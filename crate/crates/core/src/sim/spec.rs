//! Declarative description of a simulated SUT.
//!
//! Handlers are data: each endpoint runs a list of guarded [`Step`]s. A step
//! whose guard holds hits the statement target named by its label, may touch a
//! store, may respond, and then runs its nested steps. Guards also report a
//! pair of branch targets with distances, so specs serialize to plain JSON.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::driver::AuthCredential;
use crate::schema::{ActionTemplate, ParamKind, ParamSpec, PathTemplate, Verb};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid sim spec: {0}")]
    Invalid(String),
    #[error("cannot read sim spec: {0}")]
    Io(String),
    #[error("unknown canned spec {0:?} (expected crud-chain, needle or faulty)")]
    UnknownSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub name: String,
    #[serde(default)]
    pub base_path: String,
    #[serde(default)]
    pub auth: Vec<AuthCredential>,
    #[serde(default)]
    pub stores: Vec<String>,
    pub endpoints: Vec<SimEndpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamIn {
    Path,
    Query,
    Header,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParam {
    #[serde(rename = "in")]
    pub location: ParamIn,
    #[serde(flatten)]
    pub spec: ParamSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResponse {
    pub status: u16,
    #[serde(default)]
    pub body: Value,
}

impl SimResponse {
    pub fn new(status: u16, body: Value) -> Self {
        Self { status, body }
    }
}

fn default_fallback() -> SimResponse {
    SimResponse::new(200, Value::Object(Default::default()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEndpoint {
    /// Unique name; also the operation id in the generated document.
    pub label: String,
    pub verb: Verb,
    /// Path template relative to the API's base path, e.g. `/activities/{id}`.
    pub path: String,
    #[serde(default)]
    pub params: Vec<SimParam>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<ParamSpec>,
    /// Requests must carry the headers of one of the configured credentials.
    #[serde(default)]
    pub requires_auth: bool,
    /// Simulated processing time.
    #[serde(default)]
    pub stall_ms: u64,
    pub program: Vec<Step>,
    /// Response when no step responds.
    #[serde(default = "default_fallback")]
    pub fallback: SimResponse,
}

/// Reference to a request value: `path.<name>`, `query.<name>`, `header.<name>`,
/// or `body` / `body.<field>.<field>...`.
pub type ParamRef = String;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Predicate {
    /// Numeric or string equality.
    Eq { param: ParamRef, value: Value },
    /// Numeric `param < value`.
    Lt { param: ParamRef, value: f64 },
    /// String length (or array size) equality.
    LenEq { param: ParamRef, len: usize },
    Present { param: ParamRef },
}

impl Predicate {
    pub fn param(&self) -> &str {
        match self {
            Predicate::Eq { param, .. }
            | Predicate::Lt { param, .. }
            | Predicate::LenEq { param, .. }
            | Predicate::Present { param } => param,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StoreOp {
    /// Stores the request body under a fresh id and responds 201 `{"id": k}`.
    Create { store: String },
    /// 200 with the stored value, or 404.
    Read { store: String, id: ParamRef },
    /// 204, or 404.
    Delete { store: String, id: ParamRef },
    /// 204 if the resource exists, or 404.
    Touch { store: String, id: ParamRef },
    /// 200 with every stored value in id order.
    List { store: String },
}

impl StoreOp {
    pub fn store(&self) -> &str {
        match self {
            StoreOp::Create { store }
            | StoreOp::Read { store, .. }
            | StoreOp::Delete { store, .. }
            | StoreOp::Touch { store, .. }
            | StoreOp::List { store } => store,
        }
    }

    fn id_ref(&self) -> Option<&str> {
        match self {
            StoreOp::Read { id, .. } | StoreOp::Delete { id, .. } | StoreOp::Touch { id, .. } => Some(id),
            StoreOp::Create { .. } | StoreOp::List { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Statement target hit when the step runs; guards also yield
    /// `Branch_<label>_true` and `Branch_<label>_false`.
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<Predicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store: Option<StoreOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub respond: Option<SimResponse>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub then: Vec<Step>,
}

impl Step {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), when: None, store: None, respond: None, then: Vec::new() }
    }

    pub fn when(mut self, p: Predicate) -> Self {
        self.when = Some(p);
        self
    }

    pub fn store(mut self, op: StoreOp) -> Self {
        self.store = Some(op);
        self
    }

    pub fn respond(mut self, status: u16, body: Value) -> Self {
        self.respond = Some(SimResponse::new(status, body));
        self
    }

    pub fn then(mut self, steps: Vec<Step>) -> Self {
        self.then = steps;
        self
    }
}

/// Name of the branch target for outcome `taken` of the guard on `label`.
pub fn branch_id(label: &str, taken: bool) -> String {
    format!("Branch_{label}_{taken}")
}

/// Applies the conventions the document parser uses: array elements are named
/// `item` and always required, and the element spec carries no optionality.
fn normalized(spec: &ParamSpec) -> ParamSpec {
    let kind = match &spec.kind {
        ParamKind::Object { fields } => ParamKind::Object { fields: fields.iter().map(normalized).collect() },
        ParamKind::Array { element } => {
            let mut e = normalized(element);
            e.name = "item".into();
            e.required = true;
            ParamKind::Array { element: Box::new(e) }
        }
        other => other.clone(),
    };
    ParamSpec { name: spec.name.clone(), kind, required: spec.required, constraints: spec.constraints.clone() }
}

impl SimEndpoint {
    pub fn full_path(&self, base_path: &str) -> String {
        let p = PathTemplate::parse(&self.path).to_string();
        if base_path.is_empty() {
            p
        } else if p == "/" {
            base_path.to_string()
        } else {
            format!("{base_path}{p}")
        }
    }

    fn params_in(&self, location: ParamIn) -> impl Iterator<Item = &ParamSpec> {
        self.params.iter().filter(move |p| p.location == location).map(|p| &p.spec)
    }

    /// True when some step creates a resource.
    pub fn creates(&self) -> bool {
        fn any(steps: &[Step]) -> bool {
            steps.iter().any(|s| matches!(s.store, Some(StoreOp::Create { .. })) || any(&s.then))
        }
        any(&self.program)
    }

    /// The template the generated document describes for this endpoint.
    pub fn template(&self, base_path: &str) -> ActionTemplate {
        let path = PathTemplate::parse(&self.path);
        let path_params = path
            .placeholders()
            .map(|ph| {
                let mut spec = self
                    .params_in(ParamIn::Path)
                    .find(|p| p.name == ph)
                    .map(normalized)
                    .unwrap_or_else(|| ParamSpec::new(ph, ParamKind::String));
                spec.required = true;
                spec
            })
            .collect();
        ActionTemplate {
            verb: self.verb,
            base_path: base_path.to_string(),
            path,
            path_params,
            query_params: self.params_in(ParamIn::Query).map(normalized).collect(),
            header_params: self.params_in(ParamIn::Header).map(normalized).collect(),
            body_spec: self.body.as_ref().filter(|_| self.verb.permits_body()).map(normalized),
            produces_location: self.verb == Verb::Post && self.creates(),
        }
    }
}

impl SimSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: SimSpec = serde_json::from_str(text).map_err(|e| SimError::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec is plain data")
    }

    /// Normalized base path: empty or starting with `/`, no trailing slash.
    pub fn base(&self) -> String {
        let trimmed = self.base_path.trim().trim_end_matches('/');
        if trimmed.is_empty() {
            String::new()
        } else if trimmed.starts_with('/') {
            trimmed.to_string()
        } else {
            format!("/{trimmed}")
        }
    }

    /// Templates in the order the generated document lists them: grouped by
    /// path in order of first appearance, then by endpoint order.
    pub fn templates(&self) -> Vec<Arc<ActionTemplate>> {
        let base = self.base();
        let mut paths: Vec<PathTemplate> = Vec::new();
        for e in &self.endpoints {
            let p = PathTemplate::parse(&e.path);
            if !paths.contains(&p) {
                paths.push(p);
            }
        }
        paths
            .iter()
            .flat_map(|p| self.endpoints.iter().filter(move |e| PathTemplate::parse(&e.path) == *p))
            .map(|e| Arc::new(e.template(&base)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::Invalid(m));
        let mut routes = BTreeSet::new();
        let mut labels = BTreeSet::new();
        for e in &self.endpoints {
            if !labels.insert(e.label.clone()) {
                return invalid(format!("duplicate label {:?}", e.label));
            }
            let template = PathTemplate::parse(&e.path);
            if !routes.insert((e.verb, template.to_string())) {
                return invalid(format!("duplicate route {} {}", e.verb, e.path));
            }
            let placeholders: Vec<&str> = template.placeholders().collect();
            for p in e.params_in(ParamIn::Path) {
                if !placeholders.contains(&p.name.as_str()) {
                    return invalid(format!("{}: path parameter {} has no placeholder", e.label, p.name));
                }
            }
            if let Some(p) = e.params.iter().find(|p| matches!(p.spec.kind, ParamKind::Object { .. })) {
                return invalid(format!("{}: parameter {} cannot be an object", e.label, p.spec.name));
            }
            if e.body.is_some() && !e.verb.permits_body() {
                return invalid(format!("{}: {} cannot take a body", e.label, e.verb));
            }
            let mut stack: Vec<&Step> = e.program.iter().collect();
            while let Some(s) = stack.pop() {
                if !labels.insert(s.label.clone()) {
                    return invalid(format!("duplicate label {:?}", s.label));
                }
                let refs = s.when.as_ref().map(Predicate::param).into_iter();
                for r in refs.chain(s.store.as_ref().and_then(StoreOp::id_ref)) {
                    self.check_ref(e, &placeholders, r)?;
                }
                if let Some(op) = &s.store {
                    if !self.stores.iter().any(|st| st == op.store()) {
                        return invalid(format!("{}: unknown store {:?}", s.label, op.store()));
                    }
                }
                stack.extend(&s.then);
            }
        }
        Ok(())
    }

    fn check_ref(&self, e: &SimEndpoint, placeholders: &[&str], r: &str) -> Result<(), SimError> {
        let (head, rest) = r.split_once('.').unwrap_or((r, ""));
        let ok = match head {
            "path" => placeholders.contains(&rest),
            "query" => e.params_in(ParamIn::Query).any(|p| p.name == rest),
            "header" => e.params_in(ParamIn::Header).any(|p| p.name.eq_ignore_ascii_case(rest)),
            "body" => e.body.is_some(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Invalid(format!("{}: unknown parameter reference {r:?}", e.label)))
        }
    }
}
