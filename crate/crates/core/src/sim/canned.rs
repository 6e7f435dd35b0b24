//! The three built-in specs.

use serde_json::json;

use crate::driver::AuthCredential;
use crate::schema::{Constraints, ParamKind, ParamSpec, Verb};

use super::spec::{ParamIn, Predicate, SimEndpoint, SimError, SimParam, SimResponse, SimSpec, Step, StoreOp};

pub const CANNED: [&str; 3] = ["crud-chain", "needle", "faulty"];

pub fn by_name(name: &str) -> Result<SimSpec, SimError> {
    match name {
        "crud-chain" => Ok(crud_chain()),
        "needle" => Ok(needle()),
        "faulty" => Ok(faulty()),
        other => Err(SimError::UnknownSpec(other.to_string())),
    }
}

fn endpoint(label: &str, verb: Verb, path: &str) -> SimEndpoint {
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

fn param(location: ParamIn, spec: ParamSpec) -> SimParam {
    SimParam { location, spec }
}

fn id_param() -> SimParam {
    param(ParamIn::Path, ParamSpec::new("id", ParamKind::Int64))
}

fn bounded(min: f64, max: f64) -> Constraints {
    Constraints { minimum: Some(min), maximum: Some(max), ..Constraints::default() }
}

fn activity_body() -> ParamSpec {
    ParamSpec::new(
        "body",
        ParamKind::Object {
            fields: vec![
                ParamSpec::new("name", ParamKind::String),
                ParamSpec::new("age_min", ParamKind::Int32).with_constraints(bounded(0.0, 99.0)),
                ParamSpec::new("description", ParamKind::String).optional(),
            ],
        },
    )
}

/// Activities with create, read, delete, rating and listing. Deleting and
/// rating need the administrator key, and succeed only on an existing id,
/// which random ids essentially never hit without chaining onto a create.
pub fn crud_chain() -> SimSpec {
    let store = || "activities".to_string();
    let id = || "path.id".to_string();

    let mut create = endpoint("create_activity", Verb::Post, "/activities");
    create.body = Some(activity_body());
    create.program = vec![Step::new("create_activity_store").store(StoreOp::Create { store: store() })];

    let mut list = endpoint("list_activities", Verb::Get, "/activities");
    list.program = vec![Step::new("list_activities_all").store(StoreOp::List { store: store() })];

    let mut get = endpoint("get_activity", Verb::Get, "/activities/{id}");
    get.params = vec![id_param()];
    get.program = vec![Step::new("get_activity_read").store(StoreOp::Read { store: store(), id: id() })];

    let mut delete = endpoint("delete_activity", Verb::Delete, "/activities/{id}");
    delete.params = vec![id_param()];
    delete.requires_auth = true;
    delete.program = vec![Step::new("delete_activity_remove").store(StoreOp::Delete { store: store(), id: id() })];

    let mut rate = endpoint("rate_activity", Verb::Post, "/activities/{id}/rating");
    rate.params = vec![id_param()];
    rate.requires_auth = true;
    rate.body = Some(ParamSpec::new(
        "body",
        ParamKind::Object {
            fields: vec![ParamSpec::new("score", ParamKind::Int32).with_constraints(bounded(1.0, 5.0))],
        },
    ));
    rate.program = vec![Step::new("rate_activity_check").store(StoreOp::Touch { store: store(), id: id() })];

    SimSpec {
        name: "crud-chain".into(),
        base_path: "/api/v1".into(),
        auth: vec![AuthCredential {
            label: "administrator".into(),
            headers: vec![("Authorization".into(), "ApiKey administrator".into())],
        }],
        stores: vec![store()],
        endpoints: vec![create, list, get, delete, rate],
    }
}

/// A guard chain: `x == 42`, then `len(s) == 7`, guards `needle_deep`.
/// `x` ranges over ±100000, so blind sampling hits it about once in 200001 tries.
pub fn needle() -> SimSpec {
    let mut search = endpoint("needle", Verb::Get, "/needle");
    search.params = vec![
        param(ParamIn::Query, ParamSpec::new("x", ParamKind::Int32).with_constraints(bounded(-100000.0, 100000.0))),
        param(
            ParamIn::Query,
            ParamSpec::new("s", ParamKind::String)
                .with_constraints(Constraints { max_length: Some(16), ..Constraints::default() }),
        ),
    ];
    search.program = vec![Step::new("needle_enter").then(vec![Step::new("needle_x")
        .when(Predicate::Eq { param: "query.x".into(), value: json!(42) })
        .then(vec![Step::new("needle_deep")
            .when(Predicate::LenEq { param: "query.s".into(), len: 7 })
            .respond(200, json!({"found": true}))])])];
    search.fallback = SimResponse::new(200, json!({"found": false}));

    let mut health = endpoint("health", Verb::Get, "/health");
    health.program = vec![Step::new("health_ok").respond(200, json!({"status": "UP"}))];

    let mut echo = endpoint("echo", Verb::Post, "/echo");
    echo.body = Some(ParamSpec::new(
        "body",
        ParamKind::Object { fields: vec![ParamSpec::new("text", ParamKind::String)] },
    ));
    echo.program = vec![Step::new("echo_reply")];

    SimSpec {
        name: "needle".into(),
        base_path: String::new(),
        auth: vec![],
        stores: vec![],
        endpoints: vec![search, health, echo],
    }
}

/// Registration crashes with a 500 on a negative `age_min`.
pub fn faulty() -> SimSpec {
    let store = || "activities".to_string();

    let mut create = endpoint("register_activity", Verb::Post, "/activities");
    create.body = Some(ParamSpec::new(
        "body",
        ParamKind::Object {
            fields: vec![
                ParamSpec::new("name", ParamKind::String),
                ParamSpec::new("age_min", ParamKind::Int32),
            ],
        },
    ));
    create.program = vec![
        Step::new("register_activity_crash")
            .when(Predicate::Lt { param: "body.age_min".into(), value: 0.0 })
            .respond(500, json!({"error": "java.lang.IllegalArgumentException: negative age"})),
        Step::new("register_activity_store").store(StoreOp::Create { store: store() }),
    ];

    let mut get = endpoint("find_activity", Verb::Get, "/activities/{id}");
    get.params = vec![id_param()];
    get.program = vec![Step::new("find_activity_read").store(StoreOp::Read { store: store(), id: "path.id".into() })];

    SimSpec {
        name: "faulty".into(),
        base_path: "/api".into(),
        auth: vec![],
        stores: vec![store()],
        endpoints: vec![create, get],
    }
}
