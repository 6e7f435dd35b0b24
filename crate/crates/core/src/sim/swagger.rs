//! Swagger 2.0 document for a [`SimSpec`].

use serde_json::{json, Map, Value};

use crate::schema::{Constraints, ParamKind, ParamSpec, PathTemplate};

use super::spec::{ParamIn, SimEndpoint, SimSpec};

fn kind_schema(kind: &ParamKind, constraints: &Constraints) -> Map<String, Value> {
    let mut m = Map::new();
    let mut set = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    match kind {
        ParamKind::String => set("type", json!("string")),
        ParamKind::Int32 => {
            set("type", json!("integer"));
            set("format", json!("int32"));
        }
        ParamKind::Int64 => {
            set("type", json!("integer"));
            set("format", json!("int64"));
        }
        ParamKind::Double => {
            set("type", json!("number"));
            set("format", json!("double"));
        }
        ParamKind::Boolean => set("type", json!("boolean")),
        ParamKind::DateTime => {
            set("type", json!("string"));
            set("format", json!("date-time"));
        }
        ParamKind::Enum { values } => {
            set("type", json!("string"));
            set("enum", json!(values));
        }
        ParamKind::Object { fields } => {
            set("type", json!("object"));
            let props: Map<String, Value> = fields
                .iter()
                .map(|f| (f.name.clone(), Value::Object(kind_schema(&f.kind, &f.constraints))))
                .collect();
            set("properties", Value::Object(props));
            let required: Vec<&str> = fields.iter().filter(|f| f.required).map(|f| f.name.as_str()).collect();
            set("required", json!(required));
        }
        ParamKind::Array { element } => {
            set("type", json!("array"));
            set("items", Value::Object(kind_schema(&element.kind, &element.constraints)));
        }
    }
    let c = constraints;
    if let Some(v) = c.minimum {
        set("minimum", json!(v));
    }
    if let Some(v) = c.maximum {
        set("maximum", json!(v));
    }
    if let Some(v) = c.min_length {
        set("minLength", json!(v));
    }
    if let Some(v) = c.max_length {
        set("maxLength", json!(v));
    }
    if let Some(v) = c.max_items {
        set("maxItems", json!(v));
    }
    m
}

fn parameter(spec: &ParamSpec, location: &str) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(spec.name));
    m.insert("in".into(), json!(location));
    m.insert("required".into(), json!(spec.required || location == "path"));
    m.extend(kind_schema(&spec.kind, &spec.constraints));
    Value::Object(m)
}

fn definition_name(label: &str) -> String {
    let mut out = String::new();
    for part in label.split(|c: char| !c.is_ascii_alphanumeric()).filter(|p| !p.is_empty()) {
        let mut chars = part.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
            out.extend(chars);
        }
    }
    out + "Body"
}

fn operation(e: &SimEndpoint, definitions: &mut Map<String, Value>) -> Value {
    let mut params = Vec::new();
    for (location, name) in [(ParamIn::Path, "path"), (ParamIn::Query, "query"), (ParamIn::Header, "header")] {
        params.extend(e.params.iter().filter(|p| p.location == location).map(|p| parameter(&p.spec, name)));
    }
    if let Some(body) = e.body.as_ref().filter(|_| e.verb.permits_body()) {
        let schema = match &body.kind {
            ParamKind::Object { .. } => {
                let name = definition_name(&e.label);
                definitions.insert(name.clone(), Value::Object(kind_schema(&body.kind, &body.constraints)));
                json!({ "$ref": format!("#/definitions/{name}") })
            }
            other => Value::Object(kind_schema(other, &body.constraints)),
        };
        params.push(json!({ "name": body.name, "in": "body", "required": body.required, "schema": schema }));
    }
    let responses = if e.creates() {
        json!({
            "201": {
                "description": "created",
                "schema": {"type": "object", "properties": {"id": {"type": "integer", "format": "int64"}}}
            }
        })
    } else {
        json!({ "200": { "description": "ok" } })
    };
    json!({
        "operationId": e.label,
        "produces": ["application/json"],
        "parameters": params,
        "responses": responses,
    })
}

/// The document served at `/swagger.json`. Endpoints sharing a path are grouped
/// under one path item, in order of first appearance.
pub fn swagger_document(spec: &SimSpec) -> Value {
    let mut paths = Map::new();
    let mut definitions = Map::new();
    for e in &spec.endpoints {
        let key = PathTemplate::parse(&e.path).to_string();
        let op = operation(e, &mut definitions);
        let item = paths.entry(key).or_insert_with(|| Value::Object(Map::new()));
        item.as_object_mut().expect("path items are objects").insert(e.verb.lower().to_string(), op);
    }
    let mut doc = Map::new();
    doc.insert("swagger".into(), json!("2.0"));
    doc.insert("info".into(), json!({ "title": spec.name, "version": "1.0" }));
    let base = spec.base();
    if !base.is_empty() {
        doc.insert("basePath".into(), json!(base));
    }
    doc.insert("consumes".into(), json!(["application/json"]));
    doc.insert("produces".into(), json!(["application/json"]));
    doc.insert("paths".into(), Value::Object(paths));
    if !definitions.is_empty() {
        doc.insert("definitions".into(), Value::Object(definitions));
    }
    Value::Object(doc)
}
