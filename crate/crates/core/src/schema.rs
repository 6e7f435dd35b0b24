//! Swagger 2.0 ingestion.
//!
//! [`parse_schema`] turns a Swagger 2.0 JSON document into an [`ApiSchema`]: one
//! [`ActionTemplate`] per `(path, verb)` pair, with parameter specs resolved
//! through local `$ref`s. Constructs the genome cannot represent (`allOf`,
//! `oneOf`, files, untyped schemas) degrade to strings with a warning.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Nesting depth after which objects and arrays stop expanding.
pub const MAX_SCHEMA_DEPTH: usize = 5;

const MAX_REF_HOPS: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("malformed JSON at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("document has no \"paths\" object")]
    MissingPaths,
    #[error("unresolvable reference \"{0}\"")]
    UnresolvedRef(String),
    #[error("OpenAPI {0} documents are not supported, only Swagger 2.0")]
    UnsupportedVersion(String),
    #[error("invalid schema: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verb {
    Get,
    Post,
    Put,
    Delete,
    Patch,
}

impl Verb {
    pub const ALL: [Verb; 5] = [Verb::Get, Verb::Post, Verb::Put, Verb::Delete, Verb::Patch];

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Get => "GET",
            Verb::Post => "POST",
            Verb::Put => "PUT",
            Verb::Delete => "DELETE",
            Verb::Patch => "PATCH",
        }
    }

    /// Lower-case form, as used for Swagger path item keys and RestAssured methods.
    pub fn lower(self) -> &'static str {
        match self {
            Verb::Get => "get",
            Verb::Post => "post",
            Verb::Put => "put",
            Verb::Delete => "delete",
            Verb::Patch => "patch",
        }
    }

    pub fn permits_body(self) -> bool {
        matches!(self, Verb::Post | Verb::Put | Verb::Patch)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown HTTP verb {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathSegment {
    Literal(String),
    Placeholder(String),
}

/// A path such as `/items/{id}/rating`, split into segments.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathTemplate {
    segments: Vec<PathSegment>,
}

impl PathTemplate {
    pub fn parse(path: &str) -> Self {
        let segments = path
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| match s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                Some(name) if !name.is_empty() && !name.contains(['{', '}']) => {
                    PathSegment::Placeholder(name.to_string())
                }
                _ => PathSegment::Literal(s.to_string()),
            })
            .collect();
        Self { segments }
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            PathSegment::Placeholder(n) => Some(n.as_str()),
            PathSegment::Literal(_) => None,
        })
    }

    /// True when `self` is `prefix` followed by one placeholder and then anything.
    /// Returns the placeholder name.
    pub fn extends_with_id(&self, prefix: &PathTemplate) -> Option<&str> {
        let n = prefix.segments.len();
        if self.segments.len() <= n || self.segments[..n] != prefix.segments[..] {
            return None;
        }
        match &self.segments[n] {
            PathSegment::Placeholder(name) => Some(name),
            PathSegment::Literal(_) => None,
        }
    }
}

impl fmt::Display for PathTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return f.write_str("/");
        }
        for s in &self.segments {
            match s {
                PathSegment::Literal(l) => write!(f, "/{l}")?,
                PathSegment::Placeholder(p) => write!(f, "/{{{p}}}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for PathTemplate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PathTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(PathTemplate::parse(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ParamKind {
    String,
    Int32,
    Int64,
    Double,
    Boolean,
    DateTime,
    Enum { values: Vec<String> },
    Object { fields: Vec<ParamSpec> },
    Array { element: Box<ParamSpec> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_items: Option<usize>,
}

impl Constraints {
    fn is_empty(&self) -> bool {
        *self == Constraints::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParamKind,
    #[serde(default = "default_true")]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Constraints::is_empty")]
    pub constraints: Constraints,
}

fn default_true() -> bool {
    true
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        Self { name: name.into(), kind, required: true, constraints: Constraints::default() }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn with_constraints(mut self, constraints: Constraints) -> Self {
        self.constraints = constraints;
        self
    }
}

/// One REST operation: a verb on a path, with its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTemplate {
    pub verb: Verb,
    /// The document's `basePath`, empty or starting with `/`.
    pub base_path: String,
    pub path: PathTemplate,
    /// One spec per placeholder, in placeholder order.
    pub path_params: Vec<ParamSpec>,
    pub query_params: Vec<ParamSpec>,
    pub header_params: Vec<ParamSpec>,
    pub body_spec: Option<ParamSpec>,
    /// A creation endpoint whose response yields a resource id.
    pub produces_location: bool,
}

impl ActionTemplate {
    /// Base path plus path template, e.g. `/api/v1/activities/{id}`.
    pub fn full_path(&self) -> String {
        let p = self.path.to_string();
        if self.base_path.is_empty() {
            p
        } else if p == "/" {
            self.base_path.clone()
        } else {
            format!("{}{}", self.base_path, p)
        }
    }

    pub fn name(&self) -> String {
        format!("{} {}", self.verb, self.full_path())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiSchema {
    pub base_path: String,
    pub templates: Vec<Arc<ActionTemplate>>,
    pub raw_title: String,
}

/// How a dependent template chains onto the creation endpoint of its resource.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreationLink {
    /// Index of the creation template in [`ApiSchema::templates`].
    pub creation: usize,
    /// Placeholder in the dependent path that carries the resource id.
    pub id_placeholder: String,
}

impl ApiSchema {
    /// For the template at `index`, the creation endpoint whose path it extends with
    /// an id placeholder. The longest matching creation path wins.
    pub fn creation_link(&self, index: usize) -> Option<CreationLink> {
        let t = &self.templates[index];
        self.templates
            .iter()
            .enumerate()
            .filter(|(i, c)| *i != index && c.verb == Verb::Post && c.produces_location)
            .filter(|(_, c)| c.base_path == t.base_path)
            .filter_map(|(i, c)| {
                t.path.extends_with_id(&c.path).map(|id| (i, c.path.segments().len(), id))
            })
            .max_by_key(|(i, len, _)| (*len, std::cmp::Reverse(*i)))
            .map(|(creation, _, id)| CreationLink { creation, id_placeholder: id.to_string() })
    }
}

/// Parses a Swagger 2.0 JSON document.
pub fn parse_schema(document: &str) -> Result<ApiSchema, SchemaError> {
    let root: Value = serde_json::from_str(document).map_err(|e| SchemaError::Malformed {
        offset: byte_offset(document, e.line(), e.column()),
        message: e.to_string(),
    })?;

    if let Some(v) = root.get("openapi") {
        return Err(SchemaError::UnsupportedVersion(
            v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()),
        ));
    }
    match root.get("swagger").and_then(Value::as_str) {
        Some("2.0") | None => {}
        Some(other) => return Err(SchemaError::UnsupportedVersion(other.to_string())),
    }

    let paths = root.get("paths").and_then(Value::as_object).ok_or(SchemaError::MissingPaths)?;
    let base_path = normalize_base_path(root.get("basePath").and_then(Value::as_str).unwrap_or(""));
    let raw_title = root
        .pointer("/info/title")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    let resolver = Resolver { root: &root };
    let mut templates = Vec::new();
    for (path, item) in paths {
        let item = resolver.resolve(item)?;
        let Some(item) = item.as_object() else {
            return Err(SchemaError::Invalid(format!("path item for {path} is not an object")));
        };
        let shared = item.get("parameters");
        for (key, operation) in item {
            let Some(verb) = Verb::ALL.into_iter().find(|v| v.lower() == key) else {
                continue;
            };
            let template = resolver.template(&base_path, path, verb, shared, operation)?;
            templates.push(Arc::new(template));
        }
    }

    Ok(ApiSchema { base_path, templates, raw_title })
}

fn normalize_base_path(raw: &str) -> String {
    let trimmed = raw.trim().trim_end_matches('/');
    if trimmed.is_empty() {
        String::new()
    } else if trimmed.starts_with('/') {
        trimmed.to_string()
    } else {
        format!("/{trimmed}")
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return text.len();
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

struct Resolver<'a> {
    root: &'a Value,
}

impl<'a> Resolver<'a> {
    /// Follows `$ref` chains local to the document.
    fn resolve(&self, mut value: &'a Value) -> Result<&'a Value, SchemaError> {
        for _ in 0..MAX_REF_HOPS {
            let Some(reference) = value.get("$ref").and_then(Value::as_str) else {
                return Ok(value);
            };
            value = self.lookup(reference)?;
        }
        Err(SchemaError::Invalid("reference chain too long".into()))
    }

    fn lookup(&self, reference: &str) -> Result<&'a Value, SchemaError> {
        let pointer = reference
            .strip_prefix('#')
            .ok_or_else(|| SchemaError::UnresolvedRef(reference.to_string()))?;
        self.root.pointer(pointer).ok_or_else(|| SchemaError::UnresolvedRef(reference.to_string()))
    }

    fn template(
        &self,
        base_path: &str,
        raw_path: &str,
        verb: Verb,
        shared: Option<&'a Value>,
        operation: &'a Value,
    ) -> Result<ActionTemplate, SchemaError> {
        let path = PathTemplate::parse(raw_path);
        let placeholders: Vec<&str> = path.placeholders().collect();
        for (i, p) in placeholders.iter().enumerate() {
            if placeholders[..i].contains(p) {
                return Err(SchemaError::Invalid(format!(
                    "placeholder {{{p}}} appears twice in {raw_path}"
                )));
            }
        }

        // Operation-level parameters override path-level ones with the same (name, in).
        let mut params: Vec<(String, String, &'a Value)> = Vec::new();
        for source in [shared, operation.get("parameters")].into_iter().flatten() {
            let Some(list) = source.as_array() else { continue };
            for p in list {
                let p = self.resolve(p)?;
                let name = p.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
                let location = p.get("in").and_then(Value::as_str).unwrap_or_default().to_string();
                params.retain(|(n, l, _)| !(n == &name && l == &location));
                params.push((name, location, p));
            }
        }

        let mut path_params = Vec::new();
        let mut query_params = Vec::new();
        let mut header_params = Vec::new();
        let mut body_spec = None;
        for (name, location, p) in &params {
            match location.as_str() {
                "path" => {
                    if !placeholders.contains(&name.as_str()) {
                        warn!("{verb} {raw_path}: path parameter {name} has no placeholder, ignored");
                        continue;
                    }
                    let mut spec = self.param_spec(name, p, 0)?;
                    spec.required = true;
                    path_params.push(spec);
                }
                "query" => query_params.push(self.param_spec(name, p, 0)?),
                "header" => header_params.push(self.param_spec(name, p, 0)?),
                "body" => {
                    if !verb.permits_body() {
                        warn!("{verb} {raw_path}: body parameter ignored for a verb without payload");
                        continue;
                    }
                    let schema = p.get("schema").unwrap_or(&Value::Null);
                    let required = p.get("required").and_then(Value::as_bool).unwrap_or(false);
                    let (kind, constraints) = self.kind_of(schema, 0)?;
                    body_spec = Some(ParamSpec { name: name.clone(), kind, required, constraints });
                }
                other => warn!("{verb} {raw_path}: parameter {name} in {other:?} is not supported"),
            }
        }

        let mut ordered = Vec::with_capacity(placeholders.len());
        for ph in &placeholders {
            match path_params.iter().position(|s| s.name == *ph) {
                Some(i) => ordered.push(path_params.swap_remove(i)),
                None => {
                    warn!("{verb} {raw_path}: placeholder {{{ph}}} undeclared, treated as string");
                    ordered.push(ParamSpec::new(*ph, ParamKind::String));
                }
            }
        }

        let produces_location = verb == Verb::Post && self.declares_location(operation)?;

        Ok(ActionTemplate {
            verb,
            base_path: base_path.to_string(),
            path,
            path_params: ordered,
            query_params,
            header_params,
            body_spec,
            produces_location,
        })
    }

    fn declares_location(&self, operation: &'a Value) -> Result<bool, SchemaError> {
        let Some(responses) = operation.get("responses").and_then(Value::as_object) else {
            return Ok(false);
        };
        for (code, response) in responses {
            if !code.starts_with('2') {
                continue;
            }
            let response = self.resolve(response)?;
            let has_header = response
                .get("headers")
                .and_then(Value::as_object)
                .is_some_and(|h| h.keys().any(|k| k.eq_ignore_ascii_case("location")));
            if has_header {
                return Ok(true);
            }
            if let Some(schema) = response.get("schema") {
                let schema = self.resolve(schema)?;
                if schema.get("properties").and_then(|p| p.get("id")).is_some() {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn param_spec(&self, name: &str, p: &'a Value, depth: usize) -> Result<ParamSpec, SchemaError> {
        let required = p.get("required").and_then(Value::as_bool).unwrap_or(false);
        let (kind, constraints) = self.kind_of(p, depth)?;
        Ok(ParamSpec { name: name.to_string(), kind, required, constraints })
    }

    fn kind_of(&self, schema: &'a Value, depth: usize) -> Result<(ParamKind, Constraints), SchemaError> {
        let schema = self.resolve(schema)?;
        let constraints = Constraints {
            minimum: schema.get("minimum").and_then(Value::as_f64),
            maximum: schema.get("maximum").and_then(Value::as_f64),
            min_length: schema.get("minLength").and_then(Value::as_u64).map(|v| v as usize),
            max_length: schema.get("maxLength").and_then(Value::as_u64).map(|v| v as usize),
            max_items: schema.get("maxItems").and_then(Value::as_u64).map(|v| v as usize),
        };

        if ["allOf", "oneOf", "anyOf"].iter().any(|k| schema.get(k).is_some()) {
            warn!("composed schema (allOf/oneOf/anyOf) treated as string");
            return Ok((ParamKind::String, constraints));
        }
        if let Some(values) = schema.get("enum").and_then(Value::as_array) {
            if !values.is_empty() {
                let values = values
                    .iter()
                    .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
                    .collect();
                return Ok((ParamKind::Enum { values }, constraints));
            }
        }

        let ty = schema.get("type").and_then(Value::as_str);
        let format = schema.get("format").and_then(Value::as_str);
        let kind = match (ty, format) {
            (Some("integer"), Some("int64")) => ParamKind::Int64,
            (Some("integer"), _) => ParamKind::Int32,
            (Some("number"), _) => ParamKind::Double,
            (Some("boolean"), _) => ParamKind::Boolean,
            (Some("string"), Some("date-time")) => ParamKind::DateTime,
            (Some("string"), _) => ParamKind::String,
            (Some("array"), _) => {
                if depth >= MAX_SCHEMA_DEPTH {
                    warn!("array nested deeper than {MAX_SCHEMA_DEPTH} levels truncated");
                    return Ok((ParamKind::Object { fields: Vec::new() }, constraints));
                }
                let items = schema.get("items").unwrap_or(&Value::Null);
                let (kind, c) = self.kind_of(items, depth + 1)?;
                let element = ParamSpec { name: "item".into(), kind, required: true, constraints: c };
                ParamKind::Array { element: Box::new(element) }
            }
            (Some("object"), _) | (None, _) if schema.get("properties").is_some() || ty.is_some() => {
                self.object_kind(schema, depth)?
            }
            (other, _) => {
                warn!("unsupported schema type {other:?} treated as string");
                ParamKind::String
            }
        };
        Ok((kind, constraints))
    }

    fn object_kind(&self, schema: &'a Value, depth: usize) -> Result<ParamKind, SchemaError> {
        if depth >= MAX_SCHEMA_DEPTH {
            warn!("object nested deeper than {MAX_SCHEMA_DEPTH} levels truncated");
            return Ok(ParamKind::Object { fields: Vec::new() });
        }
        let required: Option<Vec<&str>> = schema
            .get("required")
            .and_then(Value::as_array)
            .map(|r| r.iter().filter_map(Value::as_str).collect());
        let mut fields = Vec::new();
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            for (name, prop) in props {
                let (kind, constraints) = self.kind_of(prop, depth + 1)?;
                let required = required.as_ref().is_none_or(|r| r.contains(&name.as_str()));
                fields.push(ParamSpec { name: name.clone(), kind, required, constraints });
            }
        }
        Ok(ParamKind::Object { fields })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc(paths: Value) -> String {
        json!({"swagger": "2.0", "info": {"title": "t"}, "paths": paths}).to_string()
    }

    #[test]
    fn empty_paths_give_no_templates() {
        let s = parse_schema(&doc(json!({}))).unwrap();
        assert!(s.templates.is_empty());
        assert_eq!(s.raw_title, "t");
    }

    #[test]
    fn path_placeholder_with_integer_param() {
        let d = doc(json!({
            "/items/{id}": {"get": {"parameters": [
                {"name": "id", "in": "path", "required": true, "type": "integer"}
            ], "responses": {"200": {"description": "ok"}}}}
        }));
        let s = parse_schema(&d).unwrap();
        assert_eq!(s.templates.len(), 1);
        let t = &s.templates[0];
        assert_eq!(t.verb, Verb::Get);
        assert_eq!(
            t.path.segments(),
            &[PathSegment::Literal("items".into()), PathSegment::Placeholder("id".into())]
        );
        assert_eq!(t.path_params, vec![ParamSpec::new("id", ParamKind::Int32)]);
        assert!(t.query_params.is_empty() && t.body_spec.is_none());
        assert!(!t.produces_location);
    }

    #[test]
    fn activities_creation_endpoint() {
        let d = json!({
            "swagger": "2.0",
            "basePath": "/api/v1",
            "paths": {"/activities": {"post": {
                "parameters": [{"name": "body", "in": "body", "required": true,
                                "schema": {"$ref": "#/definitions/Activity"}}],
                "responses": {"200": {"description": "ok",
                    "schema": {"type": "object", "properties": {"id": {"type": "integer", "format": "int64"}}}}}
            }}},
            "definitions": {"Activity": {"type": "object", "properties": {
                "name": {"type": "string"},
                "age_min": {"type": "integer", "format": "int32"},
                "activity": {"type": "object", "properties": {
                    "ratings_sum": {"type": "integer", "format": "int64"},
                    "related": {"type": "array", "items": {"type": "integer", "format": "int64"}}
                }}
            }}}
        });
        let s = parse_schema(&d.to_string()).unwrap();
        let t = &s.templates[0];
        assert_eq!(t.verb, Verb::Post);
        assert!(t.produces_location);
        assert_eq!(t.full_path(), "/api/v1/activities");
        let body = t.body_spec.as_ref().unwrap();
        let ParamKind::Object { fields } = &body.kind else { panic!("body should be an object") };
        let names: Vec<_> = fields.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["name", "age_min", "activity"]);
        assert_eq!(fields[1].kind, ParamKind::Int32);
        let ParamKind::Object { fields: inner } = &fields[2].kind else { panic!() };
        assert_eq!(inner[0].kind, ParamKind::Int64);
        assert!(matches!(&inner[1].kind, ParamKind::Array { element } if element.kind == ParamKind::Int64));
    }

    #[test]
    fn location_header_marks_creation() {
        let d = doc(json!({"/r": {"post": {"responses": {"201": {
            "description": "created", "headers": {"Location": {"type": "string"}}}}}}}));
        assert!(parse_schema(&d).unwrap().templates[0].produces_location);
    }

    #[test]
    fn malformed_json_reports_offset() {
        let err = parse_schema("{\"paths\": {,}}").unwrap_err();
        assert!(matches!(err, SchemaError::Malformed { offset: 11, .. }), "{err:?}");
    }

    #[test]
    fn missing_paths_is_an_error() {
        assert_eq!(parse_schema(r#"{"swagger":"2.0"}"#), Err(SchemaError::MissingPaths));
    }

    #[test]
    fn dangling_ref_is_named() {
        let d = doc(json!({"/r": {"post": {"parameters": [
            {"name": "b", "in": "body", "schema": {"$ref": "#/definitions/Nope"}}]}}}));
        assert_eq!(
            parse_schema(&d),
            Err(SchemaError::UnresolvedRef("#/definitions/Nope".into()))
        );
    }

    #[test]
    fn openapi3_is_rejected() {
        let err = parse_schema(r#"{"openapi":"3.0.1","paths":{}}"#).unwrap_err();
        assert_eq!(err, SchemaError::UnsupportedVersion("3.0.1".into()));
    }

    #[test]
    fn composed_schemas_degrade_to_string() {
        let d = doc(json!({"/r": {"get": {"parameters": [
            {"name": "q", "in": "query", "allOf": [{"type": "integer"}]}]}}}));
        let t = &parse_schema(&d).unwrap().templates[0];
        assert_eq!(t.query_params[0].kind, ParamKind::String);
        assert!(!t.query_params[0].required);
    }

    #[test]
    fn self_referential_definitions_terminate() {
        let d = json!({"swagger": "2.0", "paths": {"/n": {"post": {"parameters": [
            {"name": "b", "in": "body", "schema": {"$ref": "#/definitions/Node"}}]}}},
            "definitions": {"Node": {"type": "object", "properties": {
                "next": {"$ref": "#/definitions/Node"}}}}});
        let t = &parse_schema(&d.to_string()).unwrap().templates[0];
        let mut kind = &t.body_spec.as_ref().unwrap().kind;
        let mut depth = 0;
        while let ParamKind::Object { fields } = kind {
            match fields.first() {
                Some(f) => kind = &f.kind,
                None => break,
            }
            depth += 1;
        }
        assert_eq!(depth, MAX_SCHEMA_DEPTH);
    }

    #[test]
    fn enum_and_date_time_kinds() {
        let d = doc(json!({"/r": {"get": {"parameters": [
            {"name": "e", "in": "query", "type": "string", "enum": ["A", "B"]},
            {"name": "d", "in": "header", "type": "string", "format": "date-time", "required": true}
        ]}}}));
        let t = &parse_schema(&d).unwrap().templates[0];
        assert_eq!(t.query_params[0].kind, ParamKind::Enum { values: vec!["A".into(), "B".into()] });
        assert_eq!(t.header_params[0].kind, ParamKind::DateTime);
    }

    #[test]
    fn creation_link_prefers_longest_prefix() {
        let d = doc(json!({
            "/a": {"post": {"responses": {"201": {"headers": {"Location": {}}}}}},
            "/a/{x}/b": {"post": {"responses": {"201": {"headers": {"Location": {}}}}}},
            "/a/{x}/b/{y}": {"get": {}},
            "/a/{x}": {"delete": {}}
        }));
        let s = parse_schema(&d).unwrap();
        assert_eq!(
            s.creation_link(2),
            Some(CreationLink { creation: 1, id_placeholder: "y".into() })
        );
        assert_eq!(s.creation_link(3), Some(CreationLink { creation: 0, id_placeholder: "x".into() }));
        assert_eq!(s.creation_link(0), None);
    }

    #[test]
    fn parsing_is_pure() {
        let d = doc(json!({"/a/{id}": {"get": {}, "delete": {}}, "/a": {"post": {}}}));
        assert_eq!(parse_schema(&d).unwrap(), parse_schema(&d).unwrap());
    }
}
