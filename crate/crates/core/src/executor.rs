//! Executes individuals against the SUT as HTTP calls.
//!
//! Calls run strictly in order. After a successful creation call the returned
//! location is recorded, and later actions linked to it are rendered against
//! that location (see [`resolve_location`]).

use std::collections::BTreeMap;
use std::time::Duration;

use log::{debug, warn};
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde_json::Value;
use thiserror::Error;

use crate::clock::Clock;
use crate::driver::AuthCredential;
use crate::fitness::{body_excerpt, ExecutionResult};
use crate::genome::{render_action, Individual};
use crate::schema::{PathSegment, PathTemplate, Verb};

pub const DEFAULT_TIMEOUT_MS: u64 = 2000;

const QUERY_VALUE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');

/// How a linked call was rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallLink {
    pub source_action: usize,
    /// The path built from the action's own id gene, before resolution.
    pub unresolved_path: String,
    /// Whether the source location was known and substituted.
    pub resolved: bool,
}

/// A fully concrete request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteHttpCall {
    pub verb: Verb,
    pub base_url: String,
    /// Concrete path, including the API base path.
    pub path: String,
    pub query: Vec<(String, String)>,
    pub headers: Vec<(String, String)>,
    /// JSON text.
    pub body: Option<String>,
    /// Label of the credential whose headers were attached, if any.
    pub auth_label: Option<String>,
    pub link: Option<CallLink>,
}

impl ConcreteHttpCall {
    /// Path plus URL-encoded query string.
    pub fn path_and_query(&self) -> String {
        if self.query.is_empty() {
            return self.path.clone();
        }
        let q: Vec<String> = self
            .query
            .iter()
            .map(|(k, v)| {
                format!("{}={}", utf8_percent_encode(k, QUERY_VALUE), utf8_percent_encode(v, QUERY_VALUE))
            })
            .collect();
        format!("{}?{}", self.path, q.join("&"))
    }

    pub fn url(&self) -> String {
        format!("{}{}", self.base_url, self.path_and_query())
    }

    pub fn content_type(&self) -> Option<&'static str> {
        self.body.as_ref().map(|_| "application/json")
    }

    pub fn to_request(&self) -> HttpRequest {
        let mut headers = vec![("Accept".to_string(), "*/*".to_string())];
        headers.extend(self.headers.iter().cloned());
        if let Some(ct) = self.content_type() {
            headers.push(("Content-Type".into(), ct.into()));
        }
        HttpRequest { verb: self.verb, url: self.url(), headers, body: self.body.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub verb: Verb,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl HttpResponse {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("connection refused: {0}")]
    Refused(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Other(String),
}

/// Sends one HTTP request.
pub trait Transport {
    fn send(&mut self, request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError>;
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("path {concrete} does not extend {creation} with an id segment")]
pub struct LocationError {
    pub concrete: String,
    pub creation: String,
}

fn split_path(p: &str) -> Vec<&str> {
    p.split('/').filter(|s| !s.is_empty()).collect()
}

/// Rewrites `concrete_path`, built from the creation endpoint `creation_path`
/// plus an id segment plus a suffix, onto the location `saved`:
/// the result is `saved` followed by that suffix.
pub fn resolve_location(saved: &str, concrete_path: &str, creation_path: &str) -> Result<String, LocationError> {
    let creation = PathTemplate::parse(creation_path);
    let parts = split_path(concrete_path);
    let n = creation.segments().len();
    let err = || LocationError { concrete: concrete_path.to_string(), creation: creation_path.to_string() };
    if parts.len() <= n {
        return Err(err());
    }
    let prefix_matches = creation.segments().iter().zip(&parts).all(|(seg, part)| match seg {
        PathSegment::Literal(l) => l == part,
        PathSegment::Placeholder(_) => true,
    });
    if !prefix_matches {
        return Err(err());
    }
    let mut out = saved.trim_end_matches('/').to_string();
    for part in &parts[n + 1..] {
        out.push('/');
        out.push_str(part);
    }
    if out.is_empty() {
        out.push('/');
    }
    Ok(out)
}

/// Location of a newly created resource: the `Location` header when present,
/// else `creation_path/<id>` from the JSON body. Returns whether the header was used.
pub fn extract_location(creation_path: &str, response: &HttpResponse) -> Option<(String, bool)> {
    if let Some(loc) = response.header("location") {
        return Some((strip_origin(loc), true));
    }
    let body: Value = serde_json::from_str(&response.body).ok()?;
    let id = match body.get("id")? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return None,
    };
    Some((format!("{}/{}", creation_path.trim_end_matches('/'), id), false))
}

fn strip_origin(loc: &str) -> String {
    match loc.split_once("://") {
        Some((_, rest)) => match rest.find('/') {
            Some(i) => rest[i..].to_string(),
            None => "/".into(),
        },
        None => loc.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionReport {
    pub calls: Vec<ConcreteHttpCall>,
    pub results: Vec<ExecutionResult>,
    /// Set when a transport failure stopped execution early.
    pub failure: Option<TransportError>,
}

impl ExecutionReport {
    pub fn sut_down(&self) -> bool {
        matches!(self.failure, Some(TransportError::Refused(_)))
    }
}

/// Executes `ind` against `base_url`, attaching the chosen credential to every call.
pub fn execute(
    ind: &Individual,
    base_url: &str,
    credentials: &[AuthCredential],
    timeout_ms: u64,
    transport: &mut dyn Transport,
    clock: &dyn Clock,
) -> ExecutionReport {
    let timeout = Duration::from_millis(timeout_ms);
    let credential = ind.auth_index.and_then(|i| credentials.get(i));
    let mut resolved = BTreeMap::new();
    let mut report = ExecutionReport { calls: Vec::new(), results: Vec::new(), failure: None };

    for (i, action) in ind.actions.iter().enumerate() {
        let mut call = render_action(ind, i, base_url, &resolved);
        if let Some(c) = credential {
            for (name, value) in &c.headers {
                call.headers.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
                call.headers.insert(0, (name.clone(), value.clone()));
            }
            call.auth_label = Some(c.label.clone());
        }

        let started = clock.now_ms();
        let outcome = transport.send(&call.to_request(), timeout);
        let elapsed_ms = clock.now_ms().saturating_sub(started);
        let result = match outcome {
            Ok(response) => {
                let status = response.status;
                let mut result = ExecutionResult {
                    status: Some(status),
                    timed_out: false,
                    body_excerpt: body_excerpt(&response.body),
                    extracted_location: None,
                    location_from_header: false,
                    elapsed_ms,
                };
                if action.template.produces_location && (200..300).contains(&status) {
                    match extract_location(&call.path, &response) {
                        Some((loc, from_header)) => {
                            resolved.insert(i, loc.clone());
                            result.extracted_location = Some(loc);
                            result.location_from_header = from_header;
                        }
                        None => debug!("creation call {} returned no location", call.path),
                    }
                }
                result
            }
            Err(TransportError::Timeout) => ExecutionResult::timed_out(elapsed_ms),
            Err(e) => {
                warn!("{} {} failed: {e}", call.verb, call.url());
                report.failure = Some(e);
                break;
            }
        };
        report.calls.push(call);
        report.results.push(result);
    }
    report
}

#[cfg(feature = "net")]
pub use http::HttpTransport;

#[cfg(feature = "net")]
mod http {
    use std::io;
    use std::time::Duration;

    use super::{HttpRequest, HttpResponse, Transport, TransportError};

    /// Blocking HTTP/1.1 transport with connection reuse.
    #[derive(Debug, Clone)]
    pub struct HttpTransport {
        agent: ureq::Agent,
    }

    impl Default for HttpTransport {
        fn default() -> Self {
            Self::new()
        }
    }

    impl HttpTransport {
        pub fn new() -> Self {
            Self { agent: ureq::AgentBuilder::new().redirects(0).build() }
        }
    }

    fn is_timeout(e: &ureq::Transport) -> bool {
        let mut source: Option<&(dyn std::error::Error + 'static)> = std::error::Error::source(e);
        while let Some(s) = source {
            if let Some(io) = s.downcast_ref::<io::Error>() {
                return matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock);
            }
            source = s.source();
        }
        false
    }

    impl Transport for HttpTransport {
        fn send(&mut self, request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
            let mut req = self.agent.request(request.verb.as_str(), &request.url).timeout(timeout);
            for (name, value) in &request.headers {
                req = req.set(name, value);
            }
            let sent = match &request.body {
                Some(body) => req.send_string(body),
                None => req.call(),
            };
            let response = match sent {
                Ok(r) | Err(ureq::Error::Status(_, r)) => r,
                Err(ureq::Error::Transport(t)) => {
                    return Err(match t.kind() {
                        ureq::ErrorKind::ConnectionFailed => TransportError::Refused(t.to_string()),
                        _ if is_timeout(&t) => TransportError::Timeout,
                        _ => TransportError::Other(t.to_string()),
                    });
                }
            };
            let status = response.status();
            let headers = response
                .headers_names()
                .into_iter()
                .filter_map(|n| response.header(&n).map(|v| (n.clone(), v.to_string())))
                .collect();
            let body = response.into_string().map_err(|e| {
                if matches!(e.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
                    TransportError::Timeout
                } else {
                    TransportError::Other(e.to_string())
                }
            })?;
            Ok(HttpResponse { status, headers, body })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_with_suffix() {
        assert_eq!(
            resolve_location("/api/v1/activities/77", "/api/v1/activities/-324163273/rating", "/api/v1/activities"),
            Ok("/api/v1/activities/77/rating".to_string())
        );
    }

    #[test]
    fn resolve_empty_suffix() {
        assert_eq!(resolve_location("/r/9", "/r/5", "/r"), Ok("/r/9".to_string()));
    }

    #[test]
    fn resolve_mismatch() {
        assert!(resolve_location("/r/9", "/other/5/x", "/r").is_err());
        assert!(resolve_location("/r/9", "/r", "/r").is_err());
    }

    #[test]
    fn location_from_body_id() {
        let resp = HttpResponse { status: 200, headers: vec![], body: r#"{"id": 42}"#.into() };
        assert_eq!(
            extract_location("/api/v1/activities", &resp),
            Some(("/api/v1/activities/42".to_string(), false))
        );
    }

    #[test]
    fn location_header_wins() {
        let resp = HttpResponse {
            status: 201,
            headers: vec![("location".into(), "http://h:1/r/7".into())],
            body: r#"{"id": 42}"#.into(),
        };
        assert_eq!(extract_location("/r", &resp), Some(("/r/7".to_string(), true)));
    }

    #[test]
    fn query_is_url_encoded() {
        let call = ConcreteHttpCall {
            verb: Verb::Get,
            base_url: "http://h".into(),
            path: "/a".into(),
            query: vec![("q".into(), "a b&c".into()), ("n".into(), "-1".into())],
            headers: vec![],
            body: None,
            auth_label: None,
            link: None,
        };
        assert_eq!(call.url(), "http://h/a?q=a%20b%26c&n=-1");
        assert_eq!(call.content_type(), None);
    }
}
