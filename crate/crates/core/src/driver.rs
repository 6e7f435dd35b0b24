//! Client side of the driver control protocol.
//!
//! A driver runs next to the SUT and exposes JSON over HTTP under `/controller/`:
//!
//! | request                               | body                  | response            |
//! |---------------------------------------|-----------------------|---------------------|
//! | `GET /controller/info`                |                       | [`InfoDto`]         |
//! | `POST /controller/sut`                | `{"running": bool}`   | [`SutStatusDto`]    |
//! | `POST /controller/reset`              |                       | `{"ok": true}`      |
//! | `GET /controller/targets?since=<m>`   |                       | [`CoverageDto`]     |
//!
//! Errors are any non-2xx status with `{"error": "<message>"}`. Coverage is
//! delta-based: the report lists targets touched since marker `m` and carries a
//! fresh marker. An unknown marker yields the full report.
//! Unknown fields are ignored everywhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::TransportError;
use crate::schema::Verb;

#[derive(Debug, Error, PartialEq)]
pub enum DriverError {
    #[error("driver unreachable at {url}: {message}. Start the driver process and check --driverUrl")]
    Unreachable { url: String, message: String },
    #[error("driver responded {status}: {message}")]
    Protocol { status: u16, message: String },
    #[error("malformed driver payload: {0}")]
    Malformed(String),
}

impl DriverError {
    pub fn is_unreachable(&self) -> bool {
        matches!(self, DriverError::Unreachable { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthCredential {
    pub label: String,
    pub headers: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SutInfo {
    pub base_url_of_sut: String,
    pub swagger_json_url: String,
    pub is_sut_running: bool,
    pub auth_info: Vec<AuthCredential>,
    pub package_prefixes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageKind {
    Statement,
    Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredTarget {
    pub id: String,
    pub kind: CoverageKind,
    pub covered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

impl CoveredTarget {
    pub fn statement(id: impl Into<String>, covered: bool) -> Self {
        Self { id: id.into(), kind: CoverageKind::Statement, covered, distance: None }
    }

    pub fn branch(id: impl Into<String>, covered: bool, distance: Option<f64>) -> Self {
        Self { id: id.into(), kind: CoverageKind::Branch, covered, distance }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub targets: Vec<CoveredTarget>,
}

// Wire payloads.

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderDto {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthDto {
    pub label: String,
    pub headers: Vec<HeaderDto>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InfoDto {
    pub is_sut_running: bool,
    pub base_url_of_sut: String,
    pub swagger_json_url: String,
    pub package_prefixes: String,
    /// `null` and absent both mean no credentials.
    #[serde(default, deserialize_with = "null_as_empty")]
    pub auth_info: Vec<AuthDto>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SutRunDto {
    pub running: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SutStatusDto {
    pub is_sut_running: bool,
    pub base_url_of_sut: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDto {
    pub marker: String,
    pub targets: Vec<CoveredTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckDto {
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDto {
    pub error: String,
}

fn null_as_empty<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<Vec<T>>::deserialize(d)?.unwrap_or_default())
}

impl From<InfoDto> for SutInfo {
    fn from(dto: InfoDto) -> Self {
        SutInfo {
            base_url_of_sut: dto.base_url_of_sut,
            swagger_json_url: dto.swagger_json_url,
            is_sut_running: dto.is_sut_running,
            auth_info: dto
                .auth_info
                .into_iter()
                .map(|a| AuthCredential {
                    label: a.label,
                    headers: a.headers.into_iter().map(|h| (h.name, h.value)).collect(),
                })
                .collect(),
            package_prefixes: dto.package_prefixes,
        }
    }
}

impl From<&AuthCredential> for AuthDto {
    fn from(c: &AuthCredential) -> Self {
        AuthDto {
            label: c.label.clone(),
            headers: c
                .headers
                .iter()
                .map(|(name, value)| HeaderDto { name: name.clone(), value: value.clone() })
                .collect(),
        }
    }
}

/// Lifecycle control and coverage retrieval for one SUT.
pub trait SutDriver {
    fn get_info(&mut self) -> Result<SutInfo, DriverError>;
    /// Idempotent; returns the SUT base URL.
    fn start_sut(&mut self) -> Result<String, DriverError>;
    fn stop_sut(&mut self) -> Result<(), DriverError>;
    fn reset_state(&mut self) -> Result<(), DriverError>;
    /// Targets touched since `since`, plus the marker to pass next time.
    fn get_coverage(&mut self, since: &str) -> Result<(CoverageReport, String), DriverError>;
}

/// Moves one protocol request to the driver and returns `(status, body)`.
pub trait WireClient {
    fn exchange(&mut self, verb: Verb, path_and_query: &str, body: Option<&str>) -> Result<(u16, String), TransportError>;

    /// Where requests go, for diagnostics.
    fn endpoint(&self) -> String;
}

/// Protocol client over any [`WireClient`].
#[derive(Debug)]
pub struct DriverClient<W> {
    wire: W,
}

impl<W: WireClient> DriverClient<W> {
    pub fn new(wire: W) -> Self {
        Self { wire }
    }

    pub fn wire(&self) -> &W {
        &self.wire
    }

    fn call<T: for<'de> Deserialize<'de>>(
        &mut self,
        verb: Verb,
        path: &str,
        body: Option<String>,
    ) -> Result<T, DriverError> {
        let (status, text) = self.wire.exchange(verb, path, body.as_deref()).map_err(|e| match e {
            TransportError::Refused(message) | TransportError::Other(message) => {
                DriverError::Unreachable { url: self.wire.endpoint(), message }
            }
            TransportError::Timeout => {
                DriverError::Unreachable { url: self.wire.endpoint(), message: "request timed out".into() }
            }
        })?;
        if !(200..300).contains(&status) {
            let message = serde_json::from_str::<ErrorDto>(&text).map(|e| e.error).unwrap_or(text);
            return Err(DriverError::Protocol { status, message });
        }
        serde_json::from_str(&text).map_err(|e| DriverError::Malformed(format!("{path}: {e}")))
    }

    fn set_running(&mut self, running: bool) -> Result<SutStatusDto, DriverError> {
        let body = serde_json::to_string(&SutRunDto { running }).expect("plain struct");
        self.call(Verb::Post, "/controller/sut", Some(body))
    }
}

impl<W: WireClient> SutDriver for DriverClient<W> {
    fn get_info(&mut self) -> Result<SutInfo, DriverError> {
        self.call::<InfoDto>(Verb::Get, "/controller/info", None).map(SutInfo::from)
    }

    fn start_sut(&mut self) -> Result<String, DriverError> {
        Ok(self.set_running(true)?.base_url_of_sut)
    }

    fn stop_sut(&mut self) -> Result<(), DriverError> {
        self.set_running(false).map(|_| ())
    }

    fn reset_state(&mut self) -> Result<(), DriverError> {
        self.call::<AckDto>(Verb::Post, "/controller/reset", None).map(|_| ())
    }

    fn get_coverage(&mut self, since: &str) -> Result<(CoverageReport, String), DriverError> {
        let encoded: String =
            percent_encoding::utf8_percent_encode(since, percent_encoding::NON_ALPHANUMERIC).collect();
        let dto: CoverageDto = self.call(Verb::Get, &format!("/controller/targets?since={encoded}"), None)?;
        for t in &dto.targets {
            if let Some(d) = t.distance {
                if !d.is_finite() || d < 0.0 {
                    return Err(DriverError::Malformed(format!("target {} has distance {d}", t.id)));
                }
            }
        }
        Ok((CoverageReport { targets: dto.targets }, dto.marker))
    }
}

#[cfg(feature = "net")]
pub use http::HttpWire;

#[cfg(feature = "net")]
mod http {
    use std::time::Duration;

    use super::{DriverClient, WireClient};
    use crate::executor::{HttpRequest, HttpTransport, Transport, TransportError};
    use crate::schema::Verb;

    /// Plain HTTP/1.1 wire to a driver at `base_url` (e.g. `http://localhost:40100`).
    #[derive(Debug)]
    pub struct HttpWire {
        base_url: String,
        transport: HttpTransport,
        timeout: Duration,
    }

    impl HttpWire {
        pub fn new(base_url: &str) -> Self {
            Self {
                base_url: base_url.trim_end_matches('/').to_string(),
                transport: HttpTransport::new(),
                timeout: Duration::from_secs(30),
            }
        }
    }

    impl WireClient for HttpWire {
        fn exchange(
            &mut self,
            verb: Verb,
            path_and_query: &str,
            body: Option<&str>,
        ) -> Result<(u16, String), TransportError> {
            let mut headers = vec![("Accept".to_string(), "application/json".to_string())];
            if body.is_some() {
                headers.push(("Content-Type".into(), "application/json".into()));
            }
            let request = HttpRequest {
                verb,
                url: format!("{}{}", self.base_url, path_and_query),
                headers,
                body: body.map(str::to_string),
            };
            let response = self.transport.send(&request, self.timeout)?;
            Ok((response.status, response.body))
        }

        fn endpoint(&self) -> String {
            self.base_url.clone()
        }
    }

    impl DriverClient<HttpWire> {
        pub fn http(base_url: &str) -> Self {
            DriverClient::new(HttpWire::new(base_url))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn info_accepts_null_auth() {
        let dto: InfoDto = serde_json::from_str(
            r#"{"isSutRunning":false,"baseUrlOfSut":"","swaggerJsonUrl":"","packagePrefixes":"org.x.","authInfo":null,"extra":1}"#,
        )
        .unwrap();
        assert!(SutInfo::from(dto).auth_info.is_empty());
    }

    #[test]
    fn covered_branch_has_no_distance_field() {
        let t = CoveredTarget::branch("b", true, None);
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"{"id":"b","kind":"branch","covered":true}"#);
    }
}
