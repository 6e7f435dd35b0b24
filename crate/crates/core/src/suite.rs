//! Writes the final suite as JUnit/RestAssured Java or as neutral JSON.
//!
//! Java output follows the RestAssured call-chain style: one `given()` chain per
//! call, asserting the status observed during generation. A creation call whose
//! location is reused later stores it in a `location_<resource>` variable, and
//! the dependent call goes through `resolveLocation(...)`.
//!
//! NEUTRAL_JSON is an array of tests, each an array of calls:
//!
//! ```json
//! [[{"verb": "POST", "path": "/api/v1/activities", "query": [], "headers": [],
//!    "body": "{\"name\":\"x\"}", "expected_status": 201, "fault_revealing": false},
//!   {"verb": "DELETE", "path": "/api/v1/activities/-3", "query": [],
//!    "headers": [{"name": "Authorization", "value": "ApiKey administrator"}],
//!    "body": null, "expected_status": 204, "fault_revealing": false,
//!    "link": {"from_test_call_index": 0}}]]
//! ```
//!
//! A linked call's `path` is the one built from its own genes; replaying it
//! replaces the creation prefix plus id segment with the location returned by
//! the call at `from_test_call_index`. `expected_status` is `null` for a call
//! that timed out.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::ConcreteHttpCall;
use crate::fitness::{EvaluatedIndividual, ExecutionResult};
use crate::schema::Verb;

pub const DEFAULT_SUITE_NAME: &str = "EvoMasterTest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    JavaJunit4,
    JavaJunit5,
    NeutralJson,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::JavaJunit4, OutputFormat::JavaJunit5, OutputFormat::NeutralJson];

    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::JavaJunit4 => "JAVA_JUNIT_4",
            OutputFormat::JavaJunit5 => "JAVA_JUNIT_5",
            OutputFormat::NeutralJson => "NEUTRAL_JSON",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::NeutralJson => "json",
            _ => "java",
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutputFormat::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown output format {s:?} (expected JAVA_JUNIT_4, JAVA_JUNIT_5 or NEUTRAL_JSON)"))
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot write suite to {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0:?} is not a valid Java class name")]
    InvalidName(String),
    #[error("malformed neutral suite: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameValue {
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeutralLink {
    pub from_test_call_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeutralCall {
    pub verb: Verb,
    pub path: String,
    #[serde(default)]
    pub query: Vec<NameValue>,
    #[serde(default)]
    pub headers: Vec<NameValue>,
    pub body: Option<String>,
    pub expected_status: Option<u16>,
    #[serde(default)]
    pub fault_revealing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<NeutralLink>,
}

pub type NeutralTest = Vec<NeutralCall>;

fn pairs(v: &[(String, String)]) -> Vec<NameValue> {
    v.iter().map(|(name, value)| NameValue { name: name.clone(), value: value.clone() }).collect()
}

/// The path to record for a call, and its link if it was resolved against an
/// earlier creation.
fn path_and_link(call: &ConcreteHttpCall) -> (String, Option<usize>) {
    match &call.link {
        Some(l) if l.resolved => (l.unresolved_path.clone(), Some(l.source_action)),
        _ => (call.path.clone(), None),
    }
}

pub fn neutral_tests(suite: &[EvaluatedIndividual]) -> Vec<NeutralTest> {
    suite
        .iter()
        .map(|ev| {
            ev.calls
                .iter()
                .zip(&ev.results)
                .map(|(call, result)| {
                    let (path, link) = path_and_link(call);
                    NeutralCall {
                        verb: call.verb,
                        path,
                        query: pairs(&call.query),
                        headers: pairs(&call.headers),
                        body: call.body.clone(),
                        expected_status: result.status,
                        fault_revealing: result.is_server_error(),
                        link: link.map(|i| NeutralLink { from_test_call_index: i }),
                    }
                })
                .collect()
        })
        .collect()
}

pub fn render_neutral(suite: &[EvaluatedIndividual]) -> String {
    let mut out = serde_json::to_string_pretty(&neutral_tests(suite)).expect("plain data");
    out.push('\n');
    out
}

pub fn parse_neutral(text: &str) -> Result<Vec<NeutralTest>, SuiteError> {
    let tests: Vec<NeutralTest> = serde_json::from_str(text).map_err(|e| SuiteError::Malformed(e.to_string()))?;
    for (t, calls) in tests.iter().enumerate() {
        for (i, c) in calls.iter().enumerate() {
            if let Some(l) = c.link {
                if l.from_test_call_index >= i {
                    return Err(SuiteError::Malformed(format!("test {t} call {i} links forward")));
                }
            }
        }
    }
    Ok(tests)
}

fn is_java_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Java string literal, ASCII only.
fn java_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            ' '..='~' => out.push(c),
            _ => {
                let mut buf = [0u16; 2];
                for unit in c.encode_utf16(&mut buf) {
                    let _ = write!(out, "\\u{unit:04x}");
                }
            }
        }
    }
    out.push('"');
    out
}

/// Resource name for location variables: the last literal segment of the
/// creation path, as an identifier.
fn resource_name(path: &str) -> String {
    let last = path.split('/').rfind(|s| !s.is_empty() && !s.starts_with('{')).unwrap_or("resource");
    let ident: String = last.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    if ident.is_empty() {
        "resource".into()
    } else {
        ident
    }
}

const JAVA_HEADER: &str = "\
// Generated by evorest. Do not edit by hand.
//
// Setup: the tests call the SUT at baseUrlOfSut, read from the system property
// of the same name. Start the SUT (for example through its driver) and reset its
// state before each test, as was done while generating them.
//
// Chained calls use a helper with this contract:
//
//     static String resolveLocation(String location, String expected) {
//         // `location` is the path of a resource created earlier in the test and
//         // `expected` the URL generated for the dependent call. The result is
//         // baseUrlOfSut + location, followed by whatever `expected` has after
//         // the resource id segment.
//     }
";

struct JavaTest<'a> {
    ev: &'a EvaluatedIndividual,
    /// Per call: the location variable it assigns, if a later call uses it.
    location_vars: Vec<Option<String>>,
}

impl<'a> JavaTest<'a> {
    fn new(ev: &'a EvaluatedIndividual) -> Self {
        let n = ev.calls.len();
        let mut used = vec![false; n];
        for call in &ev.calls {
            if let (_, Some(src)) = path_and_link(call) {
                used[src] = true;
            }
        }
        let mut location_vars = vec![None; n];
        let mut taken: Vec<String> = Vec::new();
        for i in (0..n).filter(|&i| used[i]) {
            let base = format!("location_{}", resource_name(&ev.calls[i].path));
            let name = if taken.contains(&base) { format!("{base}_{i}") } else { base };
            taken.push(name.clone());
            location_vars[i] = Some(name);
        }
        Self { ev, location_vars }
    }

    fn url_expr(&self, call: &ConcreteHttpCall) -> String {
        let query = call.path_and_query().strip_prefix(call.path.as_str()).unwrap_or_default().to_string();
        match path_and_link(call) {
            (unresolved, Some(src)) => {
                let var = self.location_vars[src].as_deref().expect("linked sources have variables");
                let resolved = format!("resolveLocation({var}, baseUrlOfSut + {})", java_str(&unresolved));
                if query.is_empty() {
                    resolved
                } else {
                    format!("{resolved} + {}", java_str(&query))
                }
            }
            (path, None) => format!("baseUrlOfSut + {}", java_str(&format!("{path}{query}"))),
        }
    }

    fn render(&self, index: usize, out: &mut String) {
        let ev = self.ev;
        let _ = writeln!(out, "    @Test");
        let _ = writeln!(out, "    public void test{index}() throws Exception {{");
        if ev.reveals_fault() {
            let _ = writeln!(out, "        // Reveals a potential fault: the SUT answered with a 5xx server error.");
        }
        let mut declared = false;
        for var in self.location_vars.iter().flatten() {
            let _ = writeln!(out, "        String {var} = \"\";");
            declared = true;
        }
        if declared {
            let _ = writeln!(out);
        }

        let mut id_counter = 0;
        for (i, (call, result)) in ev.calls.iter().zip(&ev.results).enumerate() {
            if i > 0 {
                let _ = writeln!(out);
            }
            self.render_call(call, result, self.location_vars[i].as_deref(), &mut id_counter, out);
        }
        let _ = writeln!(out, "    }}");
    }

    fn render_call(
        &self,
        call: &ConcreteHttpCall,
        result: &ExecutionResult,
        location_var: Option<&str>,
        id_counter: &mut usize,
        out: &mut String,
    ) {
        let indent = "                ";
        if let Some(status) = result.status.filter(|s| *s >= 500) {
            let _ = writeln!(out, "        // Potential fault: {status} on {} {}", call.verb, call.path);
        }
        if result.timed_out {
            let _ = writeln!(out, "        // Timed out during generation, so no status is asserted.");
        }
        // Only a location actually returned can be reused.
        let extraction = location_var.zip(result.extracted_location.as_ref());
        let prefix = match extraction {
            Some(_) if result.location_from_header => format!("String header_{id_counter} = "),
            Some(_) => format!("String id_{id_counter} = "),
            None => String::new(),
        };
        let _ = writeln!(out, "        {prefix}given().accept(\"*/*\")");
        for (name, value) in &call.headers {
            let _ = writeln!(out, "{indent}.header({}, {})", java_str(name), java_str(value));
        }
        if let Some(body) = &call.body {
            let _ = writeln!(out, "{indent}.contentType(\"application/json\")");
            let _ = writeln!(out, "{indent}.body({})", java_str(body));
        }
        let _ = writeln!(out, "{indent}.{}({})", call.verb.lower(), self.url_expr(call));
        let _ = write!(out, "{indent}.then()");
        if let Some(status) = result.status {
            let _ = write!(out, "\n{indent}.statusCode({status})");
        }
        match extraction {
            Some((var, _)) if result.location_from_header => {
                let _ = writeln!(out, "\n{indent}.extract().header(\"location\");");
                let _ = writeln!(out);
                let _ = writeln!(out, "        {var} = header_{id_counter};");
                *id_counter += 1;
            }
            Some((var, _)) => {
                let _ = writeln!(out, "\n{indent}.extract().body().path(\"id\").toString();");
                let _ = writeln!(out);
                let creation = call.path.trim_end_matches('/');
                let _ = writeln!(out, "        {var} = {} + id_{id_counter};", java_str(&format!("{creation}/")));
                *id_counter += 1;
            }
            None => {
                let _ = writeln!(out, ";");
            }
        }
    }
}

/// Renders the suite as one Java class named `class_name`.
pub fn render_java(suite: &[EvaluatedIndividual], junit5: bool, class_name: &str) -> Result<String, SuiteError> {
    if !is_java_identifier(class_name) {
        return Err(SuiteError::InvalidName(class_name.to_string()));
    }
    let mut out = String::from(JAVA_HEADER);
    let _ = writeln!(out, "//");
    let _ = writeln!(out, "// {} test(s).", suite.len());
    out.push('\n');
    if junit5 {
        out.push_str("import org.junit.jupiter.api.Test;\n");
    } else {
        out.push_str("import org.junit.Test;\n");
    }
    out.push_str("import static io.restassured.RestAssured.given;\n\n");
    let _ = writeln!(out, "public class {class_name} {{");
    out.push('\n');
    out.push_str(
        "    private static String baseUrlOfSut = System.getProperty(\"baseUrlOfSut\", \"http://localhost:8080\");\n",
    );
    for (i, ev) in suite.iter().enumerate() {
        out.push('\n');
        JavaTest::new(ev).render(i, &mut out);
    }
    out.push_str("}\n");
    Ok(out)
}

pub fn render_suite(suite: &[EvaluatedIndividual], format: OutputFormat, name: &str) -> Result<String, SuiteError> {
    match format {
        OutputFormat::JavaJunit4 => render_java(suite, false, name),
        OutputFormat::JavaJunit5 => render_java(suite, true, name),
        OutputFormat::NeutralJson => Ok(render_neutral(suite)),
    }
}

/// Writes `<folder>/<file_name>.<ext>` atomically and returns the written path.
/// The folder is created if needed; on error nothing is left behind.
pub fn write_suite(
    suite: &[EvaluatedIndividual],
    format: OutputFormat,
    folder: &Path,
    file_name: &str,
) -> Result<Vec<PathBuf>, SuiteError> {
    let content = render_suite(suite, format, file_name)?;
    let target = folder.join(format!("{file_name}.{}", format.extension()));
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SuiteError::Io { path, source }
    };
    fs::create_dir_all(folder).map_err(io(folder))?;
    let mut tmp = tempfile::NamedTempFile::new_in(folder).map_err(io(folder))?;
    tmp.write_all(content.as_bytes()).map_err(io(&target))?;
    tmp.flush().map_err(io(&target))?;
    tmp.persist(&target).map_err(|e| SuiteError::Io { path: target.clone(), source: e.error })?;
    Ok(vec![target])
}

/// The code of `source` with comments removed and every string literal
/// emptied, so later checks only see Java tokens.
fn strip_literals(source: &str) -> Result<String, String> {
    let mut code = String::with_capacity(source.len());
    for (line_no, line) in source.lines().enumerate() {
        let mut chars = line.chars().peekable();
        let mut in_str = false;
        while let Some(c) = chars.next() {
            if in_str {
                match c {
                    '\\' => {
                        chars.next();
                    }
                    '"' => {
                        in_str = false;
                        code.push('"');
                    }
                    _ => {}
                }
                continue;
            }
            match c {
                '"' => {
                    in_str = true;
                    code.push('"');
                }
                '/' if chars.peek() == Some(&'/') => break,
                _ => code.push(c),
            }
        }
        if in_str {
            return Err(format!("unterminated string on line {}", line_no + 1));
        }
        code.push('\n');
    }
    Ok(code)
}

/// Syntactic checks on emitted Java: balanced delimiters outside string
/// literals and comments, and one `given()` chain ending in `.then()` per call
/// of each test. Returns the number of calls per test method.
pub fn lint_java(source: &str) -> Result<Vec<usize>, String> {
    let code = strip_literals(source)?;
    let mut depth: Vec<char> = Vec::new();
    for (line_no, line) in code.lines().enumerate() {
        for c in line.chars() {
            match c {
                '(' | '{' | '[' => depth.push(c),
                ')' | '}' | ']' => {
                    let open = match c {
                        ')' => '(',
                        '}' => '{',
                        _ => '[',
                    };
                    if depth.pop() != Some(open) {
                        return Err(format!("unbalanced {c:?} on line {}", line_no + 1));
                    }
                }
                _ => {}
            }
        }
    }
    if !depth.is_empty() {
        return Err(format!("{} unclosed delimiter(s)", depth.len()));
    }

    let mut counts = Vec::new();
    for method in code.split("@Test").skip(1) {
        let chains = method.matches("given()").count();
        let thens = method.matches(".then()").count();
        if chains != thens {
            return Err(format!("test has {chains} given() chains but {thens} then() assertions"));
        }
        for stmt in method.split(';').filter(|s| s.contains("given()")) {
            if stmt.matches("given()").count() != 1 || stmt.matches(".then()").count() != 1 {
                return Err("a statement holds more or less than one assertion chain".into());
            }
        }
        counts.push(chains);
    }
    Ok(counts)
}
