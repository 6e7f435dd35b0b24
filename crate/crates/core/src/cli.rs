//! Command-line entry point.
//!
//! `run` wires everything together: connect to the driver, start the SUT, fetch
//! and parse its Swagger document, search, write the suite and print stats.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Once};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{CommandFactory, Parser};
use log::{info, warn};

use crate::clock::WallClock;
use crate::driver::{DriverClient, DriverError, SutDriver};
use crate::executor::{HttpRequest, HttpTransport, Transport, DEFAULT_TIMEOUT_MS};
use crate::genome::DEFAULT_MAX_TEST_SIZE;
use crate::schema::{parse_schema, Verb};
use crate::search::{run_search, Algorithm, SearchConfig, SearchHooks, SearchTarget};
use crate::suite::{write_suite, OutputFormat, DEFAULT_SUITE_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DRIVER: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_SEARCH: i32 = 5;
pub const EXIT_OUTPUT: i32 = 6;

pub const DEFAULT_DRIVER_URL: &str = "http://localhost:40100";
pub const DEFAULT_OUTPUT_FOLDER: &str = "src/em-generated";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "evorest",
    version,
    about = "Generates system-level test suites for REST APIs by evolutionary search.",
    args_override_self = true
)]
pub struct CliOptions {
    /// Maximum number of seconds allowed for the search
    #[arg(long = "maxTimeInSeconds", value_name = "Int", default_value_t = 60)]
    pub max_time_in_seconds: u64,

    /// Folder where the generated tests are written
    #[arg(long = "outputFolder", value_name = "String", default_value = DEFAULT_OUTPUT_FOLDER)]
    pub output_folder: PathBuf,

    /// Format of the generated tests: JAVA_JUNIT_4, JAVA_JUNIT_5 or NEUTRAL_JSON
    #[arg(long = "outputFormat", value_name = "OutputFormat", default_value = "JAVA_JUNIT_4",
          value_parser = parse_format)]
    pub output_format: OutputFormat,

    /// Name of the generated test file, without extension (also the Java class name)
    #[arg(long = "testSuiteFileName", value_name = "String", default_value = DEFAULT_SUITE_NAME)]
    pub test_suite_file_name: String,

    /// Base URL of the driver controlling the SUT
    #[arg(long = "driverUrl", value_name = "URL", default_value = DEFAULT_DRIVER_URL)]
    pub driver_url: String,

    /// Seed of the random generator; derived from the clock when absent
    #[arg(long = "seed", value_name = "Long")]
    pub seed: Option<u64>,

    /// Search algorithm: MIO or RANDOM
    #[arg(long = "algorithm", value_name = "Algorithm", default_value = "MIO", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,

    /// Budget as a number of evaluated tests; overrides --maxTimeInSeconds
    #[arg(long = "maxEvaluations", value_name = "Int")]
    pub max_evaluations: Option<u64>,

    /// Initial probability of sampling a fresh test instead of mutating one
    #[arg(long = "probOfRandomSampling", value_name = "Double", default_value_t = 0.5)]
    pub prob_of_random_sampling: f64,

    /// Initial number of tests kept per uncovered target
    #[arg(long = "populationPerTarget", value_name = "Int", default_value_t = 10)]
    pub population_per_target: usize,

    /// Fraction of the budget after which the search only exploits
    #[arg(long = "focusedSearchActivationTime", value_name = "Double", default_value_t = 0.5)]
    pub focused_search_activation_time: f64,

    /// Maximum number of calls in a test
    #[arg(long = "maxTestSize", value_name = "Int", default_value_t = DEFAULT_MAX_TEST_SIZE)]
    pub max_test_size: usize,

    /// Timeout of each call to the SUT, in milliseconds
    #[arg(long = "requestTimeoutMs", value_name = "Int", default_value_t = DEFAULT_TIMEOUT_MS)]
    pub request_timeout_ms: u64,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse()
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

impl CliOptions {
    pub fn parse_from_args<I, T>(argv: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        Self::try_parse_from(argv)
    }

    pub fn help_text() -> String {
        Self::command().render_help().to_string()
    }

    /// Search settings; `seed` is used when no `--seed` was given.
    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            max_time_seconds: self.max_time_in_seconds,
            max_evaluations: self.max_evaluations,
            p_random_start: self.prob_of_random_sampling,
            population_per_target_start: self.population_per_target,
            focus_fraction: self.focused_search_activation_time,
            max_test_size: self.max_test_size,
            seed: self.seed.unwrap_or(seed),
            algorithm: self.algorithm,
            timeout_ms: self.request_timeout_ms,
        }
    }
}

/// Long flags given more than once; the last occurrence wins.
pub fn repeated_flags(argv: &[String]) -> Vec<String> {
    let mut seen: Vec<&str> = Vec::new();
    let mut repeated = Vec::new();
    for arg in argv.iter().skip(1) {
        let Some(flag) = arg.strip_prefix("--") else { continue };
        let name = flag.split('=').next().unwrap_or(flag);
        if seen.contains(&name) {
            if !repeated.iter().any(|r: &String| r == name) {
                repeated.push(name.to_string());
            }
        } else {
            seen.push(name);
        }
    }
    repeated
}

fn time_seed() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64)
}

static STOP: AtomicBool = AtomicBool::new(false);
static HANDLER: Once = Once::new();

fn install_stop_handler() {
    HANDLER.call_once(|| {
        if let Err(e) = ctrlc::set_handler(|| {
            eprintln!("interrupted: finishing the current evaluation and writing partial results");
            STOP.store(true, Ordering::SeqCst);
        }) {
            warn!("cannot install the interrupt handler: {e}");
        }
    });
    STOP.store(false, Ordering::SeqCst);
}

fn driver_failure(e: &DriverError) -> i32 {
    eprintln!("error: {e}");
    EXIT_DRIVER
}

fn fetch(url: &str) -> Result<String, String> {
    let mut transport = HttpTransport::new();
    let request = HttpRequest {
        verb: Verb::Get,
        url: url.to_string(),
        headers: vec![("Accept".into(), "application/json".into())],
        body: None,
    };
    let response = transport.send(&request, Duration::from_secs(30)).map_err(|e| e.to_string())?;
    if response.status != 200 {
        return Err(format!("GET {url} returned {}", response.status));
    }
    Ok(response.body)
}

/// Runs the tool with `argv` (including the program name) and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let options = match CliOptions::parse_from_args(&argv) {
        Ok(o) => o,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    for flag in repeated_flags(&argv) {
        warn!("--{flag} given more than once, using the last value");
        eprintln!("warning: --{flag} given more than once, using the last value");
    }

    let config = options.search_config(time_seed());
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    info!("seed {}", config.seed);

    let mut driver = DriverClient::http(&options.driver_url);
    if let Err(e) = driver.get_info() {
        return driver_failure(&e);
    }
    let base_url = match driver.start_sut() {
        Ok(url) => url,
        Err(e) => return driver_failure(&e),
    };
    let sut_info = match driver.get_info() {
        Ok(i) => i,
        Err(e) => return driver_failure(&e),
    };

    let document = match fetch(&sut_info.swagger_json_url) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot fetch the Swagger document: {e}");
            return EXIT_SCHEMA;
        }
    };
    let schema = match parse_schema(&document) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SCHEMA;
        }
    };

    install_stop_handler();
    let target = SearchTarget { schema, base_url, credentials: sut_info.auth_info };
    let mut transport = HttpTransport::new();
    let hooks = SearchHooks { stop: Some(&STOP), on_progress: None };
    let outcome = match run_search(&target, &config, &mut driver, &mut transport, &WallClock::new(), hooks) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SEARCH;
        }
    };

    let written = write_suite(
        &outcome.suite,
        options.output_format,
        &options.output_folder,
        &options.test_suite_file_name,
    );
    if let Err(e) = driver.stop_sut() {
        warn!("could not stop the SUT: {e}");
    }
    println!("{}", outcome.stats.to_json());
    match written {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_OUTPUT;
        }
    }
    match outcome.aborted {
        Some(reason) => {
            eprintln!("error: search aborted: {reason}");
            EXIT_SEARCH
        }
        None => EXIT_OK,
    }
}
