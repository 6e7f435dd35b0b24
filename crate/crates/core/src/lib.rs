//! Evolutionary system-level test generation for REST APIs.
//!
//! The crate reads a Swagger 2.0 description of an API, evolves sequences of
//! HTTP calls with the MIO many-objective algorithm, and writes the best tests
//! found as self-contained test files. Coverage feedback comes from a driver
//! that speaks a small JSON-over-HTTP control protocol (see [`driver`]).
//!
//! Module map:
//!
//! - [`schema`]: Swagger 2.0 ingestion into action templates.
//! - [`genome`]: genes, individuals, sampling, mutation and rendering.
//! - [`fitness`]: per-target heuristic scores from driver feedback.
//! - [`search`]: the MIO archive and search loop, plus a random baseline.
//! - [`executor`]: executes individuals as HTTP calls, chaining locations.
//! - [`driver`]: client side of the driver control protocol.
//! - [`sim`]: a deterministic simulated SUT + driver for testing.
//! - [`suite`]: writes the final suite as Java or neutral JSON.

pub mod clock;
pub mod driver;
pub mod executor;
pub mod fitness;
pub mod genome;
pub mod schema;
pub mod search;
pub mod sim;
pub mod suite;

#[cfg(feature = "net")]
pub mod cli;

pub use driver::{AuthCredential, CoverageReport, DriverClient, DriverError, SutDriver, SutInfo};
pub use executor::{execute, resolve_location, ConcreteHttpCall, Transport, TransportError};
pub use fitness::{EvaluatedIndividual, ExecutionResult, FitnessValue, TargetId, TargetKind};
pub use genome::{Gene, Individual, RestAction, Sampler};
pub use schema::{parse_schema, ActionTemplate, ApiSchema, ParamKind, ParamSpec, Verb};
pub use search::{run_search, Algorithm, SearchConfig, SearchOutcome, SearchStats};
pub use suite::{write_suite, OutputFormat};
