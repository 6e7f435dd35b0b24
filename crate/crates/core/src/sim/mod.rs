//! A deterministic simulated SUT with its driver.
//!
//! [`SimSut`] serves an API described by a [`SimSpec`], a generated Swagger
//! document at `/swagger.json`, and the driver protocol under `/controller/`.
//! It can be used in-process ([`local_pair`]) or over HTTP (`SimServer`).

mod canned;
mod engine;
mod local;
#[cfg(feature = "net")]
mod server;
mod spec;
mod swagger;

pub use canned::{by_name, crud_chain, faulty, needle, CANNED};
pub use engine::{SimReply, SimRequest, SimSut, DEFAULT_SIM_BASE_URL, MISSING_DISTANCE};
pub use local::{local_pair, LocalTransport, LocalWire, SharedSim};
#[cfg(feature = "net")]
pub use server::SimServer;
pub use spec::{
    branch_id, ParamIn, ParamRef, Predicate, SimEndpoint, SimError, SimParam, SimResponse, SimSpec, Step, StoreOp,
};
pub use swagger::swagger_document;

/// Loads a canned spec by name, or a JSON spec file by path.
pub fn load_spec(name_or_path: &str) -> Result<SimSpec, SimError> {
    if CANNED.contains(&name_or_path) {
        return by_name(name_or_path);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| SimError::Io(format!("{name_or_path}: {e}")))?;
    SimSpec::from_json(&text)
}
