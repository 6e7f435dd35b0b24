//! In-process access to a [`SimSut`], without sockets.

use std::cell::RefCell;
use std::rc::Rc;
use std::time::Duration;

use crate::driver::{DriverClient, WireClient};
use crate::executor::{HttpRequest, HttpResponse, Transport, TransportError};
use crate::schema::Verb;

use super::engine::{SimRequest, SimSut};

pub type SharedSim = Rc<RefCell<SimSut>>;

/// Driver wire that calls the sim directly.
#[derive(Debug, Clone)]
pub struct LocalWire {
    sim: SharedSim,
}

impl LocalWire {
    pub fn new(sim: SharedSim) -> Self {
        Self { sim }
    }
}

impl WireClient for LocalWire {
    fn exchange(&mut self, verb: Verb, path_and_query: &str, body: Option<&str>) -> Result<(u16, String), TransportError> {
        let req = SimRequest {
            verb,
            target: path_and_query.to_string(),
            headers: vec![],
            body: body.map(str::to_string),
        };
        let reply = self.sim.borrow_mut().handle(&req);
        Ok((reply.response.status, reply.response.body))
    }

    fn endpoint(&self) -> String {
        self.sim.borrow().base_url().to_string()
    }
}

/// SUT transport that calls the sim directly. A call whose simulated stall
/// reaches the timeout is still processed, but reported as timed out.
#[derive(Debug, Clone)]
pub struct LocalTransport {
    sim: SharedSim,
}

impl LocalTransport {
    pub fn new(sim: SharedSim) -> Self {
        Self { sim }
    }
}

fn strip_origin(url: &str) -> &str {
    match url.split_once("://") {
        Some((_, rest)) => rest.find('/').map_or("/", |i| &rest[i..]),
        None => url,
    }
}

impl Transport for LocalTransport {
    fn send(&mut self, request: &HttpRequest, timeout: Duration) -> Result<HttpResponse, TransportError> {
        let req = SimRequest {
            verb: request.verb,
            target: strip_origin(&request.url).to_string(),
            headers: request.headers.clone(),
            body: request.body.clone(),
        };
        let reply = self.sim.borrow_mut().handle(&req);
        if u128::from(reply.stall_ms) >= timeout.as_millis() {
            return Err(TransportError::Timeout);
        }
        Ok(reply.response)
    }
}

/// A sim plus a driver client and transport sharing it.
pub fn local_pair(sim: SimSut) -> (SharedSim, DriverClient<LocalWire>, LocalTransport) {
    let shared = Rc::new(RefCell::new(sim));
    let driver = DriverClient::new(LocalWire::new(Rc::clone(&shared)));
    let transport = LocalTransport::new(Rc::clone(&shared));
    (shared, driver, transport)
}
