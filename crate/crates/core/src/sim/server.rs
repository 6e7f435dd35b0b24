//! Serving a [`SimSut`] over HTTP on localhost.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};

use crate::schema::Verb;

use super::engine::{SimRequest, SimSut};
use super::spec::{SimError, SimSpec};

/// A running single-threaded sim server. Dropping it stops the server.
pub struct SimServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

impl SimServer {
    /// Serves `spec` on `127.0.0.1:port`; port 0 picks a free port.
    pub fn start(spec: SimSpec, port: u16) -> Result<Self, SimError> {
        let mut sim = SimSut::new(spec)?;
        let server = tiny_http::Server::http(("127.0.0.1", port))
            .map_err(|e| SimError::Io(format!("cannot bind 127.0.0.1:{port}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| SimError::Io("server is not bound to an IP socket".into()))?;
        sim.set_base_url(&format!("http://{addr}"));
        let server = Arc::new(server);
        let worker = {
            let server = Arc::clone(&server);
            thread::spawn(move || serve(&server, &mut sim))
        };
        Ok(Self { server, addr, worker: Some(worker) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for SimServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn serve(server: &tiny_http::Server, sim: &mut SimSut) {
    for mut request in server.incoming_requests() {
        let verb = match request.method().as_str().parse::<Verb>() {
            Ok(v) => v,
            Err(_) => {
                let _ = request.respond(tiny_http::Response::empty(405));
                continue;
            }
        };
        let mut body = String::new();
        if let Err(e) = request.as_reader().read_to_string(&mut body) {
            warn!("unreadable request body: {e}");
        }
        let headers = request
            .headers()
            .iter()
            .map(|h| (h.field.as_str().as_str().to_string(), h.value.as_str().to_string()))
            .collect();
        let req = SimRequest {
            verb,
            target: request.url().to_string(),
            headers,
            body: (!body.is_empty()).then_some(body),
        };
        let reply = sim.handle(&req);
        debug!("{} {} -> {}", req.verb, req.target, reply.response.status);
        if reply.stall_ms > 0 {
            thread::sleep(Duration::from_millis(reply.stall_ms));
        }
        let mut response =
            tiny_http::Response::from_string(reply.response.body).with_status_code(reply.response.status);
        for (name, value) in &reply.response.headers {
            if let Ok(h) = tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()) {
                response.add_header(h);
            }
        }
        if let Err(e) = request.respond(response) {
            debug!("client went away: {e}");
        }
    }
}
