//! Socket adapters: an outbound transport and an inbound server for any handler.

use std::sync::Arc;
use std::thread;

use anyhow::{anyhow, Context};
use memento_core::http::split_uri;
use memento_core::{Handler, Request, Response, Transport, TransportError};

/// Headers managed by the connection layer on either side.
const HOP_BY_HOP: [&str; 6] = [
    "connection",
    "content-length",
    "host",
    "keep-alive",
    "transfer-encoding",
    "accept-encoding",
];

fn is_hop_by_hop(name: &str) -> bool {
    HOP_BY_HOP.iter().any(|h| name.eq_ignore_ascii_case(h))
}

/// Blocking HTTP client that never follows redirects and adds no headers of its own.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder()
            .max_redirects(0)
            .http_status_as_error(false)
            .user_agent("memento/0.1")
            .accept("")
            .accept_encoding("")
            .build()
            .into();
        UreqTransport { agent }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for UreqTransport {
    fn send(&self, request: Request) -> Result<Response, TransportError> {
        let host = split_uri(&request.uri)
            .map(|(_, authority, _)| authority.to_string())
            .ok_or_else(|| TransportError::InvalidUri(request.uri.clone()))?;
        let failed = |reason: String| TransportError::ConnectionFailed {
            host: host.clone(),
            reason,
        };
        let mut builder = ureq::http::Request::builder()
            .method(request.method.as_str())
            .uri(request.uri.as_str());
        for (name, value) in request.headers.iter() {
            if !is_hop_by_hop(name) {
                builder = builder.header(name, value);
            }
        }
        let result = if request.body.is_empty() {
            builder.body(()).map(|r| self.agent.run(r))
        } else {
            builder.body(request.body).map(|r| self.agent.run(r))
        };
        let resp = result
            .map_err(|e| TransportError::InvalidUri(e.to_string()))?
            .map_err(|e| failed(e.to_string()))?;
        let mut out = Response::new(resp.status().as_u16());
        for (name, value) in resp.headers() {
            if let Ok(v) = value.to_str() {
                if !is_hop_by_hop(name.as_str()) {
                    out.headers.append(canonical_name(name.as_str()), v);
                }
            }
        }
        out.body = resp
            .into_body()
            .read_to_vec()
            .map_err(|e| failed(e.to_string()))?;
        Ok(out)
    }
}

/// `x-accept-datetime` -> `X-Accept-Datetime`.
fn canonical_name(name: &str) -> String {
    name.split('-')
        .map(|part| {
            if part.eq_ignore_ascii_case("tcn") {
                return "TCN".to_string();
            }
            let mut chars = part.chars();
            match chars.next() {
                Some(c) => c.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join("-")
}

/// Forwards every request to an upstream server, keeping its path and query.
pub struct UpstreamProxy {
    upstream: String,
    transport: UreqTransport,
}

impl UpstreamProxy {
    pub fn new(upstream: impl Into<String>) -> Self {
        UpstreamProxy {
            upstream: upstream.into().trim_end_matches('/').to_string(),
            transport: UreqTransport::new(),
        }
    }
}

impl Handler for UpstreamProxy {
    fn handle(&self, request: &Request) -> Response {
        let mut forwarded = request.clone();
        forwarded.uri = format!("{}{}", self.upstream, request.path_and_query());
        match self.transport.send(forwarded) {
            Ok(resp) => resp,
            Err(e) => Response::text(502, e.to_string()),
        }
    }
}

fn to_core(req: &mut tiny_http::Request, fallback_host: &str) -> Request {
    let mut headers = memento_core::Headers::new();
    let mut host = fallback_host.to_string();
    for h in req.headers() {
        let (name, value) = (h.field.as_str().as_str(), h.value.as_str());
        if name.eq_ignore_ascii_case("host") {
            host = value.to_string();
        }
        headers.append(name, value);
    }
    let mut body = Vec::new();
    let _ = req.as_reader().read_to_end(&mut body);
    Request {
        method: req.method().as_str().to_string(),
        uri: format!("http://{host}{}", req.url()),
        headers,
        body,
    }
}

fn respond(handler: &dyn Handler, mut req: tiny_http::Request, listen: &str) {
    let core = to_core(&mut req, listen);
    let resp = handler.handle(&core);
    log::info!("{} {} -> {}", core.method, core.uri, resp.status);
    let mut out = tiny_http::Response::from_data(resp.body).with_status_code(resp.status);
    for (name, value) in resp.headers.iter() {
        if is_hop_by_hop(name) {
            continue;
        }
        if let Ok(h) = tiny_http::Header::from_bytes(name.as_bytes(), value.as_bytes()) {
            out.add_header(h);
        }
    }
    if let Err(e) = req.respond(out) {
        log::warn!("writing response failed: {e}");
    }
}

/// Serves `handler` on `listen` until the process exits.
pub fn serve(handler: Arc<dyn Handler>, listen: &str) -> anyhow::Result<()> {
    let server = tiny_http::Server::http(listen).map_err(|e| anyhow!("cannot listen on {listen}: {e}"))?;
    let addr = server
        .server_addr()
        .to_ip()
        .map(|a| a.to_string())
        .context("listener has no IP address")?;
    eprintln!("listening on http://{addr}");
    for req in server.incoming_requests() {
        let handler = handler.clone();
        let addr = addr.clone();
        thread::spawn(move || respond(handler.as_ref(), req, &addr));
    }
    Ok(())
}
