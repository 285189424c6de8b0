//! An archive server: memento store, TimeGate, TimeBundle, TimeMap and memento endpoints.
//!
//! URI layout, with the original URI appended verbatim:
//!
//! ```text
//! {base}/timegate/{URI-R}
//! {base}/timebundle/{URI-R}
//! {base}/timemap/{URI-R}
//! {base}/memento/{yyyymmddhhmmss}/{URI-R}
//! {base}/ingest/{URI-R}            (POST, transactional capture)
//! ```

mod store;

use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::date::DatetimeStamp;
use crate::headers::{
    serialize_alternates, DatetimeInterval, CONTENT_LANGUAGE, CONTENT_TYPE, DATETIME_VALIDITY,
    LINK, LOCATION, REL_ORIGINAL, REL_TIMEBUNDLE, TCN, VARY,
};
use crate::http::{Handler, Headers, Request, Response};
use crate::negotiation::{negotiate, DecisionKind, NegotiationDecision, DEFAULT_WINDOW};
use crate::record::{content_digest, MementoDraft, MementoRecord, RecordError};
use crate::timemap::TimeMap;

pub use store::ArchiveStore;

pub const TIMEGATE_PREFIX: &str = "/timegate/";
pub const TIMEBUNDLE_PREFIX: &str = "/timebundle/";
pub const TIMEMAP_PREFIX: &str = "/timemap/";
pub const MEMENTO_PREFIX: &str = "/memento/";
pub const INGEST_PREFIX: &str = "/ingest/";

pub const TIMEMAP_MEDIA_TYPE: &str = "application/json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArchiveError {
    #[error("memento {0} already stored")]
    DuplicateMemento(String),
    #[error("invalid record: {0}")]
    InvalidRecord(#[from] RecordError),
    #[error("no memento {0}")]
    UnknownMemento(String),
    #[error("journal: {0}")]
    Journal(String),
}

impl ArchiveError {
    fn journal(e: std::io::Error) -> Self {
        ArchiveError::Journal(e.to_string())
    }
}

/// `{base}/timegate/{uri_r}`, the URI-G convention.
pub fn timegate_uri(base: &str, uri_r: &str) -> String {
    format!("{}{TIMEGATE_PREFIX}{uri_r}", base.trim_end_matches('/'))
}

pub fn timebundle_uri(base: &str, uri_r: &str) -> String {
    format!("{}{TIMEBUNDLE_PREFIX}{uri_r}", base.trim_end_matches('/'))
}

pub fn timemap_uri(base: &str, uri_r: &str) -> String {
    format!("{}{TIMEMAP_PREFIX}{uri_r}", base.trim_end_matches('/'))
}

pub fn memento_uri(base: &str, uri_r: &str, at: DatetimeStamp) -> String {
    format!("{}{MEMENTO_PREFIX}{}/{uri_r}", base.trim_end_matches('/'), at.compact())
}

/// Deployment settings for a standalone archive node.
#[derive(Debug, Clone, Deserialize)]
pub struct ArchiveConfig {
    pub listen: String,
    pub base_uri: String,
    pub store_path: String,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn link_header(uri_r: &str, uri_b: &str) -> String {
    format!("<{uri_r}>; rel=\"{REL_ORIGINAL}\", <{uri_b}>; rel=\"{REL_TIMEBUNDLE}\"")
}

/// Renders a negotiation outcome as a TimeGate response.
pub fn timegate_response(decision: &NegotiationDecision, timemap: &TimeMap) -> Response {
    let mut resp = match decision.kind {
        DecisionKind::BadRequest => {
            let why = decision
                .error
                .as_ref()
                .map_or_else(|| "unparseable datetime".to_string(), |e| e.to_string());
            return Response::text(400, why).with_header(VARY, "negotiate, accept-datetime");
        }
        DecisionKind::Choice => {
            let chosen = decision.chosen.as_ref().expect("choice carries a variant");
            Response::new(302)
                .with_header(LOCATION, chosen.uri.clone())
                .with_header(TCN, "choice")
        }
        DecisionKind::List => Response::new(300).with_header(TCN, "list"),
        DecisionKind::NotAcceptable => Response::new(406).with_header(TCN, "list"),
    };
    resp.headers.append(VARY, "negotiate, accept-datetime");
    resp.headers
        .append(crate::headers::ALTERNATES, serialize_alternates(&decision.alternates_window));
    if let Some(iv) = decision.archive_interval {
        resp.headers.append(crate::headers::ARCHIVE_INTERVAL, iv.to_string());
    }
    resp.headers
        .append(LINK, link_header(&timemap.original, &timemap.timebundle));
    if decision.kind != DecisionKind::Choice {
        let listing: String = decision
            .alternates_window
            .iter()
            .map(|d| format!("{}\n", d.uri))
            .collect();
        resp.headers.append(CONTENT_TYPE, "text/uri-list");
        resp.body = listing.into_bytes();
    }
    resp
}

pub fn timebundle_response(timemap_location: String) -> Response {
    Response::new(303).with_header(LOCATION, timemap_location)
}

pub fn timemap_response(timemap: &TimeMap) -> Response {
    Response::new(200)
        .with_header(CONTENT_TYPE, TIMEMAP_MEDIA_TYPE)
        .with_body(timemap.to_json().into_bytes())
}

fn method_allowed(req: &Request, allowed: &[&str]) -> bool {
    allowed.iter().any(|m| req.method.eq_ignore_ascii_case(m))
}

/// An archive server bound to a base URI.
pub struct ArchiveNode {
    base: String,
    store: Arc<ArchiveStore>,
    window: usize,
    // When set, URI-R doubles as its own TimeGate.
    self_timegate: bool,
}

impl ArchiveNode {
    pub fn new(base: impl Into<String>, store: Arc<ArchiveStore>) -> Self {
        ArchiveNode {
            base: base.into().trim_end_matches('/').to_string(),
            store,
            window: DEFAULT_WINDOW,
            self_timegate: false,
        }
    }

    pub fn in_memory(base: impl Into<String>) -> Self {
        Self::new(base, Arc::new(ArchiveStore::in_memory()))
    }

    pub fn with_window(mut self, k: usize) -> Self {
        self.window = k;
        self
    }

    /// The node negotiates at URI-R itself, as an archival-capable origin does.
    pub fn as_self_timegate(mut self) -> Self {
        self.self_timegate = true;
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn store(&self) -> &Arc<ArchiveStore> {
        &self.store
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn timegate_for(&self, uri_r: &str) -> String {
        if self.self_timegate {
            uri_r.to_string()
        } else {
            timegate_uri(&self.base, uri_r)
        }
    }

    pub fn memento_uri_for(&self, uri_r: &str, at: DatetimeStamp) -> String {
        memento_uri(&self.base, uri_r, at)
    }

    pub fn put_memento(&self, record: MementoRecord) -> Result<String, ArchiveError> {
        self.store.put(record)
    }

    /// Stores a crawler-style capture (no validity interval) under a minted URI-M.
    pub fn seed(
        &self,
        uri_r: &str,
        datetime: DatetimeStamp,
        media_type: &str,
        language: Option<&str>,
        body: Vec<u8>,
    ) -> Result<String, ArchiveError> {
        let record = MementoDraft {
            uri_m: self.memento_uri_for(uri_r, datetime),
            uri_r: uri_r.to_string(),
            datetime,
            created: datetime,
            media_type: media_type.to_string(),
            language: language.map(str::to_string),
            body,
            validity: None,
        }
        .build()?;
        self.put_memento(record)
    }

    /// Captures a representation an origin just served.
    ///
    /// A new memento is minted only when the body differs from the latest one held for
    /// `uri_r`; otherwise the latest memento's validity is extended to `now`. When a new
    /// memento supersedes an older one, the older validity closes one second before.
    pub fn ingest_transaction(
        &self,
        uri_r: &str,
        body: &[u8],
        media_type: &str,
        now: DatetimeStamp,
    ) -> Result<Option<String>, ArchiveError> {
        let latest = self.store.latest(uri_r);
        if let Some(prev) = &latest {
            if prev.digest() == content_digest(body) {
                if let Some(v) = prev.validity() {
                    if now > v.until() {
                        self.store.set_validity(prev.uri_m(), v.with_until(now).expect("widening"))?;
                    }
                }
                return Ok(None);
            }
            if now <= prev.datetime() {
                // A second change within the same second cannot get its own URI-M.
                log::warn!("dropping change to {uri_r} at {now}: not after latest memento");
                return Ok(None);
            }
            if let Some(v) = prev.validity() {
                let close = now.plus_seconds(-1);
                if close > v.until() {
                    self.store.set_validity(prev.uri_m(), v.with_until(close).expect("widening"))?;
                }
            }
        }
        let record = MementoDraft {
            uri_m: self.memento_uri_for(uri_r, now),
            uri_r: uri_r.to_string(),
            datetime: now,
            created: now,
            media_type: media_type.to_string(),
            language: None,
            body: body.to_vec(),
            validity: Some(DatetimeInterval::instant(now)),
        }
        .build()?;
        self.put_memento(record).map(Some)
    }

    pub fn timemap(&self, uri_r: &str) -> Option<TimeMap> {
        let entries = self.store.entries(uri_r);
        TimeMap::new(
            uri_r,
            self.timegate_for(uri_r),
            timebundle_uri(&self.base, uri_r),
            entries,
        )
        .ok()
    }

    pub fn handle_timegate(&self, uri_r: &str, headers: &Headers) -> Response {
        let Some(map) = self.timemap(uri_r) else {
            return Response::not_found();
        };
        let decision = negotiate(&map, headers, self.window);
        timegate_response(&decision, &map)
    }

    pub fn handle_timebundle(&self, uri_r: &str) -> Response {
        if self.store.entries(uri_r).is_empty() {
            return Response::not_found();
        }
        timebundle_response(timemap_uri(&self.base, uri_r))
    }

    pub fn handle_timemap(&self, uri_r: &str) -> Response {
        match self.timemap(uri_r) {
            Some(map) => timemap_response(&map),
            None => Response::not_found(),
        }
    }

    pub fn handle_memento(&self, uri_m: &str) -> Response {
        let Some(record) = self.store.get(uri_m) else {
            return Response::not_found();
        };
        if record.verify_digest().is_err() {
            log::error!("digest mismatch reading {uri_m}");
            return Response::text(500, "stored memento failed its digest check");
        }
        let mut resp = Response::new(200).with_header(CONTENT_TYPE, record.media_type());
        if let Some(lang) = record.language() {
            resp.headers.append(CONTENT_LANGUAGE, lang);
        }
        if let Some(v) = record.validity() {
            resp.headers.append(DATETIME_VALIDITY, v.to_string());
        }
        resp.body = record.body().to_vec();
        resp
    }

    fn handle_ingest(&self, uri_r: &str, req: &Request, now: DatetimeStamp) -> Response {
        let media_type = req.header(CONTENT_TYPE).unwrap_or("application/octet-stream");
        match self.ingest_transaction(uri_r, &req.body, media_type, now) {
            Ok(Some(uri_m)) => Response::new(201).with_header(LOCATION, uri_m),
            Ok(None) => Response::new(204),
            Err(e) => Response::text(500, e.to_string()),
        }
    }

    /// Routes a request by path; `now` stamps transactional captures.
    pub fn route(&self, req: &Request, now: DatetimeStamp) -> Response {
        let path = req.path_and_query();
        if let Some(uri_r) = path.strip_prefix(INGEST_PREFIX) {
            if !method_allowed(req, &["POST"]) {
                return Response::text(405, "POST only");
            }
            return self.handle_ingest(uri_r, req, now);
        }
        if !method_allowed(req, &["GET", "HEAD"]) {
            return Response::text(405, "GET only");
        }
        if let Some(uri_r) = path.strip_prefix(TIMEGATE_PREFIX) {
            self.handle_timegate(uri_r, &req.headers)
        } else if let Some(uri_r) = path.strip_prefix(TIMEBUNDLE_PREFIX) {
            self.handle_timebundle(uri_r)
        } else if let Some(uri_r) = path.strip_prefix(TIMEMAP_PREFIX) {
            self.handle_timemap(uri_r)
        } else if path.starts_with(MEMENTO_PREFIX) {
            self.handle_memento(&format!("{}{path}", self.base))
        } else {
            Response::not_found()
        }
    }
}

/// An archive node plus the clock used for transactional captures.
pub struct ArchiveService {
    node: Arc<ArchiveNode>,
    clock: Arc<dyn crate::http::Clock>,
}

impl ArchiveService {
    pub fn new(node: Arc<ArchiveNode>, clock: Arc<dyn crate::http::Clock>) -> Self {
        ArchiveService { node, clock }
    }

    pub fn node(&self) -> &Arc<ArchiveNode> {
        &self.node
    }
}

impl Handler for ArchiveService {
    fn handle(&self, request: &Request) -> Response {
        self.node.route(request, self.clock.now())
    }
}
