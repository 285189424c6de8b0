//! The time-travel client.
//!
//! `Gateway::travel` walks the redirect chain for a (URI-R, datetime) request, falls back
//! to a configured TimeGate when the origin ignores the temporal header, selects locally
//! among listed variants, and records every exchange in a trace.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::archive::{timebundle_uri, timegate_uri, TIMEMAP_MEDIA_TYPE};
use crate::date::{parse_http_date, DatetimeStamp};
use crate::headers::{
    parse_accept_datetime, parse_alternates, parse_interval, serialize_accept_datetime,
    DatetimeInterval, DatetimePreference, ACCEPT_DATETIME, ALTERNATES, ARCHIVE_INTERVAL,
    CACHE_CONTROL, CONTENT_LOCATION, CONTENT_TYPE, DATETIME_VALIDITY, IF_MODIFIED_SINCE, LINK,
    LOCATION, TCN,
};
use crate::http::{is_absolute_http, resolve_reference, Handler, Request, Response, Transport};
use crate::negotiation::{select_index, DatedVariant, NegotiationRequest};
use crate::timemap::TimeMap;

pub const DEFAULT_MAX_HOPS: usize = 8;
pub const TRAVEL_ID_HEADER: &str = "X-Travel-Id";
const TRACE_CAPACITY: usize = 1024;

/// The two revalidation-defeating headers sent with every negotiation request.
pub fn cache_bypass_headers() -> [(&'static str, &'static str); 2] {
    [
        (CACHE_CONTROL, "no-cache"),
        (IF_MODIFIED_SINCE, "Thu, 01 Jan 1970 00:00:00 GMT"),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TravelRequest {
    pub uri_r: String,
    pub datetime_prefs: Vec<DatetimePreference>,
    pub max_hops: usize,
}

impl TravelRequest {
    pub fn new(uri_r: impl Into<String>, datetime_prefs: Vec<DatetimePreference>) -> Self {
        TravelRequest {
            uri_r: uri_r.into(),
            datetime_prefs,
            max_hops: DEFAULT_MAX_HOPS,
        }
    }

    pub fn at(uri_r: impl Into<String>, datetime: DatetimeStamp) -> Self {
        Self::new(uri_r, vec![DatetimePreference::new(datetime)])
    }

    pub fn with_max_hops(mut self, max_hops: usize) -> Self {
        self.max_hops = max_hops;
        self
    }

    /// The datetime with the highest quality; the first listed wins ties.
    pub fn primary_datetime(&self) -> Option<DatetimeStamp> {
        primary_datetime(&self.datetime_prefs)
    }
}

fn primary_datetime(prefs: &[DatetimePreference]) -> Option<DatetimeStamp> {
    prefs
        .iter()
        .fold(None::<&DatetimePreference>, |best, p| match best {
            Some(b) if b.quality >= p.quality => Some(b),
            _ => Some(p),
        })
        .map(|p| p.datetime)
}

/// One network exchange as seen by the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub request_uri: String,
    pub sent_headers: Vec<(String, String)>,
    pub status: Option<u16>,
    pub tcn: Option<String>,
    pub location: Option<String>,
    pub content_location: Option<String>,
    pub archive_interval: Option<String>,
    pub link: Option<String>,
    pub error: Option<String>,
}

impl Hop {
    fn new(request: &Request, outcome: &Result<Response, String>) -> Self {
        let sent_headers = request
            .headers
            .iter()
            .map(|(n, v)| (n.to_string(), v.to_string()))
            .collect();
        let header = |name: &str| {
            outcome
                .as_ref()
                .ok()
                .and_then(|r| r.header(name))
                .map(str::to_string)
        };
        Hop {
            request_uri: request.uri.clone(),
            sent_headers,
            status: outcome.as_ref().ok().map(|r| r.status),
            tcn: header(TCN),
            location: header(LOCATION),
            content_location: header(CONTENT_LOCATION),
            archive_interval: header(ARCHIVE_INTERVAL),
            link: header(LINK),
            error: outcome.as_ref().err().cloned(),
        }
    }

    pub fn sent(&self, name: &str) -> Option<&str> {
        self.sent_headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionTrace {
    pub hops: Vec<Hop>,
}

impl TransactionTrace {
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// Fixed-width table for terminal display.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<3} {:<6} {:<7} {:<60} {}\n",
            "#", "status", "TCN", "request", "Location"
        );
        for (i, hop) in self.hops.iter().enumerate() {
            let status = hop.status.map_or_else(|| "fail".to_string(), |s| s.to_string());
            out.push_str(&format!(
                "{:<3} {:<6} {:<7} {:<60} {}\n",
                i + 1,
                status,
                hop.tcn.as_deref().unwrap_or("-"),
                hop.request_uri,
                hop.location.as_deref().or(hop.error.as_deref()).unwrap_or("-"),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MementoResult {
    pub final_uri: String,
    pub body: Vec<u8>,
    pub media_type: String,
    pub memento_datetime: Option<DatetimeStamp>,
    pub validity: Option<DatetimeInterval>,
    pub trace: TransactionTrace,
    /// The origin's answer was not a temporal one and the fallback TimeGate was asked.
    pub remediated: bool,
    /// A later TimeGate could not serve the datetime and the fallback TimeGate was asked.
    pub rerouted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("invalid travel request: {0}")]
    InvalidRequest(String),
    #[error("no memento found for {uri_r}")]
    NoMementoFound { uri_r: String, trace: TransactionTrace },
    #[error("hop limit of {max_hops} exceeded")]
    HopLimitExceeded { max_hops: usize, trace: TransactionTrace },
    #[error("malformed response from {uri}: {reason}")]
    MalformedResponse {
        uri: String,
        reason: String,
        trace: TransactionTrace,
    },
}

impl GatewayError {
    pub fn trace(&self) -> Option<&TransactionTrace> {
        match self {
            GatewayError::InvalidRequest(_) => None,
            GatewayError::NoMementoFound { trace, .. }
            | GatewayError::HopLimitExceeded { trace, .. }
            | GatewayError::MalformedResponse { trace, .. } => Some(trace),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct GatewayConfig {
    #[serde(default)]
    pub fallback_timegate_base: Option<String>,
    pub gateway_base: String,
    #[serde(default = "default_max_hops")]
    pub max_hops: usize,
    #[serde(default = "default_listen")]
    pub listen: String,
}

fn default_max_hops() -> usize {
    DEFAULT_MAX_HOPS
}

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

impl GatewayConfig {
    pub fn new(gateway_base: impl Into<String>, fallback_timegate_base: Option<String>) -> Self {
        GatewayConfig {
            fallback_timegate_base,
            gateway_base: gateway_base.into(),
            max_hops: DEFAULT_MAX_HOPS,
            listen: default_listen(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// What the next request is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Carries the temporal and cache-bypass headers.
    Negotiate,
    /// A plain GET of a selected memento.
    Fetch,
}

#[derive(Debug, Clone)]
struct Selection {
    uri: String,
    datetime: Option<DatetimeStamp>,
}

struct Walk<'a> {
    gateway: &'a Gateway,
    req: &'a TravelRequest,
    negotiation_headers: Vec<(String, String)>,
    primary: Option<DatetimeStamp>,
    trace: TransactionTrace,
    remediated: bool,
    rerouted: bool,
    at_fallback: bool,
    /// Selection kept in case a reroute finds nothing.
    pending: Option<Selection>,
    selected: Option<Selection>,
}

pub struct Gateway {
    config: GatewayConfig,
    transport: Arc<dyn Transport>,
}

impl Gateway {
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Self {
        Gateway { config, transport }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    fn fallback_timegate(&self, uri_r: &str) -> Option<String> {
        self.config
            .fallback_timegate_base
            .as_deref()
            .map(|base| timegate_uri(base, uri_r))
    }

    /// Executes the datetime negotiation flow for one request.
    pub fn travel(&self, req: &TravelRequest) -> Result<MementoResult, GatewayError> {
        if !is_absolute_http(&req.uri_r) {
            return Err(GatewayError::InvalidRequest(format!("{} is not absolute", req.uri_r)));
        }
        if req.max_hops == 0 {
            return Err(GatewayError::InvalidRequest("max_hops must be at least 1".into()));
        }
        let mut negotiation_headers = Vec::new();
        if !req.datetime_prefs.is_empty() {
            negotiation_headers.push((
                ACCEPT_DATETIME.to_string(),
                serialize_accept_datetime(&req.datetime_prefs),
            ));
        }
        negotiation_headers.extend(
            cache_bypass_headers()
                .iter()
                .map(|(n, v)| (n.to_string(), v.to_string())),
        );
        let mut walk = Walk {
            gateway: self,
            req,
            negotiation_headers,
            primary: req.primary_datetime(),
            trace: TransactionTrace::default(),
            remediated: false,
            rerouted: false,
            at_fallback: false,
            pending: None,
            selected: None,
        };
        walk.run()
    }

    /// A single GET with no temporal headers.
    pub fn fetch(&self, uri: &str) -> Result<(Response, TransactionTrace), GatewayError> {
        if !is_absolute_http(uri) {
            return Err(GatewayError::InvalidRequest(format!("{uri} is not absolute")));
        }
        let request = Request::get(uri);
        let outcome = self.transport.send(request.clone()).map_err(|e| e.to_string());
        let trace = TransactionTrace {
            hops: vec![Hop::new(&request, &outcome)],
        };
        match outcome {
            Ok(resp) => Ok((resp, trace)),
            Err(reason) => Err(GatewayError::MalformedResponse {
                uri: uri.to_string(),
                reason,
                trace,
            }),
        }
    }

    /// The fallback TimeGate's TimeMap for `uri_r`, fetched through its TimeBundle.
    pub fn timemap(&self, uri_r: &str) -> Result<TimeMap, GatewayError> {
        let none = || GatewayError::NoMementoFound {
            uri_r: uri_r.to_string(),
            trace: TransactionTrace::default(),
        };
        let base = self.config.fallback_timegate_base.as_deref().ok_or_else(none)?;
        let bundle = timebundle_uri(base, uri_r);
        let resp = self.transport.send(Request::get(bundle.clone())).map_err(|_| none())?;
        if resp.status != 303 {
            return Err(none());
        }
        let location = resp
            .header(LOCATION)
            .and_then(|l| resolve_reference(&bundle, l))
            .ok_or_else(none)?;
        let resp = self.transport.send(Request::get(location.clone())).map_err(|_| none())?;
        if resp.status != 200 {
            return Err(none());
        }
        TimeMap::from_json(&resp.body).map_err(|e| GatewayError::MalformedResponse {
            uri: location,
            reason: e.to_string(),
            trace: TransactionTrace::default(),
        })
    }
}

enum Step {
    Next(String, Phase),
    Done(MementoResult),
}

impl Walk<'_> {
    fn run(&mut self) -> Result<MementoResult, GatewayError> {
        let mut uri = self.req.uri_r.clone();
        let mut phase = Phase::Negotiate;
        loop {
            if self.trace.len() >= self.req.max_hops {
                return Err(GatewayError::HopLimitExceeded {
                    max_hops: self.req.max_hops,
                    trace: std::mem::take(&mut self.trace),
                });
            }
            let mut request = Request::get(uri.clone());
            if phase == Phase::Negotiate {
                for (n, v) in &self.negotiation_headers {
                    request.headers.append(n.clone(), v.clone());
                }
            }
            let outcome = self
                .gateway
                .transport
                .send(request.clone())
                .map_err(|e| e.to_string());
            self.trace.hops.push(Hop::new(&request, &outcome));
            let step = match phase {
                Phase::Negotiate => self.on_negotiation(&uri, outcome)?,
                Phase::Fetch => self.on_fetch(&uri, outcome)?,
            };
            match step {
                Step::Next(next, p) => {
                    uri = next;
                    phase = p;
                }
                Step::Done(result) => return Ok(result),
            }
        }
    }

    fn first_hop(&self) -> bool {
        self.trace.len() == 1
    }

    fn no_memento(&mut self) -> GatewayError {
        GatewayError::NoMementoFound {
            uri_r: self.req.uri_r.clone(),
            trace: std::mem::take(&mut self.trace),
        }
    }

    fn malformed(&mut self, uri: &str, reason: impl Into<String>) -> GatewayError {
        GatewayError::MalformedResponse {
            uri: uri.to_string(),
            reason: reason.into(),
            trace: std::mem::take(&mut self.trace),
        }
    }

    /// Handles an answer that gives no temporal guidance.
    fn unexpected(&mut self) -> Result<Step, GatewayError> {
        if self.at_fallback || (self.rerouted && self.pending.is_none()) {
            return Err(self.no_memento());
        }
        if self.rerouted {
            return Ok(self.resume_pending());
        }
        let Some(fallback) = self.gateway.fallback_timegate(&self.req.uri_r) else {
            return Err(self.no_memento());
        };
        if self.first_hop() {
            self.remediated = true;
        } else {
            self.rerouted = true;
        }
        self.at_fallback = true;
        Ok(Step::Next(fallback, Phase::Negotiate))
    }

    fn resume_pending(&mut self) -> Step {
        let sel = self.pending.take().expect("checked by caller");
        let uri = sel.uri.clone();
        self.selected = Some(sel);
        Step::Next(uri, Phase::Fetch)
    }

    /// Accepts a TimeGate's pick, or reroutes once when its archive does not cover the request.
    fn choose(&mut self, selection: Selection, resp: &Response) -> Step {
        let covered = match (self.primary, resp.header(ARCHIVE_INTERVAL)) {
            (Some(t), Some(iv)) => parse_interval(iv).map_or(true, |iv| iv.contains(t)),
            _ => true,
        };
        if !covered && !self.at_fallback && !self.rerouted {
            if let Some(fallback) = self.gateway.fallback_timegate(&self.req.uri_r) {
                log::info!("archive interval excludes requested datetime, rerouting");
                self.rerouted = true;
                self.at_fallback = true;
                self.pending = Some(selection);
                return Step::Next(fallback, Phase::Negotiate);
            }
        }
        let uri = selection.uri.clone();
        self.selected = Some(selection);
        Step::Next(uri, Phase::Fetch)
    }

    fn on_negotiation(
        &mut self,
        uri: &str,
        outcome: Result<Response, String>,
    ) -> Result<Step, GatewayError> {
        let resp = match outcome {
            Ok(r) => r,
            Err(_) => return self.unexpected(),
        };
        let tcn = resp.header(TCN).map(|v| v.trim().to_ascii_lowercase());
        match resp.status {
            200 if tcn.as_deref() == Some("choice") => {
                let final_uri = resp
                    .header(CONTENT_LOCATION)
                    .and_then(|l| resolve_reference(uri, l))
                    .unwrap_or_else(|| uri.to_string());
                let datetime = alternate_datetime(&resp, &final_uri);
                self.selected = Some(Selection {
                    uri: final_uri.clone(),
                    datetime,
                });
                Ok(Step::Done(self.finish(final_uri, resp)))
            }
            s if (300..400).contains(&s) && s != 300 && s != 304 => {
                let Some(location) = resp.header(LOCATION).and_then(|l| resolve_reference(uri, l)) else {
                    return Err(self.malformed(uri, format!("{s} without a usable Location")));
                };
                if tcn.as_deref() == Some("choice") {
                    let datetime = alternate_datetime(&resp, &location);
                    Ok(self.choose(
                        Selection {
                            uri: location,
                            datetime,
                        },
                        &resp,
                    ))
                } else {
                    Ok(Step::Next(location, Phase::Negotiate))
                }
            }
            300 | 406 => {
                let variants: Vec<DatedVariant> = resp
                    .header(ALTERNATES)
                    .and_then(|a| parse_alternates(a).ok())
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(DatedVariant::new)
                    .collect();
                if variants.is_empty() {
                    return self.unexpected();
                }
                let nreq = NegotiationRequest {
                    datetime_prefs: self.req.datetime_prefs.clone(),
                    ..Default::default()
                };
                let Some(idx) = select_index(&variants, &nreq) else {
                    return Err(self.no_memento());
                };
                let desc = variants[idx].descriptor();
                let Some(target) = resolve_reference(uri, &desc.uri) else {
                    return Err(self.malformed(uri, format!("bad variant URI {}", desc.uri)));
                };
                let selection = Selection {
                    uri: target,
                    datetime: desc.datetime,
                };
                Ok(self.choose(selection, &resp))
            }
            200 | 404 => self.unexpected(),
            s if self.first_hop() && s >= 500 => self.unexpected(),
            s => Err(self.malformed(uri, format!("unexpected status {s}"))),
        }
    }

    fn on_fetch(&mut self, uri: &str, outcome: Result<Response, String>) -> Result<Step, GatewayError> {
        let resp = match outcome {
            Ok(r) => r,
            Err(reason) => return Err(self.malformed(uri, reason)),
        };
        match resp.status {
            200 => Ok(Step::Done(self.finish(uri.to_string(), resp))),
            s if resp.is_redirect() => match resp.header(LOCATION).and_then(|l| resolve_reference(uri, l)) {
                Some(next) => Ok(Step::Next(next, Phase::Fetch)),
                None => Err(self.malformed(uri, format!("{s} without a usable Location"))),
            },
            404 => Err(self.no_memento()),
            s => Err(self.malformed(uri, format!("memento fetch answered {s}"))),
        }
    }

    fn finish(&mut self, final_uri: String, resp: Response) -> MementoResult {
        let validity = resp.header(DATETIME_VALIDITY).and_then(|v| parse_interval(v).ok());
        let memento_datetime = self.selected.as_ref().and_then(|s| s.datetime);
        let media_type = resp
            .header(CONTENT_TYPE)
            .unwrap_or("application/octet-stream")
            .to_string();
        MementoResult {
            final_uri,
            body: resp.body,
            media_type,
            memento_datetime,
            validity,
            trace: std::mem::take(&mut self.trace),
            remediated: self.remediated,
            rerouted: self.rerouted,
        }
    }
}

fn alternate_datetime(resp: &Response, target: &str) -> Option<DatetimeStamp> {
    let alternates = parse_alternates(resp.header(ALTERNATES)?).ok()?;
    alternates
        .into_iter()
        .find(|d| d.uri == target)
        .and_then(|d| d.datetime)
}

/// Characters left unescaped inside a query component.
const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

pub fn travel_link(gateway_base: &str, uri: &str, datetime: Option<DatetimeStamp>) -> String {
    let base = gateway_base.trim_end_matches('/');
    let mut link = format!("{base}/travel?uri={}", utf8_percent_encode(uri, COMPONENT));
    if let Some(t) = datetime {
        link.push_str("&datetime=");
        link.push_str(&utf8_percent_encode(&t.to_http_date(), COMPONENT).to_string());
    }
    link
}

fn is_attr_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b':'
}

fn starts_with_ignore_case(hay: &[u8], needle: &[u8]) -> bool {
    hay.len() >= needle.len() && hay[..needle.len()].eq_ignore_ascii_case(needle)
}

/// Points absolute `href`/`src` attribute values at the gateway, preserving all other bytes.
pub fn rewrite_links(body: &[u8], datetime_prefs: &[DatetimePreference], gateway_base: &str) -> Vec<u8> {
    let datetime = primary_datetime(datetime_prefs);
    let own_prefix = format!("{}/", gateway_base.trim_end_matches('/'));
    let mut out = Vec::with_capacity(body.len());
    let mut i = 0;
    while i < body.len() {
        let name_len = [&b"href"[..], &b"src"[..]]
            .iter()
            .find(|n| starts_with_ignore_case(&body[i..], n))
            .map(|n| n.len());
        let boundary = i == 0 || !is_attr_name_byte(body[i - 1]);
        let Some(name_len) = name_len.filter(|_| boundary) else {
            out.push(body[i]);
            i += 1;
            continue;
        };
        // Expect optional whitespace, '=', optional whitespace, then a quote.
        let mut j = i + name_len;
        while j < body.len() && body[j].is_ascii_whitespace() {
            j += 1;
        }
        if j >= body.len() || body[j] != b'=' {
            out.extend_from_slice(&body[i..j.min(body.len())]);
            i = j.max(i + 1).min(body.len());
            continue;
        }
        j += 1;
        while j < body.len() && body[j].is_ascii_whitespace() {
            j += 1;
        }
        let quote = match body.get(j) {
            Some(&q) if q == b'"' || q == b'\'' => q,
            _ => {
                out.extend_from_slice(&body[i..j]);
                i = j;
                continue;
            }
        };
        let value_start = j + 1;
        let Some(len) = body[value_start..].iter().position(|&b| b == quote) else {
            out.extend_from_slice(&body[i..]);
            break;
        };
        let value_end = value_start + len;
        out.extend_from_slice(&body[i..value_start]);
        let value = &body[value_start..value_end];
        let rewritable = std::str::from_utf8(value)
            .ok()
            .filter(|v| {
                (starts_with_ignore_case(v.as_bytes(), b"http://")
                    || starts_with_ignore_case(v.as_bytes(), b"https://"))
                    && !v.starts_with(&own_prefix)
            });
        match rewritable {
            Some(v) => out.extend_from_slice(travel_link(gateway_base, v, datetime).as_bytes()),
            None => out.extend_from_slice(value),
        }
        out.push(quote);
        i = value_end + 1;
    }
    out
}

fn is_html(media_type: &str) -> bool {
    media_type
        .split(';')
        .next()
        .is_some_and(|m| m.trim().eq_ignore_ascii_case("text/html"))
}

#[derive(Debug, Clone, Serialize)]
struct StoredTrace {
    id: String,
    uri_r: String,
    outcome: String,
    final_uri: Option<String>,
    memento_datetime: Option<DatetimeStamp>,
    remediated: bool,
    rerouted: bool,
    hops: Vec<Hop>,
}

/// The gateway's HTTP face: `/travel`, `/trace/{id}` and `/timemap`.
pub struct GatewayService {
    gateway: Gateway,
    next_id: AtomicU64,
    traces: Mutex<(HashMap<String, StoredTrace>, VecDeque<String>)>,
}

impl GatewayService {
    pub fn new(gateway: Gateway) -> Self {
        GatewayService {
            gateway,
            next_id: AtomicU64::new(1),
            traces: Mutex::new((HashMap::new(), VecDeque::new())),
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn store_trace(&self, trace: StoredTrace) {
        let mut guard = self.traces.lock().expect("trace lock");
        let (map, order) = &mut *guard;
        if order.len() >= TRACE_CAPACITY {
            if let Some(old) = order.pop_front() {
                map.remove(&old);
            }
        }
        order.push_back(trace.id.clone());
        map.insert(trace.id.clone(), trace);
    }

    pub fn trace_json(&self, id: &str) -> Option<String> {
        let guard = self.traces.lock().expect("trace lock");
        guard
            .0
            .get(id)
            .map(|t| serde_json::to_string_pretty(t).expect("trace serializes"))
    }

    fn handle_travel(&self, request: &Request) -> Response {
        let Some(uri_r) = request.query_param("uri") else {
            return Response::text(400, "missing uri parameter");
        };
        let prefs = match request.query_param("datetime") {
            None => Vec::new(),
            Some(text) => match parse_datetime_param(&text) {
                Some(p) => p,
                None => return Response::text(400, format!("unparseable datetime {text:?}")),
            },
        };
        let travel = TravelRequest::new(uri_r.clone(), prefs.clone())
            .with_max_hops(self.gateway.config.max_hops);
        let id = format!("t{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let result = self.gateway.travel(&travel);
        let mut stored = StoredTrace {
            id: id.clone(),
            uri_r,
            outcome: String::new(),
            final_uri: None,
            memento_datetime: None,
            remediated: false,
            rerouted: false,
            hops: Vec::new(),
        };
        let resp = match result {
            Ok(m) => {
                stored.outcome = "ok".into();
                stored.final_uri = Some(m.final_uri.clone());
                stored.memento_datetime = m.memento_datetime;
                stored.remediated = m.remediated;
                stored.rerouted = m.rerouted;
                stored.hops = m.trace.hops;
                let body = if is_html(&m.media_type) {
                    rewrite_links(&m.body, &prefs, &self.gateway.config.gateway_base)
                } else {
                    m.body
                };
                let mut resp = Response::new(200)
                    .with_header(CONTENT_TYPE, m.media_type)
                    .with_header(CONTENT_LOCATION, m.final_uri)
                    .with_body(body);
                if let Some(t) = m.memento_datetime {
                    resp.headers.append("X-Memento-Datetime", t.to_http_date());
                }
                resp
            }
            Err(e) => {
                stored.outcome = e.to_string();
                stored.hops = e.trace().map(|t| t.hops.clone()).unwrap_or_default();
                match e {
                    GatewayError::NoMementoFound { .. } => Response::text(404, "no memento found"),
                    GatewayError::InvalidRequest(why) => Response::text(400, why),
                    other => Response::text(502, other.to_string()),
                }
            }
        };
        self.store_trace(stored);
        resp.with_header(TRAVEL_ID_HEADER, id)
    }

    fn handle_timemap(&self, request: &Request) -> Response {
        let Some(uri_r) = request.query_param("uri") else {
            return Response::text(400, "missing uri parameter");
        };
        match self.gateway.timemap(&uri_r) {
            Ok(map) => Response::new(200)
                .with_header(CONTENT_TYPE, TIMEMAP_MEDIA_TYPE)
                .with_body(map.to_json().into_bytes()),
            Err(GatewayError::NoMementoFound { .. }) => Response::text(404, "no memento found"),
            Err(e) => Response::text(502, e.to_string()),
        }
    }
}

/// Accepts a bare HTTP-date or a full `X-Accept-Datetime` value.
pub fn parse_datetime_param(text: &str) -> Option<Vec<DatetimePreference>> {
    let text = text.trim();
    if let Ok(t) = parse_http_date(text) {
        return Some(vec![DatetimePreference::new(t)]);
    }
    parse_accept_datetime(text).ok()
}

impl Handler for GatewayService {
    fn handle(&self, request: &Request) -> Response {
        if !request.method.eq_ignore_ascii_case("GET") {
            return Response::text(405, "GET only");
        }
        let path = request.path_and_query();
        let route = path.split('?').next().unwrap_or("/");
        if route == "/travel" {
            self.handle_travel(request)
        } else if route == "/timemap" {
            self.handle_timemap(request)
        } else if let Some(id) = route.strip_prefix("/trace/") {
            match self.trace_json(id) {
                Some(json) => Response::new(200)
                    .with_header(CONTENT_TYPE, "application/json")
                    .with_body(json.into_bytes()),
                None => Response::not_found(),
            }
        } else {
            Response::not_found()
        }
    }
}
