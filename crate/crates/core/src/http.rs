//! The request/response model shared by every service.
//!
//! Services implement [`Handler`]; clients reach them through a [`Transport`]. The
//! simulated web and the socket adapters in the CLI both sit behind these traits.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::date::DatetimeStamp;

/// An ordered, case-insensitive header list that preserves name spelling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Headers(Vec<(String, String)>);

impl Headers {
    pub fn new() -> Self {
        Headers(Vec::new())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.0
            .iter()
            .filter(move |(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Replaces every existing value of `name`.
    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        let name = name.into();
        self.remove(&name);
        self.0.push((name, value.into()));
    }

    pub fn append(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.0.push((name.into(), value.into()));
    }

    pub fn remove(&mut self, name: &str) {
        self.0.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<N: Into<String>, V: Into<String>> FromIterator<(N, V)> for Headers {
    fn from_iter<I: IntoIterator<Item = (N, V)>>(iter: I) -> Self {
        Headers(iter.into_iter().map(|(n, v)| (n.into(), v.into())).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: String,
    /// Absolute URI, e.g. `http://a.example/p?x=1`.
    pub uri: String,
    pub headers: Headers,
    pub body: Vec<u8>,
}

impl Request {
    pub fn get(uri: impl Into<String>) -> Self {
        Request {
            method: "GET".into(),
            uri: uri.into(),
            headers: Headers::new(),
            body: Vec::new(),
        }
    }

    pub fn post(uri: impl Into<String>, body: Vec<u8>) -> Self {
        Request {
            method: "POST".into(),
            uri: uri.into(),
            headers: Headers::new(),
            body,
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.append(name, value);
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name)
    }

    pub fn host(&self) -> Option<&str> {
        split_uri(&self.uri).map(|(_, host, _)| host)
    }

    /// Everything after the authority, defaulting to `/`.
    pub fn path_and_query(&self) -> &str {
        split_uri(&self.uri).map(|(_, _, rest)| rest).unwrap_or("/")
    }

    pub fn query_param(&self, name: &str) -> Option<String> {
        let (_, query) = self.path_and_query().split_once('?')?;
        url::form_urlencoded::parse(query.as_bytes())
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.into_owned())
    }
}

/// Splits `scheme://authority/rest` without normalizing anything.
pub fn split_uri(uri: &str) -> Option<(&str, &str, &str)> {
    let (scheme, rest) = uri.split_once("://")?;
    if scheme.is_empty() || !scheme.bytes().all(|b| b.is_ascii_alphanumeric() || b"+-.".contains(&b)) {
        return None;
    }
    let end = rest.find(['/', '?']).unwrap_or(rest.len());
    let host = &rest[..end];
    if host.is_empty() {
        return None;
    }
    let tail = &rest[end..];
    Some((scheme, host, if tail.is_empty() { "/" } else { tail }))
}

pub fn is_absolute_http(uri: &str) -> bool {
    matches!(split_uri(uri), Some((s, _, _)) if s.eq_ignore_ascii_case("http") || s.eq_ignore_ascii_case("https"))
}

/// Resolves a possibly relative `Location` against the URI it came from.
pub fn resolve_reference(base: &str, reference: &str) -> Option<String> {
    if split_uri(reference).is_some() {
        return Some(reference.to_string());
    }
    let base = url::Url::parse(base).ok()?;
    base.join(reference).ok().map(String::from)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub headers: Headers,
    pub body: Vec<u8>,
}

impl Response {
    pub fn new(status: u16) -> Self {
        Response {
            status,
            headers: Headers::new(),
            body: Vec::new(),
        }
    }

    pub fn text(status: u16, text: impl Into<String>) -> Self {
        Response::new(status)
            .with_header("Content-Type", "text/plain")
            .with_body(text.into().into_bytes())
    }

    pub fn not_found() -> Self {
        Response::text(404, "not found")
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.append(name, value);
        self
    }

    pub fn with_body(mut self, body: Vec<u8>) -> Self {
        self.body = body;
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name)
    }

    pub fn is_redirect(&self) -> bool {
        matches!(self.status, 301 | 302 | 303 | 307 | 308)
    }
}

/// A service endpoint.
pub trait Handler: Send + Sync {
    fn handle(&self, request: &Request) -> Response;
}

impl<F> Handler for F
where
    F: Fn(&Request) -> Response + Send + Sync,
{
    fn handle(&self, request: &Request) -> Response {
        self(request)
    }
}

impl<H: Handler + ?Sized> Handler for Arc<H> {
    fn handle(&self, request: &Request) -> Response {
        (**self).handle(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("connection to {host} failed: {reason}")]
    ConnectionFailed { host: String, reason: String },
    #[error("unknown host {0}")]
    UnknownHost(String),
    #[error("not an absolute http URI: {0}")]
    InvalidUri(String),
}

/// Outbound requests. One call is one exchange; redirects are never followed here.
pub trait Transport: Send + Sync {
    fn send(&self, request: Request) -> Result<Response, TransportError>;

    /// Whether independent requests may be issued from several threads at once.
    fn allows_parallel(&self) -> bool {
        true
    }
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn send(&self, request: Request) -> Result<Response, TransportError> {
        (**self).send(request)
    }

    fn allows_parallel(&self) -> bool {
        (**self).allows_parallel()
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DatetimeStamp;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DatetimeStamp {
        DatetimeStamp::now()
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now(&self) -> DatetimeStamp {
        (**self).now()
    }
}

impl fmt::Display for Request {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.method, self.uri)
    }
}
