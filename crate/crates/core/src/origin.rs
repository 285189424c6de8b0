//! Origin-side middleware.
//!
//! [`DatetimeRedirect`] sends any request carrying `X-Accept-Datetime` to a TimeGate and
//! leaves all other traffic untouched. [`SelfTimeGate`] lets an origin with its own
//! version store negotiate at URI-R directly. [`TransactionalPush`] copies each served
//! representation into a transactional archive.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Deserialize;

use crate::archive::{timegate_uri, ArchiveNode, INGEST_PREFIX, MEMENTO_PREFIX, TIMEBUNDLE_PREFIX, TIMEMAP_PREFIX};
use crate::headers::{ACCEPT_DATETIME, CONTENT_TYPE, LOCATION, VARY};
use crate::http::{Handler, Request, Response, Transport};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RedirectRule {
    /// Glob over the absolute request URI; `*` matches any run of characters.
    pub pattern: String,
    pub timegate: String,
}

/// Which TimeGate base a temporal request is redirected to. First matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RedirectPolicy {
    #[serde(default)]
    pub rules: Vec<RedirectRule>,
    pub default: String,
}

impl RedirectPolicy {
    pub fn to(default: impl Into<String>) -> Self {
        RedirectPolicy {
            rules: Vec::new(),
            default: default.into(),
        }
    }

    pub fn with_rule(mut self, pattern: impl Into<String>, timegate: impl Into<String>) -> Self {
        self.rules.push(RedirectRule {
            pattern: pattern.into(),
            timegate: timegate.into(),
        });
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn timegate_base(&self, uri: &str) -> &str {
        self.rules
            .iter()
            .find(|r| glob_match(&r.pattern, uri))
            .map_or(&self.default, |r| &r.timegate)
    }
}

pub fn glob_match(pattern: &str, text: &str) -> bool {
    let mut parts = pattern.split('*');
    let first = parts.next().unwrap_or("");
    let Some(mut rest) = text.strip_prefix(first) else {
        return false;
    };
    let tail: Vec<&str> = parts.collect();
    let Some((last, middle)) = tail.split_last() else {
        return rest.is_empty();
    };
    for piece in middle {
        match rest.find(piece) {
            Some(i) => rest = &rest[i + piece.len()..],
            None => return false,
        }
    }
    rest.len() >= last.len() && rest.ends_with(last)
}

/// Redirects temporal requests to `{timegate_base}/timegate/{request URI}`.
///
/// Malformed `X-Accept-Datetime` values are redirected too; the TimeGate validates.
pub struct DatetimeRedirect<H> {
    policy: RedirectPolicy,
    inner: H,
}

impl<H: Handler> DatetimeRedirect<H> {
    pub fn new(policy: RedirectPolicy, inner: H) -> Self {
        DatetimeRedirect { policy, inner }
    }

    pub fn policy(&self) -> &RedirectPolicy {
        &self.policy
    }
}

/// The redirect response for a temporal request against `uri`.
pub fn timegate_redirect(policy: &RedirectPolicy, uri: &str) -> Response {
    Response::new(302)
        .with_header(LOCATION, timegate_uri(policy.timegate_base(uri), uri))
        .with_header(VARY, "accept-datetime")
}

impl<H: Handler> Handler for DatetimeRedirect<H> {
    fn handle(&self, request: &Request) -> Response {
        if request.headers.contains(ACCEPT_DATETIME) {
            timegate_redirect(&self.policy, &request.uri)
        } else {
            self.inner.handle(request)
        }
    }
}

/// An origin that holds its own version history and acts as its own TimeGate.
pub struct SelfTimeGate<H> {
    store: Arc<ArchiveNode>,
    inner: H,
}

impl<H: Handler> SelfTimeGate<H> {
    pub fn new(store: Arc<ArchiveNode>, inner: H) -> Self {
        SelfTimeGate { store, inner }
    }

    pub fn store(&self) -> &Arc<ArchiveNode> {
        &self.store
    }
}

impl<H: Handler> Handler for SelfTimeGate<H> {
    fn handle(&self, request: &Request) -> Response {
        let path = request.path_and_query();
        // Version pages and discovery endpoints never negotiate.
        if [MEMENTO_PREFIX, TIMEBUNDLE_PREFIX, TIMEMAP_PREFIX]
            .iter()
            .any(|p| path.starts_with(p))
        {
            return self.store.route(request, crate::date::DatetimeStamp::EPOCH);
        }
        if request.headers.contains(ACCEPT_DATETIME) {
            self.store.handle_timegate(&request.uri, &request.headers)
        } else {
            self.inner.handle(request)
        }
    }
}

/// Pushes every successful non-temporal GET response into a transactional archive.
pub struct TransactionalPush<H> {
    inner: H,
    transport: Arc<dyn Transport>,
    archive_base: String,
}

impl<H: Handler> TransactionalPush<H> {
    pub fn new(inner: H, transport: Arc<dyn Transport>, archive_base: impl Into<String>) -> Self {
        TransactionalPush {
            inner,
            transport,
            archive_base: archive_base.into().trim_end_matches('/').to_string(),
        }
    }
}

impl<H: Handler> Handler for TransactionalPush<H> {
    fn handle(&self, request: &Request) -> Response {
        let resp = self.inner.handle(request);
        if resp.status == 200
            && request.method.eq_ignore_ascii_case("GET")
            && !request.headers.contains(ACCEPT_DATETIME)
        {
            let media_type = resp.header(CONTENT_TYPE).unwrap_or("application/octet-stream");
            let push = Request::post(
                format!("{}{INGEST_PREFIX}{}", self.archive_base, request.uri),
                resp.body.clone(),
            )
            .with_header(CONTENT_TYPE, media_type);
            if let Err(e) = self.transport.send(push) {
                log::warn!("transactional push for {} failed: {e}", request.uri);
            }
        }
        resp
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub media_type: String,
    pub body: Vec<u8>,
}

/// A plain origin serving mutable in-memory pages by path.
#[derive(Debug, Default)]
pub struct StaticSite {
    pages: RwLock<HashMap<String, Page>>,
}

impl StaticSite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_page(&self, path: impl Into<String>, media_type: impl Into<String>, body: impl Into<Vec<u8>>) {
        self.pages.write().expect("site lock").insert(
            path.into(),
            Page {
                media_type: media_type.into(),
                body: body.into(),
            },
        );
    }

    pub fn remove_page(&self, path: &str) {
        self.pages.write().expect("site lock").remove(path);
    }

    pub fn page(&self, path: &str) -> Option<Page> {
        self.pages.read().expect("site lock").get(path).cloned()
    }
}

impl Handler for StaticSite {
    fn handle(&self, request: &Request) -> Response {
        match self.page(request.path_and_query()) {
            Some(p) => Response::new(200)
                .with_header(CONTENT_TYPE, p.media_type)
                .with_body(p.body),
            None => Response::not_found(),
        }
    }
}
