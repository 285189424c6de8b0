//! A storeless TimeGate aggregator over several archives.
//!
//! On request, the aggregator fetches each registered archive's TimeBundle, follows
//! the 303 to its TimeMap, merges the results and negotiates over the union. Harvests
//! are cached per original URI for the registry's TTL.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use thiserror::Error;

use crate::archive::{
    timebundle_response, timebundle_uri, timegate_response, timegate_uri, timemap_response,
    timemap_uri, TIMEBUNDLE_PREFIX, TIMEGATE_PREFIX, TIMEMAP_PREFIX,
};
use crate::date::DatetimeStamp;
use crate::headers::{DatetimeInterval, AGGREGATOR_SOURCES, LOCATION};
use crate::http::{resolve_reference, Clock, Handler, Request, Response, Transport};
use crate::negotiation::{negotiate, DEFAULT_WINDOW};
use crate::timemap::{entry_order, MementoEntry, TimeMap};

pub const DEFAULT_TTL_SECONDS: u64 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregatorError {
    #[error("no archive holds mementos for {0}")]
    AllArchivesEmpty(String),
    #[error("cannot merge TimeMaps for different originals: {0} and {1}")]
    MixedOriginals(String, String),
    #[error("nothing to merge")]
    NoMaps,
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RegisteredArchive {
    pub id: String,
    pub base: String,
}

/// Ordered archive list; order decides metadata precedence when merging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveRegistry {
    archives: Vec<RegisteredArchive>,
    harvest_ttl: u64,
}

impl ArchiveRegistry {
    pub fn new(archives: Vec<RegisteredArchive>, harvest_ttl: u64) -> Result<Self, AggregatorError> {
        if archives.is_empty() {
            return Err(AggregatorError::InvalidRegistry("no archives".into()));
        }
        if harvest_ttl == 0 {
            return Err(AggregatorError::InvalidRegistry("ttl must be positive".into()));
        }
        let mut seen = HashSet::new();
        for a in &archives {
            if !seen.insert(a.id.as_str()) {
                return Err(AggregatorError::InvalidRegistry(format!("duplicate id {}", a.id)));
            }
        }
        Ok(ArchiveRegistry { archives, harvest_ttl })
    }

    pub fn archives(&self) -> &[RegisteredArchive] {
        &self.archives
    }

    pub fn ttl(&self) -> u64 {
        self.harvest_ttl
    }
}

/// Deployment settings for a standalone aggregator.
#[derive(Debug, Clone, Deserialize)]
pub struct AggregatorConfig {
    pub listen: String,
    pub base_uri: String,
    #[serde(default = "default_ttl")]
    pub ttl: u64,
    #[serde(default = "default_window")]
    pub window: usize,
    pub archives: Vec<RegisteredArchive>,
}

fn default_ttl() -> u64 {
    DEFAULT_TTL_SECONDS
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl AggregatorConfig {
    pub fn registry(&self) -> Result<ArchiveRegistry, AggregatorError> {
        ArchiveRegistry::new(self.archives.clone(), self.ttl)
    }
}

/// A cross-archive TimeMap whose entries carry their archive id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedTimeMap {
    pub original: String,
    pub entries: Vec<MementoEntry>,
}

impl MergedTimeMap {
    pub fn empty(original: impl Into<String>) -> Self {
        MergedTimeMap {
            original: original.into(),
            entries: Vec::new(),
        }
    }

    pub fn from_source(archive: &str, map: &TimeMap) -> Self {
        let mut entries = map.mementos.clone();
        for e in &mut entries {
            e.archive = Some(archive.to_string());
        }
        entries.sort_by(entry_order);
        MergedTimeMap {
            original: map.original.clone(),
            entries,
        }
    }

    pub fn interval(&self) -> Option<DatetimeInterval> {
        DatetimeInterval::spanning(self.entries.iter().map(|e| e.datetime))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A servable TimeMap rooted at the aggregator's own endpoints.
    pub fn to_timemap(&self, aggregator_base: &str) -> Option<TimeMap> {
        TimeMap::new(
            self.original.clone(),
            timegate_uri(aggregator_base, &self.original),
            timebundle_uri(aggregator_base, &self.original),
            self.entries.clone(),
        )
        .ok()
    }
}

/// Union of the inputs, deduplicated by URI-M. Earlier maps win metadata conflicts.
pub fn merge_timemaps(maps: &[MergedTimeMap]) -> Result<MergedTimeMap, AggregatorError> {
    let first = maps.first().ok_or(AggregatorError::NoMaps)?;
    if let Some(other) = maps.iter().find(|m| m.original != first.original) {
        return Err(AggregatorError::MixedOriginals(
            first.original.clone(),
            other.original.clone(),
        ));
    }
    let mut seen = HashSet::new();
    let mut entries: Vec<MementoEntry> = maps
        .iter()
        .flat_map(|m| m.entries.iter())
        .filter(|e| seen.insert(e.uri.clone()))
        .cloned()
        .collect();
    entries.sort_by(entry_order);
    Ok(MergedTimeMap {
        original: first.original.clone(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceStatus {
    Ok,
    Empty,
    Fail,
}

impl fmt::Display for SourceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceStatus::Ok => "ok",
            SourceStatus::Empty => "empty",
            SourceStatus::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harvest {
    pub merged: MergedTimeMap,
    pub sources: Vec<(String, SourceStatus)>,
    pub fetched_at: DatetimeStamp,
}

impl Harvest {
    /// Value of the `X-Aggregator-Sources` diagnostic header.
    pub fn sources_header(&self) -> String {
        self.sources
            .iter()
            .map(|(id, s)| format!("{id}={s}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

type Slot = Arc<Mutex<Option<Arc<Harvest>>>>;

pub struct Aggregator {
    base: String,
    registry: ArchiveRegistry,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    window: usize,
    cache: Mutex<HashMap<String, Slot>>,
}

impl Aggregator {
    pub fn new(
        base: impl Into<String>,
        registry: ArchiveRegistry,
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        Aggregator {
            base: base.into().trim_end_matches('/').to_string(),
            registry,
            transport,
            clock,
            window: DEFAULT_WINDOW,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_window(mut self, k: usize) -> Self {
        self.window = k;
        self
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn registry(&self) -> &ArchiveRegistry {
        &self.registry
    }

    fn fetch_one(&self, archive: &RegisteredArchive, uri_r: &str) -> (SourceStatus, Option<TimeMap>) {
        let bundle = timebundle_uri(&archive.base, uri_r);
        let resp = match self.transport.send(Request::get(bundle.clone())) {
            Ok(r) => r,
            Err(e) => {
                log::info!("archive {} unreachable: {e}", archive.id);
                return (SourceStatus::Fail, None);
            }
        };
        let map_uri = match resp.status {
            404 => return (SourceStatus::Empty, None),
            303 => match resp.header(LOCATION).and_then(|l| resolve_reference(&bundle, l)) {
                Some(u) => u,
                None => return (SourceStatus::Fail, None),
            },
            _ => return (SourceStatus::Fail, None),
        };
        let resp = match self.transport.send(Request::get(map_uri)) {
            Ok(r) if r.status == 200 => r,
            Ok(r) if r.status == 404 => return (SourceStatus::Empty, None),
            _ => return (SourceStatus::Fail, None),
        };
        match TimeMap::from_json(&resp.body) {
            Ok(map) if map.original == uri_r => (SourceStatus::Ok, Some(map)),
            Ok(map) => {
                log::warn!("archive {} answered for {} instead of {uri_r}", archive.id, map.original);
                (SourceStatus::Fail, None)
            }
            Err(e) => {
                log::warn!("archive {} sent a bad TimeMap: {e}", archive.id);
                (SourceStatus::Fail, None)
            }
        }
    }

    fn harvest_uncached(&self, uri_r: &str) -> Harvest {
        let archives = self.registry.archives();
        let results: Vec<(SourceStatus, Option<TimeMap>)> = if self.transport.allows_parallel() {
            std::thread::scope(|s| {
                let handles: Vec<_> = archives
                    .iter()
                    .map(|a| s.spawn(move || self.fetch_one(a, uri_r)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or((SourceStatus::Fail, None)))
                    .collect()
            })
        } else {
            archives.iter().map(|a| self.fetch_one(a, uri_r)).collect()
        };
        let mut maps = vec![MergedTimeMap::empty(uri_r)];
        let mut sources = Vec::with_capacity(archives.len());
        for (archive, (status, map)) in archives.iter().zip(results) {
            if let Some(map) = map {
                maps.push(MergedTimeMap::from_source(&archive.id, &map));
            }
            sources.push((archive.id.clone(), status));
        }
        let merged = merge_timemaps(&maps).expect("all sources checked against uri_r");
        Harvest {
            merged,
            sources,
            fetched_at: self.clock.now(),
        }
    }

    /// Merged view across archives, served from cache while younger than the TTL.
    pub fn harvest(&self, uri_r: &str) -> Arc<Harvest> {
        let slot = {
            let mut cache = self.cache.lock().expect("cache lock");
            cache.entry(uri_r.to_string()).or_default().clone()
        };
        // Holding the slot serializes refreshes for one original.
        let mut guard = slot.lock().expect("slot lock");
        let now = self.clock.now();
        if let Some(h) = guard.as_ref() {
            if now.abs_diff(h.fetched_at) < self.registry.ttl() && now >= h.fetched_at {
                return h.clone();
            }
        }
        let fresh = Arc::new(self.harvest_uncached(uri_r));
        *guard = Some(fresh.clone());
        fresh
    }

    pub fn merged_timemap(&self, uri_r: &str) -> Result<(TimeMap, Arc<Harvest>), AggregatorError> {
        let harvest = self.harvest(uri_r);
        match harvest.merged.to_timemap(&self.base) {
            Some(map) => Ok((map, harvest)),
            None => Err(AggregatorError::AllArchivesEmpty(uri_r.to_string())),
        }
    }

    fn with_sources(resp: Response, harvest: &Harvest) -> Response {
        resp.with_header(AGGREGATOR_SOURCES, harvest.sources_header())
    }

    pub fn handle_timegate(&self, uri_r: &str, request: &Request) -> Response {
        let harvest = self.harvest(uri_r);
        let Some(map) = harvest.merged.to_timemap(&self.base) else {
            return Self::with_sources(Response::not_found(), &harvest);
        };
        let decision = negotiate(&map, &request.headers, self.window);
        Self::with_sources(timegate_response(&decision, &map), &harvest)
    }

    pub fn handle_timebundle(&self, uri_r: &str) -> Response {
        let harvest = self.harvest(uri_r);
        let resp = if harvest.merged.is_empty() {
            Response::not_found()
        } else {
            timebundle_response(timemap_uri(&self.base, uri_r))
        };
        Self::with_sources(resp, &harvest)
    }

    pub fn handle_timemap(&self, uri_r: &str) -> Response {
        let harvest = self.harvest(uri_r);
        let resp = match harvest.merged.to_timemap(&self.base) {
            Some(map) => timemap_response(&map),
            None => Response::not_found(),
        };
        Self::with_sources(resp, &harvest)
    }
}

impl Handler for Aggregator {
    fn handle(&self, request: &Request) -> Response {
        if !request.method.eq_ignore_ascii_case("GET") && !request.method.eq_ignore_ascii_case("HEAD") {
            return Response::text(405, "GET only");
        }
        let path = request.path_and_query();
        if let Some(uri_r) = path.strip_prefix(TIMEGATE_PREFIX) {
            self.handle_timegate(uri_r, request)
        } else if let Some(uri_r) = path.strip_prefix(TIMEBUNDLE_PREFIX) {
            self.handle_timebundle(uri_r)
        } else if let Some(uri_r) = path.strip_prefix(TIMEMAP_PREFIX) {
            self.handle_timemap(uri_r)
        } else {
            Response::not_found()
        }
    }
}
