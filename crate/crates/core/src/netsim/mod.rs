//! A deterministic in-process web.
//!
//! Named hosts map to handlers. A settable clock drives timed events, and every
//! exchange is logged in issue order. Clients obtained from `SimWeb::client` are
//! `Transport`s, so services run here exactly as they would over sockets.

mod scenario;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::date::DatetimeStamp;
use crate::http::{Clock, Handler, Request, Response, Transport, TransportError};
use crate::origin::StaticSite;

pub use scenario::{
    canned_scenario, load_canned, load_scenario, EventAction, EventSpec, HostRole, HostSpec,
    MementoSpec, PageSpec, Scenario, ScenarioError, ScenarioScript, CANNED_SCENARIOS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("clock cannot move from {now} back to {to}")]
    ClockMovedBackwards { now: DatetimeStamp, to: DatetimeStamp },
    #[error("host {0} is already registered")]
    DuplicateHost(String),
    #[error("unknown host {0}")]
    UnknownHost(String),
}

/// A state change applied when the clock reaches its trigger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimEvent {
    Vanish(String),
    Appear(String),
    SetBody {
        host: String,
        path: String,
        media_type: String,
        body: Vec<u8>,
    },
    RemovePage { host: String, path: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exchange {
    pub from: String,
    pub request: Request,
    pub outcome: Result<Response, TransportError>,
}

struct SimHost {
    handler: Arc<dyn Handler>,
    reachable: bool,
}

#[derive(Default)]
struct State {
    hosts: BTreeMap<String, SimHost>,
    sites: BTreeMap<String, Arc<StaticSite>>,
    /// Sorted by trigger; insertion order breaks ties.
    events: Vec<(DatetimeStamp, SimEvent)>,
}

/// One log slot: sender, request, and the outcome once known.
type LogSlot = (String, Request, Option<Result<Response, TransportError>>);

struct Inner {
    state: Mutex<State>,
    clock: Mutex<DatetimeStamp>,
    log: Mutex<Vec<LogSlot>>,
}

/// Cheap to clone; clones share one web.
#[derive(Clone)]
pub struct SimWeb {
    inner: Arc<Inner>,
}

fn host_key(host: &str) -> String {
    host.to_ascii_lowercase()
}

impl SimWeb {
    pub fn new(start: DatetimeStamp) -> Self {
        SimWeb {
            inner: Arc::new(Inner {
                state: Mutex::new(State::default()),
                clock: Mutex::new(start),
                log: Mutex::new(Vec::new()),
            }),
        }
    }

    fn state(&self) -> std::sync::MutexGuard<'_, State> {
        self.inner.state.lock().expect("sim state lock")
    }

    pub fn add_host(&self, hostname: &str, handler: Arc<dyn Handler>) -> Result<(), SimError> {
        let key = host_key(hostname);
        let mut state = self.state();
        if state.hosts.contains_key(&key) {
            return Err(SimError::DuplicateHost(hostname.to_string()));
        }
        state.hosts.insert(
            key,
            SimHost {
                handler,
                reachable: true,
            },
        );
        Ok(())
    }

    /// Makes `site` the target of body-change events for `hostname`.
    pub fn register_site(&self, hostname: &str, site: Arc<StaticSite>) {
        self.state().sites.insert(host_key(hostname), site);
    }

    pub fn site(&self, hostname: &str) -> Option<Arc<StaticSite>> {
        self.state().sites.get(&host_key(hostname)).cloned()
    }

    pub fn hostnames(&self) -> Vec<String> {
        self.state().hosts.keys().cloned().collect()
    }

    pub fn set_reachable(&self, hostname: &str, reachable: bool) -> Result<(), SimError> {
        let mut state = self.state();
        let host = state
            .hosts
            .get_mut(&host_key(hostname))
            .ok_or_else(|| SimError::UnknownHost(hostname.to_string()))?;
        host.reachable = reachable;
        Ok(())
    }

    pub fn is_reachable(&self, hostname: &str) -> Option<bool> {
        self.state().hosts.get(&host_key(hostname)).map(|h| h.reachable)
    }

    pub fn schedule(&self, at: DatetimeStamp, event: SimEvent) {
        let mut state = self.state();
        let pos = state.events.partition_point(|(t, _)| *t <= at);
        state.events.insert(pos, (at, event));
    }

    pub fn pending_events(&self) -> usize {
        self.state().events.len()
    }

    pub fn now(&self) -> DatetimeStamp {
        *self.inner.clock.lock().expect("sim clock lock")
    }

    /// Moves the clock forward, applying due events in trigger order.
    pub fn advance_clock(&self, to: DatetimeStamp) -> Result<(), SimError> {
        let now = self.now();
        if to < now {
            return Err(SimError::ClockMovedBackwards { now, to });
        }
        loop {
            let due = {
                let mut state = self.state();
                if state.events.first().is_some_and(|(t, _)| *t <= to) {
                    Some(state.events.remove(0))
                } else {
                    None
                }
            };
            let Some((at, event)) = due else { break };
            *self.inner.clock.lock().expect("sim clock lock") = at.max(now);
            self.apply(event);
        }
        *self.inner.clock.lock().expect("sim clock lock") = to;
        Ok(())
    }

    pub fn advance_by(&self, seconds: i64) -> Result<(), SimError> {
        self.advance_clock(self.now().plus_seconds(seconds))
    }

    fn apply(&self, event: SimEvent) {
        log::debug!("applying {event:?}");
        match event {
            SimEvent::Vanish(host) => {
                let _ = self.set_reachable(&host, false);
            }
            SimEvent::Appear(host) => {
                let _ = self.set_reachable(&host, true);
            }
            SimEvent::SetBody {
                host,
                path,
                media_type,
                body,
            } => {
                if let Some(site) = self.site(&host) {
                    site.set_page(path, media_type, body);
                }
            }
            SimEvent::RemovePage { host, path } => {
                if let Some(site) = self.site(&host) {
                    site.remove_page(&path);
                }
            }
        }
    }

    /// Delivers one request on behalf of `from` and logs the exchange.
    pub fn dispatch_from(&self, from: &str, request: Request) -> Result<Response, TransportError> {
        let slot = {
            let mut log = self.inner.log.lock().expect("sim log lock");
            log.push((from.to_string(), request.clone(), None));
            log.len() - 1
        };
        let outcome = self.deliver(&request);
        self.inner.log.lock().expect("sim log lock")[slot].2 = Some(outcome.clone());
        outcome
    }

    pub fn dispatch(&self, request: Request) -> Result<Response, TransportError> {
        self.dispatch_from("client", request)
    }

    fn deliver(&self, request: &Request) -> Result<Response, TransportError> {
        let host = request
            .host()
            .ok_or_else(|| TransportError::InvalidUri(request.uri.clone()))?;
        // The lock is released before the handler runs; handlers may dispatch in turn.
        let (handler, reachable) = {
            let state = self.state();
            let entry = state
                .hosts
                .get(&host_key(host))
                .ok_or_else(|| TransportError::UnknownHost(host.to_string()))?;
            (entry.handler.clone(), entry.reachable)
        };
        if !reachable {
            return Err(TransportError::ConnectionFailed {
                host: host.to_string(),
                reason: "host unreachable".into(),
            });
        }
        Ok(handler.handle(request))
    }

    /// The exchange log in issue order.
    pub fn log(&self) -> Vec<Exchange> {
        self.inner
            .log
            .lock()
            .expect("sim log lock")
            .iter()
            .map(|(from, request, outcome)| Exchange {
                from: from.clone(),
                request: request.clone(),
                outcome: outcome.clone().unwrap_or_else(|| {
                    Err(TransportError::ConnectionFailed {
                        host: request.host().unwrap_or_default().to_string(),
                        reason: "in flight".into(),
                    })
                }),
            })
            .collect()
    }

    pub fn log_from(&self, from: &str) -> Vec<Exchange> {
        self.log().into_iter().filter(|e| e.from == from).collect()
    }

    pub fn log_len(&self) -> usize {
        self.inner.log.lock().expect("sim log lock").len()
    }

    pub fn clear_log(&self) {
        self.inner.log.lock().expect("sim log lock").clear();
    }

    /// A transport whose exchanges are logged as coming from `from`.
    pub fn client(&self, from: &str) -> SimClient {
        SimClient {
            web: self.clone(),
            from: from.to_string(),
        }
    }
}

impl Clock for SimWeb {
    fn now(&self) -> DatetimeStamp {
        SimWeb::now(self)
    }
}

#[derive(Clone)]
pub struct SimClient {
    web: SimWeb,
    from: String,
}

impl SimClient {
    pub fn name(&self) -> &str {
        &self.from
    }
}

impl Transport for SimClient {
    fn send(&self, request: Request) -> Result<Response, TransportError> {
        self.web.dispatch_from(&self.from, request)
    }

    /// Sequential delivery keeps the log order deterministic.
    fn allows_parallel(&self) -> bool {
        false
    }
}
