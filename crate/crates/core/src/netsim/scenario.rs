//! Declarative scenario scripts.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use super::{SimEvent, SimWeb};
use crate::aggregator::{Aggregator, ArchiveRegistry, RegisteredArchive, DEFAULT_TTL_SECONDS};
use crate::archive::{ArchiveNode, ArchiveService};
use crate::date::DatetimeStamp;
use crate::gateway::{Gateway, GatewayConfig, GatewayService};
use crate::http::{Handler, Transport};
use crate::origin::{DatetimeRedirect, RedirectPolicy, SelfTimeGate, StaticSite, TransactionalPush};

/// Scenario scripts bundled with the crate, by name.
pub const CANNED_SCENARIOS: &[(&str, &str)] = &[
    ("flow1", include_str!("scenarios/flow1.toml")),
    ("flow2", include_str!("scenarios/flow2.toml")),
    ("flow5", include_str!("scenarios/flow5.toml")),
    ("katrina", include_str!("scenarios/katrina.toml")),
    ("vanished-domain", include_str!("scenarios/vanished-domain.toml")),
    ("new-custodian", include_str!("scenarios/new-custodian.toml")),
];

pub fn canned_scenario(name: &str) -> Option<&'static str> {
    CANNED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load_canned(name: &str) -> Result<Scenario, ScenarioError> {
    let text = canned_scenario(name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
    load_scenario(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("invalid script at {location}: {reason}")]
    InvalidScript { location: String, reason: String },
    #[error("no canned scenario named {0}")]
    UnknownScenario(String),
}

fn invalid(location: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidScript {
        location: location.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HostRole {
    Origin,
    SelfTimegate,
    Archive,
    Aggregator,
    Gateway,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageSpec {
    pub path: String,
    #[serde(default = "default_media_type")]
    pub media_type: String,
    pub body: String,
}

fn default_media_type() -> String {
    "text/html".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostSpec {
    pub name: String,
    pub role: HostRole,
    #[serde(default)]
    pub pages: Vec<PageSpec>,
    /// Origin: TimeGate base to redirect temporal requests to.
    #[serde(default)]
    pub timegate: Option<String>,
    /// Origin: transactional archive base that receives served bodies.
    #[serde(default)]
    pub push_to: Option<String>,
    /// Aggregator: member archive host names, in precedence order.
    #[serde(default)]
    pub archives: Vec<String>,
    #[serde(default)]
    pub ttl: Option<u64>,
    /// Gateway: fallback TimeGate base.
    #[serde(default)]
    pub fallback: Option<String>,
    #[serde(default)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MementoSpec {
    pub host: String,
    pub uri_r: String,
    pub datetime: DatetimeStamp,
    #[serde(default = "default_media_type")]
    pub media_type: String,
    #[serde(default)]
    pub language: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventAction {
    Vanish,
    Appear,
    SetBody,
    RemovePage,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub at: DatetimeStamp,
    pub action: EventAction,
    pub host: String,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub body: Option<String>,
    #[serde(default)]
    pub media_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub start: DatetimeStamp,
    #[serde(default)]
    pub hosts: Vec<HostSpec>,
    #[serde(default)]
    pub mementos: Vec<MementoSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        if text.trim().is_empty() {
            return Err(invalid("line 1, column 1", "empty script"));
        }
        toml::from_str(text).map_err(|e| {
            let location = e.span().map_or_else(
                || "unknown position".to_string(),
                |span| {
                    let before = &text[..span.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    format!("line {line}, column {column}")
                },
            );
            invalid(location, e.message().to_string())
        })
    }
}

/// A wired SimWeb plus handles on the services it hosts.
pub struct Scenario {
    pub web: SimWeb,
    pub script: ScenarioScript,
    archives: BTreeMap<String, Arc<ArchiveNode>>,
    aggregators: BTreeMap<String, Arc<Aggregator>>,
    gateways: BTreeMap<String, Arc<GatewayService>>,
}

impl Scenario {
    /// The archive node of an archive or self-timegate host.
    pub fn archive(&self, host: &str) -> Option<&Arc<ArchiveNode>> {
        self.archives.get(host)
    }

    pub fn aggregator(&self, host: &str) -> Option<&Arc<Aggregator>> {
        self.aggregators.get(host)
    }

    pub fn gateway_service(&self, host: &str) -> Option<&Arc<GatewayService>> {
        self.gateways.get(host)
    }

    /// The first gateway host and its client.
    pub fn gateway(&self) -> Option<(&str, &Gateway)> {
        self.gateways
            .iter()
            .next()
            .map(|(name, svc)| (name.as_str(), svc.gateway()))
    }

    pub fn site(&self, host: &str) -> Option<Arc<StaticSite>> {
        self.web.site(host)
    }
}

fn base_of(host: &str) -> String {
    format!("http://{host}")
}

fn validate(script: &ScenarioScript) -> Result<BTreeMap<String, HostRole>, ScenarioError> {
    if script.hosts.is_empty() {
        return Err(invalid("hosts", "a scenario needs at least one host"));
    }
    let mut roles = BTreeMap::new();
    for (i, h) in script.hosts.iter().enumerate() {
        let at = format!("hosts[{i}]");
        if h.name.is_empty() || h.name.contains(['/', ' ']) {
            return Err(invalid(format!("{at}.name"), format!("bad hostname {:?}", h.name)));
        }
        if roles.insert(h.name.clone(), h.role).is_some() {
            return Err(invalid(format!("{at}.name"), format!("duplicate host {}", h.name)));
        }
        let site_role = matches!(h.role, HostRole::Origin | HostRole::SelfTimegate);
        if !h.pages.is_empty() && !site_role {
            return Err(invalid(format!("{at}.pages"), "only origins serve pages"));
        }
        if (h.timegate.is_some() || h.push_to.is_some()) && h.role != HostRole::Origin {
            return Err(invalid(format!("{at}.role"), "timegate/push_to need role origin"));
        }
        if h.role == HostRole::Aggregator && h.archives.is_empty() {
            return Err(invalid(format!("{at}.archives"), "aggregator lists no archives"));
        }
        if h.role != HostRole::Aggregator && !h.archives.is_empty() {
            return Err(invalid(format!("{at}.archives"), "only aggregators list archives"));
        }
        if h.fallback.is_some() && h.role != HostRole::Gateway {
            return Err(invalid(format!("{at}.fallback"), "only gateways have a fallback"));
        }
    }
    for (i, h) in script.hosts.iter().enumerate() {
        for (j, a) in h.archives.iter().enumerate() {
            match roles.get(a) {
                Some(HostRole::Archive | HostRole::SelfTimegate) => {}
                _ => {
                    return Err(invalid(
                        format!("hosts[{i}].archives[{j}]"),
                        format!("{a} is not an archive host"),
                    ))
                }
            }
        }
    }
    for (i, m) in script.mementos.iter().enumerate() {
        match roles.get(&m.host) {
            Some(HostRole::Archive | HostRole::SelfTimegate) => {}
            _ => {
                return Err(invalid(
                    format!("mementos[{i}].host"),
                    format!("{} cannot hold mementos", m.host),
                ))
            }
        }
    }
    for (i, e) in script.events.iter().enumerate() {
        let at = format!("events[{i}]");
        if e.at < script.start {
            return Err(invalid(format!("{at}.at"), "event precedes scenario start"));
        }
        let Some(role) = roles.get(&e.host) else {
            return Err(invalid(format!("{at}.host"), format!("unknown host {}", e.host)));
        };
        let page_event = matches!(e.action, EventAction::SetBody | EventAction::RemovePage);
        if page_event && !matches!(role, HostRole::Origin | HostRole::SelfTimegate) {
            return Err(invalid(format!("{at}.host"), "page events need an origin host"));
        }
        if page_event && e.path.is_none() {
            return Err(invalid(format!("{at}.path"), "missing path"));
        }
        if e.action == EventAction::SetBody && e.body.is_none() {
            return Err(invalid(format!("{at}.body"), "missing body"));
        }
    }
    Ok(roles)
}

/// Parses, validates and wires a scenario.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let script = ScenarioScript::parse(text)?;
    build(script)
}

fn build(script: ScenarioScript) -> Result<Scenario, ScenarioError> {
    validate(&script)?;
    let web = SimWeb::new(script.start);
    let clock: Arc<SimWeb> = Arc::new(web.clone());
    let mut archives = BTreeMap::new();
    let mut aggregators = BTreeMap::new();
    let mut gateways = BTreeMap::new();

    // Archives first so mementos can be seeded before anything is served.
    for h in &script.hosts {
        if matches!(h.role, HostRole::Archive | HostRole::SelfTimegate) {
            let mut node = ArchiveNode::in_memory(base_of(&h.name));
            if let Some(k) = h.window {
                node = node.with_window(k);
            }
            if h.role == HostRole::SelfTimegate {
                node = node.as_self_timegate();
            }
            archives.insert(h.name.clone(), Arc::new(node));
        }
    }
    for (i, m) in script.mementos.iter().enumerate() {
        archives[&m.host]
            .seed(
                &m.uri_r,
                m.datetime,
                &m.media_type,
                m.language.as_deref(),
                m.body.clone().into_bytes(),
            )
            .map_err(|e| invalid(format!("mementos[{i}]"), e.to_string()))?;
    }

    for (i, h) in script.hosts.iter().enumerate() {
        let handler: Arc<dyn Handler> = match h.role {
            HostRole::Origin | HostRole::SelfTimegate => {
                let site = Arc::new(StaticSite::new());
                for p in &h.pages {
                    site.set_page(p.path.clone(), p.media_type.clone(), p.body.clone().into_bytes());
                }
                web.register_site(&h.name, site.clone());
                let mut handler: Arc<dyn Handler> = site;
                if h.role == HostRole::SelfTimegate {
                    handler = Arc::new(SelfTimeGate::new(archives[&h.name].clone(), handler));
                }
                if let Some(tg) = &h.timegate {
                    handler = Arc::new(DatetimeRedirect::new(RedirectPolicy::to(tg.clone()), handler));
                }
                if let Some(target) = &h.push_to {
                    let transport: Arc<dyn Transport> = Arc::new(web.client(&h.name));
                    handler = Arc::new(TransactionalPush::new(handler, transport, target.clone()));
                }
                handler
            }
            HostRole::Archive => Arc::new(ArchiveService::new(archives[&h.name].clone(), clock.clone())),
            HostRole::Aggregator => {
                let members = h
                    .archives
                    .iter()
                    .map(|a| RegisteredArchive {
                        id: a.clone(),
                        base: base_of(a),
                    })
                    .collect();
                let registry = ArchiveRegistry::new(members, h.ttl.unwrap_or(DEFAULT_TTL_SECONDS))
                    .map_err(|e| invalid(format!("hosts[{i}]"), e.to_string()))?;
                let mut aggr = Aggregator::new(
                    base_of(&h.name),
                    registry,
                    Arc::new(web.client(&h.name)),
                    clock.clone(),
                );
                if let Some(k) = h.window {
                    aggr = aggr.with_window(k);
                }
                let aggr = Arc::new(aggr);
                aggregators.insert(h.name.clone(), aggr.clone());
                aggr
            }
            HostRole::Gateway => {
                let config = GatewayConfig::new(base_of(&h.name), h.fallback.clone());
                let gateway = Gateway::new(config, Arc::new(web.client(&h.name)));
                let svc = Arc::new(GatewayService::new(gateway));
                gateways.insert(h.name.clone(), svc.clone());
                svc
            }
        };
        web.add_host(&h.name, handler)
            .map_err(|e| invalid(format!("hosts[{i}].name"), e.to_string()))?;
    }

    for e in &script.events {
        let event = match e.action {
            EventAction::Vanish => SimEvent::Vanish(e.host.clone()),
            EventAction::Appear => SimEvent::Appear(e.host.clone()),
            EventAction::SetBody => SimEvent::SetBody {
                host: e.host.clone(),
                path: e.path.clone().expect("validated"),
                media_type: e.media_type.clone().unwrap_or_else(default_media_type),
                body: e.body.clone().expect("validated").into_bytes(),
            },
            EventAction::RemovePage => SimEvent::RemovePage {
                host: e.host.clone(),
                path: e.path.clone().expect("validated"),
            },
        };
        web.schedule(e.at, event);
    }

    Ok(Scenario {
        web,
        script,
        archives,
        aggregators,
        gateways,
    })
}
