//! Datetime content negotiation for HTTP.
//!
//! This crate holds the protocol machinery: header grammars, variant selection in the
//! datetime dimension, archive and aggregator services, origin middleware, the
//! time-travel gateway client, and a deterministic simulated web to run them in.

pub mod aggregator;
pub mod archive;
pub mod date;
pub mod gateway;
pub mod headers;
pub mod http;
pub mod negotiation;
pub mod netsim;
pub mod origin;
pub mod record;
pub mod timemap;

pub use date::{format_http_date, parse_http_date, DatetimeStamp, MalformedDate};
pub use headers::{DatetimeInterval, DatetimePreference, HeaderError, QualityValue, VariantDescriptor};
pub use http::{Clock, Handler, Headers, Request, Response, SystemClock, Transport, TransportError};
pub use record::{MementoDraft, MementoRecord, RecordError};
pub use negotiation::{negotiate, score_variant, select_memento, DecisionKind, NegotiationDecision, NegotiationRequest};
pub use timemap::{MementoEntry, TimeMap, TimeMapError};
pub use archive::{ArchiveError, ArchiveNode, ArchiveService, ArchiveStore};
pub use aggregator::{Aggregator, AggregatorError, ArchiveRegistry, MergedTimeMap};
pub use gateway::{cache_bypass_headers, rewrite_links, Gateway, GatewayConfig, GatewayError, GatewayService, MementoResult, TransactionTrace, TravelRequest};
pub use netsim::{load_canned, load_scenario, Scenario, ScenarioError, SimWeb};
