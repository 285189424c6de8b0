//! Variant selection in the datetime dimension.
//!
//! A candidate's score is
//!
//! ```text
//! max_i  q_i * proximity(delta_i)  *  type_quality  *  language_quality
//! ```
//!
//! where `delta_i` is the distance in seconds between the i-th requested datetime and
//! the candidate (its validity interval when known, its archival datetime otherwise),
//! and `proximity(d) = 1 / (1 + d)`. A dimension the request lists with q = 0, or a
//! listed dimension the candidate is absent from, vetoes the candidate.

use std::cmp::Ordering;

use crate::date::DatetimeStamp;
use crate::headers::{
    negotiate_forces_list, parse_accept_datetime, parse_accept_list, DatetimeInterval,
    DatetimePreference, HeaderError, QualityValue, TokenPreference, VariantDescriptor, ACCEPT,
    ACCEPT_DATETIME, ACCEPT_LANGUAGE, NEGOTIATE,
};
use crate::http::Headers;
use crate::record::MementoRecord;
use crate::timemap::{MementoEntry, TimeMap};

/// Half-width of the `Alternates` window when none is configured.
pub const DEFAULT_WINDOW: usize = 3;

/// Anything that can be chosen by datetime negotiation.
pub trait Candidate {
    fn uri(&self) -> &str;
    fn datetime(&self) -> DatetimeStamp;
    fn validity(&self) -> Option<DatetimeInterval> {
        None
    }
    fn media_type(&self) -> Option<&str>;
    fn language(&self) -> Option<&str>;
}

impl Candidate for MementoRecord {
    fn uri(&self) -> &str {
        self.uri_m()
    }
    fn datetime(&self) -> DatetimeStamp {
        MementoRecord::datetime(self)
    }
    fn validity(&self) -> Option<DatetimeInterval> {
        MementoRecord::validity(self)
    }
    fn media_type(&self) -> Option<&str> {
        Some(MementoRecord::media_type(self))
    }
    fn language(&self) -> Option<&str> {
        MementoRecord::language(self)
    }
}

impl Candidate for MementoEntry {
    fn uri(&self) -> &str {
        &self.uri
    }
    fn datetime(&self) -> DatetimeStamp {
        self.datetime
    }
    fn validity(&self) -> Option<DatetimeInterval> {
        self.validity
    }
    fn media_type(&self) -> Option<&str> {
        Some(&self.media_type)
    }
    fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }
}

/// A variant from an `Alternates` list that carried a datetime attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatedVariant(VariantDescriptor, DatetimeStamp);

impl DatedVariant {
    pub fn new(desc: VariantDescriptor) -> Option<Self> {
        let dt = desc.datetime?;
        Some(DatedVariant(desc, dt))
    }

    pub fn descriptor(&self) -> &VariantDescriptor {
        &self.0
    }
}

impl Candidate for DatedVariant {
    fn uri(&self) -> &str {
        &self.0.uri
    }
    fn datetime(&self) -> DatetimeStamp {
        self.1
    }
    fn media_type(&self) -> Option<&str> {
        self.0.media_type.as_deref()
    }
    fn language(&self) -> Option<&str> {
        self.0.language.as_deref()
    }
}

/// Parsed client preferences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegotiationRequest {
    pub datetime_prefs: Vec<DatetimePreference>,
    pub type_prefs: Vec<TokenPreference>,
    pub language_prefs: Vec<TokenPreference>,
    pub force_list: bool,
}

impl NegotiationRequest {
    pub fn at(datetime: DatetimeStamp) -> Self {
        NegotiationRequest {
            datetime_prefs: vec![DatetimePreference::new(datetime)],
            ..Default::default()
        }
    }

    /// Reads `X-Accept-Datetime`, `Accept`, `Accept-Language` and `Negotiate`.
    ///
    /// Only an unparseable `X-Accept-Datetime` is an error; a malformed `Accept` or
    /// `Accept-Language` is treated as absent.
    pub fn from_headers(headers: &Headers) -> Result<Self, HeaderError> {
        let datetime_prefs = match headers.get(ACCEPT_DATETIME) {
            Some(v) => parse_accept_datetime(v)?,
            None => Vec::new(),
        };
        let list = |name| {
            headers
                .get(name)
                .and_then(|v| parse_accept_list(v, name).ok())
                .unwrap_or_default()
        };
        Ok(NegotiationRequest {
            datetime_prefs,
            type_prefs: list(ACCEPT),
            language_prefs: list(ACCEPT_LANGUAGE),
            force_list: headers.get(NEGOTIATE).is_some_and(negotiate_forces_list),
        })
    }

    /// The datetime with the highest q-value (first on ties).
    pub fn primary_datetime(&self) -> Option<DatetimeStamp> {
        self.datetime_prefs
            .iter()
            .fold(None::<&DatetimePreference>, |best, p| match best {
                Some(b) if b.quality >= p.quality => Some(b),
                _ => Some(p),
            })
            .map(|p| p.datetime)
    }
}

pub fn proximity(delta_seconds: u64) -> f64 {
    1.0 / (1.0 + delta_seconds as f64)
}

/// Seconds between a requested instant and a candidate.
pub fn distance<C: Candidate + ?Sized>(candidate: &C, t: DatetimeStamp) -> u64 {
    match candidate.validity() {
        Some(v) => v.distance_to(t),
        None => candidate.datetime().abs_diff(t),
    }
}

fn media_base(t: &str) -> &str {
    t.split(';').next().unwrap_or(t).trim()
}

/// 2 for an exact match, 1 for `type/*`, 0 for `*/*`.
fn media_specificity(range: &str, media_type: &str) -> Option<u8> {
    if range == "*/*" {
        return Some(0);
    }
    if let Some(major) = range.strip_suffix("/*") {
        let (mt_major, _) = media_type.split_once('/')?;
        return mt_major.eq_ignore_ascii_case(major).then_some(1);
    }
    range.eq_ignore_ascii_case(media_type).then_some(2)
}

fn type_quality(prefs: &[TokenPreference], media_type: Option<&str>) -> f64 {
    if prefs.is_empty() {
        return 1.0;
    }
    let Some(mt) = media_type.map(media_base) else {
        return 0.0;
    };
    prefs
        .iter()
        .filter_map(|p| media_specificity(media_base(&p.token), mt).map(|s| (s, p)))
        .fold(None::<(u8, &TokenPreference)>, |best, (s, p)| match best {
            Some((bs, b)) if bs >= s => Some((bs, b)),
            _ => Some((s, p)),
        })
        .map_or(0.0, |(_, p)| p.quality.as_f64())
}

fn language_matches(range: &str, tag: &str) -> bool {
    range == "*"
        || tag.len() >= range.len()
            && tag[..range.len()].eq_ignore_ascii_case(range)
            && (tag.len() == range.len() || tag.as_bytes()[range.len()] == b'-')
}

fn language_quality(prefs: &[TokenPreference], language: Option<&str>) -> f64 {
    if prefs.is_empty() {
        return 1.0;
    }
    // Language-neutral representations stay acceptable.
    let Some(tag) = language else {
        return 1.0;
    };
    prefs
        .iter()
        .filter(|p| language_matches(&p.token, tag))
        .fold(None::<&TokenPreference>, |best, p| match best {
            Some(b) if b.token.len() >= p.token.len() => Some(b),
            _ => Some(p),
        })
        .map_or(0.0, |p| p.quality.as_f64())
}

fn datetime_score_with<C, P>(candidate: &C, prefs: &[DatetimePreference], prox: &P) -> f64
where
    C: Candidate + ?Sized,
    P: Fn(u64) -> f64,
{
    prefs
        .iter()
        .map(|p| p.quality.as_f64() * prox(distance(candidate, p.datetime)))
        .fold(0.0, f64::max)
}

/// Score under an arbitrary proximity function.
pub fn score_with<C, P>(candidate: &C, req: &NegotiationRequest, prox: &P) -> f64
where
    C: Candidate + ?Sized,
    P: Fn(u64) -> f64,
{
    datetime_score_with(candidate, &req.datetime_prefs, prox)
        * type_quality(&req.type_prefs, candidate.media_type())
        * language_quality(&req.language_prefs, candidate.language())
}

pub fn score_variant<C: Candidate + ?Sized>(candidate: &C, req: &NegotiationRequest) -> f64 {
    score_with(candidate, req, &proximity)
}

fn tie_break<C: Candidate>(a: &C, b: &C) -> Ordering {
    a.datetime().cmp(&b.datetime()).then_with(|| a.uri().cmp(b.uri()))
}

/// Index of the best candidate under `prox`, or `None` when nothing scores above zero.
pub fn select_index_with<C, P>(candidates: &[C], req: &NegotiationRequest, prox: &P) -> Option<usize>
where
    C: Candidate,
    P: Fn(u64) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let s = score_with(c, req, prox);
        if s <= 0.0 {
            continue;
        }
        best = match best {
            None => Some((i, s)),
            Some((j, bs)) => {
                let better = s > bs || (s == bs && tie_break(c, &candidates[j]) == Ordering::Less);
                if better {
                    Some((i, s))
                } else {
                    Some((j, bs))
                }
            }
        };
    }
    best.map(|(i, _)| i)
}

pub fn select_index<C: Candidate>(candidates: &[C], req: &NegotiationRequest) -> Option<usize> {
    select_index_with(candidates, req, &proximity)
}

/// The highest-scoring candidate; ties go to the earlier datetime, then the smaller URI.
pub fn select_memento<'a, C: Candidate>(candidates: &'a [C], req: &NegotiationRequest) -> Option<&'a C> {
    select_index(candidates, req).map(|i| &candidates[i])
}

fn descriptor_for(entry: &MementoEntry, prefs: &[DatetimePreference]) -> VariantDescriptor {
    let q = datetime_score_with(entry, prefs, &proximity);
    VariantDescriptor {
        uri: entry.uri.clone(),
        source_quality: QualityValue::from_f64_clamped(q)
            .max(QualityValue::from_thousandths(1).expect("in range")),
        media_type: Some(entry.media_type.clone()),
        language: entry.language.clone(),
        datetime: Some(entry.datetime),
    }
}

/// The chosen memento and up to `k` neighbours on either side, ascending by datetime.
///
/// Each descriptor's source quality is its datetime proximity to the request, rounded
/// to three decimals and kept within `[0.001, 1.0]`.
pub fn build_alternates_window(
    timemap: &TimeMap,
    chosen: usize,
    k: usize,
    prefs: &[DatetimePreference],
) -> Vec<VariantDescriptor> {
    let n = timemap.mementos.len();
    if n == 0 {
        return Vec::new();
    }
    let chosen = chosen.min(n - 1);
    let lo = chosen.saturating_sub(k);
    let hi = (chosen + k).min(n - 1);
    timemap.mementos[lo..=hi]
        .iter()
        .map(|e| descriptor_for(e, prefs))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionKind {
    Choice,
    List,
    NotAcceptable,
    BadRequest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationDecision {
    pub kind: DecisionKind,
    pub chosen: Option<VariantDescriptor>,
    /// Position of the chosen entry in the TimeMap.
    pub chosen_index: Option<usize>,
    pub alternates_window: Vec<VariantDescriptor>,
    pub archive_interval: Option<DatetimeInterval>,
    pub error: Option<HeaderError>,
}

/// Runs datetime negotiation for one TimeGate request.
///
/// A request without `X-Accept-Datetime` is answered as if it asked for the most
/// recent memento.
pub fn negotiate(timemap: &TimeMap, headers: &Headers, k: usize) -> NegotiationDecision {
    let mut req = match NegotiationRequest::from_headers(headers) {
        Ok(r) => r,
        Err(e) => {
            return NegotiationDecision {
                kind: DecisionKind::BadRequest,
                chosen: None,
                chosen_index: None,
                alternates_window: Vec::new(),
                archive_interval: Some(timemap.archive_interval),
                error: Some(e),
            }
        }
    };
    negotiate_request(timemap, &mut req, k)
}

pub fn negotiate_request(timemap: &TimeMap, req: &mut NegotiationRequest, k: usize) -> NegotiationDecision {
    if req.datetime_prefs.is_empty() {
        req.datetime_prefs = vec![DatetimePreference::new(timemap.archive_interval.until())];
    }
    let archive_interval = Some(timemap.archive_interval);
    let entries = &timemap.mementos;

    // The window centres on the closest datetime even when other dimensions veto it.
    let datetime_only = NegotiationRequest {
        datetime_prefs: req.datetime_prefs.clone(),
        ..Default::default()
    };
    let centre = select_index(entries, &datetime_only).unwrap_or(0);
    let list_window = || build_alternates_window(timemap, centre, k, &req.datetime_prefs);

    if req.force_list {
        return NegotiationDecision {
            kind: DecisionKind::List,
            chosen: None,
            chosen_index: None,
            alternates_window: list_window(),
            archive_interval,
            error: None,
        };
    }
    match select_index(entries, req) {
        Some(i) => {
            let window = build_alternates_window(timemap, i, k, &req.datetime_prefs);
            let chosen = window.iter().find(|d| d.uri == entries[i].uri).cloned();
            NegotiationDecision {
                kind: DecisionKind::Choice,
                chosen,
                chosen_index: Some(i),
                alternates_window: window,
                archive_interval,
                error: None,
            }
        }
        None => NegotiationDecision {
            kind: DecisionKind::NotAcceptable,
            chosen: None,
            chosen_index: None,
            alternates_window: list_window(),
            archive_interval,
            error: None,
        },
    }
}
