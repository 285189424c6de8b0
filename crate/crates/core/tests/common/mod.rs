//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, NaiveDateTime};
use proptest::prelude::*;

use memento_core::headers::{TokenPreference, VariantDescriptor};
use memento_core::{DatetimeInterval, DatetimePreference, DatetimeStamp, MementoEntry, QualityValue};

/// 0001-01-01T00:00:00Z and 9999-12-31T23:59:59Z.
pub const MIN_UNIX: i64 = -62_135_596_800;
pub const MAX_UNIX: i64 = 253_402_300_799;

/// HTTP-date text as chrono renders it.
pub fn chrono_http_date(unix: i64) -> String {
    DateTime::from_timestamp(unix, 0)
        .expect("in range")
        .format("%a, %d %b %Y %H:%M:%S GMT")
        .to_string()
}

pub fn chrono_parse(text: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(text, "%a, %d %b %Y %H:%M:%S GMT")
        .ok()
        .map(|d| d.and_utc().timestamp())
}

pub fn ts(text: &str) -> DatetimeStamp {
    DatetimeStamp::from_unix(chrono_parse(text).unwrap_or_else(|| panic!("bad date {text}")))
}

/// Plain-data request used by the oracle; no library types involved.
#[derive(Debug, Clone)]
pub struct OracleRequest {
    pub datetimes: Vec<(i64, u16)>,
    pub types: Vec<(String, u16)>,
    pub languages: Vec<(String, u16)>,
}

#[derive(Debug, Clone)]
pub struct OracleMemento {
    pub uri: String,
    pub datetime: i64,
    pub validity: Option<(i64, i64)>,
    pub media_type: String,
    pub language: Option<String>,
}

fn q(t: u16) -> f64 {
    t as f64 / 1000.0
}

fn delta(m: &OracleMemento, t: i64) -> u64 {
    match m.validity {
        Some((from, _)) if t < from => (from - t) as u64,
        Some((_, until)) if t > until => (t - until) as u64,
        Some(_) => 0,
        None => (m.datetime - t).unsigned_abs(),
    }
}

fn lang_match(range: &str, tag: &str) -> bool {
    let (r, t) = (range.to_ascii_lowercase(), tag.to_ascii_lowercase());
    r == "*" || t == r || t.starts_with(&format!("{r}-"))
}

/// Ranks a media range against a type: exact 2, `type/*` 1, `*/*` 0.
fn media_rank(range: &str, media_type: &str) -> Option<u8> {
    let (r, m) = (range.to_ascii_lowercase(), media_type.to_ascii_lowercase());
    if r == m {
        Some(2)
    } else if r == "*/*" {
        Some(0)
    } else if r.ends_with("/*") && m.split('/').next() == r.split('/').next() {
        Some(1)
    } else {
        None
    }
}

pub fn oracle_score(m: &OracleMemento, req: &OracleRequest) -> f64 {
    let dt = req
        .datetimes
        .iter()
        .map(|&(t, qq)| q(qq) * (1.0 / (1.0 + delta(m, t) as f64)))
        .fold(0.0, f64::max);
    let tq = if req.types.is_empty() {
        1.0
    } else {
        let mut best: Option<(u8, u16)> = None;
        for (range, qq) in &req.types {
            if let Some(rank) = media_rank(range, &m.media_type) {
                if best.is_none_or(|(b, _)| rank > b) {
                    best = Some((rank, *qq));
                }
            }
        }
        best.map_or(0.0, |(_, qq)| q(qq))
    };
    let lq = match (&m.language, req.languages.is_empty()) {
        (_, true) | (None, _) => 1.0,
        (Some(tag), false) => {
            let mut best: Option<(usize, u16)> = None;
            for (range, qq) in &req.languages {
                if lang_match(range, tag) && best.is_none_or(|(len, _)| range.len() > len) {
                    best = Some((range.len(), *qq));
                }
            }
            best.map_or(0.0, |(_, qq)| q(qq))
        }
    };
    dt * tq * lq
}

/// Exhaustive argmax; ties to the earlier datetime, then the smaller URI.
pub fn oracle_select(ms: &[OracleMemento], req: &OracleRequest) -> Option<String> {
    let scored: Vec<(f64, &OracleMemento)> = ms.iter().map(|m| (oracle_score(m, req), m)).collect();
    let best = scored.iter().map(|(s, _)| *s).fold(0.0, f64::max);
    if best <= 0.0 {
        return None;
    }
    scored
        .iter()
        .filter(|(s, _)| *s == best)
        .map(|(_, m)| *m)
        .min_by(|a, b| a.datetime.cmp(&b.datetime).then_with(|| a.uri.cmp(&b.uri)))
        .map(|m| m.uri.clone())
}

/// Index of the memento closest to `t`; ties go to the earlier one.
pub fn oracle_closest(datetimes: &[i64], t: i64) -> usize {
    (0..datetimes.len())
        .min_by_key(|&i| ((datetimes[i] - t).unsigned_abs(), datetimes[i]))
        .expect("non-empty")
}

/// The body that was live at `x` given (time, body) observations in time order.
pub fn oracle_live_body(steps: &[(i64, String)], x: i64) -> &str {
    let mut live = &steps[0].1;
    for (t, b) in steps {
        if *t <= x {
            live = b;
        }
    }
    live
}

impl OracleMemento {
    pub fn to_entry(&self) -> MementoEntry {
        MementoEntry {
            uri: self.uri.clone(),
            datetime: DatetimeStamp::from_unix(self.datetime),
            media_type: self.media_type.clone(),
            language: self.language.clone(),
            digest: "0".repeat(64),
            validity: self.validity.map(|(f, u)| {
                DatetimeInterval::new(DatetimeStamp::from_unix(f), DatetimeStamp::from_unix(u)).unwrap()
            }),
            archive: None,
        }
    }
}

impl OracleRequest {
    pub fn to_library(&self) -> memento_core::NegotiationRequest {
        let tokens = |list: &[(String, u16)]| -> Vec<TokenPreference> {
            list.iter()
                .map(|(tok, qq)| TokenPreference::new(tok.clone(), QualityValue::from_thousandths(*qq).unwrap()))
                .collect()
        };
        memento_core::NegotiationRequest {
            datetime_prefs: self
                .datetimes
                .iter()
                .map(|&(t, qq)| {
                    DatetimePreference::with_quality(DatetimeStamp::from_unix(t), QualityValue::from_thousandths(qq).unwrap())
                })
                .collect(),
            type_prefs: tokens(&self.types),
            language_prefs: tokens(&self.languages),
            ..Default::default()
        }
    }
}

// Generators.

pub fn any_unix() -> impl Strategy<Value = i64> {
    MIN_UNIX..=MAX_UNIX
}

pub fn any_quality() -> impl Strategy<Value = u16> {
    prop_oneof![Just(1000u16), Just(0u16), 0u16..=1000]
}

pub fn any_datetime_prefs() -> impl Strategy<Value = Vec<DatetimePreference>> {
    prop::collection::vec((any_unix(), any_quality()), 1..6).prop_map(|v| {
        v.into_iter()
            .map(|(t, q)| {
                DatetimePreference::with_quality(DatetimeStamp::from_unix(t), QualityValue::from_thousandths(q).unwrap())
            })
            .collect()
    })
}

fn token() -> impl Strategy<Value = String> {
    "[a-z]{1,8}(/[a-z0-9.+-]{1,12})?"
}

fn language_tag() -> impl Strategy<Value = String> {
    "[a-z]{2}(-[A-Z]{2})?"
}

pub fn any_descriptor() -> impl Strategy<Value = VariantDescriptor> {
    (
        "[A-Za-z0-9._/:~-]{1,40}",
        any_quality(),
        prop::option::of(token()),
        prop::option::of(language_tag()),
        prop::option::of(any_unix()),
    )
        .prop_map(|(uri, q, media_type, language, dt)| VariantDescriptor {
            uri,
            source_quality: QualityValue::from_thousandths(q).unwrap(),
            media_type,
            language,
            datetime: dt.map(DatetimeStamp::from_unix),
        })
}

pub fn any_interval() -> impl Strategy<Value = DatetimeInterval> {
    (any_unix(), any_unix()).prop_map(|(a, b)| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        DatetimeInterval::new(DatetimeStamp::from_unix(lo), DatetimeStamp::from_unix(hi)).unwrap()
    })
}

const MEDIA: [&str; 3] = ["text/html", "application/pdf", "image/png"];
const LANGS: [&str; 4] = ["en", "en-US", "fr", "de"];
const TYPE_RANGES: [&str; 6] = ["text/html", "application/pdf", "image/png", "text/*", "*/*", "image/*"];
const RANGES: [&str; 7] = ["en", "en-us", "en-GB", "fr", "de", "es", "*"];

/// Up to 50 mementos within a 30-day window, a third with validity intervals.
pub fn any_mementos() -> impl Strategy<Value = Vec<OracleMemento>> {
    let base = 1_125_000_000i64;
    prop::collection::vec(
        (
            0i64..2_592_000,
            prop::option::of(0i64..86_400),
            0usize..MEDIA.len(),
            prop::option::of(0usize..LANGS.len()),
            0u8..3,
        ),
        1..=50,
    )
    .prop_map(move |raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (off, span, mt, lang, has_validity))| {
                let datetime = base + off;
                OracleMemento {
                    uri: format!("http://archive.example/m/{i:03}"),
                    datetime,
                    validity: span.filter(|_| has_validity == 0).map(|s| (datetime, datetime + s)),
                    media_type: MEDIA[mt].to_string(),
                    language: lang.map(|l| LANGS[l].to_string()),
                }
            })
            .collect()
    })
}

/// Random preferences around the memento window, some falling outside it.
pub fn any_oracle_request() -> impl Strategy<Value = OracleRequest> {
    let base = 1_125_000_000i64;
    (
        prop::collection::vec((base - 864_000..base + 3_456_000, any_quality()), 1..4),
        prop::collection::vec((0usize..TYPE_RANGES.len(), any_quality()), 0..4),
        prop::collection::vec((0usize..RANGES.len(), any_quality()), 0..3),
    )
        .prop_map(|(dts, types, langs)| OracleRequest {
            datetimes: dts,
            types: types.into_iter().map(|(i, q)| (TYPE_RANGES[i].to_string(), q)).collect(),
            languages: langs.into_iter().map(|(i, q)| (RANGES[i].to_string(), q)).collect(),
        })
}
