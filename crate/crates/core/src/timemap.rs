//! The TimeMap document: a TimeBundle's inventory in JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::date::DatetimeStamp;
use crate::headers::DatetimeInterval;
use crate::record::{MementoRecord, DIGEST_ALGORITHM};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MementoEntry {
    pub uri: String,
    pub datetime: DatetimeStamp,
    pub media_type: String,
    pub language: Option<String>,
    pub digest: String,
    pub validity: Option<DatetimeInterval>,
    /// Provenance, set only in aggregated maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archive: Option<String>,
}

impl From<&MementoRecord> for MementoEntry {
    fn from(r: &MementoRecord) -> Self {
        MementoEntry {
            uri: r.uri_m().to_string(),
            datetime: r.datetime(),
            media_type: r.media_type().to_string(),
            language: r.language().map(str::to_string),
            digest: r.digest().to_string(),
            validity: r.validity(),
            archive: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeMapError {
    #[error("a TimeMap needs at least one memento")]
    Empty,
    #[error("mementos are not sorted by datetime then URI")]
    Unsorted,
    #[error("archive_interval does not span the memento datetimes")]
    IntervalMismatch,
    #[error("invalid TimeMap JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeMap {
    pub original: String,
    pub timegate: String,
    pub timebundle: String,
    pub archive_interval: DatetimeInterval,
    pub digest_algorithm: String,
    pub mementos: Vec<MementoEntry>,
}

pub(crate) fn entry_order(a: &MementoEntry, b: &MementoEntry) -> std::cmp::Ordering {
    a.datetime.cmp(&b.datetime).then_with(|| a.uri.cmp(&b.uri))
}

impl TimeMap {
    /// Sorts the entries and derives the interval.
    pub fn new(
        original: impl Into<String>,
        timegate: impl Into<String>,
        timebundle: impl Into<String>,
        mut mementos: Vec<MementoEntry>,
    ) -> Result<Self, TimeMapError> {
        mementos.sort_by(entry_order);
        let archive_interval =
            DatetimeInterval::spanning(mementos.iter().map(|m| m.datetime)).ok_or(TimeMapError::Empty)?;
        Ok(TimeMap {
            original: original.into(),
            timegate: timegate.into(),
            timebundle: timebundle.into(),
            archive_interval,
            digest_algorithm: DIGEST_ALGORITHM.to_string(),
            mementos,
        })
    }

    pub fn validate(&self) -> Result<(), TimeMapError> {
        if self.mementos.is_empty() {
            return Err(TimeMapError::Empty);
        }
        if self
            .mementos
            .windows(2)
            .any(|w| entry_order(&w[0], &w[1]) != std::cmp::Ordering::Less)
        {
            return Err(TimeMapError::Unsorted);
        }
        let span = DatetimeInterval::spanning(self.mementos.iter().map(|m| m.datetime));
        if span != Some(self.archive_interval) {
            return Err(TimeMapError::IntervalMismatch);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("TimeMap serializes")
    }

    /// Parses and checks ordering and interval invariants.
    pub fn from_json(text: &[u8]) -> Result<Self, TimeMapError> {
        let map: TimeMap = serde_json::from_slice(text).map_err(|e| TimeMapError::Json(e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn position(&self, uri_m: &str) -> Option<usize> {
        self.mementos.iter().position(|m| m.uri == uri_m)
    }
}
