use std::fmt;

use serde::{Deserialize, Serialize};

use crate::date::{parse_http_date, DatetimeStamp};

use super::{HeaderError, ARCHIVE_INTERVAL};

/// A closed datetime interval, `from <= until`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct DatetimeInterval {
    from: DatetimeStamp,
    until: DatetimeStamp,
}

#[derive(Deserialize)]
struct RawInterval {
    from: DatetimeStamp,
    until: DatetimeStamp,
}

impl TryFrom<RawInterval> for DatetimeInterval {
    type Error = HeaderError;

    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        DatetimeInterval::new(raw.from, raw.until)
    }
}

impl DatetimeInterval {
    pub fn new(from: DatetimeStamp, until: DatetimeStamp) -> Result<Self, HeaderError> {
        if from > until {
            return Err(HeaderError::InvertedInterval);
        }
        Ok(DatetimeInterval { from, until })
    }

    pub fn instant(at: DatetimeStamp) -> Self {
        DatetimeInterval { from: at, until: at }
    }

    pub fn from(&self) -> DatetimeStamp {
        self.from
    }

    pub fn until(&self) -> DatetimeStamp {
        self.until
    }

    pub fn contains(&self, t: DatetimeStamp) -> bool {
        self.from <= t && t <= self.until
    }

    /// Seconds from `t` to the nearest point of the interval; zero inside it.
    pub fn distance_to(&self, t: DatetimeStamp) -> u64 {
        if t < self.from {
            self.from.abs_diff(t)
        } else if t > self.until {
            t.abs_diff(self.until)
        } else {
            0
        }
    }

    pub fn with_until(self, until: DatetimeStamp) -> Result<Self, HeaderError> {
        DatetimeInterval::new(self.from, until)
    }

    /// Smallest interval covering every instant, or `None` for an empty input.
    pub fn spanning(mut instants: impl Iterator<Item = DatetimeStamp>) -> Option<Self> {
        let first = instants.next()?;
        let (lo, hi) = instants.fold((first, first), |(lo, hi), t| (lo.min(t), hi.max(t)));
        Some(DatetimeInterval { from: lo, until: hi })
    }
}

impl fmt::Display for DatetimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}} - {{{}}}", self.from, self.until)
    }
}

/// Parses `{HTTP-date} - {HTTP-date}`.
pub fn parse_interval(value: &str) -> Result<DatetimeInterval, HeaderError> {
    let bad = |reason: &str| HeaderError::malformed(ARCHIVE_INTERVAL, format!("{reason} in {value:?}"));
    let value = value.trim();
    let rest = value.strip_prefix('{').ok_or_else(|| bad("missing '{'"))?;
    let (from, rest) = rest.split_once('}').ok_or_else(|| bad("missing '}'"))?;
    let rest = rest.trim_start().strip_prefix('-').ok_or_else(|| bad("missing '-'"))?;
    let rest = rest.trim_start().strip_prefix('{').ok_or_else(|| bad("missing second '{'"))?;
    let until = rest.strip_suffix('}').ok_or_else(|| bad("missing closing '}'"))?;
    let from = parse_http_date(from.trim()).map_err(|e| bad(&e.to_string()))?;
    let until = parse_http_date(until.trim()).map_err(|e| bad(&e.to_string()))?;
    DatetimeInterval::new(from, until)
}

pub fn serialize_interval(interval: &DatetimeInterval) -> String {
    interval.to_string()
}
