//! HTTP-date handling at one-second resolution.
//!
//! Only the fixed-width RFC 1123 form is accepted: `Sun, 06 Nov 1994 08:49:37 GMT`.
//! The weekday must agree with the calendar date.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const WEEKDAYS: [&str; 7] = ["Thu", "Fri", "Sat", "Sun", "Mon", "Tue", "Wed"];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

const SECS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed HTTP-date {text:?}: {reason}")]
pub struct MalformedDate {
    pub text: String,
    pub reason: &'static str,
}

/// An instant in UTC, second resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DatetimeStamp(i64);

impl DatetimeStamp {
    pub const EPOCH: DatetimeStamp = DatetimeStamp(0);

    pub const fn from_unix(seconds: i64) -> Self {
        DatetimeStamp(seconds)
    }

    pub const fn unix(self) -> i64 {
        self.0
    }

    /// Whole seconds between two instants, always non-negative.
    pub fn abs_diff(self, other: DatetimeStamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        DatetimeStamp(self.0 + secs)
    }

    pub fn now() -> Self {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0);
        DatetimeStamp(secs)
    }

    pub fn parse_http_date(text: &str) -> Result<Self, MalformedDate> {
        parse_http_date(text)
    }

    pub fn to_http_date(self) -> String {
        format_http_date(self)
    }

    /// The `yyyymmddhhmmss` form used in memento paths.
    pub fn compact(self) -> String {
        let c = Civil::from_stamp(self);
        format!(
            "{:04}{:02}{:02}{:02}{:02}{:02}",
            c.year, c.month, c.day, c.hour, c.minute, c.second
        )
    }

    pub fn parse_compact(text: &str) -> Option<Self> {
        if text.len() != 14 || !text.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let num = |r: std::ops::Range<usize>| text[r].parse::<u32>().ok();
        let civil = Civil {
            year: num(0..4)? as i64,
            month: num(4..6)?,
            day: num(6..8)?,
            hour: num(8..10)?,
            minute: num(10..12)?,
            second: num(12..14)?,
        };
        civil.validate().ok()?;
        Some(civil.to_stamp())
    }
}

impl fmt::Display for DatetimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_http_date(*self))
    }
}

impl FromStr for DatetimeStamp {
    type Err = MalformedDate;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_http_date(s)
    }
}

impl Serialize for DatetimeStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_http_date(*self))
    }
}

impl<'de> Deserialize<'de> for DatetimeStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_http_date(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Civil {
    year: i64,
    month: u32,
    day: u32,
    hour: u32,
    minute: u32,
    second: u32,
}

fn is_leap(year: i64) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i64, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

// Days since 1970-01-01 for a proleptic Gregorian date.
fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let m = month as i64;
    let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let year = yoe + era * 400 + i64::from(month <= 2);
    (year, month, day)
}

impl Civil {
    fn from_stamp(stamp: DatetimeStamp) -> Self {
        let days = stamp.0.div_euclid(SECS_PER_DAY);
        let secs = stamp.0.rem_euclid(SECS_PER_DAY) as u32;
        let (year, month, day) = civil_from_days(days);
        Civil {
            year,
            month,
            day,
            hour: secs / 3600,
            minute: secs / 60 % 60,
            second: secs % 60,
        }
    }

    fn to_stamp(self) -> DatetimeStamp {
        let days = days_from_civil(self.year, self.month, self.day);
        DatetimeStamp(
            days * SECS_PER_DAY
                + i64::from(self.hour) * 3600
                + i64::from(self.minute) * 60
                + i64::from(self.second),
        )
    }

    fn validate(&self) -> Result<(), &'static str> {
        if !(1..=9999).contains(&self.year) {
            return Err("year out of range");
        }
        if !(1..=12).contains(&self.month) {
            return Err("bad month");
        }
        if self.day == 0 || self.day > days_in_month(self.year, self.month) {
            return Err("bad day of month");
        }
        if self.hour > 23 || self.minute > 59 || self.second > 59 {
            return Err("bad time of day");
        }
        Ok(())
    }
}

fn weekday_name(stamp: DatetimeStamp) -> &'static str {
    WEEKDAYS[stamp.0.div_euclid(SECS_PER_DAY).rem_euclid(7) as usize]
}

pub fn format_http_date(stamp: DatetimeStamp) -> String {
    let c = Civil::from_stamp(stamp);
    format!(
        "{}, {:02} {} {:04} {:02}:{:02}:{:02} GMT",
        weekday_name(stamp),
        c.day,
        MONTHS[(c.month - 1) as usize],
        c.year,
        c.hour,
        c.minute,
        c.second
    )
}

pub fn parse_http_date(text: &str) -> Result<DatetimeStamp, MalformedDate> {
    let fail = |reason| MalformedDate {
        text: text.to_string(),
        reason,
    };
    let b = text.as_bytes();
    // "Sun, 06 Nov 1994 08:49:37 GMT" is exactly 29 bytes.
    if b.len() != 29 || !text.is_ascii() {
        return Err(fail("expected 29-character RFC 1123 date"));
    }
    if &b[3..5] != b", "
        || b[7] != b' '
        || b[11] != b' '
        || b[16] != b' '
        || b[19] != b':'
        || b[22] != b':'
        || &b[25..] != b" GMT"
    {
        return Err(fail("bad separators"));
    }
    let digits = |r: std::ops::Range<usize>| -> Result<u32, MalformedDate> {
        let s = &text[r];
        if s.bytes().all(|c| c.is_ascii_digit()) {
            Ok(s.parse().expect("ascii digits"))
        } else {
            Err(fail("expected digits"))
        }
    };
    let weekday = &text[0..3];
    let month = MONTHS
        .iter()
        .position(|m| *m == &text[8..11])
        .ok_or_else(|| fail("unknown month name"))? as u32
        + 1;
    let civil = Civil {
        year: i64::from(digits(12..16)?),
        month,
        day: digits(5..7)?,
        hour: digits(17..19)?,
        minute: digits(20..22)?,
        second: digits(23..25)?,
    };
    civil.validate().map_err(fail)?;
    let stamp = civil.to_stamp();
    if !WEEKDAYS.contains(&weekday) {
        return Err(fail("unknown weekday name"));
    }
    if weekday_name(stamp) != weekday {
        return Err(fail("weekday does not match date"));
    }
    Ok(stamp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_origin() {
        let t = parse_http_date("Thu, 01 Jan 1970 00:00:00 GMT").unwrap();
        assert_eq!(t.unix(), 0);
        assert_eq!(format_http_date(DatetimeStamp::EPOCH), "Thu, 01 Jan 1970 00:00:00 GMT");
    }

    #[test]
    fn accept_datetime_example_date() {
        let t = parse_http_date("Sun, 06 Nov 1994 08:49:37 GMT").unwrap();
        assert_eq!(t.unix(), 784_111_777);
        assert_eq!(t.to_http_date(), "Sun, 06 Nov 1994 08:49:37 GMT");
    }

    #[test]
    fn real_time_browsing_date_round_trips() {
        let text = "Mon, 02 Nov 2009 16:25:00 GMT";
        assert_eq!(parse_http_date(text).unwrap().to_http_date(), text);
    }

    #[test]
    fn rejects_wrong_weekday() {
        let err = parse_http_date("Mon, 06 Nov 1994 08:49:37 GMT").unwrap_err();
        assert_eq!(err.reason, "weekday does not match date");
    }

    #[test]
    fn rejects_deviations() {
        for bad in [
            "",
            "Sun, 6 Nov 1994 08:49:37 GMT",
            "Sun, 06 Nov 1994 08:49:37 UTC",
            "Sunday, 06-Nov-94 08:49:37 GMT",
            "Sun Nov  6 08:49:37 1994",
            "Sun, 06 Nvo 1994 08:49:37 GMT",
            "Sun, 31 Nov 1994 08:49:37 GMT",
            "Sun, 06 Nov 1994 24:49:37 GMT",
            "Sun, 06 Nov 1994 08:49:60 GMT",
            "Sun,  06 Nov 1994 08:49:37GMT",
        ] {
            assert!(parse_http_date(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn leap_day() {
        let t = parse_http_date("Tue, 29 Feb 2000 12:00:00 GMT").unwrap();
        assert_eq!(t.to_http_date(), "Tue, 29 Feb 2000 12:00:00 GMT");
        assert!(parse_http_date("Thu, 29 Feb 1900 12:00:00 GMT").is_err());
    }

    #[test]
    fn pre_epoch_dates_parse() {
        let t = parse_http_date("Wed, 31 Dec 1969 23:59:59 GMT").unwrap();
        assert_eq!(t.unix(), -1);
    }

    #[test]
    fn compact_form() {
        let t = DatetimeStamp::from_unix(784_111_777);
        assert_eq!(t.compact(), "19941106084937");
        assert_eq!(DatetimeStamp::parse_compact("19941106084937"), Some(t));
        assert_eq!(DatetimeStamp::parse_compact("19941306084937"), None);
    }

    #[test]
    fn serde_uses_http_date_text() {
        let t = DatetimeStamp::from_unix(0);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, "\"Thu, 01 Jan 1970 00:00:00 GMT\"");
        let back: DatetimeStamp = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
