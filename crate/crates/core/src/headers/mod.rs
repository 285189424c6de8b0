//! Parsers and serializers for every header the protocol speaks.

mod accept;
mod accept_datetime;
mod alternates;
mod interval;
mod link;
mod quality;

use thiserror::Error;

pub use accept::{parse_accept_list, serialize_accept_list, TokenPreference};
pub use accept_datetime::{parse_accept_datetime, serialize_accept_datetime, DatetimePreference};
pub use alternates::{parse_alternates, serialize_alternates, VariantDescriptor};
pub use interval::{parse_interval, serialize_interval, DatetimeInterval};
pub use link::{parse_link_timebundle, parse_links, LinkValue, REL_ORIGINAL, REL_TIMEBUNDLE};
pub use quality::QualityValue;

pub const ACCEPT: &str = "Accept";
pub const ACCEPT_LANGUAGE: &str = "Accept-Language";
pub const ACCEPT_DATETIME: &str = "X-Accept-Datetime";
pub const ALTERNATES: &str = "Alternates";
pub const ARCHIVE_INTERVAL: &str = "X-Archive-Interval";
pub const DATETIME_VALIDITY: &str = "X-Datetime-Validity";
pub const TCN: &str = "TCN";
pub const VARY: &str = "Vary";
pub const NEGOTIATE: &str = "Negotiate";
pub const LINK: &str = "Link";
pub const CONTENT_LOCATION: &str = "Content-Location";
pub const CONTENT_TYPE: &str = "Content-Type";
pub const CONTENT_LANGUAGE: &str = "Content-Language";
pub const LOCATION: &str = "Location";
pub const CACHE_CONTROL: &str = "Cache-Control";
pub const IF_MODIFIED_SINCE: &str = "If-Modified-Since";
pub const AGGREGATOR_SOURCES: &str = "X-Aggregator-Sources";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("empty header value")]
    EmptyHeader,
    #[error("malformed {header}: {reason}")]
    MalformedHeader { header: &'static str, reason: String },
    #[error("interval starts after it ends")]
    InvertedInterval,
}

impl HeaderError {
    pub(crate) fn malformed(header: &'static str, reason: impl Into<String>) -> Self {
        HeaderError::MalformedHeader {
            header,
            reason: reason.into(),
        }
    }
}

/// `Negotiate: 1.0` asks for a list response instead of a server choice.
pub fn negotiate_forces_list(value: &str) -> bool {
    value.split(',').any(|d| d.trim() == "1.0")
}

/// Splits on commas that sit outside braces, quotes and angle brackets.
pub(crate) fn split_top_level(value: &str) -> Result<Vec<&str>, String> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut in_quote = false;
    let mut in_angle = false;
    let mut start = 0;
    for (i, c) in value.char_indices() {
        match c {
            '"' if !in_angle => in_quote = !in_quote,
            _ if in_quote => {}
            '<' if depth == 0 => in_angle = true,
            '>' if in_angle => in_angle = false,
            _ if in_angle => {}
            '{' => depth += 1,
            '}' => {
                depth = depth.checked_sub(1).ok_or("unbalanced '}'")?;
            }
            ',' if depth == 0 => {
                items.push(value[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if in_quote {
        return Err("unterminated quoted string".into());
    }
    if depth != 0 {
        return Err("unbalanced '{'".into());
    }
    if in_angle {
        return Err("unterminated '<'".into());
    }
    items.push(value[start..].trim());
    Ok(items)
}

/// Parses an optional `;q=x` suffix (other parameters are ignored).
pub(crate) fn parse_params_q(params: &str, header: &'static str) -> Result<QualityValue, HeaderError> {
    let mut q = QualityValue::ONE;
    for param in params.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = param
            .split_once('=')
            .ok_or_else(|| HeaderError::malformed(header, format!("bad parameter {param:?}")))?;
        if name.trim().eq_ignore_ascii_case("q") {
            q = QualityValue::parse(value.trim())
                .map_err(|_| HeaderError::malformed(header, format!("bad q-value {value:?}")))?;
        }
    }
    Ok(q)
}
