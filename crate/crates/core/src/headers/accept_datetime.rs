use crate::date::{parse_http_date, DatetimeStamp};

use super::{parse_params_q, split_top_level, HeaderError, QualityValue, ACCEPT_DATETIME};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DatetimePreference {
    pub datetime: DatetimeStamp,
    pub quality: QualityValue,
}

impl DatetimePreference {
    pub fn new(datetime: DatetimeStamp) -> Self {
        DatetimePreference {
            datetime,
            quality: QualityValue::ONE,
        }
    }

    pub fn with_quality(datetime: DatetimeStamp, quality: QualityValue) -> Self {
        DatetimePreference { datetime, quality }
    }
}

/// Parses `{HTTP-date}[;q=x], ...`. Braces delimit items because the dates contain commas.
pub fn parse_accept_datetime(value: &str) -> Result<Vec<DatetimePreference>, HeaderError> {
    if value.trim().is_empty() {
        return Err(HeaderError::EmptyHeader);
    }
    let items = split_top_level(value).map_err(|r| HeaderError::malformed(ACCEPT_DATETIME, r))?;
    items
        .into_iter()
        .map(|item| {
            let rest = item.strip_prefix('{').ok_or_else(|| {
                HeaderError::malformed(ACCEPT_DATETIME, format!("item {item:?} lacks '{{'"))
            })?;
            let (date, params) = rest.split_once('}').ok_or_else(|| {
                HeaderError::malformed(ACCEPT_DATETIME, format!("item {item:?} lacks '}}'"))
            })?;
            let datetime = parse_http_date(date.trim())
                .map_err(|e| HeaderError::malformed(ACCEPT_DATETIME, e.to_string()))?;
            let params = params.trim_start();
            if !params.is_empty() && !params.starts_with(';') {
                return Err(HeaderError::malformed(
                    ACCEPT_DATETIME,
                    format!("unexpected text after date in {item:?}"),
                ));
            }
            let quality = parse_params_q(params, ACCEPT_DATETIME)?;
            Ok(DatetimePreference { datetime, quality })
        })
        .collect()
}

/// Canonical form; `;q=` is omitted for q = 1.0.
pub fn serialize_accept_datetime(prefs: &[DatetimePreference]) -> String {
    prefs
        .iter()
        .map(|p| {
            if p.quality == QualityValue::ONE {
                format!("{{{}}}", p.datetime)
            } else {
                format!("{{{}}};q={}", p.datetime, p.quality)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_braced_date() {
        let prefs = parse_accept_datetime("{Sun, 06 Nov 1994 08:49:37 GMT}").unwrap();
        assert_eq!(prefs, vec![DatetimePreference::new(DatetimeStamp::from_unix(784_111_777))]);
    }

    #[test]
    fn empty_is_its_own_error() {
        assert_eq!(parse_accept_datetime(""), Err(HeaderError::EmptyHeader));
        assert_eq!(parse_accept_datetime("   "), Err(HeaderError::EmptyHeader));
    }

    #[test]
    fn weighted_list_round_trips() {
        let text = "{Mon, 12 Oct 2009 16:25:00 GMT};q=0.8, {Mon, 02 Nov 2009 16:25:00 GMT};q=0.4";
        let prefs = parse_accept_datetime(text).unwrap();
        assert_eq!(prefs.len(), 2);
        assert_eq!(prefs[0].quality.thousandths(), 800);
        assert_eq!(prefs[1].quality.thousandths(), 400);
        assert_eq!(serialize_accept_datetime(&prefs), text);
    }

    #[test]
    fn malformed_items() {
        for bad in [
            "{garbage}",
            "Sun, 06 Nov 1994 08:49:37 GMT",
            "{Sun, 06 Nov 1994 08:49:37 GMT",
            "{Sun, 06 Nov 1994 08:49:37 GMT};q=1.5",
            "{Sun, 06 Nov 1994 08:49:37 GMT} junk",
            "{Sun, 06 Nov 1994 08:49:37 GMT},",
        ] {
            assert!(
                matches!(parse_accept_datetime(bad), Err(HeaderError::MalformedHeader { .. })),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn tolerates_whitespace_and_case() {
        let prefs = parse_accept_datetime(" { Sun, 06 Nov 1994 08:49:37 GMT } ; Q=0.5 ").unwrap();
        assert_eq!(prefs[0].quality.thousandths(), 500);
    }
}
