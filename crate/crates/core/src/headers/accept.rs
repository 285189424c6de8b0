use super::{parse_params_q, HeaderError, QualityValue};

/// One entry of an `Accept` or `Accept-Language` list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPreference {
    pub token: String,
    pub quality: QualityValue,
}

impl TokenPreference {
    pub fn new(token: impl Into<String>, quality: QualityValue) -> Self {
        TokenPreference {
            token: token.into(),
            quality,
        }
    }
}

/// Parses `token[;param...][;q=x], ...` as used by `Accept` and `Accept-Language`.
pub fn parse_accept_list(
    value: &str,
    header: &'static str,
) -> Result<Vec<TokenPreference>, HeaderError> {
    if value.trim().is_empty() {
        return Err(HeaderError::EmptyHeader);
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|item| !item.is_empty())
        .map(|item| {
            let (token, params) = item.split_once(';').unwrap_or((item, ""));
            let token = token.trim();
            if token.is_empty() || token.contains(char::is_whitespace) {
                return Err(HeaderError::malformed(header, format!("bad token in {item:?}")));
            }
            Ok(TokenPreference::new(token, parse_params_q(params, header)?))
        })
        .collect()
}

pub fn serialize_accept_list(prefs: &[TokenPreference]) -> String {
    prefs
        .iter()
        .map(|p| {
            if p.quality == QualityValue::ONE {
                p.token.clone()
            } else {
                format!("{};q={}", p.token, p.quality)
            }
        })
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::headers::ACCEPT_LANGUAGE;

    #[test]
    fn accept_language_example() {
        let prefs = parse_accept_list("en, fr;q=0.7", ACCEPT_LANGUAGE).unwrap();
        assert_eq!(
            prefs,
            vec![
                TokenPreference::new("en", QualityValue::ONE),
                TokenPreference::new("fr", QualityValue::from_thousandths(700).unwrap()),
            ]
        );
    }

    #[test]
    fn extra_params_are_ignored() {
        let prefs = parse_accept_list("text/html;level=1;q=0.5", "Accept").unwrap();
        assert_eq!(prefs[0].token, "text/html");
        assert_eq!(prefs[0].quality.thousandths(), 500);
    }

    #[test]
    fn zero_quality_is_kept() {
        let prefs = parse_accept_list("de, fr;q=0.0, en-US;q=0.0", ACCEPT_LANGUAGE).unwrap();
        assert!(prefs[1].quality.is_zero() && prefs[2].quality.is_zero());
        assert_eq!(serialize_accept_list(&prefs), "de, fr;q=0.0, en-US;q=0.0");
    }
}
