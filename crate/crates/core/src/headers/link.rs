use super::{split_top_level, HeaderError, LINK};

pub const REL_TIMEBUNDLE: &str = "timebundle";
pub const REL_ORIGINAL: &str = "original";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkValue {
    pub target: String,
    pub rels: Vec<String>,
}

impl LinkValue {
    pub fn has_rel(&self, rel: &str) -> bool {
        self.rels.iter().any(|r| r.eq_ignore_ascii_case(rel))
    }
}

/// Parses a `Link` header into its link-values. Only the `rel` parameter is retained.
pub fn parse_links(value: &str) -> Result<Vec<LinkValue>, HeaderError> {
    let bad = |reason: String| HeaderError::malformed(LINK, reason);
    if value.trim().is_empty() {
        return Err(HeaderError::EmptyHeader);
    }
    split_top_level(value)
        .map_err(bad)?
        .into_iter()
        .map(|item| {
            let rest = item
                .strip_prefix('<')
                .ok_or_else(|| bad(format!("link-value {item:?} lacks '<'")))?;
            let (target, params) = rest
                .split_once('>')
                .ok_or_else(|| bad(format!("link-value {item:?} lacks '>'")))?;
            let mut rels = Vec::new();
            for param in params.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let (name, val) = param
                    .split_once('=')
                    .ok_or_else(|| bad(format!("bad link parameter {param:?}")))?;
                if name.trim().eq_ignore_ascii_case("rel") {
                    let val = val.trim();
                    let val = val
                        .strip_prefix('"')
                        .and_then(|v| v.strip_suffix('"'))
                        .unwrap_or(val);
                    rels.extend(val.split_whitespace().map(str::to_string));
                }
            }
            Ok(LinkValue {
                target: target.trim().to_string(),
                rels,
            })
        })
        .collect()
}

/// The first target carrying `rel="timebundle"`; `None` when the header is absent
/// or names no TimeBundle.
pub fn parse_link_timebundle(value: Option<&str>) -> Result<Option<String>, HeaderError> {
    let Some(value) = value else {
        return Ok(None);
    };
    Ok(parse_links(value)?
        .into_iter()
        .find(|l| l.has_rel(REL_TIMEBUNDLE))
        .map(|l| l.target))
}
