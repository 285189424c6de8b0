use crate::date::{parse_http_date, DatetimeStamp};

use super::{split_top_level, HeaderError, QualityValue, ALTERNATES};

/// One variant in an `Alternates` list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantDescriptor {
    pub uri: String,
    pub source_quality: QualityValue,
    pub media_type: Option<String>,
    pub language: Option<String>,
    pub datetime: Option<DatetimeStamp>,
}

impl VariantDescriptor {
    pub fn new(uri: impl Into<String>, source_quality: QualityValue) -> Self {
        VariantDescriptor {
            uri: uri.into(),
            source_quality,
            media_type: None,
            language: None,
            datetime: None,
        }
    }
}

fn bad(reason: impl Into<String>) -> HeaderError {
    HeaderError::malformed(ALTERNATES, reason)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), HeaderError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(bad(format!("expected {c:?} at offset {} of {:?}", self.pos, self.text)))
        }
    }

    fn quoted(&mut self) -> Result<&'a str, HeaderError> {
        self.expect('"')?;
        let rest = &self.text[self.pos..];
        let end = rest.find('"').ok_or_else(|| bad("unterminated quoted string"))?;
        self.pos += end + 1;
        Ok(&rest[..end])
    }

    // Runs until whitespace or a brace.
    fn token(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '{' || c == '}')
            .unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    // Skips a balanced `{...}` group whose opening brace was already consumed.
    fn skip_group(&mut self) -> Result<(), HeaderError> {
        let mut depth = 1;
        for (i, c) in self.text[self.pos..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += i + 1;
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
        Err(bad("unbalanced braces"))
    }
}

fn parse_descriptor(item: &str) -> Result<VariantDescriptor, HeaderError> {
    let mut cur = Cursor { text: item, pos: 0 };
    cur.expect('{')?;
    let uri = cur.quoted()?;
    if uri.is_empty() {
        return Err(bad("empty variant URI"));
    }
    let q_text = cur.token();
    if q_text.is_empty() {
        return Err(bad(format!("missing source quality for {uri:?}")));
    }
    let source_quality =
        QualityValue::parse(q_text).map_err(|_| bad(format!("bad source quality {q_text:?}")))?;
    let mut desc = VariantDescriptor::new(uri, source_quality);
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some('}') => {
                cur.pos += 1;
                break;
            }
            Some('{') => {
                cur.pos += 1;
                let name = cur.token();
                match name {
                    "type" => {
                        desc.media_type = Some(cur.token().to_string());
                        cur.expect('}')?;
                    }
                    "language" => {
                        desc.language = Some(cur.token().to_string());
                        cur.expect('}')?;
                    }
                    "datetime" => {
                        let text = cur.quoted()?;
                        desc.datetime = Some(parse_http_date(text).map_err(|e| bad(e.to_string()))?);
                        cur.expect('}')?;
                    }
                    // charset, length, features and the like: not a negotiation dimension here
                    _ => cur.skip_group()?,
                }
            }
            _ => return Err(bad(format!("unexpected text in {item:?}"))),
        }
    }
    cur.skip_ws();
    if cur.pos != item.len() {
        return Err(bad(format!("trailing text after variant in {item:?}")));
    }
    Ok(desc)
}

pub fn parse_alternates(value: &str) -> Result<Vec<VariantDescriptor>, HeaderError> {
    if value.trim().is_empty() {
        return Err(bad("empty value"));
    }
    split_top_level(value)
        .map_err(bad)?
        .into_iter()
        .map(parse_descriptor)
        .collect()
}

fn serialize_descriptor(d: &VariantDescriptor) -> String {
    let mut out = format!("{{\"{}\" {}", d.uri, d.source_quality);
    if let Some(t) = &d.media_type {
        out.push_str(&format!(" {{type {t}}}"));
    }
    if let Some(l) = &d.language {
        out.push_str(&format!(" {{language {l}}}"));
    }
    if let Some(dt) = d.datetime {
        out.push_str(&format!(" {{datetime \"{dt}\"}}"));
    }
    out.push('}');
    out
}

pub fn serialize_alternates(variants: &[VariantDescriptor]) -> String {
    variants
        .iter()
        .map(serialize_descriptor)
        .collect::<Vec<_>>()
        .join(", ")
}
