//! Memento records.

use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::date::DatetimeStamp;
use crate::headers::DatetimeInterval;

/// Recorded in every TimeMap document.
pub const DIGEST_ALGORITHM: &str = "sha-256";

pub fn content_digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("creation time {created} precedes archival datetime {archived}")]
    CreatedBeforeArchived {
        archived: DatetimeStamp,
        created: DatetimeStamp,
    },
    #[error("validity interval {validity} does not contain archival datetime {archived}")]
    ValidityExcludesDatetime {
        validity: DatetimeInterval,
        archived: DatetimeStamp,
    },
    #[error("digest mismatch for {uri_m}")]
    DigestMismatch { uri_m: String },
    #[error("empty URI")]
    EmptyUri,
}

/// A frozen representation of `uri_r` as it was at `datetime`.
///
/// The body is shared and never mutated; the validity interval is metadata and may
/// be widened by a transactional archive as later observations arrive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MementoRecord {
    uri_m: String,
    uri_r: String,
    datetime: DatetimeStamp,
    created: DatetimeStamp,
    media_type: String,
    language: Option<String>,
    body: Arc<[u8]>,
    validity: Option<DatetimeInterval>,
    digest: String,
}

#[derive(Debug, Clone)]
pub struct MementoDraft {
    pub uri_m: String,
    pub uri_r: String,
    pub datetime: DatetimeStamp,
    pub created: DatetimeStamp,
    pub media_type: String,
    pub language: Option<String>,
    pub body: Vec<u8>,
    pub validity: Option<DatetimeInterval>,
}

impl MementoDraft {
    pub fn build(self) -> Result<MementoRecord, RecordError> {
        let digest = content_digest(&self.body);
        self.build_with_digest(digest)
    }

    /// Builds a record while checking a previously recorded digest against the body.
    pub fn build_with_digest(self, digest: String) -> Result<MementoRecord, RecordError> {
        if self.uri_m.is_empty() || self.uri_r.is_empty() {
            return Err(RecordError::EmptyUri);
        }
        if self.created < self.datetime {
            return Err(RecordError::CreatedBeforeArchived {
                archived: self.datetime,
                created: self.created,
            });
        }
        if let Some(v) = self.validity {
            check_validity(v, self.datetime)?;
        }
        if content_digest(&self.body) != digest {
            return Err(RecordError::DigestMismatch { uri_m: self.uri_m });
        }
        Ok(MementoRecord {
            uri_m: self.uri_m,
            uri_r: self.uri_r,
            datetime: self.datetime,
            created: self.created,
            media_type: self.media_type,
            language: self.language,
            body: self.body.into(),
            validity: self.validity,
            digest,
        })
    }
}

fn check_validity(v: DatetimeInterval, archived: DatetimeStamp) -> Result<(), RecordError> {
    if v.contains(archived) {
        Ok(())
    } else {
        Err(RecordError::ValidityExcludesDatetime {
            validity: v,
            archived,
        })
    }
}

impl MementoRecord {
    pub fn uri_m(&self) -> &str {
        &self.uri_m
    }

    pub fn uri_r(&self) -> &str {
        &self.uri_r
    }

    /// Archival datetime (t_i).
    pub fn datetime(&self) -> DatetimeStamp {
        self.datetime
    }

    /// Creation time (t_c).
    pub fn created(&self) -> DatetimeStamp {
        self.created
    }

    pub fn media_type(&self) -> &str {
        &self.media_type
    }

    pub fn language(&self) -> Option<&str> {
        self.language.as_deref()
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    pub fn validity(&self) -> Option<DatetimeInterval> {
        self.validity
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn verify_digest(&self) -> Result<(), RecordError> {
        if content_digest(&self.body) == self.digest {
            Ok(())
        } else {
            Err(RecordError::DigestMismatch {
                uri_m: self.uri_m.clone(),
            })
        }
    }

    pub(crate) fn set_validity(&mut self, validity: DatetimeInterval) -> Result<(), RecordError> {
        check_validity(validity, self.datetime)?;
        self.validity = Some(validity);
        Ok(())
    }
}
