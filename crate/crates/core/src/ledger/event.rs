use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{format_iso, parse_iso, Timestamp};

/// A dotted taxonomy path such as `exercise.bike`.
///
/// Segments are non-empty runs of `[a-z0-9_]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EventType(String);

impl EventType {
    pub fn new(path: impl Into<String>) -> Result<Self> {
        let path = path.into();
        if is_valid_path(&path) {
            Ok(Self(path))
        } else {
            Err(Error::MalformedEvent(format!(
                "event type `{path}` is not a dotted lowercase path"
            )))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn parent(&self) -> Option<EventType> {
        self.0.rfind('.').map(|i| EventType(self.0[..i].to_string()))
    }

    /// Proper ancestors, nearest first.
    pub fn ancestors(&self) -> impl Iterator<Item = EventType> + '_ {
        self.0
            .char_indices()
            .rev()
            .filter(|&(_, c)| c == '.')
            .map(move |(i, _)| EventType(self.0[..i].to_string()))
    }

    /// True when `self` equals `other` or lies beneath it in the tree.
    pub fn is_within(&self, other: &EventType) -> bool {
        self.0 == other.0
            || (self.0.len() > other.0.len()
                && self.0.starts_with(&other.0)
                && self.0.as_bytes()[other.0.len()] == b'.')
    }
}

pub(crate) fn is_valid_path(path: &str) -> bool {
    !path.is_empty()
        && path.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        })
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for EventType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl TryFrom<String> for EventType {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<EventType> for String {
    fn from(value: EventType) -> Self {
        value.0
    }
}

impl AsRef<str> for EventType {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Scalar attribute value. Opaque to every downstream module except
/// attribute confounders, which only compare rendered values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(s) => f.write_str(s),
        }
    }
}

/// One timestamped occurrence written to the ledger by some app or device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEvent", into = "RawEvent")]
pub struct Event {
    pub id: String,
    pub event_type: EventType,
    pub timestamp: Timestamp,
    /// Seconds, never negative.
    pub duration: i64,
    pub attributes: BTreeMap<String, AttrValue>,
    pub source: String,
}

impl Event {
    pub fn new(
        id: impl Into<String>,
        event_type: EventType,
        timestamp: Timestamp,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            event_type,
            timestamp,
            duration: 0,
            attributes: BTreeMap::new(),
            source: source.into(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: AttrValue) -> Self {
        self.attributes.insert(key.into(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::MalformedEvent("empty id".into()));
        }
        if !is_valid_path(self.event_type.as_str()) {
            return Err(Error::MalformedEvent(format!(
                "event type `{}` is not a dotted lowercase path",
                self.event_type
            )));
        }
        if self.duration < 0 {
            return Err(Error::MalformedEvent(format!(
                "event `{}` has negative duration {}",
                self.id, self.duration
            )));
        }
        Ok(())
    }

    pub(crate) fn sort_key(&self) -> (Timestamp, &str) {
        (self.timestamp, self.id.as_str())
    }
}

/// Wire form of one ledger line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawEvent {
    pub id: String,
    #[serde(rename = "type")]
    pub event_type: String,
    pub ts: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dur_s: i64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, AttrValue>,
    pub source: String,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

impl TryFrom<RawEvent> for Event {
    type Error = Error;

    fn try_from(raw: RawEvent) -> Result<Self> {
        let event = Event {
            event_type: EventType::new(raw.event_type)?,
            timestamp: parse_iso(&raw.ts)?,
            duration: raw.dur_s,
            id: raw.id,
            attributes: raw.attrs,
            source: raw.source,
        };
        event.validate()?;
        Ok(event)
    }
}

impl From<Event> for RawEvent {
    fn from(e: Event) -> Self {
        RawEvent {
            id: e.id,
            event_type: e.event_type.0,
            ts: format_iso(e.timestamp),
            dur_s: e.duration,
            attrs: e.attributes,
            source: e.source,
        }
    }
}
