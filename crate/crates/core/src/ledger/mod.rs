//! Event data model, taxonomy and the append-only ledger.
//!
//! A ledger is an immutable snapshot once loaded. Events iterate in
//! ascending `(timestamp, id)` order, and every time range that selects
//! events is half-open: `[from, to)`.

mod event;
mod taxonomy;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub use event::{AttrValue, Event, EventType, RawEvent};
pub use taxonomy::{Taxonomy, TaxonomyFile};

use crate::error::{Error, Result};
use crate::time::Timestamp;

/// What to do with a ledger line that fails to parse or validate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    /// Fail on the first bad line.
    #[default]
    Strict,
    /// Log the bad line and keep going.
    Lenient,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    events: Vec<Event>,
    ids: HashSet<String>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a ledger from an unordered batch, validating every event.
    pub fn from_events(events: Vec<Event>, taxonomy: &Taxonomy) -> Result<Self> {
        let mut ids = HashSet::with_capacity(events.len());
        for e in &events {
            check_event(e, taxonomy)?;
            if !ids.insert(e.id.clone()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        let mut events = events;
        events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self { events, ids })
    }

    pub fn append(&mut self, event: Event, taxonomy: &Taxonomy) -> Result<()> {
        check_event(&event, taxonomy)?;
        if self.ids.contains(&event.id) {
            return Err(Error::DuplicateId(event.id));
        }
        self.ids.insert(event.id.clone());
        let key = event.sort_key();
        let at = self.events.partition_point(|e| e.sort_key() < key);
        self.events.insert(at, event);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    /// `[first timestamp, last timestamp]`, or `None` when empty.
    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.events.first()?.timestamp, self.events.last()?.timestamp))
    }

    /// Events with `from <= timestamp < to`.
    pub fn slice(&self, from: Timestamp, to: Timestamp) -> Result<&[Event]> {
        if from > to {
            return Err(Error::InvalidRange { from, to });
        }
        let lo = self.events.partition_point(|e| e.timestamp < from);
        let hi = self.events.partition_point(|e| e.timestamp < to);
        Ok(&self.events[lo..hi])
    }

    /// Timestamps of every event whose type lies within `atom`, ascending.
    pub fn timestamps_of(&self, atom: &EventType) -> Vec<Timestamp> {
        self.events
            .iter()
            .filter(|e| e.event_type.is_within(atom))
            .map(|e| e.timestamp)
            .collect()
    }

    /// Copy with every attribute whose key starts with `prefix` removed.
    pub fn without_attributes(&self, prefix: &str) -> Ledger {
        let mut out = self.clone();
        for e in &mut out.events {
            e.attributes.retain(|k, _| !k.starts_with(prefix));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Ledger {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;
    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

fn check_event(event: &Event, taxonomy: &Taxonomy) -> Result<()> {
    event.validate()?;
    taxonomy.require(&event.event_type)
}

/// Loads a JSON Lines ledger, rejecting the first invalid line.
pub fn load_ledger(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Ledger> {
    let (ledger, _) = load_ledger_with(path, taxonomy, IngestMode::Strict)?;
    Ok(ledger)
}

/// Loads a JSON Lines ledger. In lenient mode bad lines are skipped and
/// returned as warnings.
pub fn load_ledger_with(
    path: impl AsRef<Path>,
    taxonomy: &Taxonomy,
    mode: IngestMode,
) -> Result<(Ledger, Vec<String>)> {
    read_ledger(BufReader::new(File::open(path)?), taxonomy, mode)
}

pub fn read_ledger<R: BufRead>(
    reader: R,
    taxonomy: &Taxonomy,
    mode: IngestMode,
) -> Result<(Ledger, Vec<String>)> {
    let mut events = Vec::new();
    let mut ids = HashSet::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = parse_line(&line, taxonomy).and_then(|e| {
            if ids.contains(&e.id) {
                Err(Error::DuplicateId(e.id))
            } else {
                Ok(e)
            }
        });
        match parsed {
            Ok(e) => {
                ids.insert(e.id.clone());
                events.push(e);
            }
            Err(err) => {
                let err = Error::at_line(lineno, err);
                match mode {
                    IngestMode::Strict => return Err(err),
                    IngestMode::Lenient => {
                        log::warn!("skipping {err}");
                        warnings.push(err.to_string());
                    }
                }
            }
        }
    }
    let ledger = Ledger::from_events(events, taxonomy)?;
    Ok((ledger, warnings))
}

fn parse_line(line: &str, taxonomy: &Taxonomy) -> Result<Event> {
    let raw: RawEvent = serde_json::from_str(line).map_err(|e| Error::Parse(e.to_string()))?;
    let event = Event::try_from(raw)?;
    taxonomy.require(&event.event_type)?;
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SECONDS_PER_HOUR as H;

    fn tax() -> Taxonomy {
        Taxonomy::new(["exercise.bike", "work", "sleep"]).unwrap()
    }

    fn ev(id: &str, ty: &str, hours: i64) -> Event {
        Event::new(id, ty.parse().unwrap(), hours * H, "test")
    }

    #[test]
    fn append_to_empty() {
        let mut l = Ledger::new();
        assert_eq!(l.span(), None);
        l.append(ev("a", "work", 2), &tax()).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.span(), Some((2 * H, 2 * H)));
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut l = Ledger::new();
        l.append(ev("a", "work", 2), &tax()).unwrap();
        let err = l.append(ev("a", "sleep", 3), &tax()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
        assert_eq!(l.len(), 1);
    }

    #[test]
    fn unknown_type_rejected() {
        let err = Ledger::new().append(ev("a", "jetpack", 0), &tax()).unwrap_err();
        assert!(matches!(err, Error::UnknownEventType(_)));
    }

    #[test]
    fn negative_duration_rejected() {
        let mut e = ev("a", "work", 0);
        e.duration = -1;
        let err = Ledger::new().append(e, &tax()).unwrap_err();
        assert!(matches!(err, Error::MalformedEvent(_)));
    }

    #[test]
    fn appends_iterate_in_time_order() {
        let mut l = Ledger::new();
        for (id, h) in [("x", 5), ("y", 1), ("z", 3)] {
            l.append(ev(id, "work", h), &tax()).unwrap();
        }
        let hours: Vec<i64> = l.iter().map(|e| e.timestamp / H).collect();
        assert_eq!(hours, [1, 3, 5]);
    }

    #[test]
    fn equal_timestamps_break_ties_by_id() {
        let mut l = Ledger::new();
        for id in ["b", "c", "a"] {
            l.append(ev(id, "work", 1), &tax()).unwrap();
        }
        let ids: Vec<&str> = l.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn slice_is_half_open() {
        let l = Ledger::from_events(
            vec![ev("a", "work", 1), ev("b", "work", 3), ev("c", "work", 5)],
            &tax(),
        )
        .unwrap();
        let got: Vec<&str> = l.slice(2 * H, 5 * H).unwrap().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(got, ["b"]);
        let (lo, hi) = l.span().unwrap();
        assert_eq!(l.slice(lo, hi + 1).unwrap().len(), 3);
        assert!(Ledger::new().slice(0, 10).unwrap().is_empty());
        assert!(matches!(l.slice(5, 4), Err(Error::InvalidRange { .. })));
    }

    #[test]
    fn load_empty_and_shuffled() {
        let (l, _) = read_ledger("".as_bytes(), &tax(), IngestMode::Strict).unwrap();
        assert!(l.is_empty());

        let text = [
            r#"{"id":"c","type":"work","ts":"2018-10-08T05:00:00Z","source":"t"}"#,
            r#"{"id":"a","type":"work","ts":"2018-10-08T01:00:00Z","source":"t"}"#,
            r#"{"id":"b","type":"sleep","ts":"2018-10-08T03:00:00Z","source":"t"}"#,
        ]
        .join("\n");
        let (loaded, _) = read_ledger(text.as_bytes(), &tax(), IngestMode::Strict).unwrap();

        let mut appended = Ledger::new();
        for line in text.lines() {
            appended.append(serde_json::from_str(line).unwrap(), &tax()).unwrap();
        }
        assert_eq!(loaded.events(), appended.events());
        assert_eq!(loaded.len(), 3);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let text = [
            r#"{"id":"a","type":"work","ts":"2018-10-08T01:00:00Z","source":"t"}"#,
            r#"{"id":"b","type":"work","ts":"2018-10-08T02:00:00Z","dur_s":-3,"source":"t"}"#,
        ]
        .join("\n");
        let err = read_ledger(text.as_bytes(), &tax(), IngestMode::Strict).unwrap_err();
        match err {
            Error::AtLine { line, source } => {
                assert_eq!(line, 2);
                assert!(matches!(*source, Error::MalformedEvent(_)));
            }
            other => panic!("unexpected {other:?}"),
        }

        let (l, warnings) = read_ledger(text.as_bytes(), &tax(), IngestMode::Lenient).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn unparsable_line_is_parse_error() {
        let err = read_ledger("{not json".as_bytes(), &tax(), IngestMode::Strict).unwrap_err();
        assert!(matches!(err.root(), Error::Parse(_)));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.jsonl");
        let l = Ledger::from_events(
            vec![
                ev("b", "sleep", 4).with_attr("quality", AttrValue::Number(0.7)),
                ev("a", "exercise.bike", 1).with_attr("route", AttrValue::Text("river".into())),
            ],
            &tax(),
        )
        .unwrap();
        l.save(&path).unwrap();
        assert_eq!(load_ledger(&path, &tax()).unwrap(), l);
    }
}
