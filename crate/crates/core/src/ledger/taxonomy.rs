use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::EventType;
use crate::error::{Error, Result};

/// Shared vocabulary of event types.
///
/// Listing `exercise.bike` implies `exercise`. `actionable` names the types a
/// guidance system may recommend; `media` names guidance channels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Taxonomy {
    types: BTreeSet<EventType>,
    actionable: BTreeSet<EventType>,
    media: BTreeSet<EventType>,
}

/// On-disk shape of a taxonomy file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub types: Vec<String>,
    #[serde(default)]
    pub actionable: Vec<String>,
    #[serde(default)]
    pub media: Vec<String>,
}

impl Taxonomy {
    pub fn new<I, S>(types: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tree = BTreeSet::new();
        for path in types {
            let t = EventType::new(path.as_ref())?;
            tree.extend(t.ancestors());
            tree.insert(t);
        }
        Ok(Self {
            types: tree,
            ..Default::default()
        })
    }

    pub fn with_actionable<I, S>(mut self, paths: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.actionable = self.members(paths)?;
        Ok(self)
    }

    pub fn with_media<I, S>(mut self, paths: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.media = self.members(paths)?;
        Ok(self)
    }

    fn members<I, S>(&self, paths: I) -> Result<BTreeSet<EventType>>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = BTreeSet::new();
        let mut unknown = Vec::new();
        for p in paths {
            let t = EventType::new(p.as_ref())?;
            if !self.types.contains(&t) {
                unknown.push(t.to_string());
            } else if !out.insert(t) {
                return Err(Error::Parse(format!("duplicate taxonomy entry `{}`", p.as_ref())));
            }
        }
        if unknown.is_empty() {
            Ok(out)
        } else {
            Err(Error::UnknownEventType(unknown))
        }
    }

    pub fn from_file_repr(file: TaxonomyFile) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &file.types {
            if !seen.insert(t.as_str()) {
                return Err(Error::Parse(format!("duplicate taxonomy path `{t}`")));
            }
        }
        Taxonomy::new(&file.types)?
            .with_actionable(&file.actionable)?
            .with_media(&file.media)
    }

    pub fn to_file_repr(&self) -> TaxonomyFile {
        let render = |set: &BTreeSet<EventType>| set.iter().map(|t| t.to_string()).collect();
        TaxonomyFile {
            types: self.leaves().map(|t| t.to_string()).collect(),
            actionable: render(&self.actionable),
            media: render(&self.media),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: TaxonomyFile =
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("taxonomy: {e}")))?;
        Self::from_file_repr(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file_repr())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn contains(&self, t: &EventType) -> bool {
        self.types.contains(t)
    }

    pub fn types(&self) -> impl Iterator<Item = &EventType> {
        self.types.iter()
    }

    pub fn is_leaf(&self, t: &EventType) -> bool {
        self.types.contains(t) && !self.types.iter().any(|other| other != t && other.is_within(t))
    }

    /// Types with no children, in path order.
    pub fn leaves(&self) -> impl Iterator<Item = &EventType> {
        let all: Vec<&EventType> = self.types.iter().collect();
        // In sorted order every descendant of `t` follows `t` directly.
        all.iter()
            .enumerate()
            .filter(|&(i, t)| all.get(i + 1).is_none_or(|next| !next.is_within(t)))
            .map(|(_, t)| *t)
            .collect::<Vec<_>>()
            .into_iter()
    }

    pub fn is_actionable(&self, t: &EventType) -> bool {
        self.actionable.contains(t)
    }

    pub fn actionable(&self) -> impl Iterator<Item = &EventType> {
        self.actionable.iter()
    }

    pub fn is_media(&self, t: &EventType) -> bool {
        self.media.contains(t)
    }

    pub fn media(&self) -> impl Iterator<Item = &EventType> {
        self.media.iter()
    }

    pub fn require(&self, t: &EventType) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::unknown_type(t.as_str()))
        }
    }

    /// Whether an event of `event_type` satisfies a pattern atom naming `atom`:
    /// equal, or a descendant of it.
    pub fn type_matches(&self, event_type: &EventType, atom: &EventType) -> Result<bool> {
        let unknown: Vec<String> = [event_type, atom]
            .into_iter()
            .filter(|t| !self.contains(t))
            .map(|t| t.to_string())
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownEventType(unknown));
        }
        Ok(event_type.is_within(atom))
    }

    /// Stable identity: hex prefix of a SHA-256 over the sorted type tree.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.types {
            hasher.update(t.as_str().as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
