//! Pattern matching over a ledger and discovery of candidate associations.
//!
//! Windows are measured start-to-start and are closed on both ends. A
//! composite pattern occurs at the timestamp of its final matched event.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{format_pattern, Pattern, Window};
use crate::error::{Error, Result};
use crate::ledger::{EventType, Ledger, Taxonomy};
use crate::time::Timestamp;

/// One match of a pattern: the matched event ids in atom order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub event_ids: Vec<String>,
    pub anchor_time: Timestamp,
}

/// Internal occurrence over ledger positions. Ledger positions order the
/// same way as `(timestamp, id)`, so `(anchor, events)` is the output order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Occ {
    anchor: Timestamp,
    events: Vec<usize>,
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| !b.contains(x))
}

/// Union-find "next unconsumed slot at or after i".
struct NextFree {
    parent: Vec<usize>,
}

impl NextFree {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..=n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[i] != root {
            let next = self.parent[i];
            self.parent[i] = root;
            i = next;
        }
        root
    }

    fn consume(&mut self, i: usize) {
        self.parent[i] = i + 1;
    }
}

fn eval(ledger: &Ledger, pattern: &Pattern) -> Vec<Occ> {
    match pattern {
        Pattern::Atom(atom) => ledger
            .iter()
            .enumerate()
            .filter(|(_, e)| e.event_type.is_within(atom))
            .map(|(i, e)| Occ {
                anchor: e.timestamp,
                events: vec![i],
            })
            .collect(),
        Pattern::Seq {
            left,
            right,
            window,
        } => {
            let lefts = eval(ledger, left);
            let rights = eval(ledger, right);
            let mut free = NextFree::new(rights.len());
            let mut out = Vec::new();
            // First-match pairing: each left occurrence, in order, takes the
            // earliest unconsumed right occurrence inside its window.
            for l in &lefts {
                let lo = l.anchor + window.start;
                let hi = l.anchor + window.end;
                let mut j = free.find(rights.partition_point(|r| r.anchor < lo));
                while j < rights.len() && rights[j].anchor <= hi {
                    if disjoint(&l.events, &rights[j].events) {
                        free.consume(j);
                        let mut events = l.events.clone();
                        events.extend_from_slice(&rights[j].events);
                        out.push(Occ {
                            anchor: rights[j].anchor,
                            events,
                        });
                        break;
                    }
                    j = free.find(j + 1);
                }
            }
            out.sort();
            out
        }
    }
}

/// All occurrences of `pattern`, sorted by anchor time (ties by the ledger
/// order of the matched events).
pub fn match_pattern(
    ledger: &Ledger,
    pattern: &Pattern,
    taxonomy: &Taxonomy,
) -> Result<Vec<Occurrence>> {
    pattern.validate(taxonomy)?;
    let events = ledger.events();
    Ok(eval(ledger, pattern)
        .into_iter()
        .map(|o| Occurrence {
            event_ids: o.events.iter().map(|&i| events[i].id.clone()).collect(),
            anchor_time: o.anchor,
        })
        .collect())
}

/// Occurrence anchors together with the ledger positions they cover.
pub(crate) fn occurrence_positions(ledger: &Ledger, pattern: &Pattern) -> Vec<(Timestamp, Vec<usize>)> {
    eval(ledger, pattern)
        .into_iter()
        .map(|o| (o.anchor, o.events))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationStats {
    /// Antecedent events with at least one outcome inside the window.
    pub support: usize,
    pub confidence: f64,
    pub lift: f64,
    pub antecedent_count: usize,
    pub outcome_count: usize,
}

struct PairIndex<'a> {
    antecedent: &'a [Timestamp],
    outcome: &'a [Timestamp],
    /// Per antecedent event: is it itself an outcome-type event? `None` when
    /// the two types cannot overlap.
    self_outcome: Option<&'a [bool]>,
}

fn pair_stats(pair: &PairIndex<'_>, window: Window, span: i64) -> AssociationStats {
    let n_a = pair.antecedent.len();
    let n_b = pair.outcome.len();
    let support = pair
        .antecedent
        .iter()
        .enumerate()
        .filter(|&(i, &t)| {
            let lo = pair.outcome.partition_point(|&x| x < t + window.start);
            let hi = pair.outcome.partition_point(|&x| x <= t + window.end);
            // A zero-start window would otherwise count the event itself.
            let own = pair.self_outcome.is_some_and(|f| f[i]) && window.start == 0;
            hi - lo > usize::from(own)
        })
        .count();
    let confidence = support as f64 / n_a as f64;
    let lift = if n_b == 0 {
        0.0
    } else {
        let rate = n_b as f64 / span as f64;
        let baseline = 1.0 - (-rate * (window.width() + 1) as f64).exp();
        confidence / baseline
    };
    AssociationStats {
        support,
        confidence,
        lift,
        antecedent_count: n_a,
        outcome_count: n_b,
    }
}

/// Support, confidence and lift of `antecedent -> outcome` within `window`.
///
/// Lift compares confidence with the chance that a homogeneous Poisson
/// process at the outcome's average rate lands in a window of the same
/// width (plus one second, so zero-width windows stay defined).
pub fn association_stats(
    ledger: &Ledger,
    antecedent: &EventType,
    outcome: &EventType,
    window: Window,
    taxonomy: &Taxonomy,
) -> Result<AssociationStats> {
    window.validate()?;
    Pattern::Atom(antecedent.clone()).validate(taxonomy)?;
    Pattern::Atom(outcome.clone()).validate(taxonomy)?;
    let a_times = ledger.timestamps_of(antecedent);
    if a_times.is_empty() {
        return Err(Error::NoAntecedentEvents);
    }
    let (lo, hi) = ledger.span().expect("non-empty");
    if hi == lo {
        return Err(Error::DegenerateSpan);
    }
    let b_times = ledger.timestamps_of(outcome);
    let flags: Option<Vec<bool>> = (antecedent.is_within(outcome) || outcome.is_within(antecedent))
        .then(|| {
            ledger
                .iter()
                .filter(|e| e.event_type.is_within(antecedent))
                .map(|e| e.event_type.is_within(outcome))
                .collect()
        });
    Ok(pair_stats(
        &PairIndex {
            antecedent: &a_times,
            outcome: &b_times,
            self_outcome: flags.as_deref(),
        },
        window,
        hi - lo,
    ))
}

/// Candidate relationship handed to the causal tester.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypothesisRecord", into = "HypothesisRecord")]
pub struct Hypothesis {
    pub antecedent: Pattern,
    pub outcome: EventType,
    pub window: Window,
    pub support: usize,
    pub confidence: f64,
    pub lift: f64,
}

impl Hypothesis {
    /// An untested, unmined hypothesis with zeroed statistics.
    pub fn new(antecedent: Pattern, outcome: EventType, window: Window) -> Self {
        Self {
            antecedent,
            outcome,
            window,
            support: 0,
            confidence: 0.0,
            lift: 0.0,
        }
    }

    /// Reads `"<antecedent> W[a,b] <outcome>"`: the last operator and atom
    /// of the pattern become the window and outcome.
    pub fn parse_rule(text: &str) -> Result<Self> {
        match crate::algebra::parse_pattern(text)? {
            Pattern::Seq {
                left,
                right,
                window,
            } => match *right {
                Pattern::Atom(outcome) => Ok(Self::new(*left, outcome, window)),
                _ => Err(Error::Parse(format!(
                    "rule `{text}` must end in a single outcome type"
                ))),
            },
            Pattern::Atom(_) => Err(Error::Parse(format!(
                "rule `{text}` needs an antecedent, a window and an outcome"
            ))),
        }
    }

    /// `"<antecedent> W[a,b] <outcome>"`, when the window is expressible.
    pub fn rule(&self) -> Option<String> {
        if !self.window.is_representable() {
            return None;
        }
        let antecedent = match &self.antecedent {
            Pattern::Atom(_) => format_pattern(&self.antecedent),
            composite => format!("({})", format_pattern(composite)),
        };
        Some(format!("{antecedent} W{} {}", self.window, self.outcome))
    }

    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        self.window.validate()?;
        self.antecedent.validate(taxonomy)?;
        taxonomy.require(&self.outcome)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub antecedent: String,
    pub outcome: String,
    pub window_s: [i64; 2],
    #[serde(default, skip_deserializing, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default)]
    pub support: usize,
    #[serde(default)]
    pub confidence: f64,
    #[serde(default)]
    pub lift: f64,
}

impl From<Hypothesis> for HypothesisRecord {
    fn from(h: Hypothesis) -> Self {
        HypothesisRecord {
            rule: h.rule(),
            antecedent: format_pattern(&h.antecedent),
            outcome: h.outcome.to_string(),
            window_s: [h.window.start, h.window.end],
            support: h.support,
            confidence: h.confidence,
            lift: h.lift,
        }
    }
}

impl TryFrom<HypothesisRecord> for Hypothesis {
    type Error = Error;
    fn try_from(r: HypothesisRecord) -> Result<Self> {
        Ok(Hypothesis {
            antecedent: crate::algebra::parse_pattern(&r.antecedent)?,
            outcome: EventType::new(r.outcome)?,
            window: Window::new(r.window_s[0], r.window_s[1])?,
            support: r.support,
            confidence: r.confidence,
            lift: r.lift,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    /// Leaf types with fewer events are not considered.
    pub min_count: usize,
    pub min_support: usize,
    pub min_lift: f64,
    /// Window grid in hours.
    pub windows_h: Vec<[f64; 2]>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            min_support: 3,
            min_lift: 1.0,
            windows_h: vec![[0.0, 1.0], [1.0, 2.0], [2.0, 4.0], [4.0, 8.0], [8.0, 24.0]],
        }
    }
}

impl MinerConfig {
    pub fn windows(&self) -> Result<Vec<Window>> {
        if self.windows_h.is_empty() {
            return Err(Error::InvalidConfig("window grid is empty".into()));
        }
        if self.min_support < 1 {
            return Err(Error::InvalidConfig("min_support must be at least 1".into()));
        }
        if !self.min_lift.is_finite() {
            return Err(Error::InvalidConfig("min_lift must be finite".into()));
        }
        self.windows_h
            .iter()
            .map(|&[a, b]| {
                Window::from_hours(a, b).map_err(|e| Error::InvalidConfig(e.to_string()))
            })
            .collect()
    }
}

/// Ranking order: lift desc, confidence desc, antecedent asc, outcome asc,
/// window start asc. Window end is the last tie-break.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.lift
        .total_cmp(&a.lift)
        .then(b.confidence.total_cmp(&a.confidence))
        .then_with(|| format_pattern(&a.antecedent).cmp(&format_pattern(&b.antecedent)))
        .then_with(|| a.outcome.cmp(&b.outcome))
        .then(a.window.start.cmp(&b.window.start))
        .then(a.window.end.cmp(&b.window.end))
}

/// Evaluates every ordered pair of distinct frequent leaf types over the
/// window grid and returns the survivors, best first.
pub fn mine_associations(
    ledger: &Ledger,
    taxonomy: &Taxonomy,
    config: &MinerConfig,
) -> Result<Vec<Hypothesis>> {
    let windows = config.windows()?;
    let (lo, hi) = ledger.span().ok_or(Error::EmptyLedger)?;
    let span = hi - lo;

    let leaves: Vec<(EventType, Vec<Timestamp>)> = taxonomy
        .leaves()
        .map(|t| (t.clone(), ledger.timestamps_of(t)))
        .filter(|(_, ts)| ts.len() >= config.min_count.max(1))
        .collect();
    if leaves.len() < 2 {
        return Ok(Vec::new());
    }
    if span == 0 {
        return Err(Error::DegenerateSpan);
    }

    let cells: Vec<(usize, usize, Window)> = (0..leaves.len())
        .flat_map(|a| (0..leaves.len()).filter(move |&b| b != a).map(move |b| (a, b)))
        .flat_map(|(a, b)| windows.iter().map(move |&w| (a, b, w)))
        .collect();

    let mut found: Vec<Hypothesis> = cells
        .par_iter()
        .filter_map(|&(a, b, window)| {
            let stats = pair_stats(
                &PairIndex {
                    antecedent: &leaves[a].1,
                    outcome: &leaves[b].1,
                    self_outcome: None,
                },
                window,
                span,
            );
            (stats.support >= config.min_support && stats.lift >= config.min_lift).then(|| {
                Hypothesis {
                    antecedent: Pattern::Atom(leaves[a].0.clone()),
                    outcome: leaves[b].0.clone(),
                    window,
                    support: stats.support,
                    confidence: stats.confidence,
                    lift: stats.lift,
                }
            })
        })
        .collect();
    found.sort_by(rank_order);
    Ok(found)
}
