//! Synthetic ledgers with planted ground truth.
//!
//! Background types arrive as independent homogeneous Poisson processes.
//! Planted rules then fire off every event of their cause type, and
//! confounder drivers emit their targets, so generated events can cascade.
//! Every generated event is tagged with `synth_origin` (and `synth_cause`
//! when it has a parent) so oracles can check placement exactly; strip
//! them with [`strip_provenance`] before handing a ledger to the miner.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::algebra::Window;
use crate::error::{Error, Result};
use crate::ledger::{AttrValue, Event, EventType, Ledger, Taxonomy};
use crate::rng;
use crate::time::{format_iso, parse_iso, Timestamp, SECONDS_PER_DAY, SECONDS_PER_HOUR};

pub const ORIGIN_ATTR: &str = "synth_origin";
pub const CAUSE_ATTR: &str = "synth_cause";
pub const PROVENANCE_PREFIX: &str = "synth_";
const SOURCE: &str = "synth";
const DEFAULT_START: &str = "2024-01-01T00:00:00Z";
const MAX_EVENTS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRate {
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub rate_per_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    pub cause: EventType,
    pub effect: EventType,
    pub prob: f64,
    /// Latency bounds in hours; the effect lands uniformly inside.
    pub window_h: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfounderTarget {
    #[serde(rename = "type")]
    pub event_type: EventType,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfounder {
    /// An event type, or `hour_band:HH-HH` for one driver instant per day
    /// drawn uniformly inside that band.
    pub driver: String,
    pub targets: Vec<ConfounderTarget>,
    #[serde(default = "default_latency")]
    pub latency_h: [f64; 2],
}

fn default_latency() -> [f64; 2] {
    [0.0, 0.5]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub span_days: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default)]
    pub background: Vec<BackgroundRate>,
    #[serde(default)]
    pub rules: Vec<PlantedRule>,
    #[serde(default)]
    pub confounders: Vec<PlantedConfounder>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEdge {
    pub cause: EventType,
    pub effect: EventType,
    pub window_s: [i64; 2],
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousPair {
    pub antecedent: EventType,
    pub outcome: EventType,
    pub driver: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_edges: Vec<TrueEdge>,
    pub spurious_pairs: Vec<SpuriousPair>,
}

impl GroundTruth {
    pub fn is_true_edge(&self, cause: &EventType, effect: &EventType, window: &Window) -> bool {
        self.true_edges.iter().any(|e| {
            &e.cause == cause
                && &e.effect == effect
                && window.overlaps(&Window { start: e.window_s[0], end: e.window_s[1] })
        })
    }

    pub fn is_spurious(&self, antecedent: &EventType, outcome: &EventType) -> bool {
        self.spurious_pairs
            .iter()
            .any(|p| &p.antecedent == antecedent && &p.outcome == outcome)
    }
}

enum Driver {
    Type(EventType),
    HourBand(i64, i64),
}

fn parse_driver(text: &str) -> Result<Driver> {
    if let Some(band) = text.strip_prefix("hour_band:") {
        let bad = || Error::InvalidScenario(format!("bad hour band driver `{text}`"));
        let (a, b) = band.split_once('-').ok_or_else(bad)?;
        let a: i64 = a.parse().map_err(|_| bad())?;
        let b: i64 = b.parse().map_err(|_| bad())?;
        if !(0..24).contains(&a) || a >= b || b > 24 {
            return Err(bad());
        }
        return Ok(Driver::HourBand(a, b));
    }
    EventType::new(text)
        .map(Driver::Type)
        .map_err(|_| Error::InvalidScenario(format!("driver `{text}` is neither a type nor a derived key")))
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidScenario(format!("{what}: probability {p} outside [0,1]")));
    }
    Ok(())
}

fn latency(hours: [f64; 2], what: &str) -> Result<Window> {
    if !hours.iter().all(|h| h.is_finite()) {
        return Err(Error::InvalidScenario(format!("{what}: non-finite window")));
    }
    Window::from_hours(hours[0], hours[1])
        .map_err(|e| Error::InvalidScenario(format!("{what}: {e}")))
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn start(&self) -> Result<Timestamp> {
        parse_iso(self.start.as_deref().unwrap_or(DEFAULT_START))
            .map_err(|e| Error::InvalidScenario(format!("start: {e}")))
    }

    pub fn end(&self) -> Result<Timestamp> {
        Ok(self.start()? + i64::from(self.span_days) * SECONDS_PER_DAY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.span_days < 1 {
            return Err(Error::InvalidScenario("span_days must be at least 1".into()));
        }
        self.start()?;
        for b in &self.background {
            if !b.rate_per_day.is_finite() || b.rate_per_day < 0.0 {
                return Err(Error::InvalidScenario(format!(
                    "background `{}`: rate {} must be finite and non-negative",
                    b.event_type, b.rate_per_day
                )));
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            let what = format!("rule {i}");
            check_prob(r.prob, &what)?;
            latency(r.window_h, &what)?;
        }
        for (i, c) in self.confounders.iter().enumerate() {
            let what = format!("confounder {i}");
            parse_driver(&c.driver)?;
            latency(c.latency_h, &what)?;
            for t in &c.targets {
                check_prob(t.prob, &what)?;
            }
        }
        Ok(())
    }

    /// Every type the scenario can produce; rule causes are actionable.
    pub fn taxonomy(&self) -> Result<Taxonomy> {
        let mut types = BTreeSet::new();
        types.extend(self.background.iter().map(|b| b.event_type.clone()));
        for r in &self.rules {
            types.insert(r.cause.clone());
            types.insert(r.effect.clone());
        }
        for c in &self.confounders {
            if let Ok(Driver::Type(t)) = parse_driver(&c.driver) {
                types.insert(t);
            }
            types.extend(c.targets.iter().map(|t| t.event_type.clone()));
        }
        Taxonomy::new(types.iter().map(|t| t.as_str()))?
            .with_actionable(
                self.rules.iter().map(|r| r.cause.as_str()).collect::<BTreeSet<_>>(),
            )
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let mut truth = GroundTruth::default();
        for (i, r) in self.rules.iter().enumerate() {
            let w = latency(r.window_h, &format!("rule {i}"))?;
            truth.true_edges.push(TrueEdge {
                cause: r.cause.clone(),
                effect: r.effect.clone(),
                window_s: [w.start, w.end],
                prob: r.prob,
            });
        }
        for (i, c) in self.confounders.iter().enumerate() {
            if let Driver::Type(d) = parse_driver(&c.driver)? {
                let w = latency(c.latency_h, &format!("confounder {i}"))?;
                for t in &c.targets {
                    truth.true_edges.push(TrueEdge {
                        cause: d.clone(),
                        effect: t.event_type.clone(),
                        window_s: [w.start, w.end],
                        prob: t.prob,
                    });
                }
            }
            for a in &c.targets {
                for b in &c.targets {
                    if a.event_type != b.event_type {
                        truth.spurious_pairs.push(SpuriousPair {
                            antecedent: a.event_type.clone(),
                            outcome: b.event_type.clone(),
                            driver: c.driver.clone(),
                        });
                    }
                }
            }
        }
        Ok(truth)
    }
}

struct Draft {
    event_type: EventType,
    timestamp: Timestamp,
    origin: String,
    parent: Option<usize>,
}

/// Draws the scenario's ledger. Same scenario, same seed: same bytes.
pub fn generate(scenario: &Scenario) -> Result<(Ledger, GroundTruth)> {
    scenario.validate()?;
    let taxonomy = scenario.taxonomy()?;
    let truth = scenario.ground_truth()?;
    let start = scenario.start()?;
    let end = scenario.end()?;
    let span = end - start;
    let mut rng = rng::seeded(scenario.seed);

    let rules: Vec<(Window, &PlantedRule)> = scenario
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((latency(r.window_h, &format!("rule {i}"))?, r)))
        .collect::<Result<_>>()?;
    let confounders: Vec<(Driver, Window, &PlantedConfounder)> = scenario
        .confounders
        .iter()
        .enumerate()
        .map(|(i, c)| Ok((parse_driver(&c.driver)?, latency(c.latency_h, &format!("confounder {i}"))?, c)))
        .collect::<Result<_>>()?;

    let mut drafts: Vec<Draft> = Vec::new();
    for b in &scenario.background {
        let mean = b.rate_per_day * f64::from(scenario.span_days);
        if mean <= 0.0 {
            continue;
        }
        let n = Poisson::new(mean)
            .map_err(|e| Error::InvalidScenario(format!("background `{}`: {e}", b.event_type)))?
            .sample(&mut rng) as usize;
        if drafts.len() + n > MAX_EVENTS {
            return Err(Error::InvalidScenario(format!("more than {MAX_EVENTS} events")));
        }
        for _ in 0..n {
            drafts.push(Draft {
                event_type: b.event_type.clone(),
                timestamp: start + rng.random_range(0..span),
                origin: "background".into(),
                parent: None,
            });
        }
    }

    let emit = |drafts: &mut Vec<Draft>,
                    rng: &mut rng::Rng,
                    at: Timestamp,
                    w: &Window,
                    t: &EventType,
                    origin: String,
                    parent: Option<usize>|
     -> Result<()> {
        if drafts.len() >= MAX_EVENTS {
            return Err(Error::InvalidScenario(format!(
                "more than {MAX_EVENTS} events; do the rules cascade without end?"
            )));
        }
        drafts.push(Draft {
            event_type: t.clone(),
            timestamp: at + rng.random_range(w.start..=w.end),
            origin,
            parent,
        });
        Ok(())
    };

    for (ci, (driver, w, c)) in confounders.iter().enumerate() {
        if let Driver::HourBand(a, b) = driver {
            for day in 0..i64::from(scenario.span_days) {
                let at = start
                    + day * SECONDS_PER_DAY
                    + rng.random_range(a * SECONDS_PER_HOUR..b * SECONDS_PER_HOUR);
                for t in &c.targets {
                    if rng.random_bool(t.prob) {
                        emit(&mut drafts, &mut rng, at, w, &t.event_type, format!("confounder:{ci}:{}", c.driver), None)?;
                    }
                }
            }
        }
    }

    let mut queue: VecDeque<usize> = (0..drafts.len()).collect();
    while let Some(i) = queue.pop_front() {
        let (at, ty) = (drafts[i].timestamp, drafts[i].event_type.clone());
        for (ri, (w, r)) in rules.iter().enumerate() {
            if ty.is_within(&r.cause) && rng.random_bool(r.prob) {
                let origin = format!("rule:{ri}:{}->{}", r.cause, r.effect);
                emit(&mut drafts, &mut rng, at, w, &r.effect, origin, Some(i))?;
                queue.push_back(drafts.len() - 1);
            }
        }
        for (ci, (driver, w, c)) in confounders.iter().enumerate() {
            let Driver::Type(d) = driver else { continue };
            if !ty.is_within(d) {
                continue;
            }
            for t in &c.targets {
                if rng.random_bool(t.prob) {
                    let origin = format!("confounder:{ci}:{}", c.driver);
                    emit(&mut drafts, &mut rng, at, w, &t.event_type, origin, Some(i))?;
                    queue.push_back(drafts.len() - 1);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by_key(|&i| (drafts[i].timestamp, i));
    let mut rank = vec![0usize; drafts.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let id = |r: usize| format!("ev{r:07}");
    let events: Vec<Event> = order
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let d = &drafts[i];
            let mut e = Event::new(id(r), d.event_type.clone(), d.timestamp, SOURCE)
                .with_attr(ORIGIN_ATTR, AttrValue::Text(d.origin.clone()));
            if let Some(p) = d.parent {
                e = e.with_attr(CAUSE_ATTR, AttrValue::Text(id(rank[p])));
            }
            e
        })
        .collect();
    log::debug!(
        "synth: {} events over {} .. {}",
        events.len(),
        format_iso(start),
        format_iso(end)
    );
    Ok((Ledger::from_events(events, &taxonomy)?, truth))
}

/// The ledger with every `synth_*` attribute removed.
pub fn strip_provenance(ledger: &Ledger) -> Ledger {
    ledger.without_attributes(PROVENANCE_PREFIX)
}
