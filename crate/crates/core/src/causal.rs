//! Observational do-operator.
//!
//! A hypothesis `A W[a,b] B` is tested by contrasting two kinds of anchor
//! times: *treated* anchors at every occurrence of `A`, and *control*
//! anchors sampled uniformly from the parts of the ledger span that lie
//! more than `b` away from any occurrence of `A`. Each anchor is labelled
//! with whether `B` follows it inside the window. Anchors are grouped into
//! strata by confounder values; the per-stratum risk differences are
//! pooled with weights `n_t * n_c / (n_t + n_c)` and the pooled effect is
//! compared against its distribution under within-stratum label
//! permutations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::Window;
use crate::error::{Error, Result};
use crate::ledger::{EventType, Ledger, Taxonomy};
use crate::miner::{occurrence_positions, Hypothesis};
use crate::rng;
use crate::time::{day_of_week, format_hours, hour_band, hours_to_seconds, Timestamp};

/// A variable to hold fixed while contrasting treated and control anchors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Confounder {
    /// `day_of_week`: UTC weekday of the anchor.
    DayOfWeek,
    /// `hour_band`: which six-hour band of the UTC day the anchor falls in.
    HourBand,
    /// `recent:<type>:<hours>`: whether an event of `<type>` occurred in the
    /// `<hours>` before the anchor (inclusive).
    Recent { event_type: EventType, lookback: i64 },
    /// Any other key: the value of that attribute on the latest event at or
    /// before the anchor that carries it, or `none`.
    Attribute(String),
}

impl FromStr for Confounder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "day_of_week" => Ok(Confounder::DayOfWeek),
            "hour_band" => Ok(Confounder::HourBand),
            _ if s.starts_with("recent:") => {
                let rest = &s["recent:".len()..];
                let (ty, hours) = rest.rsplit_once(':').ok_or_else(|| {
                    Error::InvalidConfig(format!("`{s}`: expected recent:<type>:<hours>"))
                })?;
                let hours: f64 = hours
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("`{s}`: bad lookback `{hours}`")))?;
                if !(hours.is_finite() && hours >= 0.0) {
                    return Err(Error::InvalidConfig(format!("`{s}`: lookback must be >= 0")));
                }
                Ok(Confounder::Recent {
                    event_type: EventType::new(ty)?,
                    lookback: hours_to_seconds(hours),
                })
            }
            "" => Err(Error::InvalidConfig("empty confounder name".into())),
            key => Ok(Confounder::Attribute(key.to_string())),
        }
    }
}

impl fmt::Display for Confounder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Confounder::DayOfWeek => f.write_str("day_of_week"),
            Confounder::HourBand => f.write_str("hour_band"),
            Confounder::Recent {
                event_type,
                lookback,
            } => write!(f, "recent:{event_type}:{}", format_hours(*lookback)),
            Confounder::Attribute(key) => f.write_str(key),
        }
    }
}

impl TryFrom<String> for Confounder {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Confounder> for String {
    fn from(c: Confounder) -> String {
        c.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalConfig {
    pub permutations: usize,
    pub alpha: f64,
    /// Controls sampled per treated anchor in each stratum.
    pub control_ratio: f64,
    /// Strata with fewer anchors on either side are dropped.
    pub min_stratum_size: usize,
    pub confounders: Vec<Confounder>,
}

impl Default for CausalConfig {
    fn default() -> Self {
        Self {
            permutations: 1000,
            alpha: 0.05,
            control_ratio: 1.0,
            min_stratum_size: 5,
            confounders: Vec::new(),
        }
    }
}

impl CausalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if !(self.control_ratio.is_finite() && self.control_ratio > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "control_ratio {} must be positive",
                self.control_ratio
            )));
        }
        if self.min_stratum_size < 1 {
            return Err(Error::InvalidConfig("min_stratum_size must be at least 1".into()));
        }
        Ok(())
    }
}

pub type StratumKey = Vec<String>;

fn render_key(key: &StratumKey) -> String {
    if key.is_empty() {
        "all".to_string()
    } else {
        key.join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub time: Timestamp,
    pub treated: bool,
    pub stratum_key: StratumKey,
    /// An outcome event followed inside the window.
    pub outcome: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stratum {
    pub treated: Vec<Anchor>,
    pub control: Vec<Anchor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairDataset {
    pub hypothesis: Hypothesis,
    pub confounders: Vec<Confounder>,
    pub strata: BTreeMap<StratumKey, Stratum>,
    /// Strata dropped for being too small, and similar notices.
    pub warnings: Vec<String>,
    pub seed: u64,
}

impl FairDataset {
    pub fn anchors(&self) -> impl Iterator<Item = &Anchor> {
        self.strata
            .values()
            .flat_map(|s| s.treated.iter().chain(s.control.iter()))
    }
}

/// Confounder evaluation with per-confounder lookup tables.
enum KeyFn {
    Day,
    Hour,
    Recent { times: Vec<Timestamp>, lookback: i64 },
    Attribute { values: Vec<(Timestamp, String)> },
}

impl KeyFn {
    fn build(c: &Confounder, ledger: &Ledger, taxonomy: &Taxonomy) -> Result<Self> {
        Ok(match c {
            Confounder::DayOfWeek => KeyFn::Day,
            Confounder::HourBand => KeyFn::Hour,
            Confounder::Recent {
                event_type,
                lookback,
            } => {
                taxonomy.require(event_type)?;
                KeyFn::Recent {
                    times: ledger.timestamps_of(event_type),
                    lookback: *lookback,
                }
            }
            Confounder::Attribute(key) => KeyFn::Attribute {
                values: ledger
                    .iter()
                    .filter_map(|e| e.attributes.get(key).map(|v| (e.timestamp, v.to_string())))
                    .collect(),
            },
        })
    }

    fn value(&self, t: Timestamp) -> String {
        match self {
            KeyFn::Day => day_of_week(t).to_string(),
            KeyFn::Hour => hour_band(t).to_string(),
            KeyFn::Recent { times, lookback } => {
                let i = times.partition_point(|&x| x < t - lookback);
                let seen = times.get(i).is_some_and(|&x| x <= t);
                if seen { "yes" } else { "no" }.to_string()
            }
            KeyFn::Attribute { values } => {
                let i = values.partition_point(|(ts, _)| *ts <= t);
                match i {
                    0 => "none".to_string(),
                    _ => values[i - 1].1.clone(),
                }
            }
        }
    }
}

fn stratum_key(fns: &[KeyFn], t: Timestamp) -> StratumKey {
    fns.iter().map(|f| f.value(t)).collect()
}

/// Integer seconds in `[lo, hi]` outside every `[t - b, t + b]`, as
/// inclusive runs.
struct Admissible {
    runs: Vec<(i64, i64)>,
    /// Cumulative lengths; `cum[i]` counts seconds in `runs[..=i]`.
    cum: Vec<u64>,
}

impl Admissible {
    fn new(lo: i64, hi: i64, centers: &[Timestamp], radius: i64) -> Self {
        let mut runs = Vec::new();
        let mut cursor = lo;
        // `centers` is ascending, so the exclusion intervals are too.
        for &c in centers {
            let (start, end) = (c - radius, c + radius);
            if end < cursor {
                continue;
            }
            if start > cursor {
                runs.push((cursor, (start - 1).min(hi)));
            }
            cursor = cursor.max(end + 1);
            if cursor > hi {
                break;
            }
        }
        if cursor <= hi {
            runs.push((cursor, hi));
        }
        runs.retain(|&(a, b)| a <= b);
        let mut total = 0u64;
        let cum = runs
            .iter()
            .map(|&(a, b)| {
                total += (b - a + 1) as u64;
                total
            })
            .collect();
        Self { runs, cum }
    }

    fn total(&self) -> u64 {
        self.cum.last().copied().unwrap_or(0)
    }

    fn nth(&self, k: u64) -> Timestamp {
        let i = self.cum.partition_point(|&c| c <= k);
        let before = if i == 0 { 0 } else { self.cum[i - 1] };
        self.runs[i].0 + (k - before) as i64
    }
}

/// Builds treated and control anchor sets stratified by `confounders`.
pub fn build_fair_dataset(
    ledger: &Ledger,
    hypothesis: &Hypothesis,
    confounders: &[Confounder],
    taxonomy: &Taxonomy,
    config: &CausalConfig,
    seed: u64,
) -> Result<FairDataset> {
    config.validate()?;
    hypothesis.validate(taxonomy)?;
    let window = hypothesis.window;
    let fns = confounders
        .iter()
        .map(|c| KeyFn::build(c, ledger, taxonomy))
        .collect::<Result<Vec<_>>>()?;

    let occurrences = occurrence_positions(ledger, &hypothesis.antecedent);
    if occurrences.is_empty() {
        return Err(Error::NoTreatedAnchors);
    }
    let events = ledger.events();
    let outcome_times = ledger.timestamps_of(&hypothesis.outcome);
    let outcome_hits = |t: Timestamp| {
        let lo = outcome_times.partition_point(|&x| x < t + window.start);
        let hi = outcome_times.partition_point(|&x| x <= t + window.end);
        hi - lo
    };

    let mut strata: BTreeMap<StratumKey, Stratum> = BTreeMap::new();
    for (t, positions) in &occurrences {
        let mut hits = outcome_hits(*t);
        if window.start == 0 {
            // Do not let the occurrence's own final event count as its outcome.
            hits -= positions
                .iter()
                .filter(|&&i| events[i].timestamp == *t && events[i].event_type.is_within(&hypothesis.outcome))
                .count();
        }
        let key = stratum_key(&fns, *t);
        strata.entry(key.clone()).or_default().treated.push(Anchor {
            time: *t,
            treated: true,
            stratum_key: key,
            outcome: hits > 0,
        });
    }

    let (lo, hi) = ledger.span().expect("ledger has occurrences");
    let centers: Vec<Timestamp> = occurrences.iter().map(|(t, _)| *t).collect();
    let admissible = Admissible::new(lo, hi, &centers, window.end);
    if admissible.total() == 0 {
        return Err(Error::ExclusionExhausted);
    }

    let targets: BTreeMap<StratumKey, usize> = strata
        .iter()
        .map(|(k, s)| {
            let want = (config.control_ratio * s.treated.len() as f64).ceil() as usize;
            (k.clone(), want)
        })
        .collect();
    let mut remaining: usize = targets.values().sum();
    let budget = 100 * remaining + 10_000;
    let mut rng = rng::seeded(seed);
    for _ in 0..budget {
        if remaining == 0 {
            break;
        }
        let t = admissible.nth(rng.random_range(0..admissible.total()));
        let key = stratum_key(&fns, t);
        let Some(&want) = targets.get(&key) else {
            continue;
        };
        let stratum = strata.get_mut(&key).expect("targets mirror strata");
        if stratum.control.len() < want {
            stratum.control.push(Anchor {
                time: t,
                treated: false,
                stratum_key: key,
                outcome: outcome_hits(t) > 0,
            });
            remaining -= 1;
        }
    }

    let mut warnings = Vec::new();
    let min = config.min_stratum_size;
    strata.retain(|key, s| {
        let keep = s.treated.len() >= min && s.control.len() >= min;
        if !keep {
            let msg = format!(
                "dropped stratum {}: {} treated, {} control (minimum {min})",
                render_key(key),
                s.treated.len(),
                s.control.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        keep
    });
    if strata.is_empty() {
        return Err(Error::AllStrataTooSmall);
    }

    Ok(FairDataset {
        hypothesis: hypothesis.clone(),
        confounders: confounders.to_vec(),
        strata,
        warnings,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub key: StratumKey,
    pub risk_difference: f64,
    pub n_treated: usize,
    pub n_control: usize,
    pub treated_outcomes: usize,
    pub control_outcomes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalResult {
    /// Weighted mean of per-stratum risk differences.
    pub pooled_effect: f64,
    pub p_value: f64,
    pub n_strata: usize,
    pub per_stratum: Vec<StratumResult>,
    pub permutations: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CausalResult {
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }

    /// Edge confidence derived from the test.
    pub fn confidence(&self) -> f64 {
        1.0 - self.p_value
    }
}

/// Per-stratum counts in the shape the permutation loop needs.
struct Cell {
    n_t: usize,
    n_c: usize,
    weight: f64,
    /// Outcomes, treated first.
    outcomes: Vec<bool>,
    positives: usize,
}

impl Cell {
    fn rd(&self, treated_pos: usize) -> f64 {
        treated_pos as f64 / self.n_t as f64
            - (self.positives - treated_pos) as f64 / self.n_c as f64
    }
}

fn pooled(cells: &[Cell], treated_pos: impl Fn(usize) -> usize) -> f64 {
    let (num, den) = cells.iter().enumerate().fold((0.0, 0.0), |(n, d), (i, c)| {
        (n + c.weight * c.rd(treated_pos(i)), d + c.weight)
    });
    num / den
}

/// Stratified risk difference with a within-stratum permutation p-value.
///
/// `p = (1 + #{|pooled_perm| >= |pooled_obs|}) / (permutations + 1)`.
/// Replicate `i` draws from stream `i` of `seed`, so the result does not
/// depend on how replicates are scheduled across threads.
pub fn test_hypothesis(dataset: &FairDataset, permutations: usize, seed: u64) -> Result<CausalResult> {
    if dataset.strata.is_empty() {
        return Err(Error::AllStrataTooSmall);
    }
    let mut cells = Vec::with_capacity(dataset.strata.len());
    let mut per_stratum = Vec::with_capacity(dataset.strata.len());
    for (key, s) in &dataset.strata {
        let (n_t, n_c) = (s.treated.len(), s.control.len());
        if n_t == 0 || n_c == 0 {
            return Err(Error::DegenerateStratum(render_key(key)));
        }
        let outcomes: Vec<bool> = s.treated.iter().chain(&s.control).map(|a| a.outcome).collect();
        let x_t = s.treated.iter().filter(|a| a.outcome).count();
        let x_c = s.control.iter().filter(|a| a.outcome).count();
        let cell = Cell {
            n_t,
            n_c,
            weight: (n_t * n_c) as f64 / (n_t + n_c) as f64,
            outcomes,
            positives: x_t + x_c,
        };
        per_stratum.push(StratumResult {
            key: key.clone(),
            risk_difference: cell.rd(x_t),
            n_treated: n_t,
            n_control: n_c,
            treated_outcomes: x_t,
            control_outcomes: x_c,
        });
        cells.push(cell);
    }
    let observed_pos: Vec<usize> = per_stratum.iter().map(|s| s.treated_outcomes).collect();
    let observed = pooled(&cells, |i| observed_pos[i]);
    let threshold = observed.abs() - 1e-12;

    let scratch: Vec<Vec<bool>> = cells.iter().map(|c| c.outcomes.clone()).collect();
    let extreme = (0..permutations)
        .into_par_iter()
        .map_init(
            || scratch.clone(),
            |buf, i| {
                let mut rng = rng::stream(seed, i as u64);
                let mut treated_pos = Vec::with_capacity(cells.len());
                for (cell, b) in cells.iter().zip(buf.iter_mut()) {
                    b.copy_from_slice(&cell.outcomes);
                    // Draw the smaller arm as a uniform random subset.
                    let k = cell.n_t.min(cell.n_c);
                    let n = b.len();
                    let mut hits = 0;
                    for j in 0..k {
                        let pick = rng.random_range(j..n);
                        b.swap(j, pick);
                        hits += usize::from(b[j]);
                    }
                    treated_pos.push(if k == cell.n_t { hits } else { cell.positives - hits });
                }
                pooled(&cells, |i| treated_pos[i]).abs() >= threshold
            },
        )
        .filter(|&hit| hit)
        .count();

    Ok(CausalResult {
        pooled_effect: observed,
        p_value: (1 + extreme) as f64 / (permutations + 1) as f64,
        n_strata: cells.len(),
        per_stratum,
        permutations,
        seed,
        warnings: dataset.warnings.clone(),
    })
}

/// Builds the fair dataset and tests it. The window is checked before any
/// anchors are built.
pub fn evaluate(
    ledger: &Ledger,
    hypothesis: &Hypothesis,
    taxonomy: &Taxonomy,
    config: &CausalConfig,
    seed: u64,
) -> Result<CausalResult> {
    hypothesis.window.validate()?;
    let dataset = build_fair_dataset(
        ledger,
        hypothesis,
        &config.confounders,
        taxonomy,
        config,
        rng::mix_seed(seed, 1),
    )?;
    test_hypothesis(&dataset, config.permutations, rng::mix_seed(seed, 2))
}

/// Whether `t` falls inside any exclusion zone of `window` around `centers`.
pub fn in_exclusion_zone(t: Timestamp, centers: &[Timestamp], window: Window) -> bool {
    let i = centers.partition_point(|&c| c < t - window.end);
    centers.get(i).is_some_and(|&c| c <= t + window.end)
}
