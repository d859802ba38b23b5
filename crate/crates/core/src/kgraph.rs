//! Knowledge graph of tested causal relationships between event types.
//!
//! Edges are keyed by `(source, target, window)`, so one type pair may carry
//! several windows. When two edges share a key the one with the higher
//! confidence is kept (ties go to the newer one), and every submission is
//! appended to that key's audit list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::Window;
use crate::causal::CausalResult;
use crate::error::{Error, Result};
use crate::ledger::{EventType, Taxonomy};
use crate::miner::Hypothesis;
use crate::time::{format_hours, format_iso, parse_iso, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Mined,
    Expert,
}

/// What a mined edge was derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub pooled_effect: f64,
    pub p_value: f64,
    pub n_strata: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl From<&CausalResult> for Evidence {
    fn from(r: &CausalResult) -> Self {
        Evidence {
            pooled_effect: r.pooled_effect,
            p_value: r.p_value,
            n_strata: r.n_strata,
            permutations: r.permutations,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub source: EventType,
    pub target: EventType,
    pub window: Window,
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} {}h", self.source, self.target, self.window)
    }
}

impl Serialize for EdgeKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEdge {
    pub source: EventType,
    pub target: EventType,
    pub window: Window,
    /// Risk difference.
    pub weight: f64,
    pub confidence: f64,
    pub provenance: Provenance,
    pub evidence: Option<Evidence>,
    pub updated_at: Timestamp,
}

impl CausalEdge {
    pub fn key(&self) -> EdgeKey {
        EdgeKey {
            source: self.source.clone(),
            target: self.target.clone(),
            window: self.window,
        }
    }

    /// Edge for a tested hypothesis: weight is the pooled risk difference,
    /// confidence is `1 - p`. Composite antecedents have no single source
    /// node and yield `None`.
    pub fn from_result(hypothesis: &Hypothesis, result: &CausalResult, now: Timestamp) -> Option<Self> {
        Some(CausalEdge {
            source: hypothesis.antecedent.as_atom()?.clone(),
            target: hypothesis.outcome.clone(),
            window: hypothesis.window,
            weight: result.pooled_effect,
            confidence: result.confidence(),
            provenance: Provenance::Mined,
            evidence: Some(result.into()),
            updated_at: now,
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidEdge {
            key: self.key().to_string(),
            message,
        };
        self.window.validate().map_err(|e| bad(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(bad(format!("confidence {} outside [0,1]", self.confidence)));
        }
        if !(-1.0..=1.0).contains(&self.weight) {
            return Err(bad(format!("weight {} outside [-1,1]", self.weight)));
        }
        Ok(())
    }

    fn audit_entry(&self) -> AuditEntry {
        AuditEntry {
            provenance: self.provenance,
            weight: self.weight,
            confidence: self.confidence,
            updated_at: self.updated_at,
            evidence: self.evidence.clone(),
        }
    }

    /// Whether `self` should replace `current` under the same key.
    fn beats(&self, current: &CausalEdge) -> bool {
        self.confidence > current.confidence
            || (self.confidence == current.confidence && self.updated_at > current.updated_at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    pub provenance: Provenance,
    pub weight: f64,
    pub confidence: f64,
    pub updated_at: Timestamp,
    pub evidence: Option<Evidence>,
}

#[derive(Debug, Clone, PartialEq)]
struct StoredEdge {
    edge: CausalEdge,
    audit: Vec<AuditEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    taxonomy_id: String,
    nodes: BTreeSet<EventType>,
    edges: BTreeMap<EdgeKey, StoredEdge>,
}

#[derive(Debug, Clone, Default)]
pub struct EdgeFilter {
    /// Matches edges whose source is this type or beneath it.
    pub source: Option<EventType>,
    /// Matches edges whose target is this type or beneath it.
    pub target: Option<EventType>,
    pub min_confidence: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl EdgeFilter {
    fn accepts(&self, e: &CausalEdge) -> bool {
        self.source.as_ref().is_none_or(|s| e.source.is_within(s))
            && self.target.as_ref().is_none_or(|t| e.target.is_within(t))
            && self.min_confidence.is_none_or(|c| e.confidence >= c)
            && self.provenance.is_none_or(|p| e.provenance == p)
    }
}

impl KnowledgeGraph {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        Self {
            taxonomy_id: taxonomy.id(),
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn taxonomy_id(&self) -> &str {
        &self.taxonomy_id
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EventType> {
        self.nodes.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty() && self.nodes.is_empty()
    }

    /// Effective edges in key order.
    pub fn edges(&self) -> impl Iterator<Item = &CausalEdge> {
        self.edges.values().map(|s| &s.edge)
    }

    pub fn get(&self, key: &EdgeKey) -> Option<&CausalEdge> {
        self.edges.get(key).map(|s| &s.edge)
    }

    pub fn audit(&self, key: &EdgeKey) -> &[AuditEntry] {
        self.edges.get(key).map_or(&[], |s| s.audit.as_slice())
    }

    fn check_taxonomy(&self, taxonomy: &Taxonomy) -> Result<()> {
        let found = taxonomy.id();
        if found != self.taxonomy_id {
            return Err(Error::TaxonomyMismatch {
                expected: self.taxonomy_id.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn upsert_edge(&mut self, edge: CausalEdge, taxonomy: &Taxonomy) -> Result<()> {
        self.check_taxonomy(taxonomy)?;
        edge.validate()?;
        let unknown: Vec<String> = [&edge.source, &edge.target]
            .into_iter()
            .filter(|t| !taxonomy.contains(t))
            .map(|t| t.to_string())
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownEventType(unknown));
        }
        let key = edge.key();
        match self.edges.get_mut(&key) {
            Some(stored) => {
                stored.audit.push(edge.audit_entry());
                if edge.beats(&stored.edge) {
                    stored.edge = edge;
                }
            }
            None => {
                self.nodes.insert(edge.source.clone());
                self.nodes.insert(edge.target.clone());
                let audit = vec![edge.audit_entry()];
                self.edges.insert(key, StoredEdge { edge, audit });
            }
        }
        Ok(())
    }

    /// Matching edges, by confidence desc, weight desc, then key.
    pub fn query_edges(&self, filter: &EdgeFilter) -> Vec<&CausalEdge> {
        let mut out: Vec<&CausalEdge> = self.edges().filter(|e| filter.accepts(e)).collect();
        out.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(b.weight.total_cmp(&a.weight))
                .then_with(|| a.key().cmp(&b.key()))
        });
        out
    }

    pub fn seed_expert_rules(
        &mut self,
        path: impl AsRef<Path>,
        taxonomy: &Taxonomy,
        now: Timestamp,
    ) -> Result<()> {
        let file = std::fs::File::open(path)?;
        let rules = read_expert_rules(std::io::BufReader::new(file))?;
        self.apply_expert_rules(&rules, taxonomy, now)
    }

    pub fn apply_expert_rules(
        &mut self,
        rules: &[ExpertRule],
        taxonomy: &Taxonomy,
        now: Timestamp,
    ) -> Result<()> {
        for rule in rules {
            let edge = rule.to_edge(now)?;
            self.upsert_edge(edge, taxonomy)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str, taxonomy: &Taxonomy) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph: {e}")))?;
        Self::from_file(file, taxonomy)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, taxonomy)
    }

    fn to_file(&self) -> GraphFile {
        GraphFile {
            taxonomy_id: self.taxonomy_id.clone(),
            nodes: self.nodes.iter().map(|n| n.to_string()).collect(),
            edges: self
                .edges
                .values()
                .map(|s| EdgeRecord {
                    source: s.edge.source.to_string(),
                    target: s.edge.target.to_string(),
                    window_s: [s.edge.window.start, s.edge.window.end],
                    weight: s.edge.weight,
                    confidence: s.edge.confidence,
                    provenance: s.edge.provenance,
                    evidence: s.edge.evidence.clone(),
                    audit: s.audit.iter().map(AuditRecord::from).collect(),
                    updated_at: format_iso(s.edge.updated_at),
                })
                .collect(),
        }
    }

    fn from_file(file: GraphFile, taxonomy: &Taxonomy) -> Result<Self> {
        let mut graph = KnowledgeGraph {
            taxonomy_id: file.taxonomy_id,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        };
        graph.check_taxonomy(taxonomy)?;
        let mut unknown = Vec::new();
        for n in &file.nodes {
            let t = EventType::new(n.as_str())?;
            if !taxonomy.contains(&t) {
                unknown.push(n.clone());
            }
            graph.nodes.insert(t);
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownEventType(unknown));
        }
        for rec in file.edges {
            let label = format!("{} -> {}", rec.source, rec.target);
            let bad = |message: String| Error::InvalidEdge {
                key: label.clone(),
                message,
            };
            let endpoint = |name: &str| -> Result<EventType> {
                let t = EventType::new(name).map_err(|e| bad(e.to_string()))?;
                if graph.nodes.contains(&t) {
                    Ok(t)
                } else {
                    Err(bad(format!("unknown node `{name}`")))
                }
            };
            let edge = CausalEdge {
                source: endpoint(&rec.source)?,
                target: endpoint(&rec.target)?,
                window: Window {
                    start: rec.window_s[0],
                    end: rec.window_s[1],
                },
                weight: rec.weight,
                confidence: rec.confidence,
                provenance: rec.provenance,
                evidence: rec.evidence,
                updated_at: parse_iso(&rec.updated_at).map_err(|e| bad(e.to_string()))?,
            };
            edge.validate()?;
            if rec.audit.is_empty() {
                return Err(bad("empty audit list".into()));
            }
            let audit = rec
                .audit
                .into_iter()
                .map(|a| a.try_into().map_err(|e: Error| bad(e.to_string())))
                .collect::<Result<Vec<AuditEntry>>>()?;
            let key = edge.key();
            if graph.edges.contains_key(&key) {
                return Err(bad(format!("duplicate key {key}")));
            }
            graph.edges.insert(key, StoredEdge { edge, audit });
        }
        Ok(graph)
    }

    /// Graphviz rendering with nodes and edges in key order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph knowledge_graph {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{n}\";");
        }
        for e in self.edges() {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"w={:.3} c={:.3} [{},{}]h\"];",
                e.source,
                e.target,
                e.weight,
                e.confidence,
                format_hours(e.window.start),
                format_hours(e.window.end)
            );
        }
        out.push_str("}\n");
        out
    }

    pub fn export_dot(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_dot())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFile {
    pub taxonomy_id: String,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub target: String,
    pub window_s: [i64; 2],
    pub weight: f64,
    pub confidence: f64,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    pub audit: Vec<AuditRecord>,
    pub updated_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub provenance: Provenance,
    pub weight: f64,
    pub confidence: f64,
    pub updated_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

impl From<&AuditEntry> for AuditRecord {
    fn from(a: &AuditEntry) -> Self {
        AuditRecord {
            provenance: a.provenance,
            weight: a.weight,
            confidence: a.confidence,
            updated_at: format_iso(a.updated_at),
            evidence: a.evidence.clone(),
        }
    }
}

impl TryFrom<AuditRecord> for AuditEntry {
    type Error = Error;
    fn try_from(a: AuditRecord) -> Result<Self> {
        Ok(AuditEntry {
            provenance: a.provenance,
            weight: a.weight,
            confidence: a.confidence,
            updated_at: parse_iso(&a.updated_at)?,
            evidence: a.evidence,
        })
    }
}

/// One line of an expert rules file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRule {
    pub source: String,
    pub target: String,
    pub window_h: [f64; 2],
    pub weight: f64,
    pub confidence: f64,
}

impl ExpertRule {
    pub fn to_edge(&self, now: Timestamp) -> Result<CausalEdge> {
        Ok(CausalEdge {
            source: EventType::new(self.source.as_str())?,
            target: EventType::new(self.target.as_str())?,
            window: Window::from_hours(self.window_h[0], self.window_h[1])?,
            weight: self.weight,
            confidence: self.confidence,
            provenance: Provenance::Expert,
            evidence: None,
            updated_at: now,
        })
    }
}

pub fn read_expert_rules<R: BufRead>(reader: R) -> Result<Vec<ExpertRule>> {
    let mut rules = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rule: ExpertRule = serde_json::from_str(&line)
            .map_err(|e| Error::at_line(i + 1, Error::Parse(e.to_string())))?;
        rules.push(rule);
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SECONDS_PER_HOUR as H;

    fn tax() -> Taxonomy {
        Taxonomy::new([
            "exercise.bike",
            "exercise.run",
            "wellbeing.energy",
            "health.goal.energy",
            "work",
        ])
        .unwrap()
    }

    fn t(s: &str) -> EventType {
        s.parse().unwrap()
    }

    fn edge(src: &str, dst: &str, conf: f64, prov: Provenance, at: i64) -> CausalEdge {
        CausalEdge {
            source: t(src),
            target: t(dst),
            window: Window { start: 0, end: 12 * H },
            weight: 0.3,
            confidence: conf,
            provenance: prov,
            evidence: None,
            updated_at: at,
        }
    }

    #[test]
    fn insert_into_empty() {
        let mut g = KnowledgeGraph::new(&tax());
        g.upsert_edge(edge("exercise.bike", "work", 0.5, Provenance::Mined, 0), &tax())
            .unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
    }

    #[test]
    fn lower_confidence_does_not_replace() {
        let mut g = KnowledgeGraph::new(&tax());
        let first = edge("exercise.bike", "work", 0.8, Provenance::Mined, 0);
        g.upsert_edge(first.clone(), &tax()).unwrap();
        g.upsert_edge(edge("exercise.bike", "work", 0.4, Provenance::Mined, 5), &tax())
            .unwrap();
        assert_eq!(g.get(&first.key()), Some(&first));
        assert_eq!(g.audit(&first.key()).len(), 2);
    }

    #[test]
    fn mined_beats_weaker_expert() {
        let mut g = KnowledgeGraph::new(&tax());
        let expert = edge("exercise", "wellbeing.energy", 0.5, Provenance::Expert, 0);
        let mined = edge("exercise", "wellbeing.energy", 0.9, Provenance::Mined, 1);
        g.upsert_edge(expert.clone(), &tax()).unwrap();
        g.upsert_edge(mined.clone(), &tax()).unwrap();
        assert_eq!(g.get(&mined.key()).unwrap().provenance, Provenance::Mined);
        let audit = g.audit(&mined.key());
        assert_eq!(audit[0].provenance, Provenance::Expert);
        assert_eq!(audit[1].provenance, Provenance::Mined);
    }

    #[test]
    fn equal_confidence_prefers_newer() {
        let mut g = KnowledgeGraph::new(&tax());
        let old = edge("work", "wellbeing.energy", 0.5, Provenance::Expert, 10);
        let mut new = edge("work", "wellbeing.energy", 0.5, Provenance::Mined, 20);
        new.weight = -0.1;
        g.upsert_edge(old, &tax()).unwrap();
        g.upsert_edge(new.clone(), &tax()).unwrap();
        assert_eq!(g.get(&new.key()), Some(&new));
    }

    #[test]
    fn windows_are_part_of_the_key() {
        let mut g = KnowledgeGraph::new(&tax());
        let a = edge("work", "wellbeing.energy", 0.5, Provenance::Mined, 0);
        let mut b = a.clone();
        b.window = Window { start: 8 * H, end: 24 * H };
        g.upsert_edge(a, &tax()).unwrap();
        g.upsert_edge(b, &tax()).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn invalid_edges_rejected() {
        let mut g = KnowledgeGraph::new(&tax());
        let unknown = edge("jetpack", "work", 0.5, Provenance::Mined, 0);
        assert!(matches!(
            g.upsert_edge(unknown, &tax()),
            Err(Error::UnknownEventType(v)) if v == ["jetpack"]
        ));
        let conf = edge("work", "exercise", 1.5, Provenance::Mined, 0);
        assert!(matches!(g.upsert_edge(conf, &tax()), Err(Error::InvalidEdge { .. })));
        let other = Taxonomy::new(["work", "exercise"]).unwrap();
        let ok = edge("work", "exercise", 0.5, Provenance::Mined, 0);
        assert!(matches!(g.upsert_edge(ok, &other), Err(Error::TaxonomyMismatch { .. })));
    }

    #[test]
    fn query_filters_and_orders() {
        let mut g = KnowledgeGraph::new(&tax());
        g.upsert_edge(edge("exercise.bike", "wellbeing.energy", 0.7, Provenance::Mined, 0), &tax())
            .unwrap();
        g.upsert_edge(edge("exercise.run", "wellbeing.energy", 0.9, Provenance::Expert, 0), &tax())
            .unwrap();
        g.upsert_edge(edge("work", "wellbeing.energy", 0.2, Provenance::Mined, 0), &tax())
            .unwrap();

        assert_eq!(g.query_edges(&EdgeFilter::default()).len(), 3);

        let by_source = g.query_edges(&EdgeFilter {
            source: Some(t("exercise")),
            ..Default::default()
        });
        let sources: Vec<&str> = by_source.iter().map(|e| e.source.as_str()).collect();
        assert_eq!(sources, ["exercise.run", "exercise.bike"]);

        let none = g.query_edges(&EdgeFilter {
            target: Some(t("health.goal.energy")),
            ..Default::default()
        });
        assert!(none.is_empty());

        let strong_mined = g.query_edges(&EdgeFilter {
            min_confidence: Some(0.5),
            provenance: Some(Provenance::Mined),
            ..Default::default()
        });
        assert_eq!(strong_mined.len(), 1);
        assert_eq!(strong_mined[0].source, t("exercise.bike"));
    }

    #[test]
    fn expert_rules() {
        let text = concat!(
            r#"{"source":"exercise","target":"wellbeing.energy","window_h":[0,12],"weight":0.3,"confidence":0.5}"#,
            "\n",
            r#"{"source":"exercise","target":"wellbeing.energy","window_h":[0,12],"weight":0.3,"confidence":0.5}"#,
            "\n"
        );
        let rules = read_expert_rules(text.as_bytes()).unwrap();
        let mut g = KnowledgeGraph::new(&tax());
        g.apply_expert_rules(&rules[..1], &tax(), 0).unwrap();
        let key = rules[0].to_edge(0).unwrap().key();
        assert_eq!(g.get(&key).unwrap().provenance, Provenance::Expert);
        assert_eq!(g.get(&key).unwrap().window, Window { start: 0, end: 12 * H });

        let mut dup = KnowledgeGraph::new(&tax());
        dup.apply_expert_rules(&rules, &tax(), 0).unwrap();
        assert_eq!(dup.edge_count(), 1);
        assert_eq!(dup.audit(&key).len(), 2);

        let mut empty = KnowledgeGraph::new(&tax());
        empty.apply_expert_rules(&read_expert_rules("".as_bytes()).unwrap(), &tax(), 0).unwrap();
        assert!(empty.is_empty());

        let err = read_expert_rules("{\"source\":1}".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::AtLine { line: 1, .. }));
        let unknown = ExpertRule {
            source: "jetpack".into(),
            ..rules[0].clone()
        };
        assert!(matches!(
            KnowledgeGraph::new(&tax()).apply_expert_rules(&[unknown], &tax(), 0),
            Err(Error::UnknownEventType(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let empty = KnowledgeGraph::new(&tax());
        assert_eq!(KnowledgeGraph::from_json(&empty.to_json().unwrap(), &tax()).unwrap(), empty);

        let mut g = KnowledgeGraph::new(&tax());
        let mut e = edge("exercise.bike", "work", 0.75, Provenance::Mined, 1_538_983_800);
        e.evidence = Some(Evidence {
            pooled_effect: 0.3,
            p_value: 0.25,
            n_strata: 4,
            permutations: 1000,
            seed: 7,
        });
        g.upsert_edge(e, &tax()).unwrap();
        g.upsert_edge(edge("exercise.bike", "work", 0.5, Provenance::Expert, 0), &tax())
            .unwrap();
        g.upsert_edge(edge("work", "wellbeing.energy", 0.1, Provenance::Mined, 3), &tax())
            .unwrap();
        let back = KnowledgeGraph::from_json(&g.to_json().unwrap(), &tax()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn corrupted_file_names_the_node() {
        let mut g = KnowledgeGraph::new(&tax());
        g.upsert_edge(edge("exercise.bike", "work", 0.75, Provenance::Mined, 0), &tax())
            .unwrap();
        let text = g.to_json().unwrap().replace(r#""target": "work""#, r#""target": "jetpack""#);
        let err = KnowledgeGraph::from_json(&text, &tax()).unwrap_err();
        assert!(err.to_string().contains("jetpack"), "{err}");
    }

    #[test]
    fn dot_output() {
        let empty = KnowledgeGraph::new(&tax());
        assert_eq!(empty.to_dot(), "digraph knowledge_graph {\n}\n");

        let mut g = KnowledgeGraph::new(&tax());
        g.upsert_edge(edge("exercise.bike", "work", 0.75, Provenance::Mined, 0), &tax())
            .unwrap();
        let dot = g.to_dot();
        let edge_lines: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
        assert_eq!(
            edge_lines,
            [r#"  "exercise.bike" -> "work" [label="w=0.300 c=0.750 [0,12]h"];"#]
        );
        assert_eq!(dot, g.clone().to_dot());
    }
}
