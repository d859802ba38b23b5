//! End-to-end run: ledger, mining, causal testing, knowledge graph.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::{self, CausalConfig, CausalResult};
use crate::error::{Error, Result};
use crate::kgraph::{CausalEdge, ExpertRule, KnowledgeGraph};
use crate::ledger::{Ledger, Taxonomy};
use crate::miner::{self, Hypothesis, HypothesisRecord, MinerConfig};
use crate::rng;
use crate::synth::{self, GroundTruth, Scenario};
use crate::time::format_iso;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub miner: MinerConfig,
    pub causal: CausalConfig,
    /// How many of the best mined hypotheses get a causal test.
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            miner: MinerConfig::default(),
            causal: CausalConfig::default(),
            top_k: 10,
        }
    }
}

pub enum Input {
    Synth(Scenario),
    Ledger { ledger: Ledger, taxonomy: Taxonomy },
}

#[derive(Debug, Clone, Serialize)]
pub struct TestOutcome {
    pub hypothesis: HypothesisRecord,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<CausalResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub significant: bool,
    /// `true`, `spurious` or `unknown` against the planted ground truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub events: usize,
    pub span: Option<[String; 2]>,
    pub taxonomy_id: String,
    pub hypotheses_mined: usize,
    pub tested: Vec<TestOutcome>,
    pub edges: usize,
    /// Significant tested hypotheses that match a planted edge, over all
    /// significant ones. `None` without ground truth or significant tests.
    pub precision: Option<f64>,
    /// Planted edges matched by some significant hypothesis, over all
    /// planted edges.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub prepare: Duration,
    pub mine: Duration,
    pub test: Duration,
    pub graph: Duration,
}

pub struct Output {
    pub ledger: Ledger,
    pub taxonomy: Taxonomy,
    pub truth: Option<GroundTruth>,
    pub hypotheses: Vec<Hypothesis>,
    pub graph: KnowledgeGraph,
    pub report: Report,
    pub timings: Timings,
}

fn truth_label(truth: &GroundTruth, h: &Hypothesis) -> String {
    let Some(source) = h.antecedent.as_atom() else {
        return "unknown".into();
    };
    if truth.is_true_edge(source, &h.outcome, &h.window) {
        "true".into()
    } else if truth.is_spurious(source, &h.outcome) {
        "spurious".into()
    } else {
        "unknown".into()
    }
}

/// Runs the whole chain. Hypotheses whose test fails (for instance when
/// no control anchor fits) are reported with their error and skipped.
pub fn run(input: Input, config: &PipelineConfig, expert: &[ExpertRule], seed: u64) -> Result<Output> {
    config.causal.validate()?;
    if config.top_k == 0 {
        return Err(Error::InvalidConfig("top_k must be at least 1".into()));
    }
    let clock = Instant::now();
    let mut timings = Timings::default();

    let (ledger, taxonomy, truth) = match input {
        Input::Synth(scenario) => {
            let (ledger, truth) = synth::generate(&scenario)?;
            (synth::strip_provenance(&ledger), scenario.taxonomy()?, Some(truth))
        }
        Input::Ledger { ledger, taxonomy } => (ledger, taxonomy, None),
    };
    timings.prepare = clock.elapsed();

    let mark = Instant::now();
    let hypotheses = miner::mine_associations(&ledger, &taxonomy, &config.miner)?;
    timings.mine = mark.elapsed();
    log::info!("mined {} hypotheses from {} events", hypotheses.len(), ledger.len());

    let mark = Instant::now();
    let chosen = &hypotheses[..hypotheses.len().min(config.top_k)];
    let results: Vec<(u64, Result<CausalResult>)> = chosen
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            let s = rng::mix_seed(seed, 100 + i as u64);
            (s, causal::evaluate(&ledger, h, &taxonomy, &config.causal, s))
        })
        .collect();
    timings.test = mark.elapsed();

    let mark = Instant::now();
    let now = ledger.span().map_or(0, |(_, hi)| hi);
    let mut graph = KnowledgeGraph::new(&taxonomy);
    let mut tested = Vec::with_capacity(results.len());
    for (h, (s, result)) in chosen.iter().zip(results) {
        let (result, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => {
                log::warn!("skipping {}: {e}", h.rule().unwrap_or_default());
                (None, Some(e.to_string()))
            }
        };
        let significant = result
            .as_ref()
            .is_some_and(|r| r.is_significant(config.causal.alpha));
        if significant {
            if let Some(edge) = result.as_ref().and_then(|r| CausalEdge::from_result(h, r, now)) {
                graph.upsert_edge(edge, &taxonomy)?;
            }
        }
        tested.push(TestOutcome {
            hypothesis: h.clone().into(),
            seed: s,
            result,
            error,
            significant,
            truth: truth.as_ref().map(|t| truth_label(t, h)),
        });
    }
    graph.apply_expert_rules(expert, &taxonomy, now)?;
    timings.graph = mark.elapsed();

    let (precision, recall) = match &truth {
        Some(t) => scores(t, chosen, &tested),
        None => (None, None),
    };
    let report = Report {
        events: ledger.len(),
        span: ledger.span().map(|(lo, hi)| [format_iso(lo), format_iso(hi)]),
        taxonomy_id: taxonomy.id(),
        hypotheses_mined: hypotheses.len(),
        tested,
        edges: graph.edge_count(),
        precision,
        recall,
    };
    Ok(Output {
        ledger,
        taxonomy,
        truth,
        hypotheses,
        graph,
        report,
        timings,
    })
}

fn scores(truth: &GroundTruth, chosen: &[Hypothesis], tested: &[TestOutcome]) -> (Option<f64>, Option<f64>) {
    let hits: Vec<&Hypothesis> = chosen
        .iter()
        .zip(tested)
        .filter(|(_, t)| t.significant)
        .map(|(h, _)| h)
        .collect();
    let precision = (!hits.is_empty()).then(|| {
        let good = hits
            .iter()
            .filter(|h| truth_label(truth, h) == "true")
            .count();
        good as f64 / hits.len() as f64
    });
    let recall = (!truth.true_edges.is_empty()).then(|| {
        let found = truth
            .true_edges
            .iter()
            .filter(|e| {
                hits.iter().any(|h| {
                    h.antecedent.as_atom() == Some(&e.cause)
                        && h.outcome == e.effect
                        && h.window.overlaps(&crate::algebra::Window {
                            start: e.window_s[0],
                            end: e.window_s[1],
                        })
                })
            })
            .count();
        found as f64 / truth.true_edges.len() as f64
    });
    (precision, recall)
}
