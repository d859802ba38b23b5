//! Context-sensitive recommendations read off the knowledge graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::Window;
use crate::error::{Error, Result};
use crate::kgraph::{EdgeFilter, EdgeKey, KnowledgeGraph};
use crate::ledger::{AttrValue, Event, EventType, Taxonomy};
use crate::time::{format_iso, parse_iso, Timestamp};

/// The situation a recommendation is requested for.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub now: Timestamp,
    /// Lookback events, ascending.
    pub recent: Vec<Event>,
    pub attributes: BTreeMap<String, AttrValue>,
    pub goal: EventType,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContextFile {
    pub now: String,
    #[serde(default)]
    pub recent: Vec<Event>,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrValue>,
    pub goal: String,
}

impl Context {
    pub fn new(now: Timestamp, goal: EventType) -> Self {
        Self {
            now,
            recent: Vec::new(),
            attributes: BTreeMap::new(),
            goal,
        }
    }

    pub fn with_recent(mut self, mut recent: Vec<Event>) -> Self {
        recent.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
        self.recent = recent;
        self
    }

    pub fn from_json(text: &str, taxonomy: &Taxonomy) -> Result<Self> {
        let file: ContextFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("context: {e}")))?;
        let goal = EventType::new(file.goal.as_str())
            .map_err(|_| Error::UnknownGoal(file.goal.clone()))?;
        if !taxonomy.contains(&goal) {
            return Err(Error::UnknownGoal(file.goal));
        }
        let mut ctx = Context::new(parse_iso(&file.now)?, goal).with_recent(file.recent);
        ctx.attributes = file.attributes;
        Ok(ctx)
    }

    pub fn to_file(&self) -> ContextFile {
        ContextFile {
            now: format_iso(self.now),
            recent: self.recent.clone(),
            attributes: self.attributes.clone(),
            goal: self.goal.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub action: EventType,
    pub window: Window,
    /// `weight * confidence` of the edge behind it.
    pub score: f64,
    pub weight: f64,
    pub confidence: f64,
    pub channel: Option<EventType>,
    pub rationale: EdgeKey,
}

/// Actions with an edge into `context.goal` (or beneath it) at confidence
/// `>= min_confidence`, best first.
///
/// An action is left out when it already happened recently enough that
/// its effect window has not yet closed: some recent event of the action
/// type at `t` with `0 <= now - t <= window end`.
pub fn recommend(
    graph: &KnowledgeGraph,
    context: &Context,
    taxonomy: &Taxonomy,
    min_confidence: f64,
    default_media: &[EventType],
) -> Result<Vec<Recommendation>> {
    if !taxonomy.contains(&context.goal) {
        return Err(Error::UnknownGoal(context.goal.to_string()));
    }
    let candidates = graph.query_edges(&EdgeFilter {
        target: Some(context.goal.clone()),
        min_confidence: Some(min_confidence),
        ..Default::default()
    });
    let mut out = Vec::new();
    for edge in candidates {
        if !taxonomy.is_actionable(&edge.source) {
            continue;
        }
        let satisfied = context.recent.iter().any(|e| {
            let age = context.now - e.timestamp;
            e.event_type.is_within(&edge.source) && (0..=edge.window.end).contains(&age)
        });
        if satisfied {
            continue;
        }
        let channel = if default_media.is_empty() {
            best_medium(graph, &edge.source, taxonomy).map(|(m, _)| m.clone())
        } else {
            Some(select_medium(graph, &edge.source, taxonomy, default_media)?)
        };
        out.push(Recommendation {
            action: edge.source.clone(),
            window: edge.window,
            score: edge.weight * edge.confidence,
            weight: edge.weight,
            confidence: edge.confidence,
            channel,
            rationale: edge.key(),
        });
    }
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.confidence.total_cmp(&a.confidence))
            .then_with(|| a.action.cmp(&b.action))
            .then_with(|| a.rationale.cmp(&b.rationale))
    });
    Ok(out)
}

/// Media node with the strongest edge into `action` or one of its
/// ancestors; ties go to the smaller path.
fn best_medium<'g>(
    graph: &'g KnowledgeGraph,
    action: &EventType,
    taxonomy: &Taxonomy,
) -> Option<(&'g EventType, f64)> {
    graph
        .edges()
        .filter(|e| taxonomy.is_media(&e.source) && action.is_within(&e.target))
        .fold(None, |best: Option<(&EventType, f64)>, e| match best {
            Some((m, c)) if c > e.confidence || (c == e.confidence && m <= &e.source) => Some((m, c)),
            _ => Some((&e.source, e.confidence)),
        })
}

/// Channel to deliver a nudge for `action` through: the learned favourite
/// if any media edge reaches it, otherwise `defaults[0]`.
pub fn select_medium(
    graph: &KnowledgeGraph,
    action: &EventType,
    taxonomy: &Taxonomy,
    defaults: &[EventType],
) -> Result<EventType> {
    let Some(first) = defaults.first() else {
        return Err(Error::InvalidConfig("default media list is empty".into()));
    };
    if let Some(bad) = defaults.iter().find(|m| !taxonomy.is_media(m)) {
        return Err(Error::InvalidConfig(format!("`{bad}` is not a media type")));
    }
    Ok(best_medium(graph, action, taxonomy)
        .map(|(m, _)| m.clone())
        .unwrap_or_else(|| first.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::{CausalEdge, Provenance};
    use crate::time::SECONDS_PER_HOUR as H;

    fn t(s: &str) -> EventType {
        s.parse().unwrap()
    }

    fn tax() -> Taxonomy {
        Taxonomy::new([
            "exercise.bike",
            "exercise.walk",
            "health.goal.energy",
            "food.healthy",
            "app.instagram",
            "app.blog",
            "app.push",
        ])
        .unwrap()
        .with_actionable(["exercise.bike", "exercise.walk", "food.healthy"])
        .unwrap()
        .with_media(["app.instagram", "app.blog", "app.push"])
        .unwrap()
    }

    fn edge(src: &str, dst: &str, w: f64, c: f64, hours: (i64, i64)) -> CausalEdge {
        CausalEdge {
            source: t(src),
            target: t(dst),
            window: Window { start: hours.0 * H, end: hours.1 * H },
            weight: w,
            confidence: c,
            provenance: Provenance::Mined,
            evidence: None,
            updated_at: 0,
        }
    }

    fn graph(edges: &[CausalEdge]) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new(&tax());
        for e in edges {
            g.upsert_edge(e.clone(), &tax()).unwrap();
        }
        g
    }

    const NOW: i64 = 1_000 * H;

    #[test]
    fn empty_graph_recommends_nothing() {
        let ctx = Context::new(NOW, t("health.goal.energy"));
        assert!(recommend(&graph(&[]), &ctx, &tax(), 0.0, &[]).unwrap().is_empty());
    }

    #[test]
    fn single_edge_score() {
        let g = graph(&[edge("exercise.bike", "health.goal.energy", 0.4, 0.9, (2, 4))]);
        let ctx = Context::new(NOW, t("health.goal.energy"));
        let recs = recommend(&g, &ctx, &tax(), 0.5, &[]).unwrap();
        assert_eq!(recs.len(), 1);
        assert!((recs[0].score - 0.36).abs() < 1e-12);
        assert_eq!(recs[0].action, t("exercise.bike"));
        assert_eq!(recs[0].channel, None);
    }

    #[test]
    fn recent_action_is_excluded() {
        let g = graph(&[edge("exercise.bike", "health.goal.energy", 0.4, 0.9, (2, 4))]);
        let biked = Event::new("r1", t("exercise.bike"), NOW - 3 * H, "watch");
        let ctx = Context::new(NOW, t("health.goal.energy")).with_recent(vec![biked.clone()]);
        assert!(recommend(&g, &ctx, &tax(), 0.5, &[]).unwrap().is_empty());

        let mut long_ago = biked;
        long_ago.timestamp = NOW - 5 * H;
        let ctx = Context::new(NOW, t("health.goal.energy")).with_recent(vec![long_ago]);
        assert_eq!(recommend(&g, &ctx, &tax(), 0.5, &[]).unwrap().len(), 1);
    }

    #[test]
    fn non_actionable_sources_skipped() {
        let g = graph(&[edge("app.blog", "health.goal.energy", 0.4, 0.9, (0, 1))]);
        let ctx = Context::new(NOW, t("health.goal"));
        assert!(recommend(&g, &ctx, &tax(), 0.0, &[]).unwrap().is_empty());
    }

    #[test]
    fn ranking_and_goal_descendants() {
        let g = graph(&[
            edge("exercise.bike", "health.goal.energy", 0.4, 0.9, (2, 4)),
            edge("exercise.walk", "health.goal.energy", 0.5, 0.9, (0, 2)),
            edge("food.healthy", "health.goal.energy", 0.45, 0.8, (0, 6)),
        ]);
        let ctx = Context::new(NOW, t("health.goal"));
        let recs = recommend(&g, &ctx, &tax(), 0.0, &[]).unwrap();
        let actions: Vec<&str> = recs.iter().map(|r| r.action.as_str()).collect();
        assert_eq!(actions, ["exercise.walk", "exercise.bike", "food.healthy"]);
    }

    #[test]
    fn unknown_goal() {
        let ctx = Context::new(NOW, t("jetpack"));
        assert!(matches!(
            recommend(&graph(&[]), &ctx, &tax(), 0.0, &[]),
            Err(Error::UnknownGoal(_))
        ));
        let text = r#"{"now":"2018-10-08T07:30:00Z","goal":"jetpack"}"#;
        assert!(matches!(Context::from_json(text, &tax()), Err(Error::UnknownGoal(_))));
    }

    #[test]
    fn context_json_sorts_recent() {
        let text = r#"{
            "now": "2018-10-08T12:00:00Z",
            "goal": "health.goal.energy",
            "recent": [
                {"id":"b","type":"exercise.walk","ts":"2018-10-08T11:00:00Z","source":"phone"},
                {"id":"a","type":"exercise.bike","ts":"2018-10-08T08:00:00Z","source":"watch"}
            ]
        }"#;
        let ctx = Context::from_json(text, &tax()).unwrap();
        let ids: Vec<&str> = ctx.recent.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn cold_start_medium() {
        let defaults = [t("app.push"), t("app.blog")];
        let m = select_medium(&graph(&[]), &t("food.healthy"), &tax(), &defaults).unwrap();
        assert_eq!(m, t("app.push"));
    }

    #[test]
    fn strongest_medium_wins() {
        let g = graph(&[
            edge("app.instagram", "food.healthy", 0.2, 0.8, (0, 24)),
            edge("app.blog", "food.healthy", 0.2, 0.3, (0, 24)),
        ]);
        let defaults = [t("app.push")];
        assert_eq!(
            select_medium(&g, &t("food.healthy"), &tax(), &defaults).unwrap(),
            t("app.instagram")
        );
    }

    #[test]
    fn medium_edges_into_ancestors_count() {
        let g = graph(&[edge("app.blog", "exercise", 0.2, 0.6, (0, 24))]);
        assert_eq!(
            select_medium(&g, &t("exercise.bike"), &tax(), &[t("app.push")]).unwrap(),
            t("app.blog")
        );
    }

    #[test]
    fn medium_ties_break_by_path() {
        let g = graph(&[
            edge("app.instagram", "food.healthy", 0.2, 0.5, (0, 24)),
            edge("app.blog", "food.healthy", 0.2, 0.5, (0, 24)),
        ]);
        assert_eq!(
            select_medium(&g, &t("food.healthy"), &tax(), &[t("app.push")]).unwrap(),
            t("app.blog")
        );
    }

    #[test]
    fn recommendation_carries_channel() {
        let g = graph(&[
            edge("food.healthy", "health.goal.energy", 0.3, 0.9, (0, 6)),
            edge("app.instagram", "food.healthy", 0.2, 0.8, (0, 24)),
        ]);
        let ctx = Context::new(NOW, t("health.goal.energy"));
        let recs = recommend(&g, &ctx, &tax(), 0.0, &[t("app.push")]).unwrap();
        assert_eq!(recs[0].channel, Some(t("app.instagram")));
        let recs = recommend(&g, &ctx, &tax(), 0.0, &[]).unwrap();
        assert_eq!(recs[0].channel, Some(t("app.instagram")));
    }

    #[test]
    fn bad_defaults_rejected() {
        assert!(select_medium(&graph(&[]), &t("food.healthy"), &tax(), &[]).is_err());
        assert!(select_medium(&graph(&[]), &t("food.healthy"), &tax(), &[t("exercise")]).is_err());
    }
}
