use std::collections::HashMap;

use statrs::distribution::{Binomial, DiscreteCDF};

use ledgermine::ledger::{AttrValue, Event, EventType};
use ledgermine::synth::{
    generate, BackgroundRate, ConfounderTarget, PlantedConfounder, PlantedRule, Scenario, CAUSE_ATTR,
    ORIGIN_ATTR,
};

fn t(s: &str) -> EventType {
    s.parse().unwrap()
}

fn text<'e>(e: &'e Event, key: &str) -> Option<&'e str> {
    match e.attributes.get(key) {
        Some(AttrValue::Text(s)) => Some(s),
        _ => None,
    }
}

fn scenario(seed: u64) -> Scenario {
    Scenario {
        span_days: 120,
        start: Some("2023-06-01T00:00:00Z".into()),
        background: vec![
            BackgroundRate { event_type: t("cause.a"), rate_per_day: 3.0 },
            BackgroundRate { event_type: t("noise.n"), rate_per_day: 5.0 },
            BackgroundRate { event_type: t("driver.c"), rate_per_day: 1.0 },
        ],
        rules: vec![
            PlantedRule { cause: t("cause.a"), effect: t("effect.b"), prob: 0.8, window_h: [2.0, 4.0] },
            PlantedRule { cause: t("effect.b"), effect: t("effect.d"), prob: 0.5, window_h: [0.0, 1.0] },
        ],
        confounders: vec![PlantedConfounder {
            driver: "driver.c".into(),
            targets: vec![
                ConfounderTarget { event_type: t("sym.x"), prob: 0.6 },
                ConfounderTarget { event_type: t("sym.y"), prob: 0.6 },
            ],
            latency_h: [0.0, 0.5],
        }],
        seed,
    }
}

/// Smallest interval [lo, hi] holding at least 99% of Binomial(n, p),
/// split evenly between the tails.
fn binomial_99(n: u64, p: f64) -> (u64, u64) {
    let b = Binomial::new(p, n).unwrap();
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.005).unwrap();
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.995).unwrap();
    (lo, hi)
}

#[test]
fn plant_fraction_inside_binomial_interval() {
    let (ledger, _) = generate(&scenario(17)).unwrap();
    let causes = ledger.iter().filter(|e| e.event_type == t("cause.a")).count() as u64;
    let planted = ledger
        .iter()
        .filter(|e| text(e, ORIGIN_ATTR) == Some("rule:0:cause.a->effect.b"))
        .count() as u64;
    assert!(causes >= 200, "only {causes} cause events");
    let (lo, hi) = binomial_99(causes, 0.8);
    assert!((lo..=hi).contains(&planted), "{planted} of {causes} outside [{lo}, {hi}]");
}

#[test]
fn every_generated_event_lands_in_its_window() {
    let s = scenario(3);
    let (ledger, _) = generate(&s).unwrap();
    let by_id: HashMap<&str, &Event> = ledger.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut checked = 0;
    for e in ledger.iter() {
        let origin = text(e, ORIGIN_ATTR).unwrap();
        let Some(parent) = text(e, CAUSE_ATTR) else {
            assert_eq!(origin, "background");
            continue;
        };
        let dt = e.timestamp - by_id[parent].timestamp;
        let (lo, hi) = if origin.starts_with("rule:0") {
            (2 * 3600, 4 * 3600)
        } else if origin.starts_with("rule:1") {
            (0, 3600)
        } else {
            assert!(origin.starts_with("confounder:0"), "{origin}");
            (0, 1800)
        };
        assert!((lo..=hi).contains(&dt), "{origin}: dt {dt}");
        checked += 1;
    }
    assert!(checked > 500);
}

#[test]
fn background_counts_within_four_sigma() {
    let s = scenario(99);
    let (ledger, _) = generate(&s).unwrap();
    for b in &s.background {
        let expected = b.rate_per_day * f64::from(s.span_days);
        assert!(expected >= 100.0);
        let n = ledger
            .iter()
            .filter(|e| e.event_type == b.event_type && text(e, ORIGIN_ATTR) == Some("background"))
            .count() as f64;
        assert!((n - expected).abs() <= 4.0 * expected.sqrt(), "{}: {n} vs {expected}", b.event_type);
    }
}

#[test]
fn same_seed_same_bytes() {
    let bytes = |seed| {
        let mut out = Vec::new();
        generate(&scenario(seed)).unwrap().0.write_jsonl(&mut out).unwrap();
        out
    };
    assert_eq!(bytes(5), bytes(5));
    assert_ne!(bytes(5), bytes(6));
}

#[test]
fn shipped_scenarios_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::load(&path).unwrap();
        s.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!s.ground_truth().unwrap().true_edges.is_empty() || s.rules.is_empty());
    }
}
