use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use msvis_core::*;

fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name]
        .iter()
        .collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn manifest(name: &str) -> ServiceManifest {
    let m: ServiceManifest = serde_json::from_str(&fixture(name)).unwrap();
    m.validate().unwrap();
    m
}

fn traces() -> TraceSet {
    let mut spans = Vec::new();
    let mut malformed = 0;
    for line in fixture("traces-1000.jsonl").lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Span>(line) {
            Ok(s) => spans.push(s),
            Err(_) => malformed += 1,
        }
    }
    TraceSet::from_spans(spans, malformed)
}

#[test]
fn trainticket_has_41_services() {
    let m = manifest("trainticket.json");
    let g = build_graph(&m, Level::Service).unwrap();
    assert_eq!(g.nodes.len(), 41);
    assert_eq!(
        build_graph(&m, Level::System).unwrap().controllers.len(),
        41
    );
}

#[test]
fn dependency_rank_matches_raw_manifest() {
    let m = manifest("trainticket.json");
    let mut callers: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in &m.services {
        callers.entry(&s.name).or_default();
        for ep in &s.endpoints {
            for c in &ep.calls {
                if c.service != s.name {
                    callers.entry(&c.service).or_default().insert(&s.name);
                }
            }
        }
    }
    let mut expected: Vec<(u32, &str)> = callers
        .iter()
        .map(|(id, set)| (set.len() as u32, *id))
        .collect();
    expected.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));

    let rank = service_dependency_rank(&build_graph(&m, Level::Service).unwrap());
    let got: Vec<(u32, &str)> = rank
        .entries
        .iter()
        .map(|e| (e.dependents, e.id.as_str()))
        .collect();
    assert_eq!(got, expected);
}

#[test]
fn order_service_function_view() {
    let m = manifest("trainticket.json");
    let fv = function_view(&m, "ts-order-service", Some("POST /orders")).unwrap();
    let got: Vec<(u32, &str, &str)> = fv
        .messages
        .iter()
        .map(|m| (m.seq, m.from.as_str(), m.to.as_str()))
        .collect();
    assert_eq!(
        got,
        [
            (1, "createOrder", "validateOrder"),
            (2, "validateOrder", "checkSeat"),
            (3, "createOrder", "saveOrder"),
        ]
    );
    assert_eq!(
        fv.participants,
        ["createOrder", "validateOrder", "checkSeat", "saveOrder"]
    );
}

#[test]
fn six_system_view() {
    let m = manifest("six.json");
    let g = build_graph(&m, Level::System).unwrap();
    assert_eq!(g.nodes.len(), 4);
    let total: u32 = g.edges.iter().map(|e| e.dependency_count).sum();
    assert_eq!(total, 5);
    let c1 = g.node("/api/c1").unwrap();
    assert_eq!((c1.in_degree, c1.out_degree, c1.size), (1, 2, 2));
}

#[test]
fn six_path_filter() {
    let g = build_graph(&manifest("six.json"), Level::Service).unwrap();
    let view = service_view(&g);
    let f = path_filter(&view, &ServicePath::parse("S2>S1>S4>S6").unwrap()).unwrap();
    let h = f.highlight.as_ref().unwrap();
    assert_eq!(h.edges.len(), 3);
    assert_eq!(f.nodes.iter().filter(|n| n.on_path).count(), 4);
    assert_eq!(f.nodes.len(), view.nodes.len());
    assert!(f.nodes.iter().all(|n| n.on_path != n.dimmed));

    let err = path_filter(&view, &ServicePath::parse("S6>S4").unwrap()).unwrap_err();
    assert!(matches!(err, ViewError::PathNotInGraph(_)));
}

#[test]
fn six_node_filter() {
    let g = build_graph(&manifest("six.json"), Level::Service).unwrap();
    let f = node_filter(&service_view(&g), "S1").unwrap();
    let ids: Vec<&str> = f.nodes.iter().map(|n| n.node.id.as_str()).collect();
    assert_eq!(ids, ["S1", "S2", "S4", "S6"]);
    assert_eq!(f.edges.len(), 3);
}

#[test]
fn path_hits_match_frozen_oracle() {
    let set = traces();
    assert_eq!(set.traces.len(), 1000);
    assert_eq!(set.malformed_count, 5);
    let oracle: Vec<(String, u64)> =
        serde_json::from_str(&fixture("traces-1000.hits.json")).unwrap();
    let got: Vec<(String, u64)> = path_hits(&set)
        .entries
        .into_iter()
        .map(|e| (e.key, e.score))
        .collect();
    assert_eq!(got, oracle);
}

#[test]
fn trainticket_layout_is_separated() {
    let g = build_graph(&manifest("trainticket.json"), Level::Service).unwrap();
    let view = service_view(&g);
    let a = layout_3d(&view, DEFAULT_SEED, DEFAULT_ITERATIONS).unwrap();
    assert!(a.min_distance().unwrap() >= MIN_SEPARATION);
    let b = layout_3d(&view, DEFAULT_SEED, DEFAULT_ITERATIONS).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn connected_pairs_sit_closer() {
    let g = build_graph(&manifest("trainticket.json"), Level::Service).unwrap();
    let layout = layout_3d(&service_view(&g), DEFAULT_SEED, DEFAULT_ITERATIONS).unwrap();
    let dist = |a: &str, b: &str| {
        let (p, q) = (layout.positions[a], layout.positions[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    };
    let linked: BTreeSet<(&str, &str)> = g
        .edges
        .iter()
        .map(|e| (e.a.as_str(), e.b.as_str()))
        .collect();
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for (i, a) in g.nodes.iter().enumerate() {
        for b in &g.nodes[i + 1..] {
            let d = dist(&a.id, &b.id);
            if linked.contains(&(a.id.as_str(), b.id.as_str())) {
                near.push(d);
            } else {
                far.push(d);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean(&near) < mean(&far),
        "{} vs {}",
        mean(&near),
        mean(&far)
    );
}

#[test]
fn mock_and_trace_runs_agree_on_fixture() {
    let g = build_graph(&manifest("trainticket.json"), Level::Service).unwrap();
    let set = traces();
    let mut checked = 0;
    for (id, tree) in set.traces.iter().take(50) {
        let first = &extract_paths(tree)[0];
        let key = first.service_level().key().to_string();
        let by_trace = run_to_completion(plan(&SimulationConfig::trace(id), &g, &set).unwrap());
        let by_mock =
            run_to_completion(plan(&SimulationConfig::mock(&key, "{}"), &g, &set).unwrap());
        assert_eq!(by_trace.resolved_path.key(), by_mock.resolved_path.key());
        let a: Vec<_> = by_trace.events.iter().map(SimEvent::structure).collect();
        let b: Vec<_> = by_mock.events.iter().map(SimEvent::structure).collect();
        assert_eq!(a, b);
        checked += 1;
    }
    assert_eq!(checked, 50);
}
