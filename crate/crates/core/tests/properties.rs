use std::collections::{BTreeMap, BTreeSet};

use msvis_core::*;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Shape {
    routes: Vec<usize>,
    endpoints: Vec<usize>,
    calls: Vec<(usize, usize, usize, usize)>,
}

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..4, n),
            prop::collection::vec(1usize..4, n),
            prop::collection::vec((0..n, 0usize..3, 0..n, 0usize..3), 0..30),
        )
            .prop_map(|(routes, endpoints, calls)| Shape {
                routes,
                endpoints,
                calls,
            })
    })
}

fn manifest_of(shape: &Shape) -> ServiceManifest {
    let mut services: Vec<ServiceDecl> = shape
        .routes
        .iter()
        .zip(&shape.endpoints)
        .enumerate()
        .map(|(i, (route, eps))| ServiceDecl {
            name: format!("s{i}"),
            base_route: format!("/ctl{route}"),
            controller: None,
            endpoints: (0..*eps)
                .map(|e| EndpointDecl {
                    method: "GET".into(),
                    path: format!("/e{e}"),
                    calls: vec![],
                    flow: vec![],
                })
                .collect(),
            functions: vec![],
        })
        .collect();
    for &(from, from_ep, to, to_ep) in &shape.calls {
        let from_ep = from_ep % shape.endpoints[from];
        let to_ep = to_ep % shape.endpoints[to];
        services[from].endpoints[from_ep].calls.push(CallDecl {
            service: format!("s{to}"),
            endpoint: format!("GET /e{to_ep}"),
        });
    }
    ServiceManifest {
        system_name: "generated".into(),
        services,
    }
}

/// Distinct (caller service, callee service) pairs straight from the manifest.
fn service_pairs(m: &ServiceManifest) -> BTreeSet<(String, String)> {
    let mut pairs = BTreeSet::new();
    for s in &m.services {
        for ep in &s.endpoints {
            for c in &ep.calls {
                pairs.insert((s.name.clone(), c.service.clone()));
            }
        }
    }
    pairs
}

fn size_oracle(x: u64, y: u64) -> u64 {
    let v = if x == 0 && y == 0 {
        1
    } else if x == 0 {
        y
    } else if y == 0 {
        x
    } else {
        let mut p: u128 = 1;
        for _ in 0..y {
            p = (p * x as u128).min(u64::MAX as u128);
        }
        (p as u64).max(x).max(y)
    };
    v.min(1_000_000)
}

// ---------------------------------------------------------------------------
// core-graph
// ---------------------------------------------------------------------------

#[test]
fn node_size_matches_oracle_on_grid() {
    for x in 0..=20 {
        for y in 0..=20 {
            assert_eq!(node_size(x, y), size_oracle(x, y), "({x}, {y})");
        }
    }
}

proptest! {
    #[test]
    fn graph_build_is_deterministic(s in shape()) {
        let m = manifest_of(&s);
        for level in [Level::System, Level::Service] {
            let a = serde_json::to_string(&build_graph(&m, level).unwrap()).unwrap();
            let b = serde_json::to_string(&build_graph(&m.clone(), level).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn degrees_match_edge_list(s in shape()) {
        let m = manifest_of(&s);
        for level in [Level::System, Level::Service] {
            let g = build_graph(&m, level).unwrap();
            let mut ins: BTreeMap<&str, u32> = BTreeMap::new();
            let mut outs: BTreeMap<&str, u32> = BTreeMap::new();
            for e in &g.edges {
                prop_assert_ne!(&e.a, &e.b);
                let (fwd, back) = match e.direction {
                    Direction::AToB => (true, false),
                    Direction::BToA => (false, true),
                    Direction::Bidirectional => (true, true),
                };
                if fwd { *outs.entry(&e.a).or_default() += 1; *ins.entry(&e.b).or_default() += 1; }
                if back { *outs.entry(&e.b).or_default() += 1; *ins.entry(&e.a).or_default() += 1; }
                prop_assert_eq!(e.cross_lines, if e.dependency_count <= 3 { e.dependency_count } else { 0 });
            }
            for n in &g.nodes {
                prop_assert_eq!(n.in_degree, ins.get(n.id.as_str()).copied().unwrap_or(0));
                prop_assert_eq!(n.out_degree, outs.get(n.id.as_str()).copied().unwrap_or(0));
                prop_assert_eq!(n.size, node_size(n.in_degree.into(), n.out_degree.into()));
            }
        }
    }

    #[test]
    fn service_degrees_match_manifest(s in shape()) {
        let m = manifest_of(&s);
        let g = build_graph(&m, Level::Service).unwrap();
        prop_assert_eq!(g.nodes.len(), m.services.len());
        let pairs = service_pairs(&m);
        for n in &g.nodes {
            let ins = pairs.iter().filter(|(a, b)| a != b && *b == n.id).count() as u32;
            let outs = pairs.iter().filter(|(a, b)| a != b && *a == n.id).count() as u32;
            prop_assert_eq!((n.in_degree, n.out_degree), (ins, outs));
        }
    }

    #[test]
    fn system_edge_counts_sum_to_cross_controller_pairs(s in shape()) {
        let m = manifest_of(&s);
        let g = build_graph(&m, Level::System).unwrap();
        let key: BTreeMap<&str, &str> = m.services.iter().map(|s| (s.name.as_str(), s.base_route.as_str())).collect();
        let crossing = service_pairs(&m)
            .iter()
            .filter(|(a, b)| key[a.as_str()] != key[b.as_str()])
            .count() as u32;
        let total: u32 = g.edges.iter().map(|e| e.dependency_count).sum();
        prop_assert_eq!(total, crossing);
        let mut seen = BTreeSet::new();
        for e in &g.edges {
            prop_assert!(seen.insert((e.a.clone(), e.b.clone())));
        }
    }

    #[test]
    fn node_colors_follow_controller(s in shape()) {
        let m = manifest_of(&s);
        let g = build_graph(&m, Level::Service).unwrap();
        let members: usize = g.controllers.iter().map(|c| c.members.len()).sum();
        prop_assert_eq!(members, m.services.len());
        for n in &g.nodes {
            let group = g.controller(&n.controller_key).unwrap();
            prop_assert!(group.members.contains(&n.id));
            prop_assert_eq!(&n.color, &group.color);
        }
        let sys = build_graph(&m, Level::System).unwrap();
        let sv = service_view(&g);
        let yv = system_view(&sys);
        for n in &sv.nodes {
            let c = yv.node(&n.node.controller_key).unwrap();
            prop_assert_eq!(&n.node.color, &c.node.color);
        }
    }

    #[test]
    fn manifest_json_round_trip(s in shape()) {
        let m = manifest_of(&s);
        prop_assert!(m.validate().is_ok());
        let text = serde_json::to_string(&m).unwrap();
        let back: ServiceManifest = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }
}

// ---------------------------------------------------------------------------
// traces and metrics
// ---------------------------------------------------------------------------

/// Random forest: each span picks an earlier span of its trace as parent.
fn spans_strategy() -> impl Strategy<Value = Vec<Span>> {
    prop::collection::vec(
        (1usize..8).prop_flat_map(|n| prop::collection::vec((0usize..64, 0usize..4, 0u64..5), n)),
        1..12,
    )
    .prop_map(|traces| {
        let mut spans = Vec::new();
        for (t, nodes) in traces.iter().enumerate() {
            for (i, &(parent_pick, svc, start)) in nodes.iter().enumerate() {
                spans.push(Span {
                    trace_id: format!("t{t}"),
                    span_id: format!("{i:02}"),
                    parent_span_id: (i > 0).then(|| format!("{:02}", parent_pick % i)),
                    service: format!("S{svc}"),
                    endpoint: "GET /".into(),
                    start_time: start,
                    duration: 1,
                    status: SpanStatus::Ok,
                });
            }
        }
        spans
    })
}

/// Root-to-leaf branch count, computed by leaf counting.
fn leaf_count(spans: &[Span]) -> usize {
    let parents: BTreeSet<(&str, &str)> = spans
        .iter()
        .filter_map(|s| {
            s.parent_span_id
                .as_deref()
                .map(|p| (s.trace_id.as_str(), p))
        })
        .collect();
    spans
        .iter()
        .filter(|s| !parents.contains(&(s.trace_id.as_str(), s.span_id.as_str())))
        .count()
}

proptest! {
    #[test]
    fn paths_are_well_formed(spans in spans_strategy()) {
        let set = TraceSet::from_spans(spans.clone(), 0);
        prop_assert!(set.paths.len() >= set.traces.len());
        prop_assert_eq!(set.paths.len(), leaf_count(&spans));
        for p in &set.paths {
            prop_assert!(!p.hops().is_empty());
            for w in p.hops().windows(2) {
                prop_assert_ne!(&w[0].service, &w[1].service);
            }
        }
        let hits: u64 = path_hits(&set).entries.iter().map(|e| e.score).sum();
        prop_assert_eq!(hits as usize, set.paths.len());
    }

    #[test]
    fn line_order_does_not_matter(
        (spans, shuffled) in spans_strategy()
            .prop_flat_map(|s| (Just(s.clone()), Just(s).prop_shuffle()))
    ) {
        prop_assert_eq!(TraceSet::from_spans(spans, 0), TraceSet::from_spans(shuffled, 0));
    }

    #[test]
    fn length_rank_ignores_duplication(spans in spans_strategy()) {
        let once = TraceSet::from_spans(spans.clone(), 0);
        let mut doubled = spans.clone();
        doubled.extend(spans.into_iter().map(|mut s| { s.trace_id.push_str("-copy"); s }));
        let twice = TraceSet::from_spans(doubled, 0);
        prop_assert_eq!(path_length_rank(&once), path_length_rank(&twice));
        let h1 = path_hits(&once);
        let h2 = path_hits(&twice);
        for (a, b) in h1.entries.iter().zip(&h2.entries) {
            prop_assert_eq!(&a.key, &b.key);
            prop_assert_eq!(a.score * 2, b.score);
        }
    }

    #[test]
    fn rankings_are_sorted_and_stable(spans in spans_strategy()) {
        let set = TraceSet::from_spans(spans, 0);
        for r in [path_hits(&set), path_length_rank(&set)] {
            for w in r.entries.windows(2) {
                prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].key < w[1].key));
            }
            prop_assert!(r.entries.iter().enumerate().all(|(i, e)| e.rank == i + 1));
        }
        prop_assert_eq!(path_hits(&set), path_hits(&set.clone()));
    }

    #[test]
    fn dependency_rank_top_is_max_in_degree(s in shape()) {
        let g = build_graph(&manifest_of(&s), Level::Service).unwrap();
        let r = service_dependency_rank(&g);
        let max = g.nodes.iter().map(|n| n.in_degree).max().unwrap();
        prop_assert_eq!(r.entries[0].dependents, max);
        prop_assert_eq!(r.entries.len(), g.nodes.len());
        prop_assert_eq!(&r, &service_dependency_rank(&g));
    }
}

// ---------------------------------------------------------------------------
// views
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn node_filter_is_a_subgraph(s in shape(), pick in any::<prop::sample::Index>()) {
        let g = build_graph(&manifest_of(&s), Level::Service).unwrap();
        let view = service_view(&g);
        let focus = &view.nodes[pick.index(view.nodes.len())].node.id;
        let f = node_filter(&view, focus).unwrap();
        for n in &f.nodes {
            prop_assert!(view.nodes.iter().any(|m| m.node == n.node));
        }
        for e in &f.edges {
            prop_assert!(view.edges.contains(e));
            prop_assert!(e.touches(focus));
        }
        let json_a = serde_json::to_string(&f).unwrap();
        let json_b = serde_json::to_string(&node_filter(&view, focus).unwrap()).unwrap();
        prop_assert_eq!(json_a, json_b);
    }

    #[test]
    fn path_filter_keeps_nodes(s in shape(), start in any::<prop::sample::Index>(), steps in 0usize..6) {
        let g = build_graph(&manifest_of(&s), Level::Service).unwrap();
        let view = service_view(&g);
        // Walk outgoing edges to get a path that exists.
        let mut hops = vec![view.nodes[start.index(view.nodes.len())].node.id.clone()];
        for _ in 0..steps {
            let cur = hops.last().unwrap().clone();
            let next = view.edges.iter().find_map(|e| {
                let other = if e.a == cur { &e.b } else if e.b == cur { &e.a } else { return None };
                (e.allows(&cur, other) && !hops.contains(other)).then(|| other.clone())
            });
            match next { Some(n) => hops.push(n), None => break }
        }
        let path = ServicePath::from_services(hops.clone()).unwrap();
        let f = path_filter(&view, &path).unwrap();
        prop_assert_eq!(f.nodes.len(), view.nodes.len());
        prop_assert_eq!(f.highlight.as_ref().unwrap().edges.len(), hops.len() - 1);
        for h in &f.highlight.as_ref().unwrap().edges {
            prop_assert!(f.edges.iter().any(|e| e.allows(&h.from, &h.to)));
        }
    }
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

fn chain_manifest(n: usize) -> ServiceManifest {
    ServiceManifest {
        system_name: "chain".into(),
        services: (0..n)
            .map(|i| ServiceDecl {
                name: format!("n{i}"),
                base_route: format!("/n{i}"),
                controller: None,
                endpoints: vec![EndpointDecl {
                    method: "GET".into(),
                    path: "/".into(),
                    calls: (i + 1 < n)
                        .then(|| CallDecl {
                            service: format!("n{}", i + 1),
                            endpoint: "GET /".into(),
                        })
                        .into_iter()
                        .collect(),
                    flow: vec![],
                }],
                functions: vec![],
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn clean_runs_emit_one_ok_per_hop(n in 1usize..8) {
        let g = build_graph(&chain_manifest(n), Level::Service).unwrap();
        let key = (0..n).map(|i| format!("n{i}")).collect::<Vec<_>>().join(">");
        let traces = TraceSet::default();
        let before = (g.clone(), traces.clone());
        let run = run_to_completion(plan(&SimulationConfig::mock(&key, "p"), &g, &traces).unwrap());
        prop_assert_eq!(run.events.len(), n);
        prop_assert!(run.events.iter().all(|e| e.status == SimStatus::Ok));
        prop_assert_eq!(run.state, RunState::Completed);
        prop_assert_eq!((g, traces), before);
    }
}

// ---------------------------------------------------------------------------
// layout
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn layout_is_deterministic_and_separated(s in shape(), seed in any::<u64>()) {
        let view = service_view(&build_graph(&manifest_of(&s), Level::Service).unwrap());
        let a = layout_3d(&view, seed, 60).unwrap();
        let b = layout_3d(&view, seed, 60).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.positions.len(), view.nodes.len());
        if let Some(d) = a.min_distance() {
            prop_assert!(d >= MIN_SEPARATION);
        }
        for p in a.positions.values() {
            prop_assert!(p.iter().all(|c| (-1.0..=1.0).contains(c)));
        }
    }
}
