use std::path::PathBuf;

use proptest::prelude::*;
use tasr_core::harness::Scenario;
use tasr_core::net::{enumerate_paths, parse_network, parse_trips, shortest_path, write_network, write_trips};
use tasr_core::{Commodity, Edge, Error, Network};

fn data(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn parse_line(e: Error) -> usize {
    match e.root() {
        Error::Parse { line, .. } => *line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn sioux_falls_shape() {
    let net = parse_network(&data("SiouxFalls_net.tntp")).unwrap();
    assert_eq!(net.nodes().len(), 24);
    assert_eq!(net.num_edges(), 76);
    assert!(net.check_adjacency());
    let trips = parse_trips(&data("SiouxFalls_trips.tntp")).unwrap();
    // Counted by scripts/count_trips.py.
    assert_eq!(trips.len(), 528);
    let total: f64 = trips.iter().map(|c| c.demand).sum();
    assert_eq!(total, 360600.0);
}

#[test]
fn sioux_falls_round_trip() {
    let net = parse_network(&data("SiouxFalls_net.tntp")).unwrap();
    assert_eq!(parse_network(&write_network(&net)).unwrap(), net);
    let trips = parse_trips(&data("SiouxFalls_trips.tntp")).unwrap();
    assert_eq!(parse_trips(&write_trips(&trips)).unwrap(), trips);
}

#[test]
fn corrupt_networks_name_the_line() {
    let cases = [
        ("net_missing_end_metadata.tntp", 7),
        ("net_non_numeric.tntp", 8),
        ("net_unterminated_record.tntp", 8),
        ("net_zero_capacity.tntp", 7),
    ];
    for (name, line) in cases {
        let e = parse_network(&fixture(&format!("corrupt/{name}"))).unwrap_err();
        assert_eq!(parse_line(e), line, "{name}");
    }
}

#[test]
fn corrupt_trips_name_the_line() {
    for (name, line) in [("trips_malformed_token.tntp", 6), ("trips_total_mismatch.tntp", 2)] {
        let e = parse_trips(&fixture(&format!("corrupt/{name}"))).unwrap_err();
        assert_eq!(parse_line(e), line, "{name}");
    }
}

#[test]
fn unknown_origin_fails_when_linked() {
    let net = parse_network(&fixture("line3.tntp")).unwrap();
    let trips = parse_trips(&fixture("corrupt/trips_unknown_origin.tntp")).unwrap();
    let e = Scenario::new(net, trips, 4).unwrap_err();
    assert!(matches!(e.root(), Error::Data(_)), "{e:?}");
}

#[test]
fn unreachable_destination_is_no_path() {
    let net = parse_network(&fixture("line3.tntp")).unwrap();
    let e = shortest_path(&net, &net.free_flow_times(), 3, 1).unwrap_err();
    assert!(matches!(e, Error::NoPath { from: 3, to: 1 }));
}

fn small_network() -> impl Strategy<Value = Network> {
    // Random digraph on up to 6 nodes; duplicate arcs are allowed.
    prop::collection::vec((1u32..=6, 1u32..=6, 0.5f64..50.0, 1.0f64..5000.0), 1..18).prop_filter_map(
        "needs at least one non-loop arc",
        |arcs| {
            let edges: Vec<Edge> = arcs
                .into_iter()
                .filter(|(t, h, ..)| t != h)
                .map(|(t, h, fft, cap)| Edge::bpr(t.into(), h.into(), fft, cap))
                .collect();
            Network::new(edges).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn network_round_trip(net in small_network()) {
        prop_assert_eq!(parse_network(&write_network(&net)).unwrap(), net);
    }

    #[test]
    fn trips_round_trip(entries in prop::collection::btree_map((1u32..30, 1u32..30), 0.25f64..1e5, 1..40)) {
        let trips: Vec<Commodity> = entries
            .into_iter()
            .filter(|((o, d), _)| o != d)
            .map(|((o, d), v)| Commodity::new(o.into(), d.into(), v))
            .collect();
        prop_assert_eq!(parse_trips(&write_trips(&trips)).unwrap(), trips);
    }

    #[test]
    fn shortest_path_matches_exhaustive(net in small_network(), s in 1u32..=6, t in 1u32..=6) {
        let (s, t) = (s.into(), t.into());
        prop_assume!(s != t && net.contains(s) && net.contains(t));
        let costs = net.free_flow_times();
        let Ok(best) = shortest_path(&net, &costs, s, t) else {
            return Ok(());
        };
        prop_assert!(best.is_valid(&net, s, t));
        let all = enumerate_paths(&net, &Commodity::new(s, t, 0.0), usize::MAX).unwrap();
        let min = all.iter().map(|p| p.free_flow_time(&net)).fold(f64::INFINITY, f64::min);
        prop_assert!((best.free_flow_time(&net) - min).abs() <= 1e-9 * min);
        for p in &all {
            prop_assert!(p.is_valid(&net, s, t));
        }
    }
}
