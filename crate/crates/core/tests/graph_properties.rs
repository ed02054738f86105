mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use s2graph::graph::{cut_structure, remove_cut};
use s2graph::io::{format_edge_list, parse_edge_list};
use s2graph::Metric;

use common::*;

fn close(a: f64, b: f64) -> bool {
    (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shortest_paths_match_floyd_warshall(seed in any::<u64>(), n in 2usize..=50, extra in 0usize..60, drop in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = random_connected(&mut rng, n, extra);
        // Remove a few edges so disconnected pairs also occur.
        let edges: Vec<_> = g.edges().collect();
        for e in edges.iter().take(drop) {
            g.remove_edge(e.u, e.v).unwrap();
        }
        for (metric, hop) in [(Metric::Length, false), (Metric::Hop, true)] {
            let fw = floyd_warshall(&g, hop);
            let d: Vec<Vec<f64>> = (0..n).map(|s| g.distances_from(s, metric)).collect();
            for u in 0..n {
                for v in 0..n {
                    prop_assert!(close(d[u][v], fw[u][v]), "d({u},{v}) = {} vs {}", d[u][v], fw[u][v]);
                    prop_assert!(close(d[u][v], d[v][u]));
                    for w in 0..n {
                        prop_assert!(d[u][w] <= d[u][v] + d[v][w] + 1e-9);
                    }
                }
            }
            // The returned path realizes the distance.
            let (u, v) = (0, n - 1);
            match g.shortest_path(u, v, metric).unwrap() {
                Some((dist, path)) => {
                    prop_assert!(close(dist, fw[u][v]));
                    prop_assert_eq!(path[0], u);
                    prop_assert_eq!(*path.last().unwrap(), v);
                    let walked: f64 = path
                        .windows(2)
                        .map(|w| if hop { 1.0 } else { g.edge(w[0], w[1]).expect("path uses edges").length })
                        .sum();
                    prop_assert!(close(walked, dist));
                }
                None => prop_assert!(fw[u][v].is_infinite()),
            }
        }
    }

    #[test]
    fn cut_partitions_edges_and_ignores_flip(seed in any::<u64>(), n in 2usize..=40, extra in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, extra);
        let f = random_labels(&mut rng, n);
        let cs = cut_structure(&g, &f).unwrap();
        let residual = remove_cut(&g, &f).unwrap();

        let cut: BTreeSet<_> = cs.cut_keys().into_iter().collect();
        let rest: BTreeSet<_> = residual.edges().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
        let all: BTreeSet<_> = g.edges().map(|e| (e.u.min(e.v), e.u.max(e.v))).collect();
        prop_assert!(cut.is_disjoint(&rest));
        prop_assert_eq!(cut.union(&rest).copied().collect::<BTreeSet<_>>(), all);
        for &(u, v) in &cut {
            prop_assert_ne!(f.get(u), f.get(v));
        }

        let flipped = cut_structure(&g, &f.flipped()).unwrap();
        prop_assert_eq!(flipped.cut_keys(), cs.cut_keys());
        prop_assert_eq!(&flipped.boundary, &cs.boundary);
        prop_assert_eq!(flipped.m, cs.m);
        prop_assert_eq!(flipped.l_cut, cs.l_cut);
    }

    #[test]
    fn removing_cut_leaves_label_regions(seed in any::<u64>(), n in 1usize..=40, extra in 0usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, extra);
        let f = random_labels(&mut rng, n);
        let mut comps = remove_cut(&g, &f).unwrap().connected_components();
        for c in comps.iter_mut() {
            c.sort();
        }
        comps.sort();
        prop_assert_eq!(&comps, &label_regions(&g, &f));
        let mut regions = cut_structure(&g, &f).unwrap().signal_components;
        for c in regions.iter_mut() {
            c.sort();
        }
        regions.sort();
        prop_assert_eq!(regions, comps);
    }

    #[test]
    fn edge_list_round_trip(seed in any::<u64>(), n in 1usize..=30, extra in 0usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(&mut rng, n, extra);
        let text = format_edge_list(&g);
        let back = parse_edge_list(&text).unwrap();
        prop_assert_eq!(format_edge_list(&back), text);
        prop_assert!(back.same_topology(&g));
    }
}
