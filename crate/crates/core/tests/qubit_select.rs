use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::Rng;

use qksvm::exec::Execution;
use qksvm::qubit_select::{best_path, grid_graph, normalize_metrics, score_path, select_qubits, DeviceGraph, Edge, Node, PathScoreConfig};
use qksvm::rng::stream;

/// Grid with random metrics on every node and edge.
fn metric_grid(rows: u32, cols: u32, removed: &[u32], seed: u64) -> DeviceGraph {
    let bare = grid_graph(rows, cols, removed).unwrap();
    let mut rng = stream(seed, &[]);
    let mut draw = |names: &[&str]| -> BTreeMap<String, f64> { names.iter().map(|n| (n.to_string(), rng.random_range(0.001..1.0))).collect() };
    let nodes: Vec<Node> = bare.nodes().iter().map(|n| Node { id: n.id, metrics: draw(&["T1", "T2", "p00", "p11", "rb_error"]) }).collect();
    let edges: Vec<Edge> = bare.edges().iter().map(|e| Edge { a: e.a, b: e.b, metrics: draw(&["xeb_error"]) }).collect();
    DeviceGraph::new(nodes, edges).unwrap()
}

fn all_paths(graph: &DeviceGraph, k: usize) -> Vec<Vec<u32>> {
    fn extend(graph: &DeviceGraph, k: usize, path: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if path.len() == k {
            out.push(path.clone());
            return;
        }
        for next in graph.neighbors(*path.last().unwrap()) {
            if !path.contains(&next) {
                path.push(next);
                extend(graph, k, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for n in graph.nodes() {
        extend(graph, k, &mut vec![n.id], &mut out);
    }
    out
}

fn brute_force(graph: &DeviceGraph, k: usize, cfg: &PathScoreConfig) -> (Vec<u32>, f64) {
    let mut best: Option<(Vec<u32>, f64)> = None;
    for p in all_paths(graph, k).into_iter().filter(|p| p[0] < p[k - 1]) {
        let s = score_path(&p, graph, cfg).unwrap();
        if best.as_ref().is_none_or(|(bp, bs)| s > *bs || (s == *bs && p < *bp)) {
            best = Some((p, s));
        }
    }
    best.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversal_does_not_change_the_score(seed in any::<u64>(), k in 2..7usize, pick in any::<prop::sample::Index>()) {
        let cfg = PathScoreConfig::default();
        let g = normalize_metrics(&metric_grid(3, 3, &[], seed), &cfg).unwrap();
        let paths = all_paths(&g, k);
        let p = pick.get(&paths).clone();
        let rev: Vec<u32> = p.iter().rev().copied().collect();
        prop_assert_eq!(score_path(&p, &g, &cfg).unwrap(), score_path(&rev, &g, &cfg).unwrap());
    }

    #[test]
    fn argmax_is_invariant_under_weight_scaling(seed in any::<u64>(), k in 2..6usize, factor in 0.01..100.0f64) {
        let cfg = PathScoreConfig::default();
        let scaled = cfg.scaled(factor);
        let g = metric_grid(3, 3, &[4], seed);
        let a = select_qubits(&g, k, &cfg, Execution::Sequential).unwrap().0;
        let b = select_qubits(&g, k, &scaled, Execution::Sequential).unwrap().0;
        prop_assert_eq!(a.path, b.path);
    }

    #[test]
    fn raising_a_fidelity_metric_does_not_lower_the_score(seed in any::<u64>(), k in 2..6usize, bump in 0.0..1.0f64) {
        let cfg = PathScoreConfig::default();
        let g = normalize_metrics(&metric_grid(2, 4, &[], seed), &cfg).unwrap();
        let best = best_path(&g, k, &cfg, Execution::Sequential).unwrap();
        let target = best.path[0];
        let nodes: Vec<Node> = g
            .nodes()
            .iter()
            .map(|n| {
                let mut n = n.clone();
                if n.id == target {
                    *n.metrics.get_mut("T1").unwrap() += bump;
                }
                n
            })
            .collect();
        let raised = DeviceGraph::new(nodes, g.edges().to_vec()).unwrap();
        prop_assert!(score_path(&best.path, &raised, &cfg).unwrap() >= best.score);
    }

    #[test]
    fn best_path_matches_brute_force(seed in any::<u64>(), k in 2..7usize) {
        let cfg = PathScoreConfig::default();
        let g = normalize_metrics(&metric_grid(3, 4, &[0, 11], seed), &cfg).unwrap();
        let (want, score) = brute_force(&g, k, &cfg);
        let got = best_path(&g, k, &cfg, Execution::Sequential).unwrap();
        prop_assert_eq!(got.path, want);
        prop_assert_eq!(got.score, score);
    }
}

#[test]
fn two_by_three_grid_with_hand_set_metrics() {
    // node ids 0 1 2 / 3 4 5; the right column and bottom row are strong
    let t1 = [10.0, 20.0, 90.0, 30.0, 80.0, 100.0];
    let nodes: Vec<Node> = (0..6).map(|id| Node { id, metrics: [("T1".to_string(), t1[id as usize])].into() }).collect();
    let xeb = |a: u32, b: u32| if (a, b) == (4, 5) || (a, b) == (2, 5) { 0.005 } else { 0.02 };
    let bare = grid_graph(2, 3, &[]).unwrap();
    let edges: Vec<Edge> = bare.edges().iter().map(|e| Edge { a: e.a, b: e.b, metrics: [("xeb_error".to_string(), xeb(e.a, e.b))].into() }).collect();
    let g = DeviceGraph::new(nodes, edges).unwrap();
    let cfg = PathScoreConfig::default();
    let normalized = normalize_metrics(&g, &cfg).unwrap();
    for k in 2..=6 {
        let got = best_path(&normalized, k, &cfg, Execution::Sequential).unwrap();
        let (want, score) = brute_force(&normalized, k, &cfg);
        assert_eq!(got.path, want);
        assert_eq!(got.score, score);
    }
    assert_eq!(best_path(&normalized, 3, &cfg, Execution::Sequential).unwrap().path, vec![2, 5, 4]);
}

#[test]
fn two_node_paths_match_an_edge_scan() {
    let cfg = PathScoreConfig::default();
    let g = normalize_metrics(&metric_grid(4, 4, &[5], 3), &cfg).unwrap();
    let term = |name: &str, x: f64| cfg.metrics[name].term(x);
    let node_score = |id: u32| g.node(id).unwrap().metrics.iter().map(|(k, v)| term(k, *v)).sum::<f64>();
    let mut best: Option<(f64, Vec<u32>)> = None;
    for e in g.edges() {
        let s = node_score(e.a) + node_score(e.b) + e.metrics.iter().map(|(k, v)| term(k, *v)).sum::<f64>();
        let p = vec![e.a.min(e.b), e.a.max(e.b)];
        if best.as_ref().is_none_or(|(bs, _)| s > *bs) {
            best = Some((s, p));
        }
    }
    let (score, path) = best.unwrap();
    let got = best_path(&g, 2, &cfg, Execution::Sequential).unwrap();
    assert_eq!(got.path, path);
    assert!((got.score - score).abs() <= 1e-12);
}

#[test]
fn sycamore_grid_beats_random_walks() {
    let graph_file = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sycamore23.json");
    let g = DeviceGraph::load(&graph_file).unwrap();
    let cfg = PathScoreConfig::default();
    let normalized = normalize_metrics(&g, &cfg).unwrap();
    let k = 17;
    let best = best_path(&normalized, k, &cfg, Execution::default()).unwrap();
    assert_eq!(best.path.len(), k);
    normalized.validate_path(&best.path).unwrap();
    assert_eq!(best, best_path(&normalized, k, &cfg, Execution::Sequential).unwrap());

    let ids: Vec<u32> = normalized.nodes().iter().map(|n| n.id).collect();
    let mut rng = stream(17, &[]);
    let mut completed = 0;
    for _ in 0..100_000 {
        let mut path = vec![*ids.choose(&mut rng).unwrap()];
        while path.len() < k {
            let options: Vec<u32> = normalized.neighbors(*path.last().unwrap()).into_iter().filter(|n| !path.contains(n)).collect();
            match options.choose(&mut rng) {
                Some(&n) => path.push(n),
                None => break,
            }
        }
        if path.len() == k {
            completed += 1;
            assert!(score_path(&path, &normalized, &cfg).unwrap() <= best.score + 1e-12);
        }
    }
    assert!(completed > 0);
}

#[test]
fn too_long_paths_are_rejected() {
    let g = metric_grid(2, 2, &[], 1);
    assert!(select_qubits(&g, 5, &PathScoreConfig::default(), Execution::Sequential).is_err());
    assert!(select_qubits(&g, 1, &PathScoreConfig::default(), Execution::Sequential).is_err());
}
