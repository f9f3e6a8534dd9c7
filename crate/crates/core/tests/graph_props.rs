use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zk3col_core::attacks::{cheat_coloring, expected_catch, EdgeDistribution};
use zk3col_core::graph::{is_proper, monochromatic_edges, planted_3colorable, Coloring, Graph};
use zk3col_core::permutation::Permutation;
use zk3col_core::protocol::apply_permutation;

fn random_graph(n: usize, p: f64, rng: &mut ChaCha20Rng) -> Option<Graph> {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|_| rng.gen_bool(p))
        .collect();
    Graph::new(n, edges).ok()
}

#[test]
fn cheat_dominates_random_assignments() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for trial in 0..20 {
        let Some(g) = random_graph(rng.gen_range(6..14), 0.7, &mut rng) else { continue };
        let raw: Vec<f64> = (0..g.m()).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let q = EdgeDistribution::new(raw.iter().map(|w| w / total).collect()).unwrap();
        let best = expected_catch(&g, &cheat_coloring(&g, &q, trial).unwrap(), &q).unwrap();
        for _ in 0..1000 {
            let c = Coloring::new((0..g.n()).map(|_| rng.gen_range(1..=3)).collect()).unwrap();
            assert!(best <= expected_catch(&g, &c, &q).unwrap() + 1e-12);
        }
    }
}

#[test]
fn planted_graphs_are_proper_and_connected() {
    for seed in 0..200 {
        let (g, c) = planted_3colorable(3 + seed as usize % 30, 0.05 + (seed % 10) as f64 / 10.0, seed).unwrap();
        assert!(is_proper(&g, &c).unwrap());
        assert!(g.is_connected());
        assert!(monochromatic_edges(&g, &c).unwrap().is_empty());
    }
}

#[test]
fn permutation_maps_proper_to_proper() {
    for seed in 0..50 {
        let (g, c) = planted_3colorable(12, 0.4, seed).unwrap();
        for phi in Permutation::all(3).unwrap() {
            let d = apply_permutation(&phi, &c).unwrap();
            assert!(is_proper(&g, &d).unwrap());
        }
        let bad = Coloring::new(vec![1; 12]).unwrap();
        for phi in Permutation::all(3).unwrap() {
            assert!(!is_proper(&g, &apply_permutation(&phi, &bad).unwrap()).unwrap());
        }
    }
}

proptest! {
    #[test]
    fn dimacs_roundtrip(n in 2usize..15, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        if let Some(g) = random_graph(n, 0.5, &mut rng) {
            prop_assert_eq!(Graph::parse_dimacs(&g.to_dimacs()).unwrap(), g);
        }
    }

    #[test]
    fn graph_json_roundtrip(n in 2usize..15, seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        if let Some(g) = random_graph(n, 0.5, &mut rng) {
            let text = serde_json::to_string(&g).unwrap();
            prop_assert_eq!(serde_json::from_str::<Graph>(&text).unwrap(), g);
        }
    }
}
