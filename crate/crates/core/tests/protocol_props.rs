use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zk3col_core::agents::{BobSpec, EdgeSelector, PermutationSource, ProverStrategy, SimProver, SimVerifier};
use zk3col_core::graph::{is_proper, planted_3colorable, Coloring, Graph};
use zk3col_core::protocol::{cheat_acceptance, run_session, soundness_bound, stream_rng, SessionConfig, SessionVerdict};

fn k3() -> Graph {
    Graph::complete(3).unwrap()
}

#[test]
fn complete_for_every_permutation_and_edge() {
    // every permutation against every edge, on small planted graphs
    for seed in 0..20 {
        let (g, secret) = planted_3colorable(5 + seed as usize % 4, 0.6, seed).unwrap();
        for rank in 0..6 {
            let mut a = SimProver::new("h", ProverStrategy::Honest, secret.clone(), PermutationSource::scripted(3, vec![rank; g.m()]).unwrap(), 0);
            let mut b = SimVerifier::new("s", EdgeSelector::scripted(g.edges().to_vec()));
            let r = run_session(SessionConfig::new(g.clone(), seed).with_rounds(g.m()), &mut a, &mut b).unwrap();
            assert_eq!(r.verdict, SessionVerdict::Accepted);
        }
    }
}

#[test]
fn per_round_catch_equals_bad_edge_share() {
    // cheater on K3 with one bad edge: 1/3 per round; all-equal: always caught
    let g = k3();
    for (colors, b) in [(vec![1, 1, 2], 1.0f64), (vec![1, 2, 2], 1.0), (vec![3, 3, 3], 3.0)] {
        let c = Coloring::new(colors).unwrap();
        let mut a = SimProver::new("c", ProverStrategy::Cheat, c, PermutationSource::uniform(3, stream_rng(1, 1)).unwrap(), 0);
        let (mut bob, _) = SimVerifier::from_spec(&BobSpec::Uniform, 1).unwrap();
        let mut cfg = SessionConfig::new(g.clone(), 1).with_rounds(10_000);
        cfg.abort_on_reject = false;
        let r = run_session(cfg, &mut a, &mut bob).unwrap();
        let rejects = r.verdicts().iter().filter(|v| !v.is_accept()).count() as f64;
        let p = b / 3.0;
        let sigma = (p * (1.0 - p) / 10_000.0).sqrt();
        assert!((rejects / 10_000.0 - p).abs() <= 3.0 * sigma + 1e-12, "{rejects} for b={b}");
        assert_eq!(r.verdict, SessionVerdict::Rejected);
    }
}

#[test]
fn k3_acceptance_matches_closed_form() {
    // (2/3)^9 for a one-bad-edge cheater on K3 over m^2 rounds
    let g = k3();
    let c = Coloring::new(vec![1, 1, 2]).unwrap();
    let trials = 20_000;
    let mut accepted = 0;
    for i in 0..trials {
        let mut a = SimProver::new("c", ProverStrategy::Cheat, c.clone(), PermutationSource::uniform(3, stream_rng(i, 1)).unwrap(), 0);
        let (mut b, _) = SimVerifier::from_spec(&BobSpec::Uniform, i).unwrap();
        let r = run_session(SessionConfig::new(g.clone(), i), &mut a, &mut b).unwrap();
        accepted += u32::from(r.verdict == SessionVerdict::Accepted);
    }
    let exact = (2.0f64 / 3.0).powi(9);
    assert!((soundness_bound(3, 9).unwrap().exact - exact).abs() < 1e-15);
    assert!((cheat_acceptance(3, 1, 9).exact - exact).abs() < 1e-15);
    let rate = accepted as f64 / trials as f64;
    let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!((rate - exact).abs() <= 3.0 * sigma, "{rate} vs {exact}");
}

#[test]
fn transcripts_respect_structure() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for i in 0..200 {
        let (g, secret) = planted_3colorable(rng.gen_range(4..12), 0.5, i).unwrap();
        let cheat = i % 2 == 0;
        let c = if cheat { Coloring::new(vec![1; g.n()]).unwrap() } else { secret };
        let strategy = if cheat { ProverStrategy::Cheat } else { ProverStrategy::Honest };
        let mut a = SimProver::new("p", strategy, c.clone(), PermutationSource::uniform(3, stream_rng(i, 1)).unwrap(), 0);
        let (mut b, _) = SimVerifier::from_spec(&BobSpec::Uniform, i).unwrap();
        let r = run_session(SessionConfig::new(g.clone(), i).with_rounds(50), &mut a, &mut b).unwrap();
        for t in &r.transcripts {
            assert!(g.contains_edge(t.edge));
            assert_eq!((t.openings.0.vertex as usize, t.openings.1.vertex as usize), t.edge);
            assert_eq!(t.commitments.len(), g.n());
        }
        // nothing follows a reject
        if let Some(pos) = r.transcripts.iter().position(|t| !t.verdict.is_accept()) {
            assert_eq!(pos + 1, r.transcripts.len());
            assert_eq!(r.verdict, SessionVerdict::Rejected);
        } else {
            assert_eq!(r.verdict, SessionVerdict::Accepted);
            assert_eq!(r.rounds_played, 50);
            assert!(!cheat || is_proper(&g, &c).unwrap());
        }
    }
}

#[test]
fn sessions_are_reproducible() {
    let (g, secret) = planted_3colorable(10, 0.5, 1).unwrap();
    let run = || {
        let mut a = SimProver::new("h", ProverStrategy::Honest, secret.clone(), PermutationSource::uniform(3, stream_rng(9, 1)).unwrap(), 0);
        let (mut b, _) = SimVerifier::from_spec(&BobSpec::Recency { decay: 0.2, memory: 2 }, 9).unwrap();
        run_session(SessionConfig::new(g.clone(), 9), &mut a, &mut b).unwrap()
    };
    assert_eq!(run(), run());
}
