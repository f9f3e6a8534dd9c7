use serde_json::Value;

use zk3col_wasm::{analyze_ranks, analyze_ranks_json, leak_curve, leak_curve_json, soundness_curve, soundness_curve_json};

/// Odd wheel: hub 1 joined to the 5-cycle 2..6. Not 3-colorable.
const WHEEL5: &str = "p edge 6 10\ne 1 2\ne 1 3\ne 1 4\ne 1 5\ne 1 6\ne 2 3\ne 3 4\ne 4 5\ne 5 6\ne 6 2\n";

#[test]
fn k4_survival_tracks_closed_form() {
    let trials = 4000;
    let c = soundness_curve("k4", 30, trials, 7).unwrap();
    assert_eq!((c.n, c.m), (4, 6));
    assert_eq!(c.rounds.first(), Some(&0));
    assert_eq!(c.rounds.last(), Some(&30));
    for (i, &r) in c.rounds.iter().enumerate() {
        // every 3-coloring of K4 has exactly one monochromatic edge at best
        let p = (5.0f64 / 6.0).powi(r as i32);
        assert!((c.exact[i] - p).abs() < 1e-12);
        assert!((c.bound[i] - p).abs() < 1e-12);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((c.simulated[i] - p).abs() <= 4.0 * sigma + 1e-12, "R = {r}: {} vs {p}", c.simulated[i]);
    }
}

#[test]
fn wheel_curve_sits_under_the_bound() {
    let c = soundness_curve(WHEEL5, 50, 500, 1).unwrap();
    assert_eq!((c.n, c.m), (6, 10));
    assert_eq!(c.simulated[0], 1.0);
    for i in 0..c.rounds.len() {
        assert!(c.exact[i] <= c.bound[i] + 1e-12);
        if i > 0 {
            assert!(c.simulated[i] <= c.simulated[i - 1]);
        }
    }
}

#[test]
fn soundness_rejects_bad_input() {
    assert!(soundness_curve("k9", 10, 10, 0).is_err());
    assert!(soundness_curve("k4", 0, 10, 0).is_err());
    assert!(soundness_curve("k4", 10, 0, 0).is_err());
    let v: Value = serde_json::from_str(&soundness_curve_json("k4", 10, 0, 0)).unwrap();
    assert!(v["error"].as_str().unwrap().contains("trials"));
}

#[test]
fn leak_grows_with_stickiness() {
    let c = leak_curve(12, 0.5, 60, 20, 5, 3).unwrap();
    assert_eq!(c.stickiness, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    // uniform permutations: every vote ties, nothing is covered
    assert_eq!(c.coverage[0], 0.0);
    assert_eq!(c.accuracy[0], None);
    // always the identity: opened colors are the secret colors
    assert_eq!(c.coverage[4], 1.0);
    assert_eq!(c.accuracy[4], Some(1.0));
    assert_eq!(c.full_recoveries[4], 20);
    assert!(c.accuracy[2].unwrap() > 0.8, "{:?}", c.accuracy);
}

#[test]
fn leak_rejects_bad_input() {
    assert!(leak_curve(12, 0.5, 60, 0, 5, 3).is_err());
    assert!(leak_curve(12, 0.5, 60, 5, 1, 3).is_err());
    assert!(leak_curve(12, 1.5, 60, 5, 3, 3).is_err());
    let v: Value = serde_json::from_str(&leak_curve_json(12, 0.5, 60, 2, 3, 3)).unwrap();
    assert_eq!(v["stickiness"].as_array().unwrap().len(), 3);
}

#[test]
fn alternating_ranks_are_flagged() {
    let text = "0,1 ".repeat(60);
    let a = analyze_ranks(3, &text).unwrap();
    assert_eq!(a.report.length, 120);
    // the order-1 predictor is right on every symbol after the first
    assert!(a.report.predictor_hit_rate.order1 > 0.95);
    assert_eq!(a.report.repetition_rate.observed, 0.0);
    assert!(a.detectability > 0.9, "{}", a.detectability);
}

#[test]
fn rank_errors_are_reported() {
    assert!(analyze_ranks(3, "0,1,2").unwrap_err().contains("10"));
    assert!(analyze_ranks(3, &"6 ".repeat(20)).is_err());
    assert!(analyze_ranks(3, "0,x").unwrap_err().contains("`x`"));
    let v: Value = serde_json::from_str(&analyze_ranks_json(9, "0")).unwrap();
    assert!(v.get("error").is_some());
    let ok: Value = serde_json::from_str(&analyze_ranks_json(2, &"0 1 1 0 ".repeat(10))).unwrap();
    assert_eq!(ok["report"]["k"], 2);
}
