use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use zk3col_core::agents::{PermutationSource, TransitionModel};
use zk3col_core::lab::{
    aggregate_reports, analyze, award_ranking, chi_square_uniform, entropy_rate, fingerprint, fingerprint_distance, make_experiment_plan,
    parse_csv, repetition_rate, to_csv, transition_independence_test, AwardWeights, GroupKey, Stage, SymbolSequence, TestReport,
};

fn sample(model: &TransitionModel, len: usize, seed: u64) -> Vec<usize> {
    let mut src = PermutationSource::markov(model.clone(), ChaCha20Rng::seed_from_u64(seed)).unwrap();
    (0..len).map(|_| src.sample().unwrap().rank()).collect()
}

fn uniform(k: usize, len: usize, rng: &mut ChaCha20Rng) -> SymbolSequence {
    let states = [2, 6, 24][k - 2];
    SymbolSequence::new(k, (0..len).map(|_| rng.gen_range(0..states)).collect()).unwrap()
}

#[test]
fn uniform_p_values_reject_about_one_percent() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let runs = 10_000;
    let mut low = 0;
    for _ in 0..runs {
        low += usize::from(chi_square_uniform(&uniform(3, 300, &mut rng)).unwrap().p < 0.01);
    }
    let sigma = (runs as f64 * 0.01 * 0.99).sqrt();
    assert!((low as f64 - 100.0).abs() <= 3.0 * sigma, "{low} of {runs}");
}

#[test]
fn entropy_rates_match_theory() {
    let u = sample(&TransitionModel::uniform(3), 100_000, 2);
    let h = entropy_rate(&SymbolSequence::new(3, u).unwrap(), 0).unwrap();
    assert!((h - 6f64.log2()).abs() < 0.02, "{h}");
    let a = sample(&TransitionModel::avoider(3, 1.0), 100_000, 3);
    let h = entropy_rate(&SymbolSequence::new(3, a).unwrap(), 1).unwrap();
    assert!((h - 5f64.log2()).abs() < 0.02, "{h}");
    assert_eq!(entropy_rate(&SymbolSequence::new(4, vec![7; 500]).unwrap(), 1).unwrap(), 0.0);
}

#[test]
fn uniform_repetition_rate() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let r = repetition_rate(&uniform(3, 100_000, &mut rng)).unwrap();
    let sigma = (1.0 / 6.0 * 5.0 / 6.0 / 99_999.0f64).sqrt();
    assert!((r.observed - r.expected).abs() <= 3.0 * sigma);
}

#[test]
fn same_model_fingerprints_are_close() {
    let model = TransitionModel::cycle(3, 0.5);
    let a = fingerprint(&SymbolSequence::new(3, sample(&model, 10_000, 5)).unwrap()).unwrap();
    let b = fingerprint(&SymbolSequence::new(3, sample(&model, 10_000, 6)).unwrap()).unwrap();
    assert!(fingerprint_distance(&a, &b).unwrap() < 0.05);
    let other = fingerprint(&SymbolSequence::new(3, sample(&TransitionModel::avoider(3, 1.0), 10_000, 7)).unwrap()).unwrap();
    assert!(fingerprint_distance(&a, &other).unwrap() > 0.05);
}

#[test]
fn pooling_equals_concatenated_counts() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let a = uniform(3, 500, &mut rng);
    let b = uniform(3, 500, &mut rng);
    let reports = [analyze(&a).unwrap(), analyze(&b).unwrap()];
    let agg = aggregate_reports(&reports, GroupKey::All, &AwardWeights::default()).unwrap();
    let joined: Vec<usize> = a.symbols.iter().chain(&b.symbols).copied().collect();
    let direct = chi_square_uniform(&SymbolSequence::new(3, joined).unwrap()).unwrap();
    let pooled = agg.groups[0].pooled_uniform.unwrap();
    assert!((pooled.stat - direct.stat).abs() < 1e-9 && pooled.df == direct.df);
}

#[test]
fn single_report_aggregate() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let r = analyze(&uniform(3, 400, &mut rng)).unwrap();
    let agg = aggregate_reports(std::slice::from_ref(&r), GroupKey::All, &AwardWeights::default()).unwrap();
    assert_eq!(agg.k_bias_correlation, None);
    assert_eq!(agg.groups[0].pooled_uniform, r.chi2_uniform);
    assert_eq!(agg.groups[0].mean_uplift, r.uplift());
    assert!(aggregate_reports(&[], GroupKey::All, &AwardWeights::default()).is_err());
}

#[test]
fn bias_growing_with_k_gives_positive_correlation() {
    let mut reports = Vec::new();
    // stickiness rises with k, so the predictor's edge over chance does too
    for (i, (k, p)) in [(2, 0.1), (3, 0.4), (4, 0.8)].into_iter().enumerate() {
        for subject in 0..5 {
            let symbols = sample(&TransitionModel::identity_sticky(k, p), 300, (i * 10 + subject) as u64);
            let seq = SymbolSequence::labelled(k, symbols, &format!("s{subject}"), &format!("k{k}")).unwrap();
            reports.push(analyze(&seq).unwrap());
        }
    }
    let agg = aggregate_reports(&reports, GroupKey::K, &AwardWeights::default()).unwrap();
    assert!(agg.k_bias_correlation.unwrap() > 0.0, "{agg:?}");
}

#[test]
fn plans_split_history_condition_evenly() {
    let visible = (0..10_000).filter(|i| make_experiment_plan(&format!("p{i}"), 42).history_visible).count();
    assert!((visible as f64 - 5000.0).abs() <= 3.0 * 50.0, "{visible}");
    for i in 0..100 {
        let plan = make_experiment_plan(&format!("p{i}"), i);
        assert_eq!(plan, make_experiment_plan(&format!("p{i}"), i));
        let names: Vec<&str> = plan.stages.iter().map(Stage::name).collect();
        assert_eq!(names, ["test1", "test2", "test3", "debrief", "test4"]);
        assert_eq!(plan.stages[2].zkp_config(), plan.stages[4].zkp_config());
        assert!(plan.stages[2].reports_gated() && !plan.stages[4].reports_gated());
    }
}

#[test]
fn csv_roundtrip() {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let seqs: Vec<SymbolSequence> = (2..=4)
        .map(|k| {
            let s = uniform(k, 50, &mut rng);
            SymbolSequence::labelled(k, s.symbols, "alice", &format!("t{k}")).unwrap()
        })
        .collect();
    let text = format!("# comment\n{}", to_csv(&seqs));
    assert_eq!(parse_csv(&text).unwrap(), seqs);
    assert!(parse_csv("a,t,3,9\n").is_err());
    assert!(parse_csv("a,t,3\n").is_err());
}

fn cohort(seed: u64) -> Vec<TestReport> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..6)
        .map(|i| {
            let p = rng.gen_range(0.0..1.0);
            let seq = SymbolSequence::labelled(3, sample(&TransitionModel::avoider(3, p), 200, seed * 10 + i), &format!("sub{i}"), "t3").unwrap();
            analyze(&seq).unwrap()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn award_invariant_under_relabel_and_reorder(seed in 0u64..1000, shift in 1usize..6, rot in 0usize..6) {
        let reports = cohort(seed);
        let w = AwardWeights::default();
        let base: BTreeMap<String, (usize, f64)> =
            award_ranking(&reports, &w).into_iter().map(|e| (e.subject, (e.rank, e.score))).collect();
        // relabel sub{i} -> name{(i + shift) % 6}, then rotate the list
        let rename = |s: &str| format!("name{}", (s[3..].parse::<usize>().unwrap() + shift) % 6);
        let mut moved: Vec<TestReport> = reports
            .iter()
            .cloned()
            .map(|mut r| {
                r.subject = rename(&r.subject);
                r
            })
            .collect();
        moved.rotate_left(rot);
        let after: BTreeMap<String, (usize, f64)> =
            award_ranking(&moved, &w).into_iter().map(|e| (e.subject, (e.rank, e.score))).collect();
        for (subject, v) in &base {
            prop_assert_eq!(after[&rename(subject)], *v);
        }
    }

    #[test]
    fn entropy_bounded(symbols in proptest::collection::vec(0usize..6, 30..300)) {
        let seq = SymbolSequence::new(3, symbols).unwrap();
        for order in [0, 1] {
            let h = entropy_rate(&seq, order).unwrap();
            prop_assert!((0.0..=6f64.log2() + 1e-12).contains(&h));
        }
        if let Ok(c) = transition_independence_test(&seq) {
            prop_assert!((0.0..=1.0).contains(&c.p));
        }
    }
}
