//! Statistical battery for human-generated permutation sequences: goodness
//! of fit, transition independence, repetition, entropy, online
//! predictability, fingerprints, cohort aggregation and the experiment plan.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{fit_markov, DEFAULT_SMOOTHING};
use crate::error::LabError;
use crate::permutation::factorial;
use crate::stats::{jensen_shannon, miller_madow_bits, pearson_correlation, pearson_uniform, ChiSquare};

/// Expected-count floor for chi-square cells.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub k: usize,
    pub symbols: Vec<usize>,
    pub subject: String,
    pub test: String,
    #[serde(default)]
    pub history_visible: bool,
}

impl SymbolSequence {
    pub fn new(k: usize, symbols: Vec<usize>) -> Result<Self, LabError> {
        Self::labelled(k, symbols, "anonymous", "free")
    }

    pub fn labelled(k: usize, symbols: Vec<usize>, subject: &str, test: &str) -> Result<Self, LabError> {
        if !(2..=4).contains(&k) {
            return Err(LabError::BadK(k));
        }
        let states = factorial(k);
        if let Some(&symbol) = symbols.iter().find(|&&s| s >= states) {
            return Err(LabError::SymbolOutOfRange { symbol, k });
        }
        Ok(SymbolSequence {
            k,
            symbols,
            subject: subject.to_string(),
            test: test.to_string(),
            history_visible: false,
        })
    }

    pub fn states(&self) -> usize {
        factorial(self.k)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    fn require(&self, need: usize) -> Result<(), LabError> {
        if self.len() < need {
            return Err(LabError::TooShort { len: self.len(), need });
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.states()];
        for &s in &self.symbols {
            c[s] += 1;
        }
        c
    }

    pub fn transition_counts(&self) -> Vec<Vec<u64>> {
        let s = self.states();
        let mut t = vec![vec![0u64; s]; s];
        for w in self.symbols.windows(2) {
            t[w[0]][w[1]] += 1;
        }
        t
    }
}

/// Pearson statistic against the uniform distribution on `k!` ranks.
pub fn chi_square_uniform(seq: &SymbolSequence) -> Result<ChiSquare, LabError> {
    seq.require(5 * seq.states())?;
    Ok(pearson_uniform(&seq.counts()))
}

/// Chi-square test of independence on the transition table.
///
/// Empty rows and columns are dropped. Rows (then columns) whose smallest
/// expected count is below 5 are merged into one pooled row, and the pool
/// absorbs the smallest remaining row until it clears the floor.
pub fn transition_independence_test(seq: &SymbolSequence) -> Result<ChiSquare, LabError> {
    seq.require(3)?;
    independence_test(&seq.transition_counts()).ok_or(LabError::TooShort {
        len: seq.len(),
        need: 5 * seq.states() * seq.states(),
    })
}

/// Independence test on an arbitrary contingency table; `None` if fewer than
/// two rows or columns survive pooling.
pub fn independence_test(table: &[Vec<u64>]) -> Option<ChiSquare> {
    let mut t: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    t.retain(|r| r.iter().sum::<f64>() > 0.0);
    t = transpose(t);
    t.retain(|r| r.iter().sum::<f64>() > 0.0);
    // t is column-major here; orientation does not matter for the statistic
    loop {
        if t.len() < 2 || t.first().map_or(0, Vec::len) < 2 {
            return None;
        }
        let row_tot: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
        let col_tot: Vec<f64> = (0..t[0].len()).map(|j| t.iter().map(|r| r[j]).sum()).collect();
        let total: f64 = row_tot.iter().sum();
        let min_row = row_tot.iter().copied().fold(f64::INFINITY, f64::min);
        let min_col = col_tot.iter().copied().fold(f64::INFINITY, f64::min);
        if min_row * min_col / total >= MIN_EXPECTED {
            break;
        }
        // merge the sparsest category into the next sparsest of the same kind
        if min_col < min_row {
            t = transpose(t);
        }
        merge_two_smallest(&mut t);
    }
    let rows = t.len();
    let cols = t[0].len();
    let row_tot: Vec<f64> = t.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..cols).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = row_tot.iter().sum();
    let mut stat = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let e = row_tot[i] * col_tot[j] / total;
            stat += (o - e).powi(2) / e;
        }
    }
    Some(ChiSquare::new(stat, (rows - 1) * (cols - 1)))
}

fn transpose(t: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let cols = t.first().map_or(0, Vec::len);
    (0..cols).map(|j| t.iter().map(|r| r[j]).collect()).collect()
}

fn merge_two_smallest(t: &mut Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[a].iter().sum::<f64>().total_cmp(&t[b].iter().sum::<f64>()));
    let (a, b) = (order[0].min(order[1]), order[0].max(order[1]));
    let removed = t.remove(b);
    for (x, y) in t[a].iter_mut().zip(removed) {
        *x += y;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub observed: f64,
    pub expected: f64,
}

pub fn repetition_rate(seq: &SymbolSequence) -> Result<Repetition, LabError> {
    seq.require(2)?;
    let repeats = seq.symbols.windows(2).filter(|w| w[0] == w[1]).count();
    Ok(Repetition {
        observed: repeats as f64 / (seq.len() - 1) as f64,
        expected: 1.0 / seq.states() as f64,
    })
}

/// Plug-in entropy (order 0) or conditional entropy given the previous
/// symbol (order 1), Miller-Madow corrected, in bits per symbol.
pub fn entropy_rate(seq: &SymbolSequence, order: u8) -> Result<f64, LabError> {
    seq.require(30)?;
    let max = (seq.states() as f64).log2();
    let h = if order == 0 {
        miller_madow_bits(&seq.counts())
    } else {
        let table = seq.transition_counts();
        let total = (seq.len() - 1) as f64;
        table
            .iter()
            .map(|row| row.iter().sum::<u64>() as f64 / total * miller_madow_bits(row))
            .sum()
    };
    Ok(h.clamp(0.0, max))
}

fn argmax_lowest(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Online accuracy of predicting each symbol from the ones before it.
///
/// At step `t >= 1` the prediction is the most frequent symbol (order 0) or
/// the most frequent successor of `seq[t-1]` (order 1) among symbols `< t`;
/// ties go to the lowest rank. Additive smoothing does not move the argmax.
pub fn predictor_hit_rate(seq: &SymbolSequence, order: u8) -> Result<f64, LabError> {
    seq.require(10)?;
    let s = seq.states();
    let mut marginal = vec![0u64; s];
    let mut table = vec![vec![0u64; s]; s];
    let mut hits = 0usize;
    for t in 0..seq.len() {
        let x = seq.symbols[t];
        if t > 0 {
            let prev = seq.symbols[t - 1];
            let guess = if order == 0 { argmax_lowest(&marginal) } else { argmax_lowest(&table[prev]) };
            if guess == x {
                hits += 1;
            }
            table[prev][x] += 1;
        }
        marginal[x] += 1;
    }
    Ok(hits as f64 / (seq.len() - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub subject: String,
    pub k: usize,
    pub marginal: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
}

pub fn fingerprint(seq: &SymbolSequence) -> Result<Fingerprint, LabError> {
    seq.require(2)?;
    let model = fit_markov(&seq.symbols, seq.k, DEFAULT_SMOOTHING).map_err(|_| LabError::TooShort { len: seq.len(), need: 2 })?;
    Ok(Fingerprint {
        subject: seq.subject.clone(),
        k: seq.k,
        marginal: model.initial,
        transitions: model.rows,
    })
}

/// Mean of the marginal JSD and the row-averaged transition JSD, in `[0, 1]`.
pub fn fingerprint_distance(a: &Fingerprint, b: &Fingerprint) -> Result<f64, LabError> {
    if a.k != b.k {
        return Err(LabError::KMismatch(a.k, b.k));
    }
    let rows = a.transitions.len() as f64;
    let row_jsd: f64 = a
        .transitions
        .iter()
        .zip(&b.transitions)
        .map(|(x, y)| jensen_shannon(x, y))
        .sum::<f64>()
        / rows;
    Ok((0.5 * (jensen_shannon(&a.marginal, &b.marginal) + row_jsd)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitRates {
    pub order0: f64,
    pub order1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub subject: String,
    pub test: String,
    pub k: usize,
    pub length: usize,
    pub chi2_uniform: Option<ChiSquare>,
    pub chi2_transition: Option<ChiSquare>,
    /// Conditional (order-1) entropy rate, bits per symbol.
    pub entropy_rate: Option<f64>,
    pub entropy_order0: Option<f64>,
    pub repetition_rate: Repetition,
    pub predictor_hit_rate: HitRates,
    pub symbol_counts: Vec<u64>,
    pub transition_counts: Vec<Vec<u64>>,
}

impl TestReport {
    pub fn chance(&self) -> f64 {
        1.0 / factorial(self.k) as f64
    }

    /// Best predictor's hit rate above chance.
    pub fn uplift(&self) -> f64 {
        self.predictor_hit_rate.order0.max(self.predictor_hit_rate.order1) - self.chance()
    }
}

/// Runs every test whose length precondition holds. Needs at least 10 symbols.
pub fn analyze(seq: &SymbolSequence) -> Result<TestReport, LabError> {
    seq.require(10)?;
    Ok(TestReport {
        subject: seq.subject.clone(),
        test: seq.test.clone(),
        k: seq.k,
        length: seq.len(),
        chi2_uniform: chi_square_uniform(seq).ok(),
        chi2_transition: transition_independence_test(seq).ok(),
        entropy_rate: entropy_rate(seq, 1).ok(),
        entropy_order0: entropy_rate(seq, 0).ok(),
        repetition_rate: repetition_rate(seq)?,
        predictor_hit_rate: HitRates {
            order0: predictor_hit_rate(seq, 0)?,
            order1: predictor_hit_rate(seq, 1)?,
        },
        symbol_counts: seq.counts(),
        transition_counts: seq.transition_counts(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwardWeights {
    pub predictor_uplift: f64,
    pub transition_deficit: f64,
    pub uniformity_deficit: f64,
}

impl Default for AwardWeights {
    fn default() -> Self {
        AwardWeights {
            predictor_uplift: 0.4,
            transition_deficit: 0.3,
            uniformity_deficit: 0.3,
        }
    }
}

/// Detectability of one report: higher means less random. Missing tests
/// count as no evidence.
pub fn detectability(r: &TestReport, w: &AwardWeights) -> f64 {
    let uplift = (r.uplift() / (1.0 - r.chance())).clamp(0.0, 1.0);
    let deficit = |c: &Option<ChiSquare>| c.map_or(0.0, |c| 1.0 - c.p);
    w.predictor_uplift * uplift + w.transition_deficit * deficit(&r.chi2_transition) + w.uniformity_deficit * deficit(&r.chi2_uniform)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    All,
    K,
    Subject,
    Test,
}

impl GroupKey {
    fn of(&self, r: &TestReport) -> String {
        match self {
            GroupKey::All => "all".into(),
            GroupKey::K => format!("k={}", r.k),
            GroupKey::Subject => r.subject.clone(),
            GroupKey::Test => r.test.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub key: String,
    pub reports: usize,
    pub k: Option<usize>,
    pub symbols: u64,
    /// Tests re-run on pooled counts; only defined when all members share `k`.
    pub pooled_uniform: Option<ChiSquare>,
    pub pooled_transition: Option<ChiSquare>,
    pub mean_hit_rate: HitRates,
    pub mean_uplift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwardEntry {
    /// Competition rank; tied scores share a rank.
    pub rank: usize,
    pub subject: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub groups: Vec<GroupSummary>,
    pub mean_hit_rate_by_k: BTreeMap<usize, f64>,
    pub mean_uplift_by_k: BTreeMap<usize, f64>,
    /// Pearson correlation between k and the mean uplift per k; absent with
    /// fewer than two distinct k or zero variance.
    pub k_bias_correlation: Option<f64>,
    pub award: Vec<AwardEntry>,
    pub weights: AwardWeights,
}

pub fn aggregate_reports(reports: &[TestReport], key: GroupKey, weights: &AwardWeights) -> Result<AggregateReport, LabError> {
    if reports.is_empty() {
        return Err(LabError::Empty);
    }
    let mut groups: BTreeMap<String, Vec<&TestReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(key.of(r)).or_default().push(r);
    }
    let summaries = groups.into_iter().map(|(key, members)| summarize(key, &members)).collect();

    let mut by_k: BTreeMap<usize, Vec<&TestReport>> = BTreeMap::new();
    for r in reports {
        by_k.entry(r.k).or_default().push(r);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_hit_rate_by_k: BTreeMap<usize, f64> = by_k
        .iter()
        .map(|(&k, rs)| {
            let best: Vec<f64> = rs.iter().map(|r| r.predictor_hit_rate.order0.max(r.predictor_hit_rate.order1)).collect();
            (k, mean(&best))
        })
        .collect();
    let mean_uplift_by_k: BTreeMap<usize, f64> = by_k
        .iter()
        .map(|(&k, rs)| (k, mean(&rs.iter().map(|r| r.uplift()).collect::<Vec<_>>())))
        .collect();
    let ks: Vec<f64> = mean_uplift_by_k.keys().map(|&k| k as f64).collect();
    let ups: Vec<f64> = mean_uplift_by_k.values().copied().collect();

    Ok(AggregateReport {
        groups: summaries,
        mean_hit_rate_by_k,
        mean_uplift_by_k,
        k_bias_correlation: pearson_correlation(&ks, &ups),
        award: award_ranking(reports, weights),
        weights: *weights,
    })
}

fn summarize(key: String, members: &[&TestReport]) -> GroupSummary {
    let n = members.len() as f64;
    let k = members[0].k;
    let same_k = members.iter().all(|r| r.k == k);
    let (pooled_uniform, pooled_transition) = if same_k {
        let s = factorial(k);
        let mut counts = vec![0u64; s];
        let mut table = vec![vec![0u64; s]; s];
        for r in members {
            for (c, x) in counts.iter_mut().zip(&r.symbol_counts) {
                *c += x;
            }
            for (row, src) in table.iter_mut().zip(&r.transition_counts) {
                for (c, x) in row.iter_mut().zip(src) {
                    *c += x;
                }
            }
        }
        let total: u64 = counts.iter().sum();
        let uniform = (total as usize >= 5 * s).then(|| pearson_uniform(&counts));
        (uniform, independence_test(&table))
    } else {
        (None, None)
    };
    GroupSummary {
        key,
        reports: members.len(),
        k: same_k.then_some(k),
        symbols: members.iter().map(|r| r.length as u64).sum(),
        pooled_uniform,
        pooled_transition,
        mean_hit_rate: HitRates {
            order0: members.iter().map(|r| r.predictor_hit_rate.order0).sum::<f64>() / n,
            order1: members.iter().map(|r| r.predictor_hit_rate.order1).sum::<f64>() / n,
        },
        mean_uplift: members.iter().map(|r| r.uplift()).sum::<f64>() / n,
    }
}

/// Subjects ordered from least to most detectable (the most random first).
pub fn award_ranking(reports: &[TestReport], weights: &AwardWeights) -> Vec<AwardEntry> {
    let mut per_subject: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in reports {
        per_subject.entry(&r.subject).or_default().push(detectability(r, weights));
    }
    let mut scored: Vec<(String, f64)> = per_subject
        .into_iter()
        .map(|(s, xs)| {
            // sort before summing so the score does not depend on report order
            let mut xs = xs;
            xs.sort_by(f64::total_cmp);
            (s.to_string(), xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut out: Vec<AwardEntry> = Vec::with_capacity(scored.len());
    for (i, (subject, score)) in scored.into_iter().enumerate() {
        let rank = match out.last() {
            Some(prev) if prev.score == score => prev.rank,
            _ => i + 1,
        };
        out.push(AwardEntry { rank, subject, score });
    }
    out
}

/// Parses `subject,test,k,symbol` rows (optional header) into sequences,
/// grouped by `(subject, test, k)` in order of first appearance.
pub fn parse_csv(text: &str) -> Result<Vec<SymbolSequence>, LabError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut order: Vec<(String, String, usize)> = Vec::new();
    let mut data: BTreeMap<(String, String, usize), Vec<usize>> = BTreeMap::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| LabError::Row { line, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(LabError::Row {
                line,
                message: format!("expected 4 fields, got {}", rec.len()),
            });
        }
        if idx == 0 && rec.get(0) == Some("subject") {
            continue;
        }
        let k: usize = rec[2].parse().map_err(|_| LabError::Row { line, message: format!("bad k `{}`", &rec[2]) })?;
        let sym: usize = rec[3].parse().map_err(|_| LabError::Row { line, message: format!("bad symbol `{}`", &rec[3]) })?;
        if !(2..=4).contains(&k) || sym >= factorial(k) {
            return Err(LabError::Row {
                line,
                message: format!("symbol {sym} invalid for k = {k}"),
            });
        }
        let key = (rec[0].to_string(), rec[1].to_string(), k);
        if !data.contains_key(&key) {
            order.push(key.clone());
        }
        data.entry(key).or_default().push(sym);
    }
    order
        .into_iter()
        .map(|key| {
            let symbols = data.remove(&key).unwrap_or_default();
            SymbolSequence::labelled(key.2, symbols, &key.0, &key.1)
        })
        .collect()
}

pub fn to_csv(seqs: &[SymbolSequence]) -> String {
    let mut out = String::from("subject,test,k,symbol\n");
    for s in seqs {
        for x in &s.symbols {
            out.push_str(&format!("{},{},{},{}\n", s.subject, s.test, s.k, x));
        }
    }
    out
}

pub const DEFAULT_ZKP_ROUNDS: usize = 300;
pub const FREE_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instruction {
    Blinded,
    Informed,
}

impl Instruction {
    pub fn text(&self) -> &'static str {
        match self {
            Instruction::Blinded => {
                "Enter permutations one at a time, as unpredictably as you can. \
                 They will be used as key material in a security application."
            }
            Instruction::Informed => {
                "You are the prover in a graph 3-coloring zero-knowledge proof. \
                 Each permutation relabels your secret coloring before it is committed; \
                 any pattern in your choices lets the verifier learn the coloring."
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZkpStageConfig {
    pub k: usize,
    pub rounds: usize,
    pub graph_n: usize,
    pub edge_prob: f64,
    pub graph_seed: u64,
    pub award: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "stage")]
pub enum Stage {
    Test1 { k: usize, draws: usize },
    Test2 { blocks: Vec<(usize, usize)> },
    Test3 { config: ZkpStageConfig, instruction: Instruction },
    Debrief,
    Test4 { config: ZkpStageConfig, instruction: Instruction },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Test1 { .. } => "test1",
            Stage::Test2 { .. } => "test2",
            Stage::Test3 { .. } => "test3",
            Stage::Debrief => "debrief",
            Stage::Test4 { .. } => "test4",
        }
    }

    /// Whether bias dashboards are withheld during this stage.
    pub fn reports_gated(&self) -> bool {
        matches!(self, Stage::Test3 { instruction: Instruction::Blinded, .. })
    }

    pub fn zkp_config(&self) -> Option<&ZkpStageConfig> {
        match self {
            Stage::Test3 { config, .. } | Stage::Test4 { config, .. } => Some(config),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub subject: String,
    pub seed: u64,
    pub history_visible: bool,
    pub stages: Vec<Stage>,
}

/// Deterministic per `(subject, seed)`.
pub fn make_experiment_plan(subject: &str, seed: u64) -> ExperimentPlan {
    let mut h = Sha256::new();
    h.update(b"zk3col-plan");
    h.update(seed.to_be_bytes());
    h.update(subject.as_bytes());
    let mut rng = ChaCha20Rng::from_seed(h.finalize().into());
    let history_visible = rng.gen_bool(0.5);
    let zkp = ZkpStageConfig {
        k: 3,
        rounds: DEFAULT_ZKP_ROUNDS,
        graph_n: 12,
        edge_prob: 0.5,
        graph_seed: rng.gen(),
        award: true,
    };
    ExperimentPlan {
        subject: subject.to_string(),
        seed,
        history_visible,
        stages: vec![
            Stage::Test1 { k: 3, draws: FREE_DRAWS },
            Stage::Test2 {
                blocks: vec![(2, FREE_DRAWS), (4, FREE_DRAWS)],
            },
            Stage::Test3 {
                config: zkp.clone(),
                instruction: Instruction::Blinded,
            },
            Stage::Debrief,
            Stage::Test4 {
                config: zkp,
                instruction: Instruction::Informed,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(k: usize, s: Vec<usize>) -> SymbolSequence {
        SymbolSequence::new(k, s).unwrap()
    }

    #[test]
    fn sequence_validation() {
        assert!(SymbolSequence::new(5, vec![0]).is_err());
        assert!(SymbolSequence::new(2, vec![0, 2]).is_err());
        assert!(SymbolSequence::new(4, vec![23]).is_ok());
    }

    #[test]
    fn uniform_chi_square() {
        let even: Vec<usize> = (0..60).map(|i| i % 6).collect();
        let c = chi_square_uniform(&seq(3, even)).unwrap();
        assert_eq!((c.stat, c.df, c.p), (0.0, 5, 1.0));
        let c = chi_square_uniform(&seq(3, vec![0; 60])).unwrap();
        // sum (O-E)^2/E with E = 10: (50^2 + 5 * 10^2) / 10 = 300
        assert!((c.stat - 300.0).abs() < 1e-9);
        assert!(c.p < 1e-60);
        assert!(matches!(chi_square_uniform(&seq(3, vec![0; 29])), Err(LabError::TooShort { need: 30, .. })));
    }

    #[test]
    fn alternating_transitions() {
        let alt: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let c = transition_independence_test(&seq(3, alt)).unwrap();
        assert_eq!(c.df, 1);
        assert!(c.p < 1e-30);
        assert!(transition_independence_test(&seq(3, vec![2; 50])).is_err());
    }

    #[test]
    fn pooling_keeps_floor() {
        // a sparse table: only the pooled structure survives
        let table = vec![vec![40, 2, 0], vec![3, 50, 1], vec![0, 1, 0]];
        let c = independence_test(&table).unwrap();
        assert!(c.df >= 1);
        assert!(c.p < 1e-10);
    }

    #[test]
    fn repetition_cases() {
        assert_eq!(repetition_rate(&seq(3, vec![4; 10])).unwrap().observed, 1.0);
        let r = repetition_rate(&seq(3, vec![0, 1, 0, 1])).unwrap();
        assert_eq!((r.observed, r.expected), (0.0, 1.0 / 6.0));
        assert!(repetition_rate(&seq(3, vec![0])).is_err());
    }

    #[test]
    fn entropy_of_constant_is_zero() {
        let s = seq(3, vec![3; 100]);
        assert_eq!(entropy_rate(&s, 0).unwrap(), 0.0);
        assert_eq!(entropy_rate(&s, 1).unwrap(), 0.0);
        assert!(entropy_rate(&seq(3, vec![3; 29]), 0).is_err());
    }

    #[test]
    fn predictor_on_constant() {
        let s = seq(3, vec![2; 100]);
        assert!(predictor_hit_rate(&s, 0).unwrap() >= 0.9);
        assert!(predictor_hit_rate(&s, 1).unwrap() >= 0.9);
        assert!(predictor_hit_rate(&seq(3, vec![2; 9]), 0).is_err());
    }

    #[test]
    fn fingerprint_distance_bounds() {
        let a = fingerprint(&seq(3, (0..100).map(|i| (i * 7) % 6).collect())).unwrap();
        assert_eq!(fingerprint_distance(&a, &a).unwrap(), 0.0);
        let point = |r: usize| {
            let mut p = vec![0.0; 6];
            p[r] = 1.0;
            Fingerprint {
                subject: format!("s{r}"),
                k: 3,
                marginal: p.clone(),
                transitions: vec![p; 6],
            }
        };
        assert!((fingerprint_distance(&point(0), &point(1)).unwrap() - 1.0).abs() < 1e-12);
        let b = fingerprint(&seq(2, vec![0, 1, 0, 1])).unwrap();
        assert!(matches!(fingerprint_distance(&a, &b), Err(LabError::KMismatch(3, 2))));
    }

    #[test]
    fn plan_shape() {
        let p = make_experiment_plan("alice", 1);
        assert_eq!(p, make_experiment_plan("alice", 1));
        let names: Vec<&str> = p.stages.iter().map(Stage::name).collect();
        assert_eq!(names, ["test1", "test2", "test3", "debrief", "test4"]);
        assert_eq!(p.stages[2].zkp_config(), p.stages[4].zkp_config());
        assert!(p.stages[2].reports_gated());
        assert!(!p.stages[4].reports_gated());
        let (Stage::Test3 { instruction: a, .. }, Stage::Test4 { instruction: b, .. }) = (&p.stages[2], &p.stages[4]) else {
            panic!("stage order")
        };
        assert_ne!(a.text(), b.text());
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let seqs = vec![
            SymbolSequence::labelled(3, vec![0, 5, 2], "s1", "t1").unwrap(),
            SymbolSequence::labelled(2, vec![1, 0], "s1", "t2").unwrap(),
        ];
        assert_eq!(parse_csv(&to_csv(&seqs)).unwrap(), seqs);
        assert!(matches!(parse_csv("s,t,3,6\n"), Err(LabError::Row { line: 1, .. })));
        assert!(matches!(parse_csv("s,t,3\n"), Err(LabError::Row { line: 1, .. })));
        assert!(matches!(parse_csv("s,t,x,1\n"), Err(LabError::Row { .. })));
    }

    #[test]
    fn aggregate_single_report() {
        let s: Vec<usize> = (0..120).map(|i| (i * 5 + i / 6) % 6).collect();
        let r = analyze(&seq(3, s)).unwrap();
        let agg = aggregate_reports(std::slice::from_ref(&r), GroupKey::All, &AwardWeights::default()).unwrap();
        assert_eq!(agg.groups.len(), 1);
        assert_eq!(agg.groups[0].pooled_uniform, r.chi2_uniform);
        assert_eq!(agg.groups[0].pooled_transition, r.chi2_transition);
        assert_eq!(agg.k_bias_correlation, None);
        assert_eq!(agg.award.len(), 1);
        assert!(matches!(aggregate_reports(&[], GroupKey::All, &AwardWeights::default()), Err(LabError::Empty)));
    }
}
