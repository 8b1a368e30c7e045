//! Top-K ranking metrics under the all-ranking and real-plus-N protocols.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{inject_interaction_noise, DatasetSplit, Edge};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    AllRanking,
    RealPlusN,
}

impl Protocol {
    pub fn tag(self) -> &'static str {
        match self {
            Protocol::AllRanking => "all_ranking",
            Protocol::RealPlusN => "real_plus_n",
        }
    }
}

/// Descending score, then ascending item id.
fn rank_order(scores: &[f64], a: u32, b: u32) -> Ordering {
    scores[b as usize]
        .partial_cmp(&scores[a as usize])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// The best `k` of `candidates` by score, ties to the lower id.
pub fn top_k_of(scores: &[f64], mut candidates: Vec<u32>, k: usize) -> Vec<u32> {
    if k == 0 {
        return Vec::new();
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    candidates
}

/// Scores of every item for one user.
pub fn user_scores(users: &Matrix, items: &Matrix, u: usize) -> Vec<f64> {
    let p = users.row(u);
    items.iter_rows().map(|q| dot(p, q)).collect()
}

/// Top-K over all items, skipping the user's known (training) items.
/// `known` must be sorted.
pub fn rank_user(users: &Matrix, items: &Matrix, u: usize, known: &[u32], k: usize) -> Vec<u32> {
    let scores = user_scores(users, items, u);
    let candidates = (0..items.rows() as u32)
        .filter(|i| known.binary_search(i).is_err())
        .collect();
    top_k_of(&scores, candidates, k)
}

/// Top-K lists for every user holding at least one test item.
pub fn rank_all(
    users: &Matrix,
    items: &Matrix,
    train: &[Edge],
    test: &[Edge],
    k: usize,
) -> Vec<(u32, Vec<u32>)> {
    let known = DatasetSplit::items_by_user(train, users.rows());
    let targets = DatasetSplit::items_by_user(test, users.rows());
    (0..users.rows())
        .filter(|&u| !targets[u].is_empty())
        .map(|u| (u as u32, rank_user(users, items, u, &known[u], k)))
        .collect()
}

pub fn recall_at_k(topk: &[u32], test: &[u32]) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let hits = topk.iter().filter(|i| test.contains(i)).count();
    hits as f64 / test.len() as f64
}

/// Binary-relevance NDCG with the ideal ordering over `min(|test|, K)` hits.
pub fn ndcg_at_k(topk: &[u32], test: &[u32], k: usize) -> f64 {
    let ideal: f64 = (0..test.len().min(k)).map(discount).sum();
    if ideal == 0.0 {
        return 0.0;
    }
    let dcg: f64 = topk
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| test.contains(i))
        .map(|(r, _)| discount(r))
        .sum();
    dcg / ideal
}

fn discount(rank0: usize) -> f64 {
    1.0 / ((rank0 + 2) as f64).log2()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub protocol: Protocol,
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub users: usize,
    /// Negative-sampling seed and candidate count under real-plus-N.
    pub seed: Option<u64>,
    pub n: Option<usize>,
}

#[derive(Serialize)]
struct MetricRecord<'a> {
    protocol: &'a str,
    k: usize,
    metric: &'a str,
    value: f64,
    users: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl MetricsReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.recall[p])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|p| self.ndcg[p])
    }

    fn header(&self) -> String {
        let mut h = format!("protocol={} users={}", self.protocol.tag(), self.users);
        if let Some(n) = self.n {
            let _ = write!(h, " n={n}");
        }
        if let Some(s) = self.seed {
            let _ = write!(h, " seed={s}");
        }
        h
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("# {}\nk\trecall\tndcg\n", self.header());
        for (p, k) in self.ks.iter().enumerate() {
            let _ = writeln!(s, "{k}\t{}\t{}", self.recall[p], self.ndcg[p]);
        }
        s
    }

    pub fn to_key_values(&self) -> String {
        let mut s = format!("protocol = {}\nusers = {}\n", self.protocol.tag(), self.users);
        if let Some(n) = self.n {
            let _ = writeln!(s, "n = {n}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed = {seed}");
        }
        for (p, k) in self.ks.iter().enumerate() {
            let _ = writeln!(s, "recall@{k} = {}\nndcg@{k} = {}", self.recall[p], self.ndcg[p]);
        }
        s
    }

    /// One JSON object per line, one line per (protocol, K, metric).
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for (p, &k) in self.ks.iter().enumerate() {
            for (metric, value) in [("recall", self.recall[p]), ("ndcg", self.ndcg[p])] {
                let rec = MetricRecord {
                    protocol: self.protocol.tag(),
                    k,
                    metric,
                    value,
                    users: self.users,
                    n: self.n,
                    seed: self.seed,
                };
                s.push_str(&serde_json::to_string(&rec).expect("plain record serializes"));
                s.push('\n');
            }
        }
        s
    }
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("K values must be a non-empty list of positive integers".into()));
    }
    Ok(())
}

fn check_embeddings(users: &Matrix, items: &Matrix, user_count: usize, item_count: usize) -> Result<()> {
    if users.rows() != user_count || items.rows() != item_count || users.cols() != items.cols() {
        return Err(Error::Shape(format!(
            "embeddings {:?}/{:?} do not match {user_count} users and {item_count} items",
            users.shape(),
            items.shape()
        )));
    }
    Ok(())
}

struct Accumulator {
    recall: Vec<f64>,
    ndcg: Vec<f64>,
    users: usize,
}

impl Accumulator {
    fn new(ks: &[usize]) -> Self {
        Accumulator {
            recall: vec![0.0; ks.len()],
            ndcg: vec![0.0; ks.len()],
            users: 0,
        }
    }

    fn add(&mut self, ks: &[usize], ranked: &[u32], test: &[u32]) {
        for (p, &k) in ks.iter().enumerate() {
            let top = &ranked[..k.min(ranked.len())];
            self.recall[p] += recall_at_k(top, test);
            self.ndcg[p] += ndcg_at_k(top, test, k);
        }
        self.users += 1;
    }

    fn finish(mut self, protocol: Protocol, ks: &[usize], seed: Option<u64>, n: Option<usize>) -> MetricsReport {
        if self.users > 0 {
            let c = self.users as f64;
            self.recall.iter_mut().for_each(|x| *x /= c);
            self.ndcg.iter_mut().for_each(|x| *x /= c);
        }
        MetricsReport {
            protocol,
            ks: ks.to_vec(),
            recall: self.recall,
            ndcg: self.ndcg,
            users: self.users,
            seed,
            n,
        }
    }
}

/// All-ranking metrics: every item outside `known` is a candidate.
/// Users without targets are skipped; averages run in user-id order.
pub fn evaluate_all_ranking(
    users: &Matrix,
    items: &Matrix,
    known: &[Edge],
    targets: &[Edge],
    ks: &[usize],
) -> Result<MetricsReport> {
    check_ks(ks)?;
    check_embeddings(users, items, users.rows(), items.rows())?;
    let kmax = *ks.iter().max().expect("checked non-empty");
    let known = DatasetSplit::items_by_user(known, users.rows());
    let targets = DatasetSplit::items_by_user(targets, users.rows());
    let mut acc = Accumulator::new(ks);
    for u in 0..users.rows() {
        if targets[u].is_empty() {
            continue;
        }
        let ranked = rank_user(users, items, u, &known[u], kmax);
        acc.add(ks, &ranked, &targets[u]);
    }
    Ok(acc.finish(Protocol::AllRanking, ks, None, None))
}

pub fn evaluate_split(users: &Matrix, items: &Matrix, split: &DatasetSplit, ks: &[usize]) -> Result<MetricsReport> {
    check_embeddings(users, items, split.user_count, split.item_count)?;
    evaluate_all_ranking(users, items, &split.train, &split.test, ks)
}

/// Per user with test items: the test positives followed by `n` sampled
/// items the user has neither trained nor tested on (all of them if fewer
/// exist). Users are visited in id order from one seeded generator.
pub fn real_plus_n_candidates(split: &DatasetSplit, n: usize, seed: u64) -> Vec<(usize, Vec<u32>)> {
    let train = DatasetSplit::items_by_user(&split.train, split.user_count);
    let test = DatasetSplit::items_by_user(&split.test, split.user_count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for u in 0..split.user_count {
        if test[u].is_empty() {
            continue;
        }
        let seen = |i: &u32| train[u].binary_search(i).is_ok() || test[u].binary_search(i).is_ok();
        let mut pool: Vec<u32> = (0..split.item_count as u32).filter(|i| !seen(i)).collect();
        let take = n.min(pool.len());
        // Partial Fisher-Yates: the first `take` slots become the sample.
        for j in 0..take {
            let r = rng.random_range(j..pool.len());
            pool.swap(j, r);
        }
        let mut candidates = test[u].clone();
        candidates.extend_from_slice(&pool[..take]);
        out.push((u, candidates));
    }
    out
}

/// Rank each user's [`real_plus_n_candidates`] and average the metrics.
pub fn real_plus_n(
    users: &Matrix,
    items: &Matrix,
    split: &DatasetSplit,
    n: usize,
    ks: &[usize],
    seed: u64,
) -> Result<MetricsReport> {
    check_ks(ks)?;
    check_embeddings(users, items, split.user_count, split.item_count)?;
    let test = DatasetSplit::items_by_user(&split.test, split.user_count);
    let mut acc = Accumulator::new(ks);
    for (u, candidates) in real_plus_n_candidates(split, n, seed) {
        let scores = user_scores(users, items, u);
        let ranked = top_k_of(&scores, candidates, ks.iter().copied().max().unwrap_or(0));
        acc.add(ks, &ranked, &test[u]);
    }
    Ok(acc.finish(Protocol::RealPlusN, ks, Some(seed), Some(n)))
}

/// Metric retention at one noise ratio relative to the clean run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionRow {
    pub ratio: f64,
    pub k: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub recall_retention: f64,
    pub ndcg_retention: f64,
}

fn ratio_of(value: f64, base: f64) -> f64 {
    if base == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / base
    }
}

/// Retention rows for each `(ratio, report)` against the clean `baseline`.
/// A ratio of zero is reported as exactly 1.0.
pub fn retention_table(baseline: &MetricsReport, runs: &[(f64, MetricsReport)]) -> Vec<RetentionRow> {
    let mut rows = Vec::new();
    for (ratio, report) in runs {
        for (p, &k) in report.ks.iter().enumerate() {
            let (base_r, base_n) = (
                baseline.recall_at(k).unwrap_or(0.0),
                baseline.ndcg_at(k).unwrap_or(0.0),
            );
            let (recall_retention, ndcg_retention) = if *ratio == 0.0 {
                (1.0, 1.0)
            } else {
                (ratio_of(report.recall[p], base_r), ratio_of(report.ndcg[p], base_n))
            };
            rows.push(RetentionRow {
                ratio: *ratio,
                k,
                recall: report.recall[p],
                ndcg: report.ndcg[p],
                recall_retention,
                ndcg_retention,
            });
        }
    }
    rows
}

/// Train on the clean split and on noisy copies of it, then report metric
/// retention per ratio. Ratio `r` injects `floor(r |train|)` fabricated
/// interactions using `noise_seed + index`.
pub fn robustness_report(
    config: &TrainConfig,
    clean: &DatasetSplit,
    ratios: &[f64],
    noise_seed: u64,
    ks: &[usize],
) -> Result<Vec<RetentionRow>> {
    check_ks(ks)?;
    if ratios.is_empty() {
        return Ok(Vec::new());
    }
    let run = |split: &DatasetSplit| -> Result<MetricsReport> {
        let out = train(config.clone(), split)?;
        let (pu, pi) = out.scoring_embeddings(split.user_count, split.item_count)?;
        evaluate_split(&pu, &pi, split, ks)
    };
    let baseline = run(clean)?;
    let mut runs = Vec::with_capacity(ratios.len());
    for (k, &ratio) in ratios.iter().enumerate() {
        let report = if ratio == 0.0 {
            baseline.clone()
        } else {
            run(&inject_interaction_noise(clean, ratio, noise_seed + k as u64)?)?
        };
        runs.push((ratio, report));
    }
    Ok(retention_table(&baseline, &runs))
}

pub fn retention_tsv(rows: &[RetentionRow]) -> String {
    let mut s = String::from("ratio\tk\trecall\tndcg\trecall_retention\tndcg_retention\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.ratio, r.k, r.recall, r.ndcg, r.recall_retention, r.ndcg_retention
        );
    }
    s
}
