//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line on stderr
//! (bypassing the test harness's capture) and then asserts.
#![allow(clippy::needless_range_loop)]

mod common;

use std::io::Write as _;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use dcdsr::cli;
use dcdsr::data::write_split;
use dcdsr::denoise::{
    denoise_interaction, denoise_social, interaction_compatibility, preference_consistency, social_enhance,
    DenoiseReport, DenoiseThresholds,
};
use dcdsr::encoder::{propagate_interaction, EmbeddingState};
use dcdsr::eval::{
    evaluate_split, ndcg_at_k, rank_user, real_plus_n, real_plus_n_candidates, recall_at_k, robustness_report,
    top_k_of,
};
use dcdsr::graph::{InteractionGraph, SocialNetwork};
use dcdsr::matrix::Matrix;
use dcdsr::objective::{ac_infonce_loss, infonce_loss, joint_loss, BatchSample, ClLoss, JointInputs, LossWeights, Perturbation};
use dcdsr::perturb::{apply_noise, collaborative_noise, gaussian_noise, random_permutation, PerturbMode, PerturbationNoise};
use dcdsr::trainer::{train, Ablation, TrainConfig, Trainer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const SEEDS: [u64; 5] = [11, 12, 13, 14, 15];

fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn ablation(s: &str) -> Ablation {
    s.parse().unwrap()
}

// ---------------------------------------------------------------- gradients

#[test]
fn end_to_end_gradient_check() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (m, n, d) = (5, 8, 4);
    let mut inter = Vec::new();
    for u in 0..m as u32 {
        let mut items: Vec<u32> = (0..n as u32).collect();
        items.shuffle(&mut rng);
        inter.extend(items[..3].iter().map(|&i| (u, i)));
    }
    let social = vec![(0, 1), (1, 2), (2, 3), (0, 4), (3, 4)];
    let graph = Arc::new(InteractionGraph::new(&inter, m, n).unwrap());
    let net = Arc::new(SocialNetwork::new(&social, m).unwrap());
    let state = EmbeddingState::new(random_matrix(m, d, &mut rng), random_matrix(n, d, &mut rng)).unwrap();
    let batch = BatchSample::new(vec![0, 2, 4], vec![inter[0].1, inter[6].1, inter[12].1], vec![7, 5, 6]);
    let weights = LossWeights { lambda1: 0.1, lambda2: 0.1, lambda3: 0.1, lambda_reg: 1e-4, tau: 0.2 };
    let layers = 1;

    let pr = propagate_interaction(&state, &graph, layers).unwrap();
    let ps = dcdsr::encoder::propagate_social(&state, &net, layers).unwrap();
    let noise =
        PerturbationNoise::sample(&pr.users, &ps.users, pr.items().unwrap(), PerturbMode::Collaborative, &mut rng).unwrap();

    let loss_at = |s: &EmbeddingState| {
        let inputs = JointInputs {
            state: s,
            interaction: &graph,
            social: &net,
            layers,
            batch: &batch,
            weights: &weights,
            cl_loss: ClLoss::AcInfoNce,
            epsilon: 0.1,
        };
        joint_loss(&inputs, Perturbation::Fixed(&noise)).unwrap()
    };
    let analytic = loss_at(&state);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for table in 0..2 {
        let rows = if table == 0 { m } else { n };
        for k in 0..rows * d {
            let probe = |delta: f64| {
                let mut s = state.clone();
                let t = if table == 0 { &mut s.users } else { &mut s.items };
                t.as_mut_slice()[k] += delta;
                loss_at(&s).parts.total
            };
            let fd = (probe(h) - probe(-h)) / (2.0 * h);
            let g = if table == 0 { &analytic.grad_users } else { &analytic.grad_items };
            worst = worst.max((g.as_slice()[k] - fd).abs());
            scale = scale.max(fd.abs());
        }
    }
    let rel = worst / scale;
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "end-to-end gradient check",
        rel < 1e-4 && secs < 10.0,
        &format!("relative error {rel:.2e} (< 1e-4), runtime {secs:.2}s (< 10s)"),
    );
}

#[test]
fn analytic_gradient_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut worst_i, mut worst_ac): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let b = rng.random_range(2..=8);
        let d = rng.random_range(2..=6);
        let tau = [0.1, 0.2, 0.5, 1.0][rng.random_range(0..4)];
        let h = random_matrix(b, d, &mut rng);
        let v1 = random_matrix(b, d, &mut rng);
        let v2 = random_matrix(b, d, &mut rng);

        let got = infonce_loss(&v1, &v2, tau).unwrap();
        let (loss, g1, g2) = infonce_oracle(&v1, &v2, tau);
        worst_i = worst_i
            .max(((got.loss - loss) / loss.abs()).abs())
            .max(rel_err(&got.grad_view1, &g1))
            .max(rel_err(&got.grad_view2, &g2));

        let got = ac_infonce_loss(&h, &v1, &v2, tau).unwrap();
        let (loss, gh, g1, g2) = ac_infonce_oracle(&h, &v1, &v2, tau);
        worst_ac = worst_ac
            .max(((got.loss - loss) / loss.abs()).abs())
            .max(rel_err(got.grad_anchor.as_ref().unwrap(), &gh))
            .max(rel_err(&got.grad_view1, &g1))
            .max(rel_err(&got.grad_view2, &g2));
    }
    verdict(
        "analytic gradient oracles",
        worst_i < 1e-8 && worst_ac < 1e-8,
        &format!("100 batches, InfoNCE max rel err {worst_i:.2e}, AC-InfoNCE {worst_ac:.2e} (< 1e-8)"),
    );
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn row_norm(m: &Matrix, r: usize) -> f64 {
    m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn anchor_stability() {
    // Row 0 is the anchor under test. Row 1's second view is a hard
    // negative almost parallel to row 0's first view.
    let h = Matrix::from_rows(&[unit(&[1.0, 0.1, 0.0]), unit(&[0.2, 1.0, 0.3]), unit(&[0.0, 0.2, 1.0])]).unwrap();
    let v1 = Matrix::from_rows(&[unit(&[1.0, 0.35, 0.05]), unit(&[0.1, 1.0, 0.4]), unit(&[0.1, 0.1, 1.0])]).unwrap();
    let v2 = Matrix::from_rows(&[unit(&[1.0, -0.2, -0.1]), unit(&[1.0, 0.38, 0.02]), unit(&[-0.1, 0.3, 1.0])]).unwrap();
    let cos_neg: f64 = v1.row(0).iter().zip(v2.row(1)).map(|(a, b)| a * b).sum();
    let (tau, lr) = (0.2, 0.05);

    let ac = ac_infonce_loss(&h, &v1, &v2, tau).unwrap();
    let info = infonce_loss(&v1, &v2, tau).unwrap();
    let anchor_step = lr * row_norm(ac.grad_anchor.as_ref().unwrap(), 0);
    let mid: Vec<f64> = info.grad_view1.row(0).iter().zip(info.grad_view2.row(0)).map(|(a, b)| (a + b) / 2.0).collect();
    let midpoint_step = lr * mid.iter().map(|x| x * x).sum::<f64>().sqrt();

    // Bound on the anchor gradient: the two pull terms plus the push term
    // (the push term does not involve the anchor, so it contributes zero).
    let (_, dh1, _) = cosine_with_grads(h.row(0), v1.row(0));
    let (_, dh2, _) = cosine_with_grads(h.row(0), v2.row(0));
    let pulls = (unit_len(&dh1) + unit_len(&dh2)) / (2.0 * tau);
    let bounded = row_norm(ac.grad_anchor.as_ref().unwrap(), 0) <= pulls + 1e-15;

    verdict(
        "anchor stability",
        cos_neg > 0.99 && anchor_step < midpoint_step && bounded,
        &format!(
            "cos(view'_0, negative) = {cos_neg:.4}; AC anchor step {anchor_step:.3e} < InfoNCE midpoint step {midpoint_step:.3e}; anchor gradient within pull bound: {bounded}"
        ),
    );
}

fn unit_len(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// ------------------------------------------------------------ perturbation

#[test]
fn perturbation_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (rows, d) = (1000, 16);
    let target = random_matrix(rows, d, &mut rng);
    let source = random_matrix(rows, d, &mut rng);
    let perm = random_permutation(rows, &mut rng);
    let mut worst_disp: f64 = 0.0;
    let mut octant_ok = true;
    for noise in [collaborative_noise(&target, &source, &perm).unwrap(), gaussian_noise(&target, &mut rng)] {
        for eps in [0.1, 0.5, 1.0] {
            let view = apply_noise(&target, &noise, eps);
            for r in 0..rows {
                let disp: f64 =
                    view.row(r).iter().zip(target.row(r)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                worst_disp = worst_disp.max((disp - eps).abs());
            }
        }
        octant_ok &= noise.as_slice().iter().zip(target.as_slice()).all(|(n, p)| n.signum() * p.signum() >= 0.0);
    }
    verdict(
        "perturbation invariants",
        worst_disp < 1e-12 && octant_ok,
        &format!("1000 rows, max | |P'-P|_row - eps | = {worst_disp:.2e} (< 1e-12), hyperoctant property holds: {octant_ok}"),
    );
}

// --------------------------------------------------------------- denoising

fn removed_for(beta_s: f64, beta_r: f64, social: &SocialNetwork, graph: &InteractionGraph, state: &EmbeddingState) -> (usize, usize) {
    let th = DenoiseThresholds { beta_s, beta_r, sigma: 20.0 };
    let h = propagate_interaction(state, graph, 2).unwrap();
    let (kept, _, srep) = denoise_social(social, &h, &th, None).unwrap();
    let enhanced = social_enhance(&h, &kept);
    let (_, _, irep) = denoise_interaction(graph, &enhanced, &h, &th, None).unwrap();
    (srep.social_edges_removed, irep.interaction_edges_removed)
}

#[test]
fn denoising_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut in_range = true;
    for _ in 0..10_000 {
        let d = rng.random_range(1..8);
        let scale = [1e-3, 1.0, 50.0][rng.random_range(0..3)];
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        let mut b: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        if rng.random_bool(0.05) {
            b.fill(0.0);
        }
        for s in [preference_consistency(&a, &b, 20.0), interaction_compatibility(&a, &b, 20.0)] {
            in_range &= (0.0..=1.0).contains(&s);
        }
    }

    let split = small_split(2);
    let graph = InteractionGraph::new(&split.train, split.user_count, split.item_count).unwrap();
    let social = SocialNetwork::new(&split.social, split.user_count).unwrap();
    let state = EmbeddingState::new(random_matrix(split.user_count, 8, &mut rng), random_matrix(split.item_count, 8, &mut rng)).unwrap();
    let zero_removes_nothing = removed_for(0.0, 0.0, &social, &graph, &state) == (0, 0);

    let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
    let mut monotone = true;
    let mut prev = (0, 0);
    for &beta in &grid {
        let now = removed_for(beta, beta, &social, &graph, &state);
        let (s_only, _) = removed_for(beta, 0.0, &social, &graph, &state);
        monotone &= now.0 >= prev.0 && now.1 >= prev.1 && s_only == now.0;
        prev = now;
    }

    let cfg = TrainConfig { dim: 8, batch_size: 64, learning_rate: 0.01, max_epochs: 6, validation: false, ..synthetic_config(2, Ablation::FULL) };
    let mut trainer = Trainer::from_split(cfg, &split).unwrap();
    let original: std::collections::HashSet<(u32, u32)> = split.train.iter().copied().collect();
    let mut subsets = true;
    for _ in 0..6 {
        let out = trainer.run_epoch().unwrap();
        subsets &= trainer.denoised_interactions().edges().iter().all(|e| original.contains(e));
        subsets &= out.report.social_edges_removed <= out.report.social_edges;
        subsets &= trainer.interaction_mask().kept_count() == trainer.denoised_interactions().edge_count();
    }
    verdict(
        "denoising invariants",
        in_range && zero_removes_nothing && monotone && subsets,
        &format!(
            "scores in [0,1]: {in_range}; beta=0 removes nothing: {zero_removes_nothing}; monotone over {} thresholds: {monotone}; subsets every epoch: {subsets}",
            grid.len()
        ),
    );
}

// --------------------------------------------------- synthetic training runs

struct Run {
    recall20: f64,
    report: DenoiseReport,
}

fn run_variant(seed: u64, variant: &str) -> Run {
    let split = synthetic_split(seed, 0.2);
    let out = train(synthetic_config(seed, ablation(variant)), &split).unwrap();
    let (pu, pi) = out.scoring_embeddings(split.user_count, split.item_count).unwrap();
    let recall20 = evaluate_split(&pu, &pi, &split, &[20]).unwrap().recall[0];
    let report = out.log.records.last().unwrap().report.clone();
    Run { recall20, report }
}

fn full_runs() -> &'static Vec<Run> {
    static RUNS: OnceLock<Vec<Run>> = OnceLock::new();
    RUNS.get_or_init(|| SEEDS.iter().map(|&s| run_variant(s, "full")).collect())
}

#[test]
fn planted_noise_recovery() {
    let mut lines = Vec::new();
    let mut good = 0;
    for (seed, run) in SEEDS.iter().zip(full_runs()) {
        let r = &run.report;
        let ip = (r.interaction_edges_removed > 0).then(|| r.removed_flagged_noise as f64 / r.interaction_edges_removed as f64);
        let sp = (r.social_edges_removed > 0).then(|| r.removed_flagged_social as f64 / r.social_edges_removed as f64);
        let ok = ip.is_some_and(|p| p > 0.2) && sp.is_some_and(|p| p > 0.2);
        good += usize::from(ok);
        let fmt = |p: Option<f64>| p.map_or("n/a".to_string(), |p| format!("{p:.3}"));
        lines.push(format!("seed {seed}: interaction {} social {}", fmt(ip), fmt(sp)));
    }
    verdict(
        "planted-noise recovery",
        good >= 4,
        &format!("removal precision > 0.2 in {good}/5 seeds ({})", lines.join("; ")),
    );
}

#[test]
fn ablation_direction() {
    let full = median(full_runs().iter().map(|r| r.recall20).collect());
    let ed = median(SEEDS.iter().map(|&s| run_variant(s, "ed").recall20).collect());
    let sd = median(SEEDS.iter().map(|&s| run_variant(s, "sd").recall20).collect());
    verdict(
        "ablation direction",
        full >= ed && full >= sd,
        &format!("median Recall@20 full {full:.4}, ED {ed:.4}, SD {sd:.4}"),
    );
}

#[test]
fn robustness_direction() {
    let ratios = [0.1, 0.2, 0.3];
    let retention = |variant: &str| -> Vec<f64> {
        let per_seed: Vec<Vec<f64>> = SEEDS
            .iter()
            .map(|&seed| {
                let clean = synthetic_split(seed, 0.0);
                let rows = robustness_report(&synthetic_config(seed, ablation(variant)), &clean, &ratios, seed * 10 + 1, &[20]).unwrap();
                rows.iter().map(|r| r.recall_retention).collect()
            })
            .collect();
        (0..ratios.len()).map(|k| median(per_seed.iter().map(|v| v[k]).collect())).collect()
    };
    let full = retention("full");
    let sd = retention("sd");
    let ok = full.iter().zip(&sd).all(|(f, s)| f >= s);
    let detail: Vec<String> = ratios
        .iter()
        .zip(full.iter().zip(&sd))
        .map(|(r, (f, s))| format!("ratio {r}: full {f:.4} vs SD {s:.4}"))
        .collect();
    verdict("robustness direction", ok, &format!("median Recall@20 retention {}", detail.join("; ")));
}

// ----------------------------------------------------------------- metrics

fn permutations(items: &[u32]) -> Vec<Vec<u32>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let rest: Vec<u32> = items.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &x)| x).collect();
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn brute_metrics(ranking: &[u32], test: &[u32], k: usize) -> (f64, f64) {
    let hits: Vec<usize> = (0..k.min(ranking.len())).filter(|&p| test.contains(&ranking[p])).collect();
    let recall = hits.len() as f64 / test.len() as f64;
    let dcg: f64 = hits.iter().map(|&p| 1.0 / ((p + 2) as f64).log2()).sum();
    let idcg: f64 = (0..test.len().min(k)).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
    (recall, dcg / idcg)
}

#[test]
fn metric_oracles() {
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    let mut order_ok = true;
    for n in 1..=5u32 {
        let items: Vec<u32> = (0..n).collect();
        for ranking in permutations(&items) {
            let mut scores = vec![0.0; n as usize];
            for (p, &i) in ranking.iter().enumerate() {
                scores[i as usize] = (n as usize - p) as f64;
            }
            for mask in 1u32..(1 << n) {
                let test: Vec<u32> = items.iter().copied().filter(|i| mask & (1 << i) != 0).collect();
                for k in 1..=n as usize {
                    let top = top_k_of(&scores, items.clone(), k);
                    order_ok &= top == ranking[..k];
                    let (r, g) = brute_metrics(&ranking, &test, k);
                    worst = worst.max((recall_at_k(&top, &test) - r).abs()).max((ndcg_at_k(&top, &test, k) - g).abs());
                    cases += 1;
                }
            }
        }
    }

    // Real-plus-N on a 200-item toy against a restricted-candidate brute force.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (users, item_count) = (30usize, 200usize);
    let mut train_e = Vec::new();
    let mut test_e = Vec::new();
    for u in 0..users as u32 {
        let mut pool: Vec<u32> = (0..item_count as u32).collect();
        pool.shuffle(&mut rng);
        train_e.extend(pool[..10].iter().map(|&i| (u, i)));
        test_e.extend(pool[10..13].iter().map(|&i| (u, i)));
    }
    train_e.sort_unstable();
    test_e.sort_unstable();
    let split = dcdsr::data::DatasetSplit {
        train_fabricated: vec![false; train_e.len()],
        train: train_e,
        test: test_e,
        social: vec![(0, 1)],
        social_fabricated: vec![false],
        user_count: users,
        item_count,
        users: dcdsr::data::IdMap::from_sorted_unique((0..users as u64).collect()),
        items: dcdsr::data::IdMap::from_sorted_unique((0..item_count as u64).collect()),
        ratio: 0.8,
        seed: 0,
    };
    let pu = random_matrix(users, 8, &mut rng);
    let pi = random_matrix(item_count, 8, &mut rng);
    let ks = [3, 10];
    let report = real_plus_n(&pu, &pi, &split, 100, &ks, 7).unwrap();
    let train_by = dcdsr::data::DatasetSplit::items_by_user(&split.train, users);
    let test_by = dcdsr::data::DatasetSplit::items_by_user(&split.test, users);
    let mut sums = vec![(0.0, 0.0); ks.len()];
    let mut candidates_ok = true;
    let cands = real_plus_n_candidates(&split, 100, 7);
    for (u, cand) in &cands {
        let test = &test_by[*u];
        let sampled = &cand[test.len()..];
        let distinct: std::collections::HashSet<&u32> = sampled.iter().collect();
        candidates_ok &= cand[..test.len()] == test[..]
            && sampled.len() == 100
            && distinct.len() == 100
            && sampled.iter().all(|i| !train_by[*u].contains(i) && !test.contains(i));
        let mut ranked = cand.clone();
        let score = |i: u32| pu.row(*u).iter().zip(pi.row(i as usize)).map(|(a, b)| a * b).sum::<f64>();
        ranked.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        for (s, &k) in sums.iter_mut().zip(&ks) {
            let (r, g) = brute_metrics(&ranked, test, k);
            s.0 += r;
            s.1 += g;
        }
    }
    let mut worst_rpn: f64 = 0.0;
    for (p, (r, g)) in sums.iter().enumerate() {
        worst_rpn = worst_rpn
            .max((report.recall[p] - r / cands.len() as f64).abs())
            .max((report.ndcg[p] - g / cands.len() as f64).abs());
    }
    // All-ranking agrees with the same brute force over every unseen item.
    let mut worst_all: f64 = 0.0;
    for u in 0..users {
        let top = rank_user(&pu, &pi, u, &train_by[u], 20);
        let mut all: Vec<u32> = (0..item_count as u32).filter(|i| !train_by[u].contains(i)).collect();
        let score = |i: u32| pu.row(u).iter().zip(pi.row(i as usize)).map(|(a, b)| a * b).sum::<f64>();
        all.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        worst_all = worst_all.max(if top == all[..20] { 0.0 } else { 1.0 });
    }
    verdict(
        "metric oracles",
        worst < 1e-12 && order_ok && worst_rpn < 1e-12 && candidates_ok && worst_all == 0.0,
        &format!(
            "{cases} permutation cases max err {worst:.1e}; real-plus-N (n=100, 200 items) max err {worst_rpn:.1e}, candidates valid: {candidates_ok}; all-ranking order matches: {}",
            worst_all == 0.0
        ),
    );
}

// -------------------------------------------------------------- equivalence

#[test]
fn baseline_equivalence() {
    let split = small_split(3);
    let mut cfg = TrainConfig { dim: 8, batch_size: 64, learning_rate: 0.01, max_epochs: 5, layers: 2, seed: 31, validation: false, ablation: ablation("sd+ed"), ..TrainConfig::default() };
    cfg.weights.lambda1 = 0.0;
    cfg.weights.lambda2 = 0.0;
    cfg.weights.lambda3 = 0.0;
    let ours: Vec<f64> = train(cfg.clone(), &split).unwrap().log.records.iter().map(|r| r.losses.total).collect();
    let reference = lightgcn_bpr_reference(&cfg, &split);
    let worst = ours.iter().zip(&reference).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    verdict(
        "baseline equivalence",
        ours.len() == reference.len() && worst < 1e-10,
        &format!("{} epochs vs dense LightGCN-BPR reference, max relative loss difference {worst:.2e} (< 1e-10)", ours.len()),
    );
}

// -------------------------------------------------------------- determinism

#[test]
fn determinism() {
    let dir = tempfile::tempdir().unwrap();
    let split_dir = dir.path().join("split");
    write_split(&small_split(4), &split_dir).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let code = cli::run([
            "dcdsr", "train", "--split", split_dir.to_str().unwrap(), "--out", out.to_str().unwrap(),
            "--epochs", "4", "--dim", "8", "--batch", "64", "--lr", "0.01", "--beta-s", "0.5", "--beta-r", "0.4",
            "--no-timing",
        ]);
        assert_eq!(code, 0);
        out
    };
    let (a, b) = (run("a"), run("b"));
    let files = ["train_log.tsv", "model.bin", "model.meta", "session.bin", "scoring_edges.txt", "metrics.tsv"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap())
        .collect();
    let ok = same.iter().all(|&s| s);
    verdict(
        "determinism",
        ok,
        &format!("two runs with one seed, byte-identical {}: {:?}", files.join(", "), same),
    );
}
