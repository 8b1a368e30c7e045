//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use dcdsr::data::DatasetSplit;
use dcdsr::graph::InteractionGraph;
use dcdsr::matrix::Matrix;
use dcdsr::synthetic::{planted_split, PlantedConfig};
use dcdsr::trainer::{initialize, sample_epoch_batches, stream_rng, Ablation, TrainConfig, EPOCH_STREAM_BASE};
use rand::Rng;

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// `max |a - b| / max |b|` over all entries.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = b.as_slice().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.max_abs_diff(b) / scale
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn len(a: &[f64]) -> f64 {
    dotp(a, a).sqrt()
}

/// Cosine similarity and its partial derivatives with respect to `a` and `b`:
/// `ds/da = b / (|a||b|) - s a / |a|^2`.
pub fn cosine_with_grads(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (na, nb) = (len(a), len(b));
    let s = dotp(a, b) / (na * nb);
    let da = a.iter().zip(b).map(|(&x, &y)| y / (na * nb) - s * x / (na * na)).collect();
    let db = a.iter().zip(b).map(|(&x, &y)| x / (na * nb) - s * y / (nb * nb)).collect();
    (s, da, db)
}

fn add_into(dst: &mut [f64], w: f64, src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += w * s);
}

/// Softmax `p(j|i)` over `s(v1_i, v2_j) / tau`, row by row.
fn softmax_rows(v1: &Matrix, v2: &Matrix, tau: f64) -> Vec<Vec<f64>> {
    (0..v1.rows())
        .map(|i| {
            let logits: Vec<f64> = (0..v2.rows()).map(|j| cosine_with_grads(v1.row(i), v2.row(j)).0 / tau).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
            logits.iter().map(|l| (l - max).exp() / z).collect()
        })
        .collect()
}

/// Push term shared by both losses: `(1/tau) sum_j p(j|i) ds(v1_i, v2_j)`,
/// accumulated onto `v1_i` and onto every `v2_j`. Returns the log-partition sum.
fn push_terms(v1: &Matrix, v2: &Matrix, tau: f64, g1: &mut Matrix, g2: &mut Matrix) -> f64 {
    let p = softmax_rows(v1, v2, tau);
    let mut log_z = 0.0;
    for i in 0..v1.rows() {
        let mut z = 0.0;
        for j in 0..v2.rows() {
            let (s, da, db) = cosine_with_grads(v1.row(i), v2.row(j));
            z += (s / tau).exp();
            add_into(g1.row_mut(i), p[i][j] / tau, &da);
            add_into(g2.row_mut(j), p[i][j] / tau, &db);
        }
        log_z += z.ln();
    }
    log_z
}

/// InfoNCE loss and gradients written out term by term: the softmax-weighted
/// expectation of the similarity gradient minus the positive-pair gradient.
pub fn infonce_oracle(v1: &Matrix, v2: &Matrix, tau: f64) -> (f64, Matrix, Matrix) {
    let (b, d) = v1.shape();
    let mut g1 = Matrix::zeros(b, d);
    let mut g2 = Matrix::zeros(b, d);
    let mut loss = push_terms(v1, v2, tau, &mut g1, &mut g2);
    for i in 0..b {
        let (s, da, db) = cosine_with_grads(v1.row(i), v2.row(i));
        loss -= s / tau;
        add_into(g1.row_mut(i), -1.0 / tau, &da);
        add_into(g2.row_mut(i), -1.0 / tau, &db);
    }
    (loss, g1, g2)
}

/// Anchor-centered InfoNCE written out term by term: half-weight pulls of
/// each view towards its anchor plus the InfoNCE push term.
pub fn ac_infonce_oracle(h: &Matrix, v1: &Matrix, v2: &Matrix, tau: f64) -> (f64, Matrix, Matrix, Matrix) {
    let (b, d) = v1.shape();
    let mut gh = Matrix::zeros(b, d);
    let mut g1 = Matrix::zeros(b, d);
    let mut g2 = Matrix::zeros(b, d);
    let mut loss = push_terms(v1, v2, tau, &mut g1, &mut g2);
    let pull = -1.0 / (2.0 * tau);
    for i in 0..b {
        let (s1, dh1, dv1) = cosine_with_grads(h.row(i), v1.row(i));
        let (s2, dh2, dv2) = cosine_with_grads(h.row(i), v2.row(i));
        loss += pull * (s1 + s2);
        add_into(gh.row_mut(i), pull, &dh1);
        add_into(gh.row_mut(i), pull, &dh2);
        add_into(g1.row_mut(i), pull, &dv1);
        add_into(g2.row_mut(i), pull, &dv2);
    }
    (loss, gh, g1, g2)
}

/// Dense LightGCN: `mean_{l=0..L} A_hat^l E` over the stacked user/item table.
pub struct DenseLightGcn {
    adj: Vec<f64>,
    n: usize,
    layers: usize,
}

impl DenseLightGcn {
    pub fn new(edges: &[(u32, u32)], users: usize, items: usize, layers: usize) -> Self {
        let n = users + items;
        let mut a = vec![0.0; n * n];
        for &(u, i) in edges {
            let (r, c) = (u as usize, users + i as usize);
            a[r * n + c] = 1.0;
            a[c * n + r] = 1.0;
        }
        let deg: Vec<f64> = (0..n).map(|r| a[r * n..(r + 1) * n].iter().sum()).collect();
        for r in 0..n {
            for c in 0..n {
                if a[r * n + c] != 0.0 {
                    a[r * n + c] /= (deg[r] * deg[c]).sqrt();
                }
            }
        }
        DenseLightGcn { adj: a, n, layers }
    }

    /// `x` is `n x d`, row-major.
    pub fn propagate(&self, x: &[f64], d: usize) -> Vec<f64> {
        let n = self.n;
        let mut layer = x.to_vec();
        let mut sum = x.to_vec();
        for _ in 0..self.layers {
            let mut next = vec![0.0; n * d];
            for r in 0..n {
                for c in 0..n {
                    let w = self.adj[r * n + c];
                    if w != 0.0 {
                        for k in 0..d {
                            next[r * d + k] += w * layer[c * d + k];
                        }
                    }
                }
            }
            sum.iter_mut().zip(&next).for_each(|(s, v)| *s += v);
            layer = next;
        }
        let scale = 1.0 / (self.layers + 1) as f64;
        sum.iter_mut().for_each(|s| *s *= scale);
        sum
    }
}

fn ln_sigmoid_neg(z: f64) -> f64 {
    // -ln sigmoid(z)
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Plain LightGCN trained with BPR + L2 and Adam, epoch by epoch, drawing
/// batches exactly as the trainer does. Returns the summed loss per epoch.
pub fn lightgcn_bpr_reference(cfg: &TrainConfig, split: &DatasetSplit) -> Vec<f64> {
    let (m, nitems, d) = (split.user_count, split.item_count, cfg.dim);
    let graph = InteractionGraph::new(&split.train, m, nitems).unwrap();
    let model = DenseLightGcn::new(&split.train, m, nitems, cfg.layers);
    let (state, _) = initialize(cfg, m, nitems).unwrap();
    let mut e: Vec<f64> = state.users.as_slice().iter().chain(state.items.as_slice()).copied().collect();
    let mut mom = vec![0.0; e.len()];
    let mut vel = vec![0.0; e.len()];
    let (b1, b2, eps) = (cfg.adam.beta1, cfg.adam.beta2, cfg.adam.eps);
    let lambda = cfg.weights.lambda_reg;
    let mut step = 0i32;
    let mut trajectory = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let mut rng = stream_rng(cfg.seed, EPOCH_STREAM_BASE + epoch as u64);
        let batches = sample_epoch_batches(&graph, &graph, cfg.batch_size, &mut rng);
        let mut total = 0.0;
        for batch in &batches {
            let p = model.propagate(&e, d);
            let mut gp = vec![0.0; e.len()];
            let mut loss = 0.0;
            for t in 0..batch.len() {
                let (u, i, j) = (
                    batch.users[t] as usize,
                    m + batch.positives[t] as usize,
                    m + batch.negatives[t] as usize,
                );
                let (pu, pi, pj) = (&p[u * d..(u + 1) * d], &p[i * d..(i + 1) * d], &p[j * d..(j + 1) * d]);
                let x = dotp(pu, pi) - dotp(pu, pj);
                loss += ln_sigmoid_neg(x);
                let g = -1.0 / (1.0 + x.exp());
                for k in 0..d {
                    gp[u * d + k] += g * (pi[k] - pj[k]);
                    gp[i * d + k] += g * pu[k];
                    gp[j * d + k] -= g * pu[k];
                }
            }
            let mut grad = model.propagate(&gp, d);
            loss += lambda * e.iter().map(|x| x * x).sum::<f64>();
            grad.iter_mut().zip(&e).for_each(|(g, x)| *g += 2.0 * lambda * x);
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            for k in 0..e.len() {
                mom[k] = b1 * mom[k] + (1.0 - b1) * grad[k];
                vel[k] = b2 * vel[k] + (1.0 - b2) * grad[k] * grad[k];
                e[k] -= cfg.learning_rate * (mom[k] / c1) / ((vel[k] / c2).sqrt() + eps);
            }
            total += loss;
        }
        trajectory.push(total);
    }
    trajectory
}

/// The configuration every synthetic acceptance run shares.
pub fn synthetic_config(seed: u64, ablation: Ablation) -> TrainConfig {
    let mut cfg = TrainConfig {
        dim: 32,
        batch_size: 256,
        learning_rate: 0.01,
        max_epochs: 30,
        layers: 2,
        epsilon: 0.1,
        seed,
        ablation,
        validation: false,
        ..TrainConfig::default()
    };
    cfg.thresholds.beta_s = 0.5;
    cfg.thresholds.beta_r = 0.5;
    cfg.weights.lambda1 = 0.1;
    cfg.weights.lambda2 = 0.1;
    cfg.weights.lambda3 = 0.1;
    cfg.weights.tau = 1.0;
    cfg
}

pub fn synthetic_split(seed: u64, interaction_noise: f64) -> DatasetSplit {
    planted_split(&PlantedConfig {
        seed,
        interaction_noise,
        ..PlantedConfig::default()
    })
    .unwrap()
}

/// A small planted split for fast tests.
pub fn small_split(seed: u64) -> DatasetSplit {
    planted_split(&PlantedConfig {
        users: 40,
        items: 60,
        interactions_per_user: 8,
        friends_per_user: 3,
        taste_width: 4.0,
        seed,
        ..PlantedConfig::default()
    })
    .unwrap()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
