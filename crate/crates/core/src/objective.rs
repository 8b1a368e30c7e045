//! Losses and their exact gradients.
//!
//! All losses are sums over the batch. Gradients are produced with respect
//! to whichever embedding rows the loss reads; [`joint_loss`] chains them
//! through the propagation into the base tables.

use std::sync::Arc;

use rand::RngCore;

use crate::encoder::{EmbeddingState, InteractionEncoder, SocialEncoder};
use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, SocialNetwork};
use crate::matrix::{axpy, dot, norm, Matrix};
use crate::perturb::{apply_noise, PerturbMode, PerturbationNoise};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda_reg: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 0.1,
            lambda2: 0.1,
            lambda3: 0.1,
            lambda_reg: 1e-4,
            tau: 0.2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda_reg", self.lambda_reg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

/// Which contrastive objective the embedding-space denoiser uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClLoss {
    #[default]
    AcInfoNce,
    InfoNce,
}

/// A mini-batch of `(user, positive, negative)` triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSample {
    pub users: Vec<u32>,
    pub positives: Vec<u32>,
    pub negatives: Vec<u32>,
    /// Distinct users of the batch, ascending; the contrastive batch.
    pub batch_users: Vec<u32>,
    /// Distinct positive items of the batch, ascending.
    pub batch_items: Vec<u32>,
}

impl BatchSample {
    pub fn new(users: Vec<u32>, positives: Vec<u32>, negatives: Vec<u32>) -> Self {
        let dedup = |v: &[u32]| {
            let mut d = v.to_vec();
            d.sort_unstable();
            d.dedup();
            d
        };
        BatchSample {
            batch_users: dedup(&users),
            batch_items: dedup(&positives),
            users,
            positives,
            negatives,
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}

/// Predicted preference `p_u . p_i`.
pub fn score(p_u: &[f64], p_i: &[f64]) -> f64 {
    debug_assert_eq!(p_u.len(), p_i.len());
    dot(p_u, p_i)
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprOutput {
    pub loss: f64,
    pub grad_users: Matrix,
    pub grad_items: Matrix,
}

/// `sum -ln sigmoid(y_ui - y_uj)` with gradients on the full tables.
pub fn bpr_loss(batch: &BatchSample, users: &Matrix, items: &Matrix) -> Result<BprOutput> {
    if users.cols() != items.cols() {
        return Err(Error::Shape("user and item widths differ".into()));
    }
    let mut grad_users = Matrix::zeros(users.rows(), users.cols());
    let mut grad_items = Matrix::zeros(items.rows(), items.cols());
    let mut loss = 0.0;
    for ((&u, &i), &j) in batch.users.iter().zip(&batch.positives).zip(&batch.negatives) {
        let (u, i, j) = (u as usize, i as usize, j as usize);
        let (pu, pi, pj) = (users.row(u), items.row(i), items.row(j));
        let margin = score(pu, pi) - score(pu, pj);
        loss += softplus(-margin);
        // d/dmargin of -ln sigmoid(margin)
        let g = -sigmoid(-margin);
        {
            let gu = grad_users.row_mut(u);
            axpy(g, pi, gu);
            axpy(-g, pj, gu);
        }
        axpy(g, pu, grad_items.row_mut(i));
        axpy(-g, pu, grad_items.row_mut(j));
    }
    Ok(BprOutput {
        loss,
        grad_users,
        grad_items,
    })
}

/// Per-batch contrastive loss value and gradients w.r.t. each input row.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveOutput {
    pub loss: f64,
    /// Gradient on the unperturbed anchors (AC-InfoNCE only).
    pub grad_anchor: Option<Matrix>,
    pub grad_view1: Matrix,
    pub grad_view2: Matrix,
}

/// Unit rows and the original norms; zero rows stay zero.
fn normalize_rows(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = norm(m.row(r));
        norms.push(n);
        if n > 0.0 {
            out.row_mut(r).iter_mut().for_each(|x| *x /= n);
        }
    }
    (out, norms)
}

/// Map a gradient w.r.t. unit rows back to the raw rows:
/// `(I - a_hat a_hat^T) g / |a|`.
fn unnormalize_grad(unit: &Matrix, norms: &[f64], grad_unit: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(unit.rows(), unit.cols());
    for r in 0..unit.rows() {
        if norms[r] == 0.0 {
            continue;
        }
        let a = unit.row(r);
        let g = grad_unit.row(r);
        let radial = dot(a, g);
        for ((o, &gi), &ai) in out.row_mut(r).iter_mut().zip(g).zip(a) {
            *o = (gi - radial * ai) / norms[r];
        }
    }
    out
}

fn check_views(views: &[&Matrix]) -> Result<()> {
    let shape = views[0].shape();
    if views.iter().any(|v| v.shape() != shape) {
        return Err(Error::Shape("contrastive inputs must share one shape".into()));
    }
    Ok(())
}

/// Shared body: `anchors = None` gives InfoNCE, `Some` gives AC-InfoNCE.
fn contrastive(anchors: Option<&Matrix>, view1: &Matrix, view2: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    check_tau(tau)?;
    match anchors {
        Some(h) => check_views(&[h, view1, view2])?,
        None => check_views(&[view1, view2])?,
    }
    let b = view1.rows();
    let d = view1.cols();
    let (u1, n1) = normalize_rows(view1);
    let (u2, n2) = normalize_rows(view2);

    // dL/dS for the cross-view similarity matrix S[i][j] = s(v1_i, v2_j).
    let mut g_sim = vec![0.0; b * b];
    let mut loss = 0.0;
    let mut logits = vec![0.0; b];
    for i in 0..b {
        for (j, l) in logits.iter_mut().enumerate() {
            *l = dot(u1.row(i), u2.row(j)) / tau;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        loss += max + sum.ln();
        for j in 0..b {
            g_sim[i * b + j] = (logits[j] - max).exp() / sum / tau;
        }
        if anchors.is_none() {
            loss -= logits[i];
            g_sim[i * b + i] -= 1.0 / tau;
        }
    }

    let mut g_u1 = Matrix::zeros(b, d);
    let mut g_u2 = Matrix::zeros(b, d);
    for i in 0..b {
        for j in 0..b {
            let w = g_sim[i * b + j];
            axpy(w, u2.row(j), g_u1.row_mut(i));
            axpy(w, u1.row(i), g_u2.row_mut(j));
        }
    }

    let grad_anchor = match anchors {
        None => None,
        Some(h) => {
            let (uh, nh) = normalize_rows(h);
            let mut g_uh = Matrix::zeros(b, d);
            let pull = -1.0 / (2.0 * tau);
            for i in 0..b {
                let (a, p1, p2) = (uh.row(i), u1.row(i), u2.row(i));
                loss += pull * (dot(a, p1) + dot(a, p2));
                let gh = g_uh.row_mut(i);
                axpy(pull, p1, gh);
                axpy(pull, p2, gh);
                axpy(pull, a, g_u1.row_mut(i));
                axpy(pull, a, g_u2.row_mut(i));
            }
            Some(unnormalize_grad(&uh, &nh, &g_uh))
        }
    };

    Ok(ContrastiveOutput {
        loss,
        grad_anchor,
        grad_view1: unnormalize_grad(&u1, &n1, &g_u1),
        grad_view2: unnormalize_grad(&u2, &n2, &g_u2),
    })
}

/// `sum_i -ln[ exp(s(v1_i, v2_i)/tau) / sum_j exp(s(v1_i, v2_j)/tau) ]`
pub fn infonce_loss(view1: &Matrix, view2: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    contrastive(None, view1, view2, tau)
}

/// Anchor-centered variant: the numerator averages the similarities of the
/// unperturbed anchor to both views; the denominator is InfoNCE's (it
/// includes `j = i`).
pub fn ac_infonce_loss(anchors: &Matrix, view1: &Matrix, view2: &Matrix, tau: f64) -> Result<ContrastiveOutput> {
    contrastive(Some(anchors), view1, view2, tau)
}

/// Contrastive loss over selected rows of full matrices. Because the views
/// are `base - epsilon * noise` with constant noise, every gradient lands on
/// the base rows; the returned matrix is full-size.
fn family_loss(
    kind: ClLoss,
    base: &Matrix,
    view1: &Matrix,
    view2: &Matrix,
    rows: &[usize],
    tau: f64,
) -> Result<(f64, Matrix)> {
    let h = base.select_rows(rows);
    let v1 = view1.select_rows(rows);
    let v2 = view2.select_rows(rows);
    let out = match kind {
        ClLoss::AcInfoNce => ac_infonce_loss(&h, &v1, &v2, tau)?,
        ClLoss::InfoNce => infonce_loss(&v1, &v2, tau)?,
    };
    let mut grad = Matrix::zeros(base.rows(), base.cols());
    grad.scatter_add_rows(rows, &out.grad_view1);
    grad.scatter_add_rows(rows, &out.grad_view2);
    if let Some(g) = &out.grad_anchor {
        grad.scatter_add_rows(rows, g);
    }
    Ok((out.loss, grad))
}

/// Source of the perturbation noise used for the contrastive views.
pub enum Perturbation<'a> {
    /// No views and no contrastive terms.
    Disabled,
    /// Pre-drawn noise, held constant.
    Fixed(&'a PerturbationNoise),
    /// Draw fresh noise from the propagated embeddings.
    Sampled(PerturbMode, &'a mut dyn RngCore),
}

pub struct JointInputs<'a> {
    pub state: &'a EmbeddingState,
    pub interaction: &'a Arc<InteractionGraph>,
    pub social: &'a Arc<SocialNetwork>,
    pub layers: usize,
    pub batch: &'a BatchSample,
    pub weights: &'a LossWeights,
    pub cl_loss: ClLoss,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub bpr: f64,
    pub cl_interaction: f64,
    pub cl_social: f64,
    pub cl_item: f64,
    pub reg: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.bpr += other.bpr;
        self.cl_interaction += other.cl_interaction;
        self.cl_social += other.cl_social;
        self.cl_item += other.cl_item;
        self.reg += other.reg;
        self.total += other.total;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOutput {
    pub parts: LossBreakdown,
    pub grad_users: Matrix,
    pub grad_items: Matrix,
    /// The noise the views were built from, if any.
    pub noise: Option<PerturbationNoise>,
}

/// BPR + weighted contrastive terms + L2 on the base tables, with the full
/// gradient with respect to the base tables.
pub fn joint_loss(inputs: &JointInputs<'_>, perturbation: Perturbation<'_>) -> Result<JointOutput> {
    let JointInputs {
        state,
        interaction,
        social,
        layers,
        batch,
        weights,
        cl_loss,
        epsilon,
    } = *inputs;
    weights.validate()?;

    let mut ienc = InteractionEncoder::new(layers);
    let mut senc = SocialEncoder::new(layers);
    let pr = ienc.forward(state, Arc::clone(interaction))?;
    let pr_items = pr.items()?;

    let bpr = bpr_loss(batch, &pr.users, pr_items)?;
    let mut parts = LossBreakdown {
        bpr: bpr.loss,
        ..Default::default()
    };
    let mut g_pr_users = bpr.grad_users;
    let mut g_pr_items = bpr.grad_items;
    let mut g_ps_users = None;

    let ps = match perturbation {
        Perturbation::Disabled => None,
        _ => Some(senc.forward(state, Arc::clone(social))?),
    };
    let noise = match perturbation {
        Perturbation::Disabled => None,
        Perturbation::Fixed(n) => Some(n.clone()),
        Perturbation::Sampled(mode, rng) => {
            let ps = ps.as_ref().expect("social pass runs whenever views are built");
            Some(PerturbationNoise::sample(&pr.users, &ps.users, pr_items, mode, rng)?)
        }
    };

    if let (Some(noise), Some(ps)) = (&noise, &ps) {
        let user_rows: Vec<usize> = batch.batch_users.iter().map(|&u| u as usize).collect();
        let item_rows: Vec<usize> = batch.batch_items.iter().map(|&i| i as usize).collect();

        let view = |base: &Matrix, n: &Matrix| apply_noise(base, n, epsilon);
        let [r1, r2] = &noise.user_interaction;
        let [s1, s2] = &noise.user_social;
        let [i1, i2] = &noise.item;

        let (l_r, g_r) = family_loss(cl_loss, &pr.users, &view(&pr.users, r1), &view(&pr.users, r2), &user_rows, weights.tau)?;
        let (l_s, g_s) = family_loss(cl_loss, &ps.users, &view(&ps.users, s1), &view(&ps.users, s2), &user_rows, weights.tau)?;
        let (l_i, g_i) = family_loss(cl_loss, pr_items, &view(pr_items, i1), &view(pr_items, i2), &item_rows, weights.tau)?;

        parts.cl_interaction = l_r;
        parts.cl_social = l_s;
        parts.cl_item = l_i;
        g_pr_users.add_scaled(weights.lambda1, &g_r);
        g_pr_items.add_scaled(weights.lambda3, &g_i);
        let mut gs = g_s;
        gs.scale(weights.lambda2);
        g_ps_users = Some(gs);
    }

    let (mut grad_users, mut grad_items) = ienc.backward(&g_pr_users, &g_pr_items)?;
    if let Some(gs) = &g_ps_users {
        grad_users.add_scaled(1.0, &senc.backward(gs)?);
    }

    parts.reg = weights.lambda_reg * (state.users.frobenius_sq() + state.items.frobenius_sq());
    grad_users.add_scaled(2.0 * weights.lambda_reg, &state.users);
    grad_items.add_scaled(2.0 * weights.lambda_reg, &state.items);

    parts.total = parts.bpr
        + weights.lambda1 * parts.cl_interaction
        + weights.lambda2 * parts.cl_social
        + weights.lambda3 * parts.cl_item
        + parts.reg;
    if !parts.total.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {:?}", parts)));
    }
    Ok(JointOutput {
        parts,
        grad_users,
        grad_items,
        noise,
    })
}
