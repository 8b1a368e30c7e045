//! Parameter-free graph propagation with layer-average pooling.
//!
//! Each layer is a symmetric-normalized neighbor sum; the output is the mean
//! of layers `0..=L`, layer 0 being the base table. The map is linear and
//! self-adjoint (the normalized adjacency is symmetric), so the backward pass
//! applies the same propagation to the output gradient.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{InteractionGraph, SocialNetwork};
use crate::matrix::{axpy, Matrix};

/// Trainable base tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub users: Matrix,
    pub items: Matrix,
}

impl EmbeddingState {
    pub fn new(users: Matrix, items: Matrix) -> Result<Self> {
        if users.cols() != items.cols() || users.cols() == 0 {
            return Err(Error::Shape(format!(
                "user width {} and item width {} must match and be positive",
                users.cols(),
                items.cols()
            )));
        }
        Ok(EmbeddingState { users, items })
    }

    pub fn zeros(user_count: usize, item_count: usize, dim: usize) -> Self {
        EmbeddingState {
            users: Matrix::zeros(user_count, dim),
            items: Matrix::zeros(item_count, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.users.cols()
    }

    pub fn user_count(&self) -> usize {
        self.users.rows()
    }

    pub fn item_count(&self) -> usize {
        self.items.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.users.is_finite() && self.items.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedEmbeddings {
    pub users: Matrix,
    /// Absent for the social encoder.
    pub items: Option<Matrix>,
    pub layers: usize,
}

impl PropagatedEmbeddings {
    pub fn items(&self) -> Result<&Matrix> {
        self.items
            .as_ref()
            .ok_or_else(|| Error::Usage("social propagation carries no item embeddings".into()))
    }
}

/// Mean over layers `0..=layers` of the normalized bipartite propagation.
pub fn pool_interaction(
    graph: &InteractionGraph,
    users: &Matrix,
    items: &Matrix,
    layers: usize,
) -> (Matrix, Matrix) {
    let dim = users.cols();
    let user_scale = graph.user_inv_sqrt_degree();
    let item_scale = graph.item_inv_sqrt_degree();

    let mut acc_u = users.clone();
    let mut acc_i = items.clone();
    let mut cur_u = users.clone();
    let mut cur_i = items.clone();
    for _ in 0..layers {
        let mut next_u = Matrix::zeros(graph.user_count(), dim);
        for u in 0..graph.user_count() {
            let out = next_u.row_mut(u);
            for &i in graph.user_items(u) {
                let c = user_scale[u] * item_scale[i as usize];
                axpy(c, cur_i.row(i as usize), out);
            }
        }
        let mut next_i = Matrix::zeros(graph.item_count(), dim);
        for i in 0..graph.item_count() {
            let out = next_i.row_mut(i);
            for &u in graph.item_users(i) {
                let c = user_scale[u as usize] * item_scale[i];
                axpy(c, cur_u.row(u as usize), out);
            }
        }
        acc_u.add_scaled(1.0, &next_u);
        acc_i.add_scaled(1.0, &next_i);
        cur_u = next_u;
        cur_i = next_i;
    }
    let inv = 1.0 / (layers as f64 + 1.0);
    acc_u.scale(inv);
    acc_i.scale(inv);
    (acc_u, acc_i)
}

/// Mean over layers `0..=layers` of normalized user-user propagation.
pub fn pool_social(net: &SocialNetwork, users: &Matrix, layers: usize) -> Matrix {
    let scale = net.inv_sqrt_degree();
    let mut acc = users.clone();
    let mut cur = users.clone();
    for _ in 0..layers {
        let mut next = Matrix::zeros(net.user_count(), users.cols());
        for u in 0..net.user_count() {
            let out = next.row_mut(u);
            for &v in net.neighbors(u) {
                axpy(scale[u] * scale[v as usize], cur.row(v as usize), out);
            }
        }
        acc.add_scaled(1.0, &next);
        cur = next;
    }
    acc.scale(1.0 / (layers as f64 + 1.0));
    acc
}

fn check_interaction_dims(state: &EmbeddingState, graph: &InteractionGraph) -> Result<()> {
    if state.user_count() != graph.user_count() || state.item_count() != graph.item_count() {
        return Err(Error::Shape(format!(
            "embeddings are {}x{} users/items but graph is {}x{}",
            state.user_count(),
            state.item_count(),
            graph.user_count(),
            graph.item_count()
        )));
    }
    Ok(())
}

fn check_social_dims(users: &Matrix, net: &SocialNetwork) -> Result<()> {
    if users.rows() != net.user_count() {
        return Err(Error::Shape(format!(
            "{} user rows for a network of {} users",
            users.rows(),
            net.user_count()
        )));
    }
    Ok(())
}

/// Gradient-free interaction propagation (the denoising pass).
pub fn propagate_interaction(
    state: &EmbeddingState,
    graph: &InteractionGraph,
    layers: usize,
) -> Result<PropagatedEmbeddings> {
    check_interaction_dims(state, graph)?;
    let (users, items) = pool_interaction(graph, &state.users, &state.items, layers);
    Ok(PropagatedEmbeddings {
        users,
        items: Some(items),
        layers,
    })
}

/// Gradient-free social propagation. Item embeddings play no part.
pub fn propagate_social(
    state: &EmbeddingState,
    net: &SocialNetwork,
    layers: usize,
) -> Result<PropagatedEmbeddings> {
    check_social_dims(&state.users, net)?;
    Ok(PropagatedEmbeddings {
        users: pool_social(net, &state.users, layers),
        items: None,
        layers,
    })
}

/// Interaction-domain encoder that remembers its last forward graph.
#[derive(Debug, Clone)]
pub struct InteractionEncoder {
    layers: usize,
    graph: Option<Arc<InteractionGraph>>,
}

impl InteractionEncoder {
    pub fn new(layers: usize) -> Self {
        InteractionEncoder {
            layers,
            graph: None,
        }
    }

    pub fn forward(
        &mut self,
        state: &EmbeddingState,
        graph: Arc<InteractionGraph>,
    ) -> Result<PropagatedEmbeddings> {
        let out = propagate_interaction(state, &graph, self.layers)?;
        self.graph = Some(graph);
        Ok(out)
    }

    /// Pull `(dL/dP_U, dL/dP_I)` back to `(dL/dE_U, dL/dE_I)`.
    pub fn backward(&self, grad_users: &Matrix, grad_items: &Matrix) -> Result<(Matrix, Matrix)> {
        let graph = self
            .graph
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called before forward".into()))?;
        if grad_users.rows() != graph.user_count() || grad_items.rows() != graph.item_count() {
            return Err(Error::Shape("gradient rows do not match the cached graph".into()));
        }
        Ok(pool_interaction(graph, grad_users, grad_items, self.layers))
    }
}

#[derive(Debug, Clone)]
pub struct SocialEncoder {
    layers: usize,
    net: Option<Arc<SocialNetwork>>,
}

impl SocialEncoder {
    pub fn new(layers: usize) -> Self {
        SocialEncoder { layers, net: None }
    }

    pub fn forward(
        &mut self,
        state: &EmbeddingState,
        net: Arc<SocialNetwork>,
    ) -> Result<PropagatedEmbeddings> {
        let out = propagate_social(state, &net, self.layers)?;
        self.net = Some(net);
        Ok(out)
    }

    pub fn backward(&self, grad_users: &Matrix) -> Result<Matrix> {
        let net = self
            .net
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called before forward".into()))?;
        check_social_dims(grad_users, net)?;
        Ok(pool_social(net, grad_users, self.layers))
    }
}
