//! Compressed adjacency for the user-item interaction graph and the
//! user-user social network.
//!
//! Both graphs keep their edges in construction order; that order defines the
//! edge index used by [`EdgeMask`]. Adjacency lists are sorted by neighbor id
//! and carry the parallel edge index of each entry.

use std::collections::HashSet;
use std::io::Write;

use crate::data::Edge;
use crate::error::{Error, Result};

/// One keep flag per edge of a parent graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    keep: Vec<bool>,
}

impl EdgeMask {
    pub fn new(keep: Vec<bool>) -> Self {
        EdgeMask { keep }
    }

    pub fn all(len: usize) -> Self {
        EdgeMask {
            keep: vec![true; len],
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn keeps(&self, edge: usize) -> bool {
        self.keep[edge]
    }

    pub fn flags(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn removed_count(&self) -> usize {
        self.len() - self.kept_count()
    }

    pub fn and(&self, other: &EdgeMask) -> Result<EdgeMask> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "cannot combine masks of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(EdgeMask {
            keep: self.keep.iter().zip(&other.keep).map(|(a, b)| *a && *b).collect(),
        })
    }
}

/// CSR block: for node `n`, neighbors live in `targets[offsets[n]..offsets[n+1]]`.
#[derive(Debug, Clone, PartialEq)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    edge_ids: Vec<u32>,
    inv_sqrt_degree: Vec<f64>,
}

impl Adjacency {
    /// `pairs` are `(source, target, edge id)` triples.
    fn build(node_count: usize, mut pairs: Vec<(u32, u32, u32)>) -> Self {
        pairs.sort_unstable();
        let mut offsets = vec![0usize; node_count + 1];
        for &(s, _, _) in &pairs {
            offsets[s as usize + 1] += 1;
        }
        for n in 0..node_count {
            offsets[n + 1] += offsets[n];
        }
        let inv_sqrt_degree = (0..node_count)
            .map(|n| {
                let d = offsets[n + 1] - offsets[n];
                if d == 0 {
                    0.0
                } else {
                    1.0 / (d as f64).sqrt()
                }
            })
            .collect();
        Adjacency {
            offsets,
            targets: pairs.iter().map(|p| p.1).collect(),
            edge_ids: pairs.iter().map(|p| p.2).collect(),
            inv_sqrt_degree,
        }
    }

    #[inline]
    fn neighbors(&self, n: usize) -> &[u32] {
        &self.targets[self.offsets[n]..self.offsets[n + 1]]
    }

    #[inline]
    fn edge_ids(&self, n: usize) -> &[u32] {
        &self.edge_ids[self.offsets[n]..self.offsets[n + 1]]
    }

    #[inline]
    fn degree(&self, n: usize) -> usize {
        self.offsets[n + 1] - self.offsets[n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    user_count: usize,
    item_count: usize,
    edges: Vec<Edge>,
    by_user: Adjacency,
    by_item: Adjacency,
}

impl InteractionGraph {
    pub fn new(edges: &[Edge], user_count: usize, item_count: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, i) in edges {
            if u as usize >= user_count || i as usize >= item_count {
                return Err(Error::Graph(format!(
                    "edge ({u}, {i}) outside {user_count} users x {item_count} items"
                )));
            }
            if !seen.insert((u, i)) {
                return Err(Error::Graph(format!("duplicate edge ({u}, {i})")));
            }
        }
        Ok(Self::from_unique(edges.to_vec(), user_count, item_count))
    }

    fn from_unique(edges: Vec<Edge>, user_count: usize, item_count: usize) -> Self {
        let ids = 0..edges.len() as u32;
        let by_user = Adjacency::build(
            user_count,
            edges.iter().zip(ids.clone()).map(|(&(u, i), e)| (u, i, e)).collect(),
        );
        let by_item = Adjacency::build(
            item_count,
            edges.iter().zip(ids).map(|(&(u, i), e)| (i, u, e)).collect(),
        );
        InteractionGraph {
            user_count,
            item_count,
            edges,
            by_user,
            by_item,
        }
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Items of user `u`, ascending.
    pub fn user_items(&self, u: usize) -> &[u32] {
        self.by_user.neighbors(u)
    }

    pub fn user_edge_ids(&self, u: usize) -> &[u32] {
        self.by_user.edge_ids(u)
    }

    /// Users of item `i`, ascending.
    pub fn item_users(&self, i: usize) -> &[u32] {
        self.by_item.neighbors(i)
    }

    pub fn user_degree(&self, u: usize) -> usize {
        self.by_user.degree(u)
    }

    pub fn item_degree(&self, i: usize) -> usize {
        self.by_item.degree(i)
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        (0..self.user_count).map(|u| self.user_degree(u)).collect()
    }

    pub fn item_degrees(&self) -> Vec<usize> {
        (0..self.item_count).map(|i| self.item_degree(i)).collect()
    }

    pub(crate) fn user_inv_sqrt_degree(&self) -> &[f64] {
        &self.by_user.inv_sqrt_degree
    }

    pub(crate) fn item_inv_sqrt_degree(&self) -> &[f64] {
        &self.by_item.inv_sqrt_degree
    }

    pub fn has_edge(&self, u: usize, i: u32) -> bool {
        self.user_items(u).binary_search(&i).is_ok()
    }

    /// `1 / sqrt(|N_u| |N_i|)`. Both endpoints must have at least one edge.
    pub fn norm_coefficient(&self, u: usize, i: usize) -> f64 {
        let (du, di) = (self.user_degree(u), self.item_degree(i));
        assert!(du > 0 && di > 0, "normalization requested for an isolated node");
        1.0 / ((du * di) as f64).sqrt()
    }

    pub fn apply_mask(&self, mask: &EdgeMask) -> Result<Self> {
        check_mask(mask, self.edge_count())?;
        let kept = kept_edges(&self.edges, mask);
        Ok(Self::from_unique(kept, self.user_count, self.item_count))
    }

    /// Write the edges in the `user item` text format.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, i) in &self.edges {
            writeln!(out, "{u} {i}")?;
        }
        Ok(())
    }
}

/// Undirected user-user network. Edges are stored once as `(u, v)`, `u < v`;
/// adjacency lists hold both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    user_count: usize,
    edges: Vec<Edge>,
    adjacency: Adjacency,
}

impl SocialNetwork {
    pub fn new(edges: &[Edge], user_count: usize) -> Result<Self> {
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for &(a, b) in edges {
            if a as usize >= user_count || b as usize >= user_count {
                return Err(Error::Graph(format!(
                    "social edge ({a}, {b}) outside {user_count} users"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on user {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Graph(format!("duplicate social edge ({a}, {b})")));
            }
            canonical.push(e);
        }
        Ok(Self::from_unique(canonical, user_count))
    }

    fn from_unique(edges: Vec<Edge>, user_count: usize) -> Self {
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for (e, &(u, v)) in edges.iter().enumerate() {
            pairs.push((u, v, e as u32));
            pairs.push((v, u, e as u32));
        }
        SocialNetwork {
            user_count,
            adjacency: Adjacency::build(user_count, pairs),
            edges,
        }
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        self.adjacency.neighbors(u)
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency.degree(u)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.user_count).map(|u| self.degree(u)).collect()
    }

    pub(crate) fn inv_sqrt_degree(&self) -> &[f64] {
        &self.adjacency.inv_sqrt_degree
    }

    pub fn has_edge(&self, u: usize, v: u32) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// `1 / sqrt(|S_u| |S_v|)`. Both endpoints must have at least one edge.
    pub fn norm_coefficient(&self, u: usize, v: usize) -> f64 {
        let (du, dv) = (self.degree(u), self.degree(v));
        assert!(du > 0 && dv > 0, "normalization requested for an isolated user");
        1.0 / ((du * dv) as f64).sqrt()
    }

    pub fn apply_mask(&self, mask: &EdgeMask) -> Result<Self> {
        check_mask(mask, self.edge_count())?;
        Ok(Self::from_unique(kept_edges(&self.edges, mask), self.user_count))
    }

    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, v) in &self.edges {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

fn check_mask(mask: &EdgeMask, edge_count: usize) -> Result<()> {
    if mask.len() != edge_count {
        return Err(Error::Shape(format!(
            "mask has {} flags for a graph with {edge_count} edges",
            mask.len()
        )));
    }
    Ok(())
}

fn kept_edges(edges: &[Edge], mask: &EdgeMask) -> Vec<Edge> {
    edges
        .iter()
        .zip(mask.flags())
        .filter_map(|(&e, &k)| k.then_some(e))
        .collect()
}
