//! Planted two-community datasets with flagged cross-community noise.
//!
//! Users and items are split into two halves. Every user has a taste
//! position on a ring over its own community's items and interacts with
//! items near it. Friends are picked among same-community users with close
//! tastes. Noise is added on top: cross-community interactions (training
//! split only) and cross-community friendships, each flagged.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{DatasetSplit, Edge, IdMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub users: usize,
    pub items: usize,
    pub interactions_per_user: usize,
    pub friends_per_user: usize,
    /// Spread of a user's items around its taste position, in items.
    pub taste_width: f64,
    /// Fabricated interactions as a fraction of clean training edges.
    pub interaction_noise: f64,
    /// Fabricated friendships as a fraction of clean social edges.
    pub social_noise: f64,
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            users: 200,
            items: 400,
            interactions_per_user: 25,
            friends_per_user: 4,
            taste_width: 12.0,
            interaction_noise: 0.2,
            social_noise: 0.2,
            train_ratio: 0.8,
            seed: 1,
        }
    }
}

impl PlantedConfig {
    fn validate(&self) -> Result<()> {
        let half_items = self.items / 2;
        let half_users = self.users / 2;
        if half_users < 2 || half_items < 2 {
            return Err(Error::Config("need at least 4 users and 4 items".into()));
        }
        if self.interactions_per_user < 2 || self.interactions_per_user > half_items {
            return Err(Error::Config("interactions per user must lie in [2, items / 2]".into()));
        }
        if self.friends_per_user >= half_users {
            return Err(Error::Config("friends per user must be below the community size".into()));
        }
        if self.taste_width.is_nan() || self.taste_width <= 0.0 {
            return Err(Error::Config("taste width must be positive".into()));
        }
        for r in [self.interaction_noise, self.social_noise] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config("noise ratios must lie in [0, 1)".into()));
            }
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config("train ratio must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

fn community(index: usize, total: usize) -> usize {
    usize::from(index >= total / 2)
}

fn ring_distance(a: f64, b: f64, size: f64) -> f64 {
    let d = (a - b).rem_euclid(size);
    d.min(size - d)
}

/// Build the planted split. Test edges are always clean.
pub fn planted_split(cfg: &PlantedConfig) -> Result<DatasetSplit> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half_items = cfg.items / 2;
    let half_users = cfg.users / 2;
    let ring = half_items as f64;
    let spread = Normal::new(0.0, cfg.taste_width).expect("positive width");

    let taste: Vec<f64> = (0..cfg.users).map(|_| rng.random_range(0.0..ring)).collect();
    let item_offset = |c: usize| if c == 0 { 0 } else { half_items };
    let user_range = |c: usize| if c == 0 { 0..half_users } else { half_users..cfg.users };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for u in 0..cfg.users {
        let c = community(u, cfg.users);
        let mut chosen = HashSet::new();
        while chosen.len() < cfg.interactions_per_user {
            let pos = (taste[u] + spread.sample(&mut rng)).rem_euclid(ring);
            let local = (pos as usize).min(half_items - 1);
            chosen.insert(item_offset(c) + local);
        }
        let mut items: Vec<usize> = chosen.into_iter().collect();
        items.sort_unstable();
        items.shuffle(&mut rng);
        let n = items.len();
        let quota = ((n as f64 * cfg.train_ratio).round() as usize).clamp(1, n - 1);
        for (k, &i) in items.iter().enumerate() {
            let e = (u as u32, i as u32);
            if k < quota {
                train.push(e);
            } else {
                test.push(e);
            }
        }
    }

    let mut social_set = HashSet::new();
    for u in 0..cfg.users {
        let c = community(u, cfg.users);
        let mut peers: Vec<usize> = user_range(c).filter(|&v| v != u).collect();
        peers.sort_by(|&a, &b| {
            ring_distance(taste[a], taste[u], ring)
                .total_cmp(&ring_distance(taste[b], taste[u], ring))
                .then(a.cmp(&b))
        });
        let pool = &mut peers[..(2 * cfg.friends_per_user).min(half_users - 1)];
        pool.shuffle(&mut rng);
        for &v in pool.iter().take(cfg.friends_per_user) {
            social_set.insert((u.min(v) as u32, u.max(v) as u32));
        }
    }
    let mut social: Vec<Edge> = social_set.iter().copied().collect();
    social.sort_unstable();
    let mut social_fabricated = vec![false; social.len()];

    let clean_train = train.len();
    let mut train_fabricated = vec![false; clean_train];
    let mut observed: HashSet<Edge> = train.iter().chain(&test).copied().collect();
    let fake_interactions = (cfg.interaction_noise * clean_train as f64).floor() as usize;
    while train.len() < clean_train + fake_interactions {
        let u = rng.random_range(0..cfg.users);
        let other = 1 - community(u, cfg.users);
        let i = item_offset(other) + rng.random_range(0..half_items);
        let e = (u as u32, i as u32);
        if observed.insert(e) {
            train.push(e);
            train_fabricated.push(true);
        }
    }

    let clean_social = social.len();
    let fake_social = (cfg.social_noise * clean_social as f64).floor() as usize;
    while social.len() < clean_social + fake_social {
        let u = rng.random_range(0..half_users);
        let v = rng.random_range(half_users..cfg.users);
        let e = (u as u32, v as u32);
        if social_set.insert(e) {
            social.push(e);
            social_fabricated.push(true);
        }
    }

    Ok(DatasetSplit {
        train,
        train_fabricated,
        test,
        social,
        social_fabricated,
        user_count: cfg.users,
        item_count: cfg.items,
        users: IdMap::from_sorted_unique((0..cfg.users as u64).collect()),
        items: IdMap::from_sorted_unique((0..cfg.items as u64).collect()),
        ratio: cfg.train_ratio,
        seed: cfg.seed,
    })
}
