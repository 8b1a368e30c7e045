//! Structure-level collaborative denoising.
//!
//! Every epoch both graphs are rebuilt from the ORIGINAL edge sets:
//! social edges with low preference consistency are dropped first, then
//! interaction edges whose item is incompatible with the user's
//! socially-enhanced preference embedding.

use std::fmt::Write as _;

use crate::encoder::PropagatedEmbeddings;
use crate::error::{Error, Result};
use crate::graph::{EdgeMask, InteractionGraph, SocialNetwork};
use crate::matrix::{axpy, cosine, Matrix};

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseThresholds {
    pub beta_s: f64,
    pub beta_r: f64,
    pub sigma: f64,
}

impl Default for DenoiseThresholds {
    fn default() -> Self {
        DenoiseThresholds {
            beta_s: 0.8,
            beta_r: 0.4,
            sigma: 20.0,
        }
    }
}

impl DenoiseThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        for (name, b) in [("beta_s", self.beta_s), ("beta_r", self.beta_r)] {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {b}")));
            }
        }
        Ok(())
    }
}

/// Score counts over `[0, 1]` in equal-width bins; 1.0 falls in the last bin.
pub type Histogram = [u64; HISTOGRAM_BINS];

fn bin(score: f64) -> usize {
    ((score * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DenoiseReport {
    pub social_edges: usize,
    pub social_edges_removed: usize,
    pub interaction_edges: usize,
    pub interaction_edges_removed: usize,
    /// Removed interaction edges carrying the fabricated-noise flag.
    pub removed_flagged_noise: usize,
    pub flagged_noise: usize,
    pub removed_flagged_social: usize,
    pub flagged_social: usize,
    pub pc_histogram: Histogram,
    pub ic_histogram: Histogram,
}

impl DenoiseReport {
    pub fn merge(&self, other: &DenoiseReport) -> DenoiseReport {
        let add = |a: &Histogram, b: &Histogram| {
            let mut out = *a;
            out.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            out
        };
        DenoiseReport {
            social_edges: self.social_edges + other.social_edges,
            social_edges_removed: self.social_edges_removed + other.social_edges_removed,
            interaction_edges: self.interaction_edges + other.interaction_edges,
            interaction_edges_removed: self.interaction_edges_removed
                + other.interaction_edges_removed,
            removed_flagged_noise: self.removed_flagged_noise + other.removed_flagged_noise,
            flagged_noise: self.flagged_noise + other.flagged_noise,
            removed_flagged_social: self.removed_flagged_social + other.removed_flagged_social,
            flagged_social: self.flagged_social + other.flagged_social,
            pc_histogram: add(&self.pc_histogram, &other.pc_histogram),
            ic_histogram: add(&self.ic_histogram, &other.ic_histogram),
        }
    }

    /// Fraction of removed interaction edges that were fabricated.
    pub fn removal_precision(&self) -> Option<f64> {
        (self.interaction_edges_removed > 0)
            .then(|| self.removed_flagged_noise as f64 / self.interaction_edges_removed as f64)
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let hist = |h: &Histogram| h.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "social_edges={}", self.social_edges);
        let _ = writeln!(s, "social_edges_removed={}", self.social_edges_removed);
        let _ = writeln!(s, "interaction_edges={}", self.interaction_edges);
        let _ = writeln!(s, "interaction_edges_removed={}", self.interaction_edges_removed);
        let _ = writeln!(s, "flagged_noise={}", self.flagged_noise);
        let _ = writeln!(s, "removed_flagged_noise={}", self.removed_flagged_noise);
        let _ = writeln!(s, "flagged_social={}", self.flagged_social);
        let _ = writeln!(s, "removed_flagged_social={}", self.removed_flagged_social);
        if let Some(p) = self.removal_precision() {
            let _ = writeln!(s, "removal_precision={p:.6}");
        }
        let _ = writeln!(s, "pc_histogram={}", hist(&self.pc_histogram));
        let _ = writeln!(s, "ic_histogram={}", hist(&self.ic_histogram));
        s
    }

    /// `bin_low,bin_high,pc_count,ic_count` rows.
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,pc_count,ic_count\n");
        let w = 1.0 / HISTOGRAM_BINS as f64;
        for b in 0..HISTOGRAM_BINS {
            let _ = writeln!(
                s,
                "{:.1},{:.1},{},{}",
                b as f64 * w,
                (b + 1) as f64 * w,
                self.pc_histogram[b],
                self.ic_histogram[b]
            );
        }
        s
    }
}

/// `(1 + cos(a, b)) / 2 * exp(-|a - b|^2 / (2 sigma^2))`, in `[0, 1]`.
///
/// A zero vector has cosine 0 with anything.
pub fn kernel_score(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let direction = 0.5 * (1.0 + cosine(a, b));
    (direction * (-dist_sq / (2.0 * sigma * sigma)).exp()).clamp(0.0, 1.0)
}

/// Preference consistency between two users' interaction-domain embeddings.
pub fn preference_consistency(h_u: &[f64], h_v: &[f64], sigma: f64) -> f64 {
    kernel_score(h_u, h_v, sigma)
}

/// Compatibility between a socially-enhanced user embedding and an item.
pub fn interaction_compatibility(h_enhanced: &[f64], h_item: &[f64], sigma: f64) -> f64 {
    kernel_score(h_enhanced, h_item, sigma)
}

/// Keep social edges with `PC >= beta_s`.
pub fn denoise_social(
    original: &SocialNetwork,
    h: &PropagatedEmbeddings,
    thresholds: &DenoiseThresholds,
    fabricated: Option<&[bool]>,
) -> Result<(SocialNetwork, EdgeMask, DenoiseReport)> {
    if h.users.rows() != original.user_count() {
        return Err(Error::Shape("user embeddings do not cover the social network".into()));
    }
    let mut report = DenoiseReport {
        social_edges: original.edge_count(),
        ..Default::default()
    };
    let keep: Vec<bool> = original
        .edges()
        .iter()
        .map(|&(u, v)| {
            let pc = preference_consistency(h.users.row(u as usize), h.users.row(v as usize), thresholds.sigma);
            report.pc_histogram[bin(pc)] += 1;
            pc >= thresholds.beta_s
        })
        .collect();
    let mask = EdgeMask::new(keep);
    report.social_edges_removed = mask.removed_count();
    if let Some(flags) = fabricated {
        report.flagged_social = flags.iter().filter(|&&f| f).count();
        report.removed_flagged_social = count_removed_flagged(&mask, flags);
    }
    Ok((original.apply_mask(&mask)?, mask, report))
}

/// `h_u^enh = sum_{v in S_u} h_v / sqrt(|S_u| |S_v|)` over the denoised network.
pub fn social_enhance(h: &PropagatedEmbeddings, denoised: &SocialNetwork) -> Matrix {
    let mut out = Matrix::zeros(h.users.rows(), h.users.cols());
    for u in 0..denoised.user_count() {
        let row = out.row_mut(u);
        for &v in denoised.neighbors(u) {
            axpy(denoised.norm_coefficient(u, v as usize), h.users.row(v as usize), row);
        }
    }
    out
}

/// Keep interaction edges with `IC >= beta_r`.
pub fn denoise_interaction(
    original: &InteractionGraph,
    enhanced: &Matrix,
    h: &PropagatedEmbeddings,
    thresholds: &DenoiseThresholds,
    fabricated: Option<&[bool]>,
) -> Result<(InteractionGraph, EdgeMask, DenoiseReport)> {
    let items = h.items()?;
    if enhanced.rows() != original.user_count() || items.rows() != original.item_count() {
        return Err(Error::Shape("embeddings do not cover the interaction graph".into()));
    }
    let mut report = DenoiseReport {
        interaction_edges: original.edge_count(),
        ..Default::default()
    };
    let keep: Vec<bool> = original
        .edges()
        .iter()
        .map(|&(u, i)| {
            let ic = interaction_compatibility(enhanced.row(u as usize), items.row(i as usize), thresholds.sigma);
            report.ic_histogram[bin(ic)] += 1;
            ic >= thresholds.beta_r
        })
        .collect();
    let mask = EdgeMask::new(keep);
    report.interaction_edges_removed = mask.removed_count();
    if let Some(flags) = fabricated {
        report.flagged_noise = flags.iter().filter(|&&f| f).count();
        report.removed_flagged_noise = count_removed_flagged(&mask, flags);
    }
    Ok((original.apply_mask(&mask)?, mask, report))
}

fn count_removed_flagged(mask: &EdgeMask, flags: &[bool]) -> usize {
    mask.flags()
        .iter()
        .zip(flags)
        .filter(|(&keep, &flag)| !keep && flag)
        .count()
}
