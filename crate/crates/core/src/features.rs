//! Classifier features: joint probability, truncated entropy, depth.
//!
//! Entropy is in nats. Truncated entropy sums `-p ln p` over the `M` most
//! probable entries in descending order (ties by smaller index), so the
//! value for `M` is an exact prefix of the value for `M + 1` and of the
//! full entropy.

use crate::error::{Error, Result};
use crate::models::check_distribution;
use crate::select::{by_prob_desc, partition_top_k_by};
use crate::tree::{NodeId, TokenTree};
use crate::TokenId;

pub const DEFAULT_TOP_M: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    /// Joint probability P.
    pub joint: f64,
    /// Entropy H of the generating distribution.
    pub entropy: f64,
    /// Depth d as assigned by the drafting loop.
    pub depth: f64,
}

impl FeatureVector {
    pub fn new(joint: f64, entropy: f64, depth: f64) -> Self {
        FeatureVector { joint, entropy, depth }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.joint, self.entropy, self.depth]
    }

    pub fn is_finite(&self) -> bool {
        self.joint.is_finite() && self.entropy.is_finite() && self.depth.is_finite()
    }
}

fn term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

fn sorted_desc(dist: &[f64], m: usize) -> Vec<(TokenId, f64)> {
    let mut items: Vec<(TokenId, f64)> = dist
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as TokenId, p))
        .collect();
    partition_top_k_by(&mut items, m, by_prob_desc);
    items.sort_by(by_prob_desc);
    items
}

/// Truncated entropy without input validation.
pub fn truncated_entropy_unchecked(dist: &[f64], m: usize) -> f64 {
    sorted_desc(dist, m).iter().map(|&(_, p)| term(p)).sum()
}

pub fn truncated_entropy(dist: &[f64], m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::invalid("truncation cutoff M must be at least 1"));
    }
    check_distribution(dist)?;
    Ok(truncated_entropy_unchecked(dist, m))
}

/// Full entropy in nats.
pub fn entropy(dist: &[f64]) -> f64 {
    truncated_entropy_unchecked(dist, dist.len())
}

/// `(truncated, full)` entropy from a single sort.
pub(crate) fn sorted_entropy_prefix(dist: &[f64], m: usize) -> (f64, f64) {
    let sorted = sorted_desc(dist, dist.len());
    let mut acc = 0.0;
    let mut truncated = 0.0;
    for (i, &(_, p)) in sorted.iter().enumerate() {
        if i == m {
            truncated = acc;
        }
        acc += term(p);
    }
    if m >= sorted.len() {
        truncated = acc;
    }
    (truncated, acc)
}

/// Features of a drafted node: stored joint probability, the entropy cached
/// from its parent's distribution, and its depth counter.
pub fn node_features(tree: &TokenTree, id: NodeId) -> Result<FeatureVector> {
    let node = tree.node(id)?;
    if node.is_root() {
        return Err(Error::invalid("the root has no classifier features"));
    }
    Ok(FeatureVector::new(
        node.joint,
        node.entropy,
        node.depth_feature() as f64,
    ))
}
