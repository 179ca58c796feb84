//! EAGLE-2 style expand and rerank.
//!
//! Expansion keeps every generated child: the root's top-K, then for each
//! of the K most probable (by joint probability) nodes of the newest layer,
//! its top-K children. Reranking keeps the N draft nodes with the highest
//! joint probability, which always forms a connected subtree.

use std::cmp::Ordering;

use super::{root_token, top_k_of, DraftConfig};
use crate::error::Result;
use crate::models::DistributionOracle;
use crate::select::top_k_by;
use crate::tree::{NodeId, TokenTree, ROOT};
use crate::TokenId;

#[derive(Debug, Clone)]
pub struct Eagle2Draft {
    /// Expanded tree T1.
    pub expanded: TokenTree,
    /// Node ids of T1 kept by the rerank (root excluded), best first.
    pub selected: Vec<NodeId>,
    /// T1 restricted to the selection, renumbered.
    pub reranked: TokenTree,
    pub draft_calls: usize,
}

/// `1 + K + (d_max - 1)·K²`, the node count of a full expansion.
pub fn full_tree_size(k: usize, d_max: usize) -> usize {
    if d_max == 0 {
        1
    } else {
        1 + k + (d_max - 1) * k * k
    }
}

/// Higher joint probability, then shallower, then smaller token, then older.
fn rerank_order(tree: &TokenTree) -> impl Fn(&NodeId, &NodeId) -> Ordering + '_ {
    move |&a, &b| {
        let (na, nb) = (&tree.nodes()[a], &tree.nodes()[b]);
        nb.joint
            .total_cmp(&na.joint)
            .then(na.level.cmp(&nb.level))
            .then(na.token.cmp(&nb.token))
            .then(a.cmp(&b))
    }
}

/// Builds T1 only (no rerank).
pub fn expand<O>(oracle: &O, context: &[TokenId], k: usize, d_max: usize) -> Result<(TokenTree, usize)>
where
    O: DistributionOracle + ?Sized,
{
    let mut tree = TokenTree::new(root_token(context, oracle.vocab()));
    let mut frontier = vec![(ROOT, context.to_vec())];
    let mut calls = 0;
    for _ in 0..d_max {
        let mut layer = Vec::with_capacity(frontier.len() * k);
        for (parent, ctx) in &frontier {
            let summary = oracle.summary(ctx)?;
            calls += 1;
            let (tokens, probs): (Vec<TokenId>, Vec<f64>) = top_k_of(&summary, k)?.iter().copied().unzip();
            for id in tree.attach_children(*parent, &tokens, &probs)? {
                tree.set_entropy(id, summary.entropy)?;
                let mut c = ctx.clone();
                c.push(tree.nodes()[id].token);
                layer.push((id, c));
            }
        }
        let order = rerank_order(&tree);
        frontier = top_k_by(layer, k, |a, b| order(&a.0, &b.0));
    }
    Ok((tree, calls))
}

pub fn draft_eagle2<O>(oracle: &O, context: &[TokenId], cfg: &DraftConfig) -> Result<Eagle2Draft>
where
    O: DistributionOracle + ?Sized,
{
    cfg.validate()?;
    let (expanded, draft_calls) = expand(oracle, context, cfg.top_k, cfg.d_max)?;
    let selected = top_k_by((1..expanded.len()).collect(), cfg.top_n, rerank_order(&expanded));
    debug_assert!(expanded.is_connected_subtree(&selected));
    let reranked = expanded.subtree(&selected)?;
    Ok(Eagle2Draft {
        expanded,
        selected,
        reranked,
        draft_calls,
    })
}
