//! Fixed-shape trees filled with the draft model's ranked tokens.
//!
//! A position is the tuple of ranks along its path (rank 0 = most probable
//! child). Layer ℓ of a shape with `n_ℓ` nodes takes the `n_ℓ` child
//! positions of layer ℓ−1 with the smallest rank sum, ties broken
//! lexicographically. The choice depends only on the shape, never on the
//! model, and the all-zero chain is always present.

use super::{root_token, top_k_of, Draft};
use crate::error::{Error, Result};
use crate::models::DistributionOracle;
use crate::tree::{NodeId, TokenTree, ROOT};
use crate::TokenId;

/// 26 draft nodes over 5 layers.
pub const DEFAULT_STATIC_SHAPE: [usize; 5] = [4, 8, 7, 4, 3];

/// Rank tuples per layer, each listing `(parent slot in previous layer, rank)`.
pub fn static_positions(shape: &[usize]) -> Result<Vec<Vec<(usize, usize)>>> {
    if shape.is_empty() {
        return Err(Error::invalid("static shape must be non-empty"));
    }
    let mut layers: Vec<Vec<(usize, usize)>> = Vec::with_capacity(shape.len());
    let mut prev: Vec<Vec<usize>> = vec![Vec::new()];
    for &n in shape {
        let mut cands: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for (slot, path) in prev.iter().enumerate() {
            for rank in 0..n {
                let mut p = path.clone();
                p.push(rank);
                cands.push((slot, rank, p));
            }
        }
        cands.sort_by(|a, b| {
            let sa: usize = a.2.iter().sum();
            let sb: usize = b.2.iter().sum();
            sa.cmp(&sb).then_with(|| a.2.cmp(&b.2))
        });
        cands.truncate(n);
        // Keep parents grouped in slot order so the tree stays topological.
        cands.sort_by_key(|c| (c.0, c.1));
        layers.push(cands.iter().map(|c| (c.0, c.1)).collect());
        prev = cands.into_iter().map(|c| c.2).collect();
    }
    Ok(layers)
}

pub fn draft_static<O>(oracle: &O, context: &[TokenId], shape: &[usize]) -> Result<Draft>
where
    O: DistributionOracle + ?Sized,
{
    let positions = static_positions(shape)?;
    if let Some(&n) = shape.iter().find(|&&n| n > oracle.vocab()) {
        return Err(Error::invalid(format!(
            "branch count {n} exceeds vocabulary of size {}",
            oracle.vocab()
        )));
    }
    let mut tree = TokenTree::new(root_token(context, oracle.vocab()));
    let mut prev: Vec<(NodeId, Vec<TokenId>)> = vec![(ROOT, context.to_vec())];
    let mut draft_calls = 0;
    for layer in positions {
        let mut next = Vec::with_capacity(layer.len());
        let mut last_slot = usize::MAX;
        let mut summary = None;
        for (slot, rank) in layer {
            if slot != last_slot {
                summary = Some(oracle.summary(&prev[slot].1)?);
                draft_calls += 1;
                last_slot = slot;
            }
            let s = summary.as_ref().expect("set above");
            let (token, p) = top_k_of(s, rank + 1)?[rank];
            let id = tree.attach_children(prev[slot].0, &[token], &[p])?[0];
            tree.set_entropy(id, s.entropy)?;
            let mut ctx = prev[slot].1.clone();
            ctx.push(token);
            next.push((id, ctx));
        }
        prev = next;
    }
    Ok(Draft {
        tree,
        scored: Vec::new(),
        draft_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drafting::testutil::{one_hot_cycle, tiny_model};
    use crate::models::greedy_continuation;

    #[test]
    fn single_child_shape() {
        let m = tiny_model(8, 1);
        assert_eq!(draft_static(&m, &[1], &[1]).unwrap().tree.len(), 2);
    }

    #[test]
    fn default_shape_has_26_draft_nodes() {
        assert_eq!(DEFAULT_STATIC_SHAPE.iter().sum::<usize>(), 26);
        let m = tiny_model(32, 2);
        let d = draft_static(&m, &[1], &DEFAULT_STATIC_SHAPE).unwrap();
        assert_eq!(d.tree.len(), 27);
        d.tree.validate().unwrap();
    }

    #[test]
    fn leftmost_chain_is_greedy() {
        for seed in 0..10 {
            let m = tiny_model(32, seed);
            let d = draft_static(&m, &[3], &DEFAULT_STATIC_SHAPE).unwrap();
            let mut id = ROOT;
            let mut chain = Vec::new();
            while let Some(&c) = d.tree.children(id).first() {
                chain.push(d.tree.nodes()[c].token);
                id = c;
            }
            assert_eq!(chain, greedy_continuation(m.model(), &[3], DEFAULT_STATIC_SHAPE.len()).unwrap());
        }
        let m = one_hot_cycle(8);
        let d = draft_static(&m, &[6], &[1, 1, 1]).unwrap();
        let tokens: Vec<TokenId> = d.tree.nodes()[1..].iter().map(|n| n.token).collect();
        assert_eq!(tokens, vec![7, 0, 1]);
    }

    #[test]
    fn positions_prefer_small_rank_sums() {
        let layers = static_positions(&[2, 3]).unwrap();
        assert_eq!(layers[0], vec![(0, 0), (0, 1)]);
        // (0,0), (0,1), (1,0) have sums 0, 1, 1.
        assert_eq!(layers[1], vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn oversized_branch_is_rejected() {
        let m = tiny_model(4, 1);
        assert!(draft_static(&m, &[1], &[5]).is_err());
    }
}
