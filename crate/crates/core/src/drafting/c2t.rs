//! Classifier-guided construction: expand the surviving layer, score the
//! per-parent top-K children, drop those below β, optionally keep only the
//! K most confident, repeat while some confidence exceeds β.

use std::cmp::Ordering;

use super::{extend, root_token, top_k_of, Draft, DraftConfig, ScoredCandidate, Scorer};
use crate::error::Result;
use crate::features::FeatureVector;
use crate::models::DistributionOracle;
use crate::select::top_k_by;
use crate::tree::{TokenTree, ROOT};
use crate::TokenId;

struct Candidate {
    /// Position of the parent in the current frontier.
    slot: usize,
    rank: usize,
    token: TokenId,
    p: f64,
    features: FeatureVector,
    confidence: f64,
    scored: usize,
}

/// Higher confidence first, then higher joint probability, then creation order.
fn by_confidence(a: &Candidate, b: &Candidate) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(b.features.joint.total_cmp(&a.features.joint))
        .then(a.slot.cmp(&b.slot))
        .then(a.rank.cmp(&b.rank))
}

pub fn draft_c2t<O, S>(oracle: &O, scorer: &S, context: &[TokenId], cfg: &DraftConfig) -> Result<Draft>
where
    O: DistributionOracle + ?Sized,
    S: Scorer + ?Sized,
{
    cfg.validate()?;
    let k = cfg.top_k;
    let mut tree = TokenTree::new(root_token(context, oracle.vocab()));
    let mut scored = Vec::new();
    let mut draft_calls = 0;
    let mut frontier = vec![(ROOT, context.to_vec())];
    // The root carries confidence 1.
    let mut go_on = 1.0 > cfg.beta;
    let mut depth = 0;
    while depth < cfg.d_max && go_on {
        let mut cands = Vec::new();
        for (slot, (parent, ctx)) in frontier.iter().enumerate() {
            let summary = oracle.summary(ctx)?;
            draft_calls += 1;
            let parent_joint = tree.node(*parent)?.joint;
            for (rank, &(token, p)) in top_k_of(&summary, k)?.iter().enumerate() {
                let features = FeatureVector::new(parent_joint * p, summary.entropy, depth as f64);
                let confidence = scorer.score(&features);
                scored.push(ScoredCandidate {
                    parent: *parent,
                    token,
                    features,
                    confidence,
                    node: None,
                });
                cands.push(Candidate {
                    slot,
                    rank,
                    token,
                    p,
                    features,
                    confidence,
                    scored: scored.len() - 1,
                });
            }
        }
        go_on = cands.iter().any(|c| c.confidence > cfg.beta);
        cands.retain(|c| c.confidence >= cfg.beta);
        // Without the second pruning the layer is still capped at K² nodes.
        let cap = if cfg.second_topk { k } else { k.saturating_mul(k) };
        let mut kept = top_k_by(cands, cap, by_confidence);
        kept.sort_by_key(|c| (c.slot, c.rank));

        let mut next = Vec::with_capacity(kept.len());
        for c in &kept {
            let parent = frontier[c.slot].0;
            let id = tree.attach_children(parent, &[c.token], &[c.p])?[0];
            tree.set_entropy(id, c.features.entropy)?;
            tree.set_confidence(id, c.confidence)?;
            scored[c.scored].node = Some(id);
            let mut ctx = frontier[c.slot].1.clone();
            ctx.push(c.token);
            next.push((id, ctx));
        }
        debug_assert!(next.iter().all(|(id, ctx)| extend(context, &tree, *id).ok().as_ref() == Some(ctx)));
        frontier = next;
        depth += 1;
    }
    Ok(Draft {
        tree,
        scored,
        draft_calls,
    })
}
