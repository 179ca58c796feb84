//! Single-branch drafting with optional early exit.

use super::{root_token, ChainStop, Draft, DraftConfig, ScoredCandidate, Scorer};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::DistributionOracle;
use crate::tree::{TokenTree, ROOT};
use crate::TokenId;

/// Greedy chain of up to `max_len` tokens. The first token is always kept;
/// every later candidate is checked against the stop rule before it is
/// appended.
pub fn draft_chain<O, S>(
    oracle: &O,
    scorer: Option<&S>,
    context: &[TokenId],
    cfg: &DraftConfig,
) -> Result<Draft>
where
    O: DistributionOracle + ?Sized,
    S: Scorer + ?Sized,
{
    if cfg.max_len < 1 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let scorer = match cfg.chain_stop {
        ChainStop::Classifier(_) => Some(
            scorer.ok_or_else(|| Error::invalid("classifier stop needs a classifier"))?,
        ),
        _ => None,
    };
    let mut tree = TokenTree::new(root_token(context, oracle.vocab()));
    let mut ctx = context.to_vec();
    let mut tip = ROOT;
    let mut scored = Vec::new();
    let mut draft_calls = 0;
    for step in 0..cfg.max_len {
        let summary = oracle.summary(&ctx)?;
        draft_calls += 1;
        let (token, p) = summary.top[0];
        let joint = tree.node(tip)?.joint * p;
        let features = FeatureVector::new(joint, summary.entropy, step as f64);
        let stop = match (cfg.chain_stop, scorer) {
            (ChainStop::None, _) => false,
            (ChainStop::MaxProb(t), _) => summary.max_prob() < t,
            (ChainStop::JointProb(t), _) => joint < t,
            (ChainStop::Classifier(beta), Some(s)) => {
                let c = s.score(&features);
                scored.push(ScoredCandidate {
                    parent: tip,
                    token,
                    features,
                    confidence: c,
                    node: None,
                });
                c < beta
            }
            (ChainStop::Classifier(_), None) => unreachable!("checked above"),
        };
        if stop && step > 0 {
            break;
        }
        let id = tree.attach_children(tip, &[token], &[p])?[0];
        tree.set_entropy(id, summary.entropy)?;
        if let Some(last) = scored.last_mut().filter(|s| s.parent == tip && s.node.is_none()) {
            last.node = Some(id);
            tree.set_confidence(id, last.confidence)?;
        }
        tip = id;
        ctx.push(token);
    }
    Ok(Draft {
        tree,
        scored,
        draft_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::MlpParams;
    use crate::drafting::testutil::tiny_model;
    use crate::drafting::Strategy;
    use crate::models::greedy_continuation;

    fn cfg(stop: ChainStop, max_len: usize) -> DraftConfig {
        DraftConfig {
            strategy: Strategy::Chain,
            chain_stop: stop,
            max_len,
            ..DraftConfig::default()
        }
    }

    const NONE: Option<&MlpParams> = None;

    #[test]
    fn no_stop_runs_to_max_len() {
        let m = tiny_model(16, 1);
        for len in [1, 5, 12] {
            let d = draft_chain(&m, NONE, &[2], &cfg(ChainStop::None, len)).unwrap();
            assert_eq!(d.tree.draft_len(), len);
            let tokens = d.tree.path_tokens(d.tree.len() - 1).unwrap();
            assert_eq!(tokens, greedy_continuation(m.model(), &[2], len).unwrap());
        }
    }

    #[test]
    fn max_prob_one_keeps_only_first_token() {
        let m = tiny_model(16, 2);
        let d = draft_chain(&m, NONE, &[2], &cfg(ChainStop::MaxProb(1.0), 8)).unwrap();
        assert_eq!(d.tree.draft_len(), 1);
    }

    #[test]
    fn classifier_beta_zero_runs_to_max_len() {
        let m = tiny_model(16, 3);
        let clf = MlpParams::init_seeded(4, 1).unwrap();
        let d = draft_chain(&m, Some(&clf), &[2], &cfg(ChainStop::Classifier(0.0), 9)).unwrap();
        assert_eq!(d.tree.draft_len(), 9);
        assert!(draft_chain(&m, NONE, &[2], &cfg(ChainStop::Classifier(0.5), 9)).is_err());
    }

    #[test]
    fn joint_threshold_bounds_every_appended_node() {
        let m = tiny_model(16, 4);
        let d = draft_chain(&m, NONE, &[2], &cfg(ChainStop::JointProb(0.05), 20)).unwrap();
        for n in &d.tree.nodes()[2..] {
            assert!(n.joint >= 0.05);
        }
        let chain = d.tree.nodes();
        assert!(chain.iter().all(|n| d.tree.children(n.id).len() <= 1));
    }
}
