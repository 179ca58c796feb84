//! Greedy target-model verification.
//!
//! Starting at the root, the target's argmax after `context ++ accepted`
//! is looked up among the current node's children; a match is accepted and
//! the walk continues from it. Acceptance is decided by token, so sibling
//! order never matters (duplicate tokens resolve to the older node).

use crate::error::{Error, Result};
use crate::models::DistributionOracle;
use crate::tree::{NodeId, TokenTree, ROOT};
use crate::TokenId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyResult {
    /// Accepted draft tokens, root excluded.
    pub tau: usize,
    /// Candidate draft tokens, root excluded.
    pub gamma: usize,
    /// Root first, then each accepted node.
    pub accepted_path: Vec<NodeId>,
    /// Target's own next token where the walk stopped.
    pub bonus_token: TokenId,
}

impl VerifyResult {
    /// Draft tokens of the accepted path followed by the bonus token.
    pub fn emitted(&self, tree: &TokenTree) -> Vec<TokenId> {
        let mut out: Vec<TokenId> = self.accepted_path[1..]
            .iter()
            .map(|&id| tree.nodes()[id].token)
            .collect();
        out.push(self.bonus_token);
        out
    }
}

/// Verifies `tree` and writes acceptance labels onto every draft node.
pub fn verify_greedy<O>(tree: &mut TokenTree, target: &O, context: &[TokenId]) -> Result<VerifyResult>
where
    O: DistributionOracle + ?Sized,
{
    let vocab = target.vocab();
    if let Some(n) = tree.nodes()[1..].iter().find(|n| n.token as usize >= vocab) {
        return Err(Error::TokenOutOfRange { token: n.token, vocab });
    }
    let mut ctx = context.to_vec();
    let mut path = vec![ROOT];
    let mut cur = ROOT;
    let bonus = loop {
        let want = target.summary(&ctx)?.argmax();
        let hit = tree
            .children(cur)
            .iter()
            .copied()
            .find(|&c| tree.nodes()[c].token == want);
        match hit {
            Some(c) => {
                path.push(c);
                ctx.push(want);
                cur = c;
            }
            None => break want,
        }
    };
    for id in 1..tree.len() {
        tree.set_accepted(id, false)?;
    }
    for &id in &path[1..] {
        tree.set_accepted(id, true)?;
    }
    Ok(VerifyResult {
        tau: path.len() - 1,
        gamma: tree.draft_len(),
        accepted_path: path,
        bonus_token: bonus,
    })
}
