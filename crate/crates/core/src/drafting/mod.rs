//! Tree and chain construction strategies.
//!
//! Every strategy drafts from a [`DistributionOracle`] over the draft model.
//! The context passed in ends with the token the root stands for; an empty
//! context puts BOS at the root. Children of a node are drawn from the
//! distribution after `context ++ path(node)`.

mod c2t;
mod chain;
mod eagle2;
mod static_tree;

use std::fmt;
use std::str::FromStr;

use crate::classifier::MlpParams;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::{DistributionOracle, RowSummary};
use crate::tree::{NodeId, TokenTree};
use crate::TokenId;

pub use c2t::draft_c2t;
pub use chain::draft_chain;
pub use eagle2::{draft_eagle2, expand, full_tree_size, Eagle2Draft};
pub use static_tree::{draft_static, static_positions, DEFAULT_STATIC_SHAPE};

/// Maps features to a confidence in `(0, 1)`.
pub trait Scorer: Sync {
    fn score(&self, features: &FeatureVector) -> f64;
}

impl Scorer for MlpParams {
    fn score(&self, features: &FeatureVector) -> f64 {
        self.confidence(features.as_array())
    }
}

impl<F> Scorer for F
where
    F: Fn(&FeatureVector) -> f64 + Sync,
{
    fn score(&self, features: &FeatureVector) -> f64 {
        self(features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    C2t,
    Eagle2,
    Static,
    Chain,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c2t" => Ok(Strategy::C2t),
            "eagle2" => Ok(Strategy::Eagle2),
            "static" => Ok(Strategy::Static),
            "chain" => Ok(Strategy::Chain),
            other => Err(Error::invalid(format!("unknown strategy {other:?}"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::C2t => "c2t",
            Strategy::Eagle2 => "eagle2",
            Strategy::Static => "static",
            Strategy::Chain => "chain",
        })
    }
}

/// Early-exit rule for chain drafting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainStop {
    None,
    /// Stop when the current distribution's largest probability is below the threshold.
    MaxProb(f64),
    /// Stop when the running joint probability falls below the threshold.
    JointProb(f64),
    /// Stop when the classifier's confidence falls below β.
    Classifier(f64),
}

impl ChainStop {
    pub const DY_MAX: ChainStop = ChainStop::MaxProb(0.3);
    pub const DY_JOINT: ChainStop = ChainStop::JointProb(0.08);
    pub const C2T_CHAIN: ChainStop = ChainStop::Classifier(0.85);

    /// Named presets: `dymax`, `dyjoint`, `c2t-chain`.
    pub fn preset(name: &str) -> Option<ChainStop> {
        match name {
            "dymax" => Some(Self::DY_MAX),
            "dyjoint" => Some(Self::DY_JOINT),
            "c2t-chain" => Some(Self::C2T_CHAIN),
            _ => None,
        }
    }
}

impl FromStr for ChainStop {
    type Err = Error;

    /// Accepts `none`, a preset name, or `kind:value` with kind one of
    /// `max_prob`, `joint_prob`, `classifier`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(ChainStop::None);
        }
        if let Some(p) = ChainStop::preset(s) {
            return Ok(p);
        }
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("bad chain stop {s:?}")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::invalid(format!("bad chain stop threshold {value:?}")))?;
        match kind {
            "max_prob" => Ok(ChainStop::MaxProb(v)),
            "joint_prob" => Ok(ChainStop::JointProb(v)),
            "classifier" => Ok(ChainStop::Classifier(v)),
            _ => Err(Error::invalid(format!("unknown chain stop {kind:?}"))),
        }
    }
}

impl fmt::Display for ChainStop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainStop::None => f.write_str("none"),
            ChainStop::MaxProb(t) => write!(f, "max_prob:{t}"),
            ChainStop::JointProb(t) => write!(f, "joint_prob:{t}"),
            ChainStop::Classifier(b) => write!(f, "classifier:{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DraftConfig {
    pub strategy: Strategy,
    pub top_k: usize,
    pub d_max: usize,
    pub beta: f64,
    /// Rerank budget for EAGLE-2, in draft nodes (the root is not counted).
    pub top_n: usize,
    pub second_topk: bool,
    pub chain_stop: ChainStop,
    pub max_len: usize,
    /// Per-layer node counts for static trees.
    pub static_shape: Vec<usize>,
}

impl Default for DraftConfig {
    fn default() -> Self {
        DraftConfig {
            strategy: Strategy::C2t,
            top_k: 15,
            d_max: 10,
            beta: 0.5,
            top_n: 80,
            second_topk: true,
            chain_stop: ChainStop::None,
            max_len: 10,
            static_shape: DEFAULT_STATIC_SHAPE.to_vec(),
        }
    }
}

impl DraftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.d_max < 1 {
            return Err(Error::invalid("d_max must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid("beta must lie in [0, 1]"));
        }
        match self.strategy {
            Strategy::Eagle2 if self.top_n < 1 => Err(Error::invalid("N must be at least 1")),
            Strategy::Chain if self.max_len < 1 => Err(Error::invalid("max_len must be at least 1")),
            Strategy::Static if self.static_shape.is_empty() => {
                Err(Error::invalid("static shape must be non-empty"))
            }
            _ => Ok(()),
        }
    }
}

/// A candidate the classifier scored while drafting, kept or not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    /// Parent node in the returned tree.
    pub parent: NodeId,
    pub token: TokenId,
    pub features: FeatureVector,
    pub confidence: f64,
    /// Node id if the candidate made it into the tree.
    pub node: Option<NodeId>,
}

/// A drafted tree plus every classifier decision taken on the way.
#[derive(Debug, Clone)]
pub struct Draft {
    pub tree: TokenTree,
    pub scored: Vec<ScoredCandidate>,
    /// Draft-model rows consulted.
    pub draft_calls: usize,
}

/// Drafts with whichever strategy `cfg` names.
pub fn draft<O, S>(
    oracle: &O,
    scorer: Option<&S>,
    context: &[TokenId],
    cfg: &DraftConfig,
) -> Result<Draft>
where
    O: DistributionOracle + ?Sized,
    S: Scorer + ?Sized,
{
    cfg.validate()?;
    match cfg.strategy {
        Strategy::C2t => {
            let scorer = scorer.ok_or_else(|| Error::invalid("c2t drafting needs a classifier"))?;
            draft_c2t(oracle, scorer, context, cfg)
        }
        Strategy::Eagle2 => {
            let d = draft_eagle2(oracle, context, cfg)?;
            Ok(Draft {
                tree: d.reranked,
                scored: Vec::new(),
                draft_calls: d.draft_calls,
            })
        }
        Strategy::Static => draft_static(oracle, context, &cfg.static_shape),
        Strategy::Chain => draft_chain(oracle, scorer, context, cfg),
    }
}

/// Token the root stands for: the last context token, or BOS.
pub fn root_token(context: &[TokenId], vocab: usize) -> TokenId {
    context.last().copied().unwrap_or(vocab as TokenId)
}

pub(crate) fn extend(context: &[TokenId], tree: &TokenTree, id: NodeId) -> Result<Vec<TokenId>> {
    let mut ctx = context.to_vec();
    ctx.extend(tree.path_tokens(id)?);
    Ok(ctx)
}

pub(crate) fn top_k_of(summary: &RowSummary, k: usize) -> Result<&[(TokenId, f64)]> {
    if summary.top.len() < k {
        return Err(Error::invalid(format!(
            "K = {k} exceeds the {} ranked tokens kept per row",
            summary.top.len()
        )));
    }
    Ok(&summary.top[..k])
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::models::{ModelView, TabularLM};

    /// Procedural order-1 model with Dirichlet(0.5) rows.
    pub fn tiny_model(vocab: usize, seed: u64) -> ModelView {
        let mut spec = crate::models::tests::spec(vocab, 1, 0.0);
        spec.seed = seed;
        let model = crate::models::gen_target(&spec).expect("valid spec");
        ModelView::new(model, vocab, vocab)
    }

    /// Deterministic chain model: after token t the next token is (t+1) mod V.
    pub fn one_hot_cycle(vocab: usize) -> ModelView {
        let model = TabularLM::from_fn(vocab, 1, |key| {
            let mut row = vec![0.0; vocab];
            let next = if key[0] as usize >= vocab { 0 } else { (key[0] as usize + 1) % vocab };
            row[next] = 1.0;
            row
        })
        .expect("valid rows");
        ModelView::new(model, vocab, vocab)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_stop_parsing_and_presets() {
        assert_eq!("none".parse::<ChainStop>().unwrap(), ChainStop::None);
        assert_eq!("dymax".parse::<ChainStop>().unwrap(), ChainStop::MaxProb(0.3));
        assert_eq!("dyjoint".parse::<ChainStop>().unwrap(), ChainStop::JointProb(0.08));
        assert_eq!("c2t-chain".parse::<ChainStop>().unwrap(), ChainStop::Classifier(0.85));
        let s = ChainStop::JointProb(0.125);
        assert_eq!(s.to_string().parse::<ChainStop>().unwrap(), s);
        assert!("bogus:1".parse::<ChainStop>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DraftConfig::default().validate().is_ok());
        let bad = DraftConfig { top_k: 0, ..DraftConfig::default() };
        assert!(bad.validate().is_err());
        let bad = DraftConfig { beta: 1.5, ..DraftConfig::default() };
        assert!(bad.validate().is_err());
    }
}
