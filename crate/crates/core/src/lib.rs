//! Classifier-guided token-tree drafting for speculative decoding, run
//! against synthetic draft/target model pairs.
//!
//! The crate covers the tree data structure, tabular toy models, the
//! `(P, H, d)` features and confidence classifier, the drafting strategies
//! (C2T, EAGLE-2 expand/rerank, static trees, chains), greedy verification,
//! dataset harvesting and the measurement harness.

pub mod bench;
pub mod classifier;
pub mod config;
pub mod datagen;
pub mod drafting;
pub mod error;
pub mod features;
pub mod models;
pub mod opcount;
pub mod pipeline;
pub mod rng;
pub mod select;
pub mod tree;
pub mod verification;

/// Vocabulary index.
pub type TokenId = u32;

pub use classifier::{mlp_forward, LabeledExample, MlpParams};
pub use drafting::{ChainStop, DraftConfig, Scorer, Strategy};
pub use error::{Error, Result};
pub use features::FeatureVector;
pub use models::{ModelPair, ModelPairSpec, TabularLM};
pub use tree::{NodeId, TokenTree, TreeNode};
pub use verification::{verify_greedy, VerifyResult};
