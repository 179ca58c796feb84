use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::features::{sorted_entropy_prefix, truncated_entropy_unchecked};
use crate::select::top_k_probs;
use crate::TokenId;

use super::TabularLM;

/// What the drafting and verification loops need from one model row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSummary {
    /// Most probable tokens, best first (ties by smaller index).
    pub top: Vec<(TokenId, f64)>,
    /// Entropy over the `entropy_m` largest probabilities.
    pub entropy: f64,
    /// Entropy over the full row.
    pub full_entropy: f64,
}

impl RowSummary {
    pub fn from_row(row: &[f64], top_cap: usize, entropy_m: usize) -> Self {
        let (entropy, full_entropy) = sorted_entropy_prefix(row, entropy_m);
        RowSummary {
            top: top_k_probs(row, top_cap),
            entropy,
            full_entropy,
        }
    }

    pub fn argmax(&self) -> TokenId {
        self.top[0].0
    }

    pub fn max_prob(&self) -> f64 {
        self.top[0].1
    }
}

/// Source of row summaries keyed by context.
pub trait DistributionOracle: Sync {
    fn vocab(&self) -> usize;
    fn summary(&self, context: &[TokenId]) -> Result<Arc<RowSummary>>;
}

/// A model plus a memo of row summaries. Rows are pure functions of the
/// context key, so caching never changes results.
pub struct ModelView {
    model: TabularLM,
    top_cap: usize,
    entropy_m: usize,
    cache: Mutex<HashMap<Vec<TokenId>, Arc<RowSummary>>>,
}

impl ModelView {
    pub fn new(model: TabularLM, top_cap: usize, entropy_m: usize) -> Self {
        ModelView {
            top_cap: top_cap.clamp(1, model.vocab()),
            entropy_m: entropy_m.max(1),
            model,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &TabularLM {
        &self.model
    }

    pub fn top_cap(&self) -> usize {
        self.top_cap
    }

    pub fn entropy_m(&self) -> usize {
        self.entropy_m
    }

    /// A view of the same model with a different truncation cutoff.
    pub fn with_entropy_m(&self, entropy_m: usize) -> ModelView {
        ModelView::new(self.model.clone(), self.top_cap, entropy_m)
    }

    pub fn cached_rows(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }
}

impl DistributionOracle for ModelView {
    fn vocab(&self) -> usize {
        self.model.vocab()
    }

    fn summary(&self, context: &[TokenId]) -> Result<Arc<RowSummary>> {
        let key = self.model.context_key(context)?;
        if let Some(hit) = self.cache.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let row = self.model.row(&key);
        let summary = Arc::new(RowSummary::from_row(&row, self.top_cap, self.entropy_m));
        debug_assert_eq!(
            summary.entropy.to_bits(),
            truncated_entropy_unchecked(&row, self.entropy_m).to_bits()
        );
        self.cache
            .lock()
            .expect("cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&summary));
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gen_target, tests::spec};

    #[test]
    fn summary_matches_row() {
        let m = gen_target(&spec(40, 2, 0.0)).unwrap();
        let view = ModelView::new(m.clone(), 5, 10);
        let s = view.summary(&[3, 4]).unwrap();
        let row = m.next_dist(&[3, 4]).unwrap();
        assert_eq!(s.top, top_k_probs(&row, 5));
        assert_eq!(s.entropy, truncated_entropy_unchecked(&row, 10));
        assert_eq!(view.cached_rows(), 1);
        let again = view.summary(&[9, 3, 4]).unwrap();
        assert!(Arc::ptr_eq(&s, &again));
        assert!(view.summary(&[40]).is_err());
    }
}
