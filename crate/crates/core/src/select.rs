//! Top-K selection.
//!
//! All rankings in the crate use one order: higher probability first, then
//! smaller token index. Selection is introselect (`select_nth_unstable_by`)
//! followed by a sort of the selected prefix, so the comparator sees every
//! comparison and the operation counters can instrument it.

use std::cmp::Ordering;

use crate::TokenId;

/// Higher probability first, ties by smaller token index.
pub fn by_prob_desc(a: &(TokenId, f64), b: &(TokenId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Keeps the `k` best items under `cmp` (ascending = best first), sorted.
pub fn top_k_by<T, F>(mut items: Vec<T>, k: usize, mut cmp: F) -> Vec<T>
where
    F: FnMut(&T, &T) -> Ordering,
{
    if k == 0 {
        items.clear();
        return items;
    }
    if k < items.len() {
        items.select_nth_unstable_by(k - 1, &mut cmp);
        items.truncate(k);
    }
    items.sort_by(cmp);
    items
}

/// Keeps the `k` best items without ordering them.
pub fn partition_top_k_by<T, F>(items: &mut Vec<T>, k: usize, mut cmp: F)
where
    F: FnMut(&T, &T) -> Ordering,
{
    if k == 0 {
        items.clear();
    } else if k < items.len() {
        items.select_nth_unstable_by(k - 1, &mut cmp);
        items.truncate(k);
    }
}

/// The `k` most probable entries of a distribution as `(token, prob)`.
pub fn top_k_probs(probs: &[f64], k: usize) -> Vec<(TokenId, f64)> {
    let items: Vec<(TokenId, f64)> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| (i as TokenId, p))
        .collect();
    let mut top = top_k_by(items, k, by_prob_desc);
    top.shrink_to_fit();
    top
}

/// Argmax with ties broken by smallest index.
pub fn argmax(probs: &[f64]) -> Option<TokenId> {
    let mut best: Option<(TokenId, f64)> = None;
    for (i, &p) in probs.iter().enumerate() {
        match best {
            Some((_, bp)) if p <= bp => {}
            _ => best = Some((i as TokenId, p)),
        }
    }
    best.map(|(i, _)| i)
}
