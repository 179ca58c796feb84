//! Instrumented operation counts for the selection and entropy pipelines.
//!
//! Comparisons are counted through the comparator handed to the same
//! selection routine the drafting code uses; arithmetic is counted per
//! operation (each entropy term costs a log, a multiply and an add; each
//! joint probability one multiply). Counts are measured on concrete inputs,
//! not derived from formulas.

use std::cell::Cell;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::models::dirichlet_row;
use crate::rng;
use crate::select::{by_prob_desc, partition_top_k_by, top_k_by};
use crate::TokenId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub comparisons: u64,
    pub flops: u64,
    /// Terms summed into an entropy.
    pub entropy_terms: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.comparisons + self.flops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Entropy over the whole vocabulary, then top-K over it.
    FullEntropyTopK,
    /// Top-M, entropy over those M, then top-K among them.
    TopMEntropyTopK,
    /// Joint probabilities for every child of K parents, then top-K.
    JointThenSelect,
    /// Top-K per parent, joint probabilities for the K² survivors, then top-K.
    SelectThenJoint,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::FullEntropyTopK,
        Scenario::TopMEntropyTopK,
        Scenario::JointThenSelect,
        Scenario::SelectThenJoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FullEntropyTopK => "full_entropy_topk",
            Scenario::TopMEntropyTopK => "topm_entropy_topk",
            Scenario::JointThenSelect => "joint_then_select",
            Scenario::SelectThenJoint => "select_then_joint",
        }
    }
}

struct Counter {
    cmp: Cell<u64>,
    flops: u64,
    terms: u64,
}

impl Counter {
    fn new() -> Self {
        Counter {
            cmp: Cell::new(0),
            flops: 0,
            terms: 0,
        }
    }

    fn top_k(&self, items: Vec<(TokenId, f64)>, k: usize) -> Vec<(TokenId, f64)> {
        top_k_by(items, k, |a, b| {
            self.cmp.set(self.cmp.get() + 1);
            by_prob_desc(a, b)
        })
    }

    fn top_m_unordered(&self, items: &mut Vec<(TokenId, f64)>, m: usize) {
        partition_top_k_by(items, m, |a, b| {
            self.cmp.set(self.cmp.get() + 1);
            by_prob_desc(a, b)
        });
    }

    fn entropy(&mut self, probs: impl Iterator<Item = f64>) -> f64 {
        let mut h = 0.0;
        for p in probs {
            self.terms += 1;
            if p > 0.0 {
                h -= p * p.ln();
                self.flops += 3;
            }
        }
        h
    }

    fn done(self) -> OpCounts {
        OpCounts {
            comparisons: self.cmp.get(),
            flops: self.flops,
            entropy_terms: self.terms,
        }
    }
}

fn indexed(row: &[f64]) -> Vec<(TokenId, f64)> {
    row.iter().enumerate().map(|(i, &p)| (i as TokenId, p)).collect()
}

/// Counts for one scenario on given inputs. `rows` holds one distribution
/// per parent (the entropy scenarios use the first); `parent_joint` the
/// parents' joint probabilities.
pub fn count_scenario(scenario: Scenario, rows: &[Vec<f64>], parent_joint: &[f64], m: usize, k: usize) -> OpCounts {
    let mut c = Counter::new();
    match scenario {
        Scenario::FullEntropyTopK => {
            let row = &rows[0];
            c.entropy(row.iter().copied());
            c.top_k(indexed(row), k);
        }
        Scenario::TopMEntropyTopK => {
            let mut items = indexed(&rows[0]);
            c.top_m_unordered(&mut items, m);
            c.entropy(items.iter().map(|x| x.1));
            c.top_k(items, k);
        }
        Scenario::JointThenSelect => {
            let v = rows[0].len();
            let mut all = Vec::with_capacity(rows.len() * v);
            for (pi, row) in rows.iter().enumerate() {
                for (t, &p) in row.iter().enumerate() {
                    all.push(((pi * v + t) as TokenId, parent_joint[pi] * p));
                    c.flops += 1;
                }
            }
            c.top_k(all, k);
        }
        Scenario::SelectThenJoint => {
            let v = rows[0].len();
            let mut cands = Vec::with_capacity(rows.len() * k);
            for (pi, row) in rows.iter().enumerate() {
                for (t, p) in c.top_k(indexed(row), k) {
                    cands.push(((pi * v) as TokenId + t, parent_joint[pi] * p));
                    c.flops += 1;
                }
            }
            c.top_k(cands, k);
        }
    }
    c.done()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsRow {
    pub scenario: Scenario,
    pub vocab: usize,
    pub m: usize,
    pub k: usize,
    pub rep: usize,
    pub counts: OpCounts,
}

pub const FLOPS_HEADER: &str = "scenario,V,M,K,rep,comparisons,flops,entropy_terms,total";

impl FlopsRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.scenario.name(),
            self.vocab,
            self.m,
            self.k,
            self.rep,
            self.counts.comparisons,
            self.counts.flops,
            self.counts.entropy_terms,
            self.counts.total()
        )
    }
}

/// All four scenarios on `reps` fresh Dirichlet(1) inputs. Parents of the
/// joint-probability scenarios get joint probabilities uniform in (0, 1).
pub fn flops_report(vocab: usize, m: usize, k: usize, reps: usize, seed: u64) -> Result<Vec<FlopsRow>> {
    if !(vocab >= m && m >= k && k >= 1) {
        return Err(Error::invalid("need V >= M >= K >= 1"));
    }
    if vocab > TokenId::MAX as usize / k {
        return Err(Error::invalid("vocabulary too large for flat candidate ids"));
    }
    let mut r = rng::stream(seed, rng::FLOPS);
    let mut out = Vec::with_capacity(reps * Scenario::ALL.len());
    for rep in 0..reps {
        let rows: Vec<Vec<f64>> = (0..k).map(|_| dirichlet_row(&mut r, 1.0, vocab)).collect();
        let joints: Vec<f64> = (0..k).map(|_| rand::Rng::random_range(&mut r, 0.01..1.0)).collect();
        for scenario in Scenario::ALL {
            out.push(FlopsRow {
                scenario,
                vocab,
                m,
                k,
                rep,
                counts: count_scenario(scenario, &rows, &joints, m, k),
            });
        }
    }
    Ok(out)
}

pub fn flops_csv(rows: &[FlopsRow]) -> String {
    let mut s = String::from(FLOPS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Per repetition: whether select-then-joint beats joint-then-select and
/// top-M-then-entropy beats full entropy, on total counted operations.
pub fn orderings(rows: &[FlopsRow]) -> Vec<(usize, bool, bool)> {
    let reps = rows.iter().map(|r| r.rep + 1).max().unwrap_or(0);
    (0..reps)
        .map(|rep| {
            let get = |s: Scenario| {
                rows.iter()
                    .find(|r| r.rep == rep && r.scenario == s)
                    .map(|r| r.counts.total())
                    .unwrap_or(0)
            };
            (
                rep,
                get(Scenario::SelectThenJoint) < get(Scenario::JointThenSelect),
                get(Scenario::TopMEntropyTopK) < get(Scenario::FullEntropyTopK),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_equal_v_has_equal_entropy_terms() {
        let rows = flops_report(500, 500, 5, 2, 1).unwrap();
        for rep in 0..2 {
            let terms = |s| rows.iter().find(|r| r.rep == rep && r.scenario == s).unwrap().counts.entropy_terms;
            assert_eq!(terms(Scenario::FullEntropyTopK), terms(Scenario::TopMEntropyTopK));
        }
    }

    #[test]
    fn counts_are_deterministic() {
        assert_eq!(flops_report(2000, 100, 5, 3, 9).unwrap(), flops_report(2000, 100, 5, 3, 9).unwrap());
    }

    #[test]
    fn joint_flops_are_exact() {
        let rows = vec![vec![0.5, 0.25, 0.25]; 2];
        let j = count_scenario(Scenario::JointThenSelect, &rows, &[1.0, 0.5], 3, 2);
        assert_eq!(j.flops, 6);
        let s = count_scenario(Scenario::SelectThenJoint, &rows, &[1.0, 0.5], 3, 2);
        assert_eq!(s.flops, 4);
        let e = count_scenario(Scenario::FullEntropyTopK, &[vec![0.5, 0.5, 0.0]], &[1.0], 3, 1);
        assert_eq!((e.flops, e.entropy_terms), (6, 3));
    }

    #[test]
    fn bad_arguments() {
        assert!(flops_report(10, 20, 5, 1, 0).is_err());
        assert!(flops_report(10, 5, 0, 1, 0).is_err());
    }
}
