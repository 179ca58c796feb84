//! Synthetic order-k next-token models.
//!
//! A [`TabularLM`] maps the last `order` tokens of a context (left-padded
//! with a reserved BOS id) to a probability row over the vocabulary. Rows
//! are either stored densely or generated on demand from a seed keyed by
//! the context, so large tables never have to be materialized. Either way
//! the model is a pure function of its parameters.

mod io;
mod view;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::entropy;
use crate::rng::{self, StreamRng};
use crate::select::argmax;
use crate::TokenId;

pub use io::{load_model, save_model, ModelFileHeader, RowStorage};
pub use view::{DistributionOracle, ModelView, RowSummary};

/// Lower edges of the seven entropy bins (nats): `[0,1) … [5,6), [6,∞)`.
pub const ENTROPY_BIN_EDGES: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

pub fn entropy_bin(h: f64) -> usize {
    (h.max(0.0).floor() as usize).min(ENTROPY_BIN_EDGES.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationComponent {
    pub concentration: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DraftMode {
    MixturePerturb,
    LowerOrder,
}

impl std::str::FromStr for DraftMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture-perturb" => Ok(DraftMode::MixturePerturb),
            "lower-order" => Ok(DraftMode::LowerOrder),
            other => Err(Error::invalid(format!("unknown draft mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for DraftMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DraftMode::MixturePerturb => "mixture-perturb",
            DraftMode::LowerOrder => "lower-order",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPairSpec {
    pub vocab: usize,
    pub order: usize,
    pub seed: u64,
    pub concentration_schedule: Vec<ConcentrationComponent>,
    /// Mixing weight ε of the noise row in the draft.
    pub draft_noise: f64,
    /// Dirichlet concentration of the draft's noise rows.
    pub noise_concentration: f64,
    pub draft_mode: DraftMode,
    /// Number of the seven entropy bins the vocabulary must be able to
    /// reach; 0 disables the check.
    #[serde(default)]
    pub spread_bins: usize,
}

impl ModelPairSpec {
    /// Parses `"c:w,c:w,…"`.
    pub fn parse_schedule(s: &str) -> Result<Vec<ConcentrationComponent>> {
        s.split(',')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                let (c, w) = part
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("schedule entry {part:?} is not c:w")))?;
                let parse = |x: &str| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad number {x:?} in schedule")))
                };
                Ok(ConcentrationComponent {
                    concentration: parse(c)?,
                    weight: parse(w)?,
                })
            })
            .collect()
    }

    pub fn schedule_string(&self) -> String {
        self.concentration_schedule
            .iter()
            .map(|c| format!("{}:{}", c.concentration, c.weight))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 {
            return Err(Error::invalid("vocab must be at least 2"));
        }
        if self.order < 1 {
            return Err(Error::invalid("order must be at least 1"));
        }
        if self.vocab >= u32::MAX as usize {
            return Err(Error::invalid("vocab too large"));
        }
        if !(0.0..=1.0).contains(&self.draft_noise) {
            return Err(Error::invalid(format!("draft noise {} outside [0, 1]", self.draft_noise)));
        }
        if !(self.noise_concentration > 0.0 && self.noise_concentration.is_finite()) {
            return Err(Error::invalid("noise concentration must be positive"));
        }
        if self.concentration_schedule.is_empty() {
            return Err(Error::invalid("empty concentration schedule"));
        }
        for c in &self.concentration_schedule {
            if !(c.concentration > 0.0 && c.concentration.is_finite()) || !(c.weight >= 0.0) {
                return Err(Error::invalid(format!("bad schedule component {c:?}")));
            }
        }
        let total: f64 = self.concentration_schedule.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("schedule weights sum to {total}, not 1")));
        }
        if self.spread_bins > ENTROPY_BIN_EDGES.len() {
            return Err(Error::invalid("at most seven entropy bins exist"));
        }
        if self.spread_bins > 0 {
            let needed = ENTROPY_BIN_EDGES[self.spread_bins - 1];
            let reachable = (self.vocab as f64).ln();
            if reachable <= needed {
                return Err(Error::invalid(format!(
                    "vocab {} caps entropy at {reachable:.3} nats; {} bins need more than {needed}",
                    self.vocab, self.spread_bins
                )));
            }
        }
        Ok(())
    }
}

/// Procedurally generated Dirichlet-mixture rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletRows {
    pub seed: u64,
    pub schedule: Vec<ConcentrationComponent>,
}

impl DirichletRows {
    fn row(&self, key: &[TokenId], vocab: usize) -> Vec<f64> {
        let mut rng: StreamRng =
            rand::SeedableRng::seed_from_u64(rng::fold_seed(self.seed, key.iter().map(|&t| u64::from(t))));
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut alpha = self.schedule[self.schedule.len() - 1].concentration;
        for c in &self.schedule {
            acc += c.weight;
            if u < acc {
                alpha = c.concentration;
                break;
            }
        }
        dirichlet_row(&mut rng, alpha, vocab)
    }
}

/// One symmetric Dirichlet(α) draw of length `n`, sampled in log space so
/// tiny concentrations do not underflow: for α < 1,
/// `ln G(α) = ln G(α+1) + ln(U)/α`.
pub fn dirichlet_row<R: Rng + ?Sized>(rng: &mut R, alpha: f64, n: usize) -> Vec<f64> {
    let (shape, boost) = if alpha < 1.0 { (alpha + 1.0, true) } else { (alpha, false) };
    let gamma = Gamma::new(shape, 1.0).expect("positive shape");
    let mut logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut l = g.ln();
            if boost {
                let u: f64 = rng.random();
                l += u.ln() / alpha;
            }
            l
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / n as f64; n];
    }
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logs.iter_mut() {
        *l /= total;
    }
    logs
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowSource {
    /// Dense table over all `(vocab+1)^order` BOS-extended contexts.
    Explicit(Arc<Vec<f64>>),
    Dirichlet(DirichletRows),
    /// `normalize((1-ε)·base + ε·noise)`.
    Mixture {
        base: Box<TabularLM>,
        noise: DirichletRows,
        eps: f64,
    },
    /// Marginalizes the first context token of a model one order higher.
    LowerOrder { base: Box<TabularLM> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularLM {
    vocab: usize,
    order: usize,
    source: RowSource,
}

impl TabularLM {
    /// A dense model from explicit rows, indexed as in [`TabularLM::context_index`].
    pub fn from_rows(vocab: usize, order: usize, rows: Vec<f64>) -> Result<Self> {
        if vocab < 1 || order < 1 {
            return Err(Error::invalid("vocab and order must be positive"));
        }
        let n_ctx = context_count(vocab, order)?;
        if rows.len() != n_ctx * vocab {
            return Err(Error::Shape {
                what: "model table",
                expected: n_ctx * vocab,
                found: rows.len(),
            });
        }
        for (i, row) in rows.chunks(vocab).enumerate() {
            check_distribution(row).map_err(|e| match e {
                Error::NotADistribution(msg) => Error::NotADistribution(format!("row {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(TabularLM {
            vocab,
            order,
            source: RowSource::Explicit(Arc::new(rows)),
        })
    }

    /// Builds a dense model by evaluating `f` on every BOS-extended context.
    pub fn from_fn(
        vocab: usize,
        order: usize,
        mut f: impl FnMut(&[TokenId]) -> Vec<f64>,
    ) -> Result<Self> {
        let n_ctx = context_count(vocab, order)?;
        let mut rows = Vec::with_capacity(n_ctx * vocab);
        let mut key = vec![0 as TokenId; order];
        for idx in 0..n_ctx {
            decode_context(idx, vocab, &mut key);
            let row = f(&key);
            if row.len() != vocab {
                return Err(Error::Shape {
                    what: "model row",
                    expected: vocab,
                    found: row.len(),
                });
            }
            rows.extend(row);
        }
        Self::from_rows(vocab, order, rows)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The reserved begin-of-sequence id used for context padding.
    pub fn bos(&self) -> TokenId {
        self.vocab as TokenId
    }

    pub fn source(&self) -> &RowSource {
        &self.source
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.source, RowSource::Explicit(_))
    }

    /// The last `order` tokens of `context`, left-padded with BOS.
    pub fn context_key(&self, context: &[TokenId]) -> Result<Vec<TokenId>> {
        if let Some(&bad) = context.iter().find(|&&t| t as usize >= self.vocab) {
            return Err(Error::TokenOutOfRange {
                token: bad,
                vocab: self.vocab,
            });
        }
        let mut key = vec![self.bos(); self.order];
        let take = context.len().min(self.order);
        key[self.order - take..].copy_from_slice(&context[context.len() - take..]);
        Ok(key)
    }

    /// Row index of a BOS-extended context in the dense layout: base
    /// `vocab + 1`, most significant token first.
    pub fn context_index(&self, key: &[TokenId]) -> usize {
        key.iter()
            .fold(0usize, |acc, &t| acc * (self.vocab + 1) + t as usize)
    }

    pub fn next_dist(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        let key = self.context_key(context)?;
        Ok(self.row(&key))
    }

    /// Row for an already padded key.
    pub(crate) fn row(&self, key: &[TokenId]) -> Vec<f64> {
        debug_assert_eq!(key.len(), self.order);
        match &self.source {
            RowSource::Explicit(table) => {
                let i = self.context_index(key);
                table[i * self.vocab..(i + 1) * self.vocab].to_vec()
            }
            RowSource::Dirichlet(rows) => rows.row(key, self.vocab),
            RowSource::Mixture { base, noise, eps } => {
                let t = base.row(key);
                let n = noise.row(key, self.vocab);
                let mut mixed: Vec<f64> =
                    t.iter().zip(&n).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
                let total: f64 = mixed.iter().sum();
                for x in mixed.iter_mut() {
                    *x /= total;
                }
                mixed
            }
            RowSource::LowerOrder { base } => {
                let bos = self.bos();
                let mut full = Vec::with_capacity(base.order);
                full.push(bos);
                full.extend_from_slice(key);
                if key.first() == Some(&bos) {
                    // Short context: the only consistent extension is BOS.
                    return base.row(&full);
                }
                let mut acc = vec![0.0; self.vocab];
                for a in 0..self.vocab as TokenId {
                    full[0] = a;
                    for (x, y) in acc.iter_mut().zip(base.row(&full)) {
                        *x += y;
                    }
                }
                let total: f64 = acc.iter().sum();
                acc.iter_mut().for_each(|x| *x /= total);
                acc
            }
        }
    }

    /// Dense copy of this model. Fails when the table would exceed `max_cells`.
    pub fn materialize(&self, max_cells: usize) -> Result<TabularLM> {
        let n_ctx = context_count(self.vocab, self.order)?;
        if n_ctx.saturating_mul(self.vocab) > max_cells {
            return Err(Error::invalid(format!(
                "table of {n_ctx} rows x {} exceeds {max_cells} cells",
                self.vocab
            )));
        }
        TabularLM::from_fn(self.vocab, self.order, |key| self.row(key))
    }
}

pub(crate) fn context_count(vocab: usize, order: usize) -> Result<usize> {
    (0..order).try_fold(1usize, |acc, _| acc.checked_mul(vocab + 1))
        .ok_or_else(|| Error::invalid("context table too large"))
}

pub(crate) fn decode_context(mut idx: usize, vocab: usize, key: &mut [TokenId]) {
    for slot in key.iter_mut().rev() {
        *slot = (idx % (vocab + 1)) as TokenId;
        idx /= vocab + 1;
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::NotADistribution("empty".into()));
    }
    if let Some(bad) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::NotADistribution(format!("entry {bad}")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::NotADistribution(format!("sums to {total}")));
    }
    Ok(())
}

pub fn gen_target(spec: &ModelPairSpec) -> Result<TabularLM> {
    spec.validate()?;
    Ok(TabularLM {
        vocab: spec.vocab,
        order: spec.order,
        source: RowSource::Dirichlet(DirichletRows {
            seed: rng::stream_seed(spec.seed, rng::MODEL_GEN),
            schedule: spec.concentration_schedule.clone(),
        }),
    })
}

pub fn derive_draft(target: &TabularLM, spec: &ModelPairSpec) -> Result<TabularLM> {
    if target.vocab != spec.vocab {
        return Err(Error::invalid("spec vocab does not match the target"));
    }
    match spec.draft_mode {
        DraftMode::MixturePerturb => {
            if !(0.0..=1.0).contains(&spec.draft_noise) {
                return Err(Error::invalid("draft noise outside [0, 1]"));
            }
            Ok(TabularLM {
                vocab: target.vocab,
                order: target.order,
                source: RowSource::Mixture {
                    base: Box::new(target.clone()),
                    noise: DirichletRows {
                        seed: rng::stream_seed(spec.seed, rng::NOISE),
                        schedule: vec![ConcentrationComponent {
                            concentration: spec.noise_concentration,
                            weight: 1.0,
                        }],
                    },
                    eps: spec.draft_noise,
                },
            })
        }
        DraftMode::LowerOrder => {
            if target.order < 2 {
                return Err(Error::invalid("lower-order draft needs a target of order at least 2"));
            }
            Ok(TabularLM {
                vocab: target.vocab,
                order: target.order - 1,
                source: RowSource::LowerOrder {
                    base: Box::new(target.clone()),
                },
            })
        }
    }
}

/// `len` tokens, each the argmax (smallest index on ties) of the next row.
pub fn greedy_continuation(model: &TabularLM, context: &[TokenId], len: usize) -> Result<Vec<TokenId>> {
    let mut ctx = context.to_vec();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let dist = model.next_dist(&ctx)?;
        let t = argmax(&dist).expect("non-empty row");
        out.push(t);
        ctx.push(t);
    }
    Ok(out)
}

/// Entropy histogram over the seven bins for `rows` random contexts.
pub fn entropy_histogram(model: &TabularLM, rows: usize, seed: u64) -> [usize; 7] {
    let mut rng = rng::stream(seed, rng::DATASET);
    let mut hist = [0usize; 7];
    for _ in 0..rows {
        let key: Vec<TokenId> = (0..model.order)
            .map(|_| rng.random_range(0..model.vocab as TokenId))
            .collect();
        hist[entropy_bin(entropy(&model.row(&key)))] += 1;
    }
    hist
}

/// Draft/target pair with cached views, as used by the drafting harness.
pub struct ModelPair {
    pub spec: Option<ModelPairSpec>,
    pub target: ModelView,
    pub draft: ModelView,
}

impl ModelPair {
    pub fn from_spec(spec: &ModelPairSpec, top_cap: usize, entropy_m: usize) -> Result<Self> {
        let target = gen_target(spec)?;
        let draft = derive_draft(&target, spec)?;
        Ok(ModelPair {
            spec: Some(spec.clone()),
            target: ModelView::new(target, top_cap, entropy_m),
            draft: ModelView::new(draft, top_cap, entropy_m),
        })
    }

    pub fn new(target: TabularLM, draft: TabularLM, top_cap: usize, entropy_m: usize) -> Result<Self> {
        if target.vocab() != draft.vocab() {
            return Err(Error::invalid("draft and target vocabularies differ"));
        }
        Ok(ModelPair {
            spec: None,
            target: ModelView::new(target, top_cap, entropy_m),
            draft: ModelView::new(draft, top_cap, entropy_m),
        })
    }

    pub fn vocab(&self) -> usize {
        self.target.model().vocab()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn spec(vocab: usize, order: usize, eps: f64) -> ModelPairSpec {
        ModelPairSpec {
            vocab,
            order,
            seed: 7,
            concentration_schedule: vec![ConcentrationComponent {
                concentration: 0.5,
                weight: 1.0,
            }],
            draft_noise: eps,
            noise_concentration: 1.0,
            draft_mode: DraftMode::MixturePerturb,
            spread_bins: 0,
        }
    }

    fn sums_to_one(row: &[f64]) -> bool {
        (row.iter().sum::<f64>() - 1.0).abs() < 1e-9 && row.iter().all(|&p| p >= 0.0)
    }

    #[test]
    fn vocab_two_rows_are_valid() {
        let m = gen_target(&spec(2, 1, 0.0)).unwrap();
        for ctx in [vec![], vec![0], vec![1]] {
            let row = m.next_dist(&ctx).unwrap();
            assert_eq!(row.len(), 2);
            assert!(sums_to_one(&row));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_target(&spec(64, 2, 0.0)).unwrap();
        let b = gen_target(&spec(64, 2, 0.0)).unwrap();
        assert_eq!(a.next_dist(&[3, 9]).unwrap(), b.next_dist(&[3, 9]).unwrap());
        let mut other = spec(64, 2, 0.0);
        other.seed = 8;
        let c = gen_target(&other).unwrap();
        assert_ne!(a.next_dist(&[3, 9]).unwrap(), c.next_dist(&[3, 9]).unwrap());
    }

    #[test]
    fn context_handling() {
        let m = gen_target(&spec(16, 2, 0.0)).unwrap();
        let empty = m.next_dist(&[]).unwrap();
        assert_eq!(empty, m.row(&[m.bos(), m.bos()]));
        assert_eq!(m.next_dist(&[1, 2, 3]).unwrap(), m.next_dist(&[9, 2, 3]).unwrap());
        assert!(matches!(m.next_dist(&[16]), Err(Error::TokenOutOfRange { .. })));
    }

    #[test]
    fn zero_noise_draft_equals_target() {
        let s = spec(32, 2, 0.0);
        let t = gen_target(&s).unwrap();
        let d = derive_draft(&t, &s).unwrap();
        for ctx in [[1u32, 2], [5, 5], [31, 0]] {
            let a = t.next_dist(&ctx).unwrap();
            let b = d.next_dist(&ctx).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn full_noise_draft_equals_noise() {
        let s = spec(32, 1, 1.0);
        let t = gen_target(&s).unwrap();
        let d = derive_draft(&t, &s).unwrap();
        let RowSource::Mixture { noise, .. } = d.source() else { panic!() };
        let key = d.context_key(&[4]).unwrap();
        let n = noise.row(&key, 32);
        let row = d.next_dist(&[4]).unwrap();
        for (x, y) in row.iter().zip(&n) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn total_variation_bounded_by_noise() {
        let s = spec(128, 2, 0.2);
        let t = gen_target(&s).unwrap();
        let d = derive_draft(&t, &s).unwrap();
        for a in 0..10u32 {
            let ctx = [a, 2 * a];
            let tv: f64 = t
                .next_dist(&ctx)
                .unwrap()
                .iter()
                .zip(d.next_dist(&ctx).unwrap())
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 2.0;
            assert!(tv <= 0.2 + 1e-9, "tv {tv}");
        }
    }

    #[test]
    fn lower_order_draft() {
        let mut s = spec(8, 2, 0.0);
        s.draft_mode = DraftMode::LowerOrder;
        let t = gen_target(&s).unwrap();
        let d = derive_draft(&t, &s).unwrap();
        assert_eq!(d.order(), 1);
        let row = d.next_dist(&[3]).unwrap();
        assert!(sums_to_one(&row));
        let mut expect = vec![0.0; 8];
        for a in 0..8 {
            for (e, x) in expect.iter_mut().zip(t.next_dist(&[a, 3]).unwrap()) {
                *e += x / 8.0;
            }
        }
        for (x, y) in row.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut s1 = spec(8, 1, 0.0);
        s1.draft_mode = DraftMode::LowerOrder;
        assert!(derive_draft(&gen_target(&s1).unwrap(), &s1).is_err());
    }

    #[test]
    fn greedy_continuation_rewalk() {
        let m = gen_target(&spec(50, 2, 0.0)).unwrap();
        assert!(greedy_continuation(&m, &[1, 2], 0).unwrap().is_empty());
        let got = greedy_continuation(&m, &[1, 2], 12).unwrap();
        let mut ctx = vec![1, 2];
        for &t in &got {
            let row = m.next_dist(&ctx).unwrap();
            let best = row.iter().cloned().fold(f64::MIN, f64::max);
            let first = row.iter().position(|&p| p == best).unwrap() as u32;
            assert_eq!(t, first);
            ctx.push(t);
        }
    }

    #[test]
    fn one_hot_chain() {
        // Token t is always followed by (t + 1) mod 5.
        let m = TabularLM::from_fn(5, 1, |key| {
            let mut row = vec![0.0; 5];
            let next = if key[0] == 5 { 0 } else { (key[0] as usize + 1) % 5 };
            row[next] = 1.0;
            row
        })
        .unwrap();
        assert_eq!(greedy_continuation(&m, &[2], 4).unwrap(), vec![3, 4, 0, 1]);
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(2, 1, 0.0);
        s.draft_noise = 1.5;
        assert!(s.validate().is_err());
        let mut s = spec(1, 1, 0.0);
        assert!(s.validate().is_err());
        s.vocab = 2;
        s.concentration_schedule[0].weight = 0.5;
        assert!(s.validate().is_err());
        let mut s = spec(64, 1, 0.0);
        s.spread_bins = 7;
        assert!(matches!(gen_target(&s), Err(Error::InvalidArgument(_))));
        s.vocab = 1024;
        assert!(gen_target(&s).is_ok());
    }

    #[test]
    fn schedule_parsing() {
        let sched = ModelPairSpec::parse_schedule("0.01:0.5,1:0.25,100:0.25").unwrap();
        assert_eq!(sched.len(), 3);
        assert_eq!(sched[2].concentration, 100.0);
        assert!(ModelPairSpec::parse_schedule("0.01").is_err());
    }

    #[test]
    fn materialize_matches_procedural() {
        let m = gen_target(&spec(6, 2, 0.0)).unwrap();
        let dense = m.materialize(1 << 20).unwrap();
        assert!(dense.is_explicit());
        assert_eq!(dense.next_dist(&[1, 4]).unwrap(), m.next_dist(&[1, 4]).unwrap());
        assert_eq!(dense.next_dist(&[]).unwrap(), m.next_dist(&[]).unwrap());
        assert!(m.materialize(10).is_err());
    }
}
