//! Labeled corpora harvested from verified full expansion trees.
//!
//! Each generation round builds the complete expansion tree (no rerank),
//! verifies it against the target, and emits one `(P, H, d, label)` row per
//! draft node. Rows carry their tree and round ids so splits and grouped
//! evaluation can keep a tree's nodes together.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::LabeledExample;
use crate::drafting::expand;
use crate::error::{Error, Result};
use crate::features::{node_features, FeatureVector};
use crate::models::{ModelPair, ModelPairSpec};
use crate::rng;
use crate::verification::verify_greedy;
use crate::TokenId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    #[serde(rename = "K")]
    pub top_k: usize,
    pub d_max: usize,
    pub model_pair_spec: Option<ModelPairSpec>,
    pub seed: u64,
    /// Trees collected.
    pub count: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub tree_id: u64,
    pub prompt_id: u64,
    pub round: u64,
    pub node_id: usize,
    #[serde(rename = "P")]
    pub joint: f64,
    #[serde(rename = "H")]
    pub entropy: f64,
    pub d: u32,
    pub label: u8,
}

impl CorpusRow {
    pub fn example(&self) -> LabeledExample {
        LabeledExample {
            features: FeatureVector::new(self.joint, self.entropy, f64::from(self.d)),
            label: self.label == 1,
            group: self.tree_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub rows: Vec<CorpusRow>,
    /// Accept length of every collected round, indexed by tree id.
    pub taus: Vec<usize>,
}

impl Corpus {
    pub fn examples(&self) -> Vec<LabeledExample> {
        self.rows.iter().map(CorpusRow::example).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w).map_err(|e| Error::io("<corpus>", e))?;
        for row in &self.rows {
            serde_json::to_writer(&mut w, row)?;
            writeln!(w).map_err(|e| Error::io("<corpus>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Corpus> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::malformed("corpus", "empty file"))?
            .map_err(|e| Error::io("<corpus>", e))?;
        let header: CorpusHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::malformed("corpus header", e.to_string()))?;
        let mut rows = Vec::with_capacity(header.rows);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("<corpus>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: CorpusRow = serde_json::from_str(&line)
                .map_err(|e| Error::malformed("corpus row", format!("line {}: {e}", i + 2)))?;
            rows.push(row);
        }
        let mut taus = vec![0; header.count];
        for row in &rows {
            let slot = taus
                .get_mut(row.tree_id as usize)
                .ok_or_else(|| Error::malformed("corpus row", format!("tree id {} out of range", row.tree_id)))?;
            *slot += usize::from(row.label);
        }
        Ok(Corpus { header, rows, taus })
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Corpus::read_jsonl(BufReader::new(f))
    }
}

/// Collects `count` labeled trees, spread round-robin over the prompts.
/// Prompt `i` runs `count / n (+1 for the first count % n)` consecutive
/// rounds, each appending the accepted tokens and the bonus token.
pub fn collect_labeled_trees(
    pair: &ModelPair,
    prompts: &[Vec<TokenId>],
    top_k: usize,
    d_max: usize,
    count: usize,
    seed: u64,
) -> Result<Corpus> {
    if prompts.is_empty() {
        return Err(Error::invalid("empty prompt set"));
    }
    if top_k < 1 || d_max < 1 {
        return Err(Error::invalid("K and d_max must be at least 1"));
    }
    let n = prompts.len();
    let per_prompt: Vec<usize> = (0..n).map(|i| count / n + usize::from(i < count % n)).collect();
    type Harvest = Vec<(u64, Vec<(usize, FeatureVector, bool)>, usize)>;
    let harvested: Vec<Harvest> = prompts
        .par_iter()
        .zip(per_prompt.par_iter())
        .map(|(prompt, &rounds)| -> Result<Harvest> {
            let mut ctx = prompt.clone();
            let mut out = Vec::with_capacity(rounds);
            for round in 0..rounds {
                let (mut tree, _) = expand(&pair.draft, &ctx, top_k, d_max)?;
                let v = verify_greedy(&mut tree, &pair.target, &ctx)?;
                let mut nodes = Vec::with_capacity(tree.draft_len());
                for node in &tree.nodes()[1..] {
                    let f = node_features(&tree, node.id)?;
                    if f.is_finite() {
                        nodes.push((node.id, f, node.accepted == Some(true)));
                    }
                }
                ctx.extend(v.emitted(&tree));
                out.push((round as u64, nodes, v.tau));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut taus = Vec::with_capacity(count);
    for (prompt_id, harvest) in harvested.into_iter().enumerate() {
        for (round, nodes, tau) in harvest {
            let tree_id = taus.len() as u64;
            taus.push(tau);
            rows.extend(nodes.into_iter().map(|(node_id, f, label)| CorpusRow {
                tree_id,
                prompt_id: prompt_id as u64,
                round,
                node_id,
                joint: f.joint,
                entropy: f.entropy,
                d: f.depth as u32,
                label: u8::from(label),
            }));
        }
    }
    Ok(Corpus {
        header: CorpusHeader {
            top_k,
            d_max,
            model_pair_spec: pair.spec.clone(),
            seed,
            count,
            rows: rows.len(),
        },
        rows,
        taus,
    })
}

/// Seeded split at group granularity. `ratio` of the groups (rounded,
/// at least one on each side) go to the first part.
pub fn split_groups<T: Clone>(
    items: &[T],
    group: impl Fn(&T) -> u64,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("split ratio must lie in (0, 1)"));
    }
    let mut groups: Vec<u64> = items.iter().map(&group).collect();
    groups.sort_unstable();
    groups.dedup();
    if groups.len() < 2 {
        return Err(Error::invalid("splitting needs at least 2 trees"));
    }
    let take = ((ratio * groups.len() as f64).round() as usize).clamp(1, groups.len() - 1);
    groups.shuffle(&mut rng::stream(seed, rng::SPLIT));
    let mut first: Vec<u64> = groups[..take].to_vec();
    first.sort_unstable();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for item in items {
        if first.binary_search(&group(item)).is_ok() {
            a.push(item.clone());
        } else {
            b.push(item.clone());
        }
    }
    Ok((a, b))
}

pub fn split_examples(
    items: &[LabeledExample],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    split_groups(items, |e| e.group, ratio, seed)
}

pub fn split_dataset(corpus: &Corpus, ratio: f64, seed: u64) -> Result<(Vec<CorpusRow>, Vec<CorpusRow>)> {
    split_groups(&corpus.rows, |r| r.tree_id, ratio, seed)
}
