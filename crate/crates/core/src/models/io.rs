//! Model files.
//!
//! The first line is a JSON header. Rows follow in one of three layouts:
//!
//! * `procedural`: no rows; the model is regenerated from the embedded pair
//!   spec and the `role` (`target` or `draft`).
//! * `jsonl`: one `{"context": [...], "probs": [...]}` line per
//!   BOS-extended context (BOS is the id `vocab`).
//! * `blob`: rows live in a sibling binary file named by `blob`, holding
//!   little-endian `f64` values, row-major, one row per context in
//!   [`TabularLM::context_index`] order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{context_count, decode_context, derive_draft, gen_target, ModelPairSpec, TabularLM};
use crate::error::{Error, Result};
use crate::TokenId;

/// Largest table (in cells) written as explicit rows.
pub const MAX_EXPLICIT_CELLS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStorage {
    Procedural,
    Jsonl,
    Blob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFileHeader {
    pub vocab: usize,
    pub order: usize,
    pub seed: Option<u64>,
    pub role: String,
    pub spec: Option<ModelPairSpec>,
    pub rows: RowStorage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blob: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    context: Vec<TokenId>,
    probs: Vec<f64>,
}

pub fn save_model(
    path: &Path,
    model: &TabularLM,
    role: &str,
    spec: Option<&ModelPairSpec>,
    storage: RowStorage,
) -> Result<()> {
    if storage == RowStorage::Procedural && spec.is_none() {
        return Err(Error::invalid("procedural model files need a pair spec"));
    }
    let blob_name = (storage == RowStorage::Blob).then(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        format!("{stem}.bin")
    });
    let header = ModelFileHeader {
        vocab: model.vocab(),
        order: model.order(),
        seed: spec.map(|s| s.seed),
        role: role.to_string(),
        spec: spec.cloned(),
        rows: storage,
        blob: blob_name.clone(),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    if storage == RowStorage::Procedural {
        return w.flush().map_err(|e| Error::io(path, e));
    }
    let dense = model.materialize(MAX_EXPLICIT_CELLS)?;
    let n_ctx = context_count(model.vocab(), model.order())?;
    let mut key = vec![0 as TokenId; model.order()];
    match blob_name {
        None => {
            for idx in 0..n_ctx {
                decode_context(idx, model.vocab(), &mut key);
                let rec = RowRecord {
                    context: key.clone(),
                    probs: dense.row(&key),
                };
                serde_json::to_writer(&mut w, &rec)?;
                writeln!(w).map_err(|e| Error::io(path, e))?;
            }
        }
        Some(name) => {
            let blob_path = path.with_file_name(name);
            let f = File::create(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
            let mut bw = BufWriter::new(f);
            for idx in 0..n_ctx {
                decode_context(idx, model.vocab(), &mut key);
                for p in dense.row(&key) {
                    bw.write_all(&p.to_le_bytes()).map_err(|e| Error::io(&blob_path, e))?;
                }
            }
            bw.flush().map_err(|e| Error::io(&blob_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(ModelFileHeader, TabularLM)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::malformed("model file", "missing header"))?
        .map_err(|e| Error::io(path, e))?;
    let header: ModelFileHeader = serde_json::from_str(&first)
        .map_err(|e| Error::malformed("model file", format!("header: {e}")))?;
    let n_ctx = context_count(header.vocab, header.order)?;
    let model = match header.rows {
        RowStorage::Procedural => {
            let spec = header
                .spec
                .as_ref()
                .ok_or_else(|| Error::malformed("model file", "procedural model without spec"))?;
            let target = gen_target(spec)?;
            let model = match header.role.as_str() {
                "target" => target,
                "draft" => derive_draft(&target, spec)?,
                other => return Err(Error::malformed("model file", format!("unknown role {other:?}"))),
            };
            if model.vocab() != header.vocab || model.order() != header.order {
                return Err(Error::malformed("model file", "header disagrees with spec"));
            }
            model
        }
        RowStorage::Jsonl => {
            let mut table = vec![f64::NAN; n_ctx * header.vocab];
            let mut seen = vec![false; n_ctx];
            for line in lines {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: RowRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::malformed("model file", format!("row: {e}")))?;
                if rec.context.len() != header.order {
                    return Err(Error::Shape {
                        what: "row context",
                        expected: header.order,
                        found: rec.context.len(),
                    });
                }
                if rec.probs.len() != header.vocab {
                    return Err(Error::Shape {
                        what: "row probabilities",
                        expected: header.vocab,
                        found: rec.probs.len(),
                    });
                }
                if rec.context.iter().any(|&t| t as usize > header.vocab) {
                    return Err(Error::malformed("model file", "context token out of range"));
                }
                let idx = rec
                    .context
                    .iter()
                    .fold(0usize, |acc, &t| acc * (header.vocab + 1) + t as usize);
                seen[idx] = true;
                table[idx * header.vocab..(idx + 1) * header.vocab].copy_from_slice(&rec.probs);
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(Error::malformed("model file", format!("context #{missing} has no row")));
            }
            TabularLM::from_rows(header.vocab, header.order, table)?
        }
        RowStorage::Blob => {
            let name = header
                .blob
                .as_ref()
                .ok_or_else(|| Error::malformed("model file", "blob storage without blob name"))?;
            let blob_path = path.with_file_name(name);
            let mut bytes = Vec::new();
            File::open(&blob_path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(&blob_path, e))?;
            let cells = n_ctx * header.vocab;
            if bytes.len() != cells * 8 {
                return Err(Error::Shape {
                    what: "blob bytes",
                    expected: cells * 8,
                    found: bytes.len(),
                });
            }
            let table = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            TabularLM::from_rows(header.vocab, header.order, table)?
        }
    };
    Ok((header, model))
}
