//! Line-delimited JSON checkpoints: one header record, one record per
//! parameter tensor, and a final record holding the embedding table (its
//! unknown vector included).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, NnError, Tensor};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub model_type: String,
    pub shapes: BTreeMap<String, Vec<usize>>,
    /// Model and run settings needed to rebuild the classifier.
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: BTreeMap<String, Tensor>,
    pub embeddings: EmbeddingTable,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    param: String,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingRecord {
    embeddings: EmbeddingTable,
}

pub fn write_checkpoint(ckpt: &Checkpoint) -> String {
    let mut out = serde_json::to_string(&ckpt.header).expect("header serializes");
    out.push('\n');
    for (name, t) in &ckpt.params {
        let rec = ParamRecord {
            param: name.clone(),
            data: t.data().to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("param serializes"));
        out.push('\n');
    }
    let rec = EmbeddingRecord {
        embeddings: ckpt.embeddings.clone(),
    };
    out.push_str(&serde_json::to_string(&rec).expect("embeddings serialize"));
    out.push('\n');
    out
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn read_checkpoint(text: &str) -> Result<Checkpoint, NnError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: CheckpointHeader = serde_json::from_str(lines.next().ok_or_else(|| bad("empty file"))?)
        .map_err(|e| bad(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let mut params = BTreeMap::new();
    let mut embeddings = None;
    for line in lines {
        if embeddings.is_some() {
            return Err(bad("records after the embeddings record"));
        }
        if let Ok(rec) = serde_json::from_str::<ParamRecord>(line) {
            let shape = header
                .shapes
                .get(&rec.param)
                .ok_or_else(|| bad(format!("parameter {:?} missing from header", rec.param)))?;
            let t = Tensor::from_vec(shape, rec.data)?;
            if params.insert(rec.param.clone(), t).is_some() {
                return Err(NnError::DuplicateParam(rec.param));
            }
        } else {
            let rec: EmbeddingRecord =
                serde_json::from_str(line).map_err(|e| bad(format!("record: {e}")))?;
            embeddings = Some(rec.embeddings);
        }
    }
    if let Some(missing) = header.shapes.keys().find(|k| !params.contains_key(*k)) {
        return Err(bad(format!("parameter {missing:?} has no data record")));
    }
    Ok(Checkpoint {
        header,
        params,
        embeddings: embeddings.ok_or_else(|| bad("missing embeddings record"))?,
    })
}
