use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{NnError, SeededRng};

const UNK_SCALE: f64 = 0.25;

/// Word vectors plus one shared unknown-word vector.
///
/// Rows are addressed by index; row `vocab_len()` is the unknown vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "EmbeddingData", into = "EmbeddingData")]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    /// `(vocab_len + 1) × dim`, unknown vector last.
    matrix: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingData {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    unk: Vec<f64>,
}

impl From<EmbeddingData> for EmbeddingTable {
    fn from(d: EmbeddingData) -> Self {
        let mut matrix = d.vectors;
        matrix.extend_from_slice(&d.unk);
        EmbeddingTable::from_parts(d.dim, d.words, matrix)
    }
}

impl From<EmbeddingTable> for EmbeddingData {
    fn from(t: EmbeddingTable) -> Self {
        let split = t.words.len() * t.dim;
        let mut vectors = t.matrix;
        let unk = vectors.split_off(split);
        EmbeddingData {
            dim: t.dim,
            words: t.words,
            vectors,
            unk,
        }
    }
}

impl EmbeddingTable {
    fn from_parts(dim: usize, words: Vec<String>, matrix: Vec<f64>) -> Self {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            index.entry(w.clone()).or_insert(i);
        }
        EmbeddingTable {
            dim,
            words,
            index,
            matrix,
        }
    }

    /// Random vectors for `words` (duplicates collapse), uniform in (-0.5, 0.5).
    pub fn random<I, S>(words: I, dim: usize, seed: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut rng = SeededRng::seed_from_u64(seed);
        let mut vocab: Vec<String> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for w in words {
            if seen.insert(w.as_ref().to_string()) {
                vocab.push(w.as_ref().to_string());
            }
        }
        let matrix = (0..(vocab.len() + 1) * dim)
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        Self::from_parts(dim, vocab, matrix)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn n_rows(&self) -> usize {
        self.words.len() + 1
    }

    pub fn unk_row(&self) -> usize {
        self.words.len()
    }

    /// Exact form, then lowercased form, then the unknown row.
    pub fn row_of(&self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let lower = word.to_lowercase();
        self.index.get(&lower).copied().unwrap_or(self.unk_row())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> &[f64] {
        self.row(self.row_of(word))
    }

    pub fn unk(&self) -> &[f64] {
        self.row(self.unk_row())
    }

    /// All rows, unknown last, flattened row-major.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut [f64] {
        &mut self.matrix
    }

    /// word2vec text format (the unknown vector is not part of it).
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for v in self.row(i) {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Parses word2vec text format: a `vocab_size dim` header, then `word v1 … vD` rows.
///
/// The unknown vector is drawn from `unk_seed`.
pub fn load_embeddings(text: &str, unk_seed: u64) -> Result<EmbeddingTable, NnError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(NnError::Embedding {
        line: 1,
        message: "missing header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let parsed: Option<(usize, usize)> = match fields.as_slice() {
        [v, d] => v.parse().ok().zip(d.parse().ok()),
        _ => None,
    };
    let (vocab_size, dim) = match parsed {
        Some((v, d)) if d > 0 => (v, d),
        _ => {
            return Err(NnError::Embedding {
                line: 1,
                message: format!("malformed header {header:?}, expected \"vocab_size dim\""),
            })
        }
    };

    let mut words = Vec::with_capacity(vocab_size);
    let mut matrix = Vec::with_capacity((vocab_size + 1) * dim);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let mut parts = line.split_whitespace();
        let word = parts.next().expect("non-blank line");
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| NnError::Embedding {
                line: line_no,
                message: format!("bad number: {e}"),
            })?;
        if values.len() != dim {
            return Err(NnError::Embedding {
                line: line_no,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        words.push(word.to_string());
        matrix.extend(values);
    }
    if words.len() != vocab_size {
        return Err(NnError::Embedding {
            line: 1,
            message: format!("header declares {vocab_size} words, found {}", words.len()),
        });
    }
    let mut rng = SeededRng::seed_from_u64(unk_seed);
    matrix.extend((0..dim).map(|_| rng.gen_range(-UNK_SCALE..UNK_SCALE)));
    Ok(EmbeddingTable::from_parts(dim, words, matrix))
}
