//! Dependency-parsed sentences, event mentions and their file formats.

mod conllu;
mod events;
mod synth;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{parse_conllu, write_conllu};
pub use events::{load_events, write_events};
pub use synth::{generate_synthetic, SynthConfig, SYNTH_GRAMMAR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: expected 10 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: invalid {column} value {value:?}")]
    BadField {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error("line {line}: enhanced dependency graphs are not supported (DEPS {deps:?})")]
    EnhancedGraph { line: usize, deps: String },
    #[error("{sentence}: token ids must be consecutive from 1, found {found} where {expected} was expected")]
    NonConsecutiveIds {
        sentence: String,
        expected: usize,
        found: usize,
    },
    #[error("{sentence}: token {token} has empty form")]
    EmptyForm { sentence: String, token: usize },
    #[error("{sentence}: head out of range: token {token} has head {head} but the sentence has {len} tokens")]
    HeadOutOfRange {
        sentence: String,
        token: usize,
        head: usize,
        len: usize,
    },
    #[error("{sentence}: token {token} is its own head")]
    SelfLoop { sentence: String, token: usize },
    #[error("{sentence}: cycle detected through token {token}")]
    Cycle { sentence: String, token: usize },
    #[error("{sentence}: no root token (head = 0)")]
    NoRoot { sentence: String },
    #[error("{sentence}: multiple roots {roots:?}")]
    MultipleRoots { sentence: String, roots: Vec<usize> },
    #[error("{sentence}: empty sentence")]
    EmptySentence { sentence: String },
    #[error("events line {line}: {message}")]
    EventSyntax { line: usize, message: String },
    #[error("events line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("events line {line}: dangling reference to doc {doc_id:?} sentence {sent_id:?}")]
    DanglingReference {
        line: usize,
        doc_id: String,
        sent_id: String,
    },
    #[error("events line {line}: token_id {token_id} out of range for sentence {sent_id:?} with {len} tokens")]
    TokenOutOfRange {
        line: usize,
        sent_id: String,
        token_id: usize,
        len: usize,
    },
    #[error("invalid synthetic corpus config: {0}")]
    Config(String),
}

/// One row of a dependency-parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<String>,
    /// 0 attaches the token to the artificial root.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(id: usize, form: &str, head: usize, deprel: &str) -> Self {
        Token {
            id,
            form: form.to_string(),
            lemma: None,
            upos: None,
            head,
            deprel: deprel.to_string(),
        }
    }

    /// Relation label without its `:subtype` suffix.
    pub fn base_deprel(&self) -> &str {
        self.deprel.split(':').next().unwrap_or("")
    }
}

/// A sentence whose tokens form a single rooted dependency tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSentence {
    doc_id: String,
    sent_id: String,
    tokens: Vec<Token>,
}

impl DepSentence {
    /// Validates the tree invariants: ids 1..n, one root, in-range heads, no cycles.
    pub fn new(doc_id: &str, sent_id: &str, tokens: Vec<Token>) -> Result<Self, CorpusError> {
        let locator = format!("sentence {sent_id:?} (doc {doc_id:?})");
        Self::with_locator(doc_id, sent_id, tokens, &locator)
    }

    pub(crate) fn with_locator(
        doc_id: &str,
        sent_id: &str,
        tokens: Vec<Token>,
        locator: &str,
    ) -> Result<Self, CorpusError> {
        validate_tree(&tokens, locator)?;
        Ok(DepSentence {
            doc_id: doc_id.to_string(),
            sent_id: sent_id.to_string(),
            tokens,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn sent_id(&self) -> &str {
        &self.sent_id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based id.
    pub fn token(&self, id: usize) -> Option<&Token> {
        id.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    pub fn root_id(&self) -> usize {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .map(|t| t.id)
            .expect("validated sentence has a root")
    }

    /// Dependents of every token, indexed by 1-based id; entry 0 holds the root.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len() + 1];
        for t in &self.tokens {
            children[t.head].push(t.id);
        }
        children
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }
}

fn validate_tree(tokens: &[Token], locator: &str) -> Result<(), CorpusError> {
    if tokens.is_empty() {
        return Err(CorpusError::EmptySentence {
            sentence: locator.to_string(),
        });
    }
    let n = tokens.len();
    for (i, t) in tokens.iter().enumerate() {
        if t.id != i + 1 {
            return Err(CorpusError::NonConsecutiveIds {
                sentence: locator.to_string(),
                expected: i + 1,
                found: t.id,
            });
        }
        if t.form.is_empty() {
            return Err(CorpusError::EmptyForm {
                sentence: locator.to_string(),
                token: t.id,
            });
        }
        if t.head > n {
            return Err(CorpusError::HeadOutOfRange {
                sentence: locator.to_string(),
                token: t.id,
                head: t.head,
                len: n,
            });
        }
        if t.head == t.id {
            return Err(CorpusError::SelfLoop {
                sentence: locator.to_string(),
                token: t.id,
            });
        }
    }
    let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.id).collect();
    match roots.len() {
        0 => {
            return Err(CorpusError::NoRoot {
                sentence: locator.to_string(),
            })
        }
        1 => {}
        _ => {
            return Err(CorpusError::MultipleRoots {
                sentence: locator.to_string(),
                roots,
            })
        }
    }
    if let Some(token) = find_cycle(tokens) {
        return Err(CorpusError::Cycle {
            sentence: locator.to_string(),
            token,
        });
    }
    Ok(())
}

/// Returns a token lying on a head cycle, if any.
fn find_cycle(tokens: &[Token]) -> Option<usize> {
    let n = tokens.len();
    // 0 = unvisited, 1 = on current walk, 2 = reaches the root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut walk = Vec::new();
        let mut cur = start;
        while state[cur] == 0 {
            state[cur] = 1;
            walk.push(cur);
            cur = tokens[cur - 1].head;
        }
        if state[cur] == 1 {
            return Some(cur);
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}

/// Event temporal status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemporalStatus {
    #[serde(rename = "PA")]
    Past,
    #[serde(rename = "OG")]
    Ongoing,
    #[serde(rename = "FU")]
    Future,
}

impl TemporalStatus {
    pub const ALL: [TemporalStatus; 3] = [
        TemporalStatus::Past,
        TemporalStatus::Ongoing,
        TemporalStatus::Future,
    ];

    pub fn index(self) -> usize {
        match self {
            TemporalStatus::Past => 0,
            TemporalStatus::Ongoing => 1,
            TemporalStatus::Future => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            TemporalStatus::Past => "PA",
            TemporalStatus::Ongoing => "OG",
            TemporalStatus::Future => "FU",
        }
    }
}

impl fmt::Display for TemporalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for TemporalStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PA" => Ok(TemporalStatus::Past),
            "OG" => Ok(TemporalStatus::Ongoing),
            "FU" => Ok(TemporalStatus::Future),
            other => Err(other.to_string()),
        }
    }
}

/// An event anchored on a single head token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub doc_id: String,
    pub sent_id: String,
    pub token_id: usize,
    pub label: Option<TemporalStatus>,
}

/// Lookup from `(doc_id, sent_id)` to a sentence position.
#[derive(Debug, Clone)]
pub struct SentenceIndex {
    map: HashMap<(String, String), usize>,
}

impl SentenceIndex {
    pub fn new(corpus: &[DepSentence]) -> Self {
        let mut map = HashMap::with_capacity(corpus.len());
        for (i, s) in corpus.iter().enumerate() {
            map.entry((s.doc_id.clone(), s.sent_id.clone())).or_insert(i);
        }
        SentenceIndex { map }
    }

    pub fn position(&self, doc_id: &str, sent_id: &str) -> Option<usize> {
        self.map
            .get(&(doc_id.to_string(), sent_id.to_string()))
            .copied()
    }
}
