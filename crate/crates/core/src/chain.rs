//! Event-centered token selections over a dependency tree.
//!
//! A dependency chain is built in two stages. Stage 1 takes the target, every
//! governor on its path to the root, and its whole subtree. Stage 2 adds, in a
//! single pass, each `aux`/`auxpass`/`cop` dependent whose head is in the
//! stage-1 set. Members are returned in surface order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DepSentence, EventMention, SentenceIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("target token {target} is not in sentence {sent_id:?} ({len} tokens)")]
    InvalidTarget {
        sent_id: String,
        target: usize,
        len: usize,
    },
    #[error("mention {doc_id}/{sent_id}/{token_id} does not resolve in the corpus")]
    Unresolved {
        doc_id: String,
        sent_id: String,
        token_id: usize,
    },
    #[error("no mentions to summarize")]
    EmptyMentions,
}

/// Relations whose dependents carry tense, aspect or mood of a chain member.
const SATELLITE_RELATIONS: &[&str] = &["aux", "auxpass", "cop"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainOptions {
    /// Drop `punct` dependents from the target's subtree.
    pub drop_punct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyChain {
    pub target_id: usize,
    /// Strictly increasing token ids.
    pub member_ids: Vec<usize>,
    pub stage1_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub target_id: usize,
    pub member_ids: Vec<usize>,
    pub half_width: usize,
}

fn check_target(sent: &DepSentence, target_id: usize) -> Result<(), ChainError> {
    if target_id == 0 || target_id > sent.len() {
        return Err(ChainError::InvalidTarget {
            sent_id: sent.sent_id().to_string(),
            target: target_id,
            len: sent.len(),
        });
    }
    Ok(())
}

pub fn extract_chain(sent: &DepSentence, target_id: usize) -> Result<DependencyChain, ChainError> {
    extract_chain_with(sent, target_id, ChainOptions::default())
}

pub fn extract_chain_with(
    sent: &DepSentence,
    target_id: usize,
    opts: ChainOptions,
) -> Result<DependencyChain, ChainError> {
    check_target(sent, target_id)?;
    let tokens = sent.tokens();
    let children = sent.children();

    let mut stage1 = BTreeSet::new();
    stage1.insert(target_id);

    let mut cur = tokens[target_id - 1].head;
    while cur != 0 {
        stage1.insert(cur);
        cur = tokens[cur - 1].head;
    }

    let mut stack: Vec<usize> = children[target_id].clone();
    while let Some(id) = stack.pop() {
        if opts.drop_punct && tokens[id - 1].base_deprel() == "punct" {
            continue;
        }
        stage1.insert(id);
        stack.extend_from_slice(&children[id]);
    }

    let mut members = stage1.clone();
    for t in tokens {
        if !stage1.contains(&t.id)
            && t.head != 0
            && stage1.contains(&t.head)
            && SATELLITE_RELATIONS.contains(&t.base_deprel())
        {
            members.insert(t.id);
        }
    }

    Ok(DependencyChain {
        target_id,
        member_ids: members.into_iter().collect(),
        stage1_ids: stage1.into_iter().collect(),
    })
}

/// Surface window of `half_width` tokens on each side, clipped to the sentence.
pub fn extract_window(
    sent: &DepSentence,
    target_id: usize,
    half_width: usize,
) -> Result<ContextWindow, ChainError> {
    check_target(sent, target_id)?;
    let lo = target_id.saturating_sub(half_width).max(1);
    let hi = (target_id + half_width).min(sent.len());
    Ok(ContextWindow {
        target_id,
        member_ids: (lo..=hi).collect(),
        half_width,
    })
}

/// Which token selection feeds a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Chain,
    Window,
    /// The full sentence tree.
    Tree,
}

impl ReprKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReprKind::Chain => "chain",
            ReprKind::Window => "window",
            ReprKind::Tree => "tree",
        }
    }
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReprKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain" => Ok(ReprKind::Chain),
            "window" => Ok(ReprKind::Window),
            "tree" => Ok(ReprKind::Tree),
            other => Err(format!("unknown representation {other:?}")),
        }
    }
}

/// Ordered token ids selected for `kind`; `Tree` selects the whole sentence.
pub fn select_ids(
    sent: &DepSentence,
    target_id: usize,
    kind: ReprKind,
    half_width: usize,
) -> Result<Vec<usize>, ChainError> {
    match kind {
        ReprKind::Chain => Ok(extract_chain(sent, target_id)?.member_ids),
        ReprKind::Window => Ok(extract_window(sent, target_id, half_width)?.member_ids),
        ReprKind::Tree => {
            check_target(sent, target_id)?;
            Ok((1..=sent.len()).collect())
        }
    }
}

/// One exported extraction, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub doc_id: String,
    pub sent_id: String,
    pub token_id: usize,
    pub kind: ReprKind,
    pub forms: Vec<String>,
    pub ids: Vec<usize>,
}

pub fn extraction_record(
    sent: &DepSentence,
    target_id: usize,
    kind: ReprKind,
    half_width: usize,
) -> Result<ExtractionRecord, ChainError> {
    let ids = select_ids(sent, target_id, kind, half_width)?;
    let forms = ids
        .iter()
        .map(|&i| sent.tokens()[i - 1].form.clone())
        .collect();
    Ok(ExtractionRecord {
        doc_id: sent.doc_id().to_string(),
        sent_id: sent.sent_id().to_string(),
        token_id: target_id,
        kind,
        forms,
        ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub count: usize,
    pub mean_len: f64,
    pub median_len: f64,
    /// Mean over mentions of |chain ∩ window| / |chain|.
    pub window_overlap: f64,
}

pub fn chain_stats(
    corpus: &[DepSentence],
    mentions: &[EventMention],
    half_width: usize,
) -> Result<ChainStats, ChainError> {
    if mentions.is_empty() {
        return Err(ChainError::EmptyMentions);
    }
    let index = SentenceIndex::new(corpus);
    let mut lens = Vec::with_capacity(mentions.len());
    let mut overlap_sum = 0.0;
    for m in mentions {
        let sent = index
            .position(&m.doc_id, &m.sent_id)
            .map(|p| &corpus[p])
            .ok_or_else(|| ChainError::Unresolved {
                doc_id: m.doc_id.clone(),
                sent_id: m.sent_id.clone(),
                token_id: m.token_id,
            })?;
        let chain = extract_chain(sent, m.token_id)?;
        let window = extract_window(sent, m.token_id, half_width)?;
        let lo = window.member_ids[0];
        let hi = *window.member_ids.last().expect("window contains target");
        let inside = chain
            .member_ids
            .iter()
            .filter(|&&id| id >= lo && id <= hi)
            .count();
        overlap_sum += inside as f64 / chain.member_ids.len() as f64;
        lens.push(chain.member_ids.len());
    }
    lens.sort_unstable();
    let n = lens.len();
    let mean_len = lens.iter().sum::<usize>() as f64 / n as f64;
    let median_len = if n % 2 == 1 {
        lens[n / 2] as f64
    } else {
        (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
    };
    Ok(ChainStats {
        count: n,
        mean_len,
        median_len,
        window_overlap: overlap_sum / n as f64,
    })
}
