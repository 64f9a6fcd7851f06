use serde::{Deserialize, Serialize};

use super::{CorpusError, DepSentence, EventMention, SentenceIndex, TemporalStatus};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRecord {
    doc_id: String,
    sent_id: String,
    token_id: usize,
    #[serde(default)]
    label: Option<String>,
}

/// Reads line-delimited JSON event records and resolves them against `corpus`.
///
/// A missing or `null` label yields an unlabeled mention (inference input).
pub fn load_events(text: &str, corpus: &[DepSentence]) -> Result<Vec<EventMention>, CorpusError> {
    let index = SentenceIndex::new(corpus);
    let mut mentions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::EventSyntax {
                line: line_no,
                message: e.to_string(),
            })?;
        let label = match record.label {
            None => None,
            Some(l) => Some(l.parse::<TemporalStatus>().map_err(|label| {
                CorpusError::UnknownLabel {
                    line: line_no,
                    label,
                }
            })?),
        };
        let pos = index
            .position(&record.doc_id, &record.sent_id)
            .ok_or_else(|| CorpusError::DanglingReference {
                line: line_no,
                doc_id: record.doc_id.clone(),
                sent_id: record.sent_id.clone(),
            })?;
        let len = corpus[pos].len();
        if record.token_id == 0 || record.token_id > len {
            return Err(CorpusError::TokenOutOfRange {
                line: line_no,
                sent_id: record.sent_id,
                token_id: record.token_id,
                len,
            });
        }
        mentions.push(EventMention {
            doc_id: record.doc_id,
            sent_id: record.sent_id,
            token_id: record.token_id,
            label,
        });
    }
    Ok(mentions)
}

/// Serializes mentions as one JSON object per line.
pub fn write_events(mentions: &[EventMention]) -> String {
    let mut out = String::new();
    for m in mentions {
        let record = EventRecord {
            doc_id: m.doc_id.clone(),
            sent_id: m.sent_id.clone(),
            token_id: m.token_id,
            label: m.label.map(|l| l.code().to_string()),
        };
        out.push_str(&serde_json::to_string(&record).expect("event record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn corpus() -> Vec<DepSentence> {
        let tokens = (1..=9)
            .map(|i| Token::new(i, &format!("w{i}"), if i == 1 { 0 } else { 1 }, "dep"))
            .collect();
        vec![DepSentence::new("d1", "s1", tokens).unwrap()]
    }

    #[test]
    fn resolves_label() {
        let m = load_events(
            r#"{"doc_id":"d1","sent_id":"s1","token_id":8,"label":"FU"}"#,
            &corpus(),
        )
        .unwrap();
        assert_eq!(m[0].token_id, 8);
        assert_eq!(m[0].label, Some(TemporalStatus::Future));
    }

    #[test]
    fn unknown_label() {
        let err = load_events(
            r#"{"doc_id":"d1","sent_id":"s1","token_id":2,"label":"XX"}"#,
            &corpus(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown label"));
    }

    #[test]
    fn dangling_reference() {
        let err = load_events(
            "\n{\"doc_id\":\"d1\",\"sent_id\":\"s9\",\"token_id\":2,\"label\":\"PA\"}",
            &corpus(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("dangling reference"));
        assert!(matches!(err, CorpusError::DanglingReference { line: 2, .. }));
    }

    #[test]
    fn token_out_of_range() {
        let err = load_events(
            r#"{"doc_id":"d1","sent_id":"s1","token_id":10,"label":"PA"}"#,
            &corpus(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::TokenOutOfRange { token_id: 10, .. }));
    }

    #[test]
    fn extra_fields_rejected_and_unlabeled_accepted() {
        let err = load_events(
            r#"{"doc_id":"d1","sent_id":"s1","token_id":1,"label":"PA","x":1}"#,
            &corpus(),
        );
        assert!(matches!(err, Err(CorpusError::EventSyntax { .. })));
        let m = load_events(r#"{"doc_id":"d1","sent_id":"s1","token_id":1}"#, &corpus()).unwrap();
        assert_eq!(m[0].label, None);
    }

    #[test]
    fn write_round_trip() {
        let c = corpus();
        let text = "{\"doc_id\":\"d1\",\"sent_id\":\"s1\",\"token_id\":3,\"label\":\"OG\"}\n";
        let m = load_events(text, &c).unwrap();
        assert_eq!(write_events(&m), text);
    }
}
