use std::fmt::Write as _;

use super::{CorpusError, DepSentence, Token};

struct Pending {
    tokens: Vec<Token>,
    sent_id: Option<String>,
    first_line: usize,
}

/// Parses basic-dependency CoNLL-U.
///
/// Multiword-token ranges (`3-4`) and empty nodes (`3.1`) are skipped. `# sent_id`
/// and `# newdoc id` comments name sentences and documents; when absent they are
/// numbered from 1.
pub fn parse_conllu(text: &str) -> Result<Vec<DepSentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut doc_counter = 0usize;
    let mut doc_id: Option<String> = None;
    let mut pending = Pending {
        tokens: Vec::new(),
        sent_id: None,
        first_line: 0,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut pending, &mut sentences, &doc_id, doc_counter)?;
            continue;
        }
        if pending.first_line == 0 {
            pending.first_line = line_no;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("newdoc") {
                doc_counter += 1;
                doc_id = metadata_value(rest, "id");
            } else if let Some(value) = metadata_value(comment, "sent_id") {
                pending.sent_id = Some(value);
            }
            continue;
        }
        if let Some(token) = parse_token_line(line, line_no)? {
            pending.tokens.push(token);
        }
    }
    flush(&mut pending, &mut sentences, &doc_id, doc_counter)?;
    Ok(sentences)
}

fn metadata_value(comment: &str, key: &str) -> Option<String> {
    let rest = comment.trim().strip_prefix(key)?;
    let value = rest.trim().strip_prefix('=')?.trim();
    (!value.is_empty()).then(|| value.to_string())
}

fn flush(
    pending: &mut Pending,
    out: &mut Vec<DepSentence>,
    doc_id: &Option<String>,
    doc_counter: usize,
) -> Result<(), CorpusError> {
    if pending.tokens.is_empty() {
        pending.sent_id = None;
        pending.first_line = 0;
        return Ok(());
    }
    let seq = out.len() + 1;
    let sent_id = pending.sent_id.take().unwrap_or_else(|| seq.to_string());
    let doc = doc_id
        .clone()
        .unwrap_or_else(|| doc_counter.max(1).to_string());
    let locator = format!(
        "sentence {seq} (sent_id {sent_id:?}, starting at line {})",
        pending.first_line
    );
    let tokens = std::mem::take(&mut pending.tokens);
    out.push(DepSentence::with_locator(&doc, &sent_id, tokens, &locator)?);
    pending.first_line = 0;
    Ok(())
}

fn optional(field: &str) -> Option<String> {
    (field != "_").then(|| field.to_string())
}

fn parse_token_line(line: &str, line_no: usize) -> Result<Option<Token>, CorpusError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(CorpusError::ColumnCount {
            line: line_no,
            found: cols.len(),
        });
    }
    if cols[0].contains('-') || cols[0].contains('.') {
        return Ok(None);
    }
    let id: usize = cols[0].parse().map_err(|_| CorpusError::BadField {
        line: line_no,
        column: "ID",
        value: cols[0].to_string(),
    })?;
    let head: usize = cols[6].parse().map_err(|_| CorpusError::BadField {
        line: line_no,
        column: "HEAD",
        value: cols[6].to_string(),
    })?;
    if cols[7].is_empty() || cols[7] == "_" {
        return Err(CorpusError::BadField {
            line: line_no,
            column: "DEPREL",
            value: cols[7].to_string(),
        });
    }
    // A DEPS column restating the basic head is fine; several heads make a graph.
    let deps = cols[8];
    if deps != "_" && deps.contains('|') {
        return Err(CorpusError::EnhancedGraph {
            line: line_no,
            deps: deps.to_string(),
        });
    }
    Ok(Some(Token {
        id,
        form: cols[1].to_string(),
        lemma: optional(cols[2]),
        upos: optional(cols[3]),
        head,
        deprel: cols[7].to_string(),
    }))
}

/// Serializes sentences in the format read by [`parse_conllu`].
pub fn write_conllu(sentences: &[DepSentence]) -> String {
    let mut out = String::new();
    let mut current_doc: Option<&str> = None;
    for s in sentences {
        if current_doc != Some(s.doc_id()) {
            let _ = writeln!(out, "# newdoc id = {}", s.doc_id());
            current_doc = Some(s.doc_id());
        }
        let _ = writeln!(out, "# sent_id = {}", s.sent_id());
        let _ = writeln!(out, "# text = {}", s.forms().collect::<Vec<_>>().join(" "));
        for t in s.tokens() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.id,
                t.form,
                t.lemma.as_deref().unwrap_or("_"),
                t.upos.as_deref().unwrap_or("_"),
                t.head,
                t.deprel
            );
        }
        out.push('\n');
    }
    out
}
