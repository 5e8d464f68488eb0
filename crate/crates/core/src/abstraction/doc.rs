use serde::{Deserialize, Serialize};

use crate::canonical::{self, CanonicalError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DocKind {
    NaturalLanguage,
    SemiStructured,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRow {
    pub name: String,
    pub description: String,
}

/// A procedure as written: free sentences or `(operation, description)`
/// rows. The document id doubles as the job id of the compiled program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcedureDoc {
    pub doc_id: String,
    pub kind: DocKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<DocRow>,
}

impl ProcedureDoc {
    pub fn natural(doc_id: impl Into<String>, sentences: Vec<String>) -> Self {
        ProcedureDoc {
            doc_id: doc_id.into(),
            kind: DocKind::NaturalLanguage,
            sentences,
            rows: Vec::new(),
        }
    }

    pub fn semi_structured(doc_id: impl Into<String>, rows: Vec<DocRow>) -> Self {
        ProcedureDoc {
            doc_id: doc_id.into(),
            kind: DocKind::SemiStructured,
            sentences: Vec::new(),
            rows,
        }
    }

    /// Plain text: one or more sentences per line.
    pub fn from_text(doc_id: impl Into<String>, text: &str) -> Self {
        let sentences = text.lines().flat_map(split_sentences).collect();
        ProcedureDoc::natural(doc_id, sentences)
    }

    pub fn to_canonical(&self) -> Result<String, CanonicalError> {
        canonical::to_versioned_string(self)
    }

    pub fn from_canonical(text: &str) -> Result<Self, CanonicalError> {
        canonical::from_versioned_str(text)
    }
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text, so
/// decimals such as `1.5` stay intact.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut begin = 0;
    for (i, &(at, c)) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let next = chars.get(i + 1).map(|&(_, n)| n);
            if next.map_or(true, char::is_whitespace) {
                let end = at + c.len_utf8();
                let s = text[begin..end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                begin = end;
            }
        }
    }
    let rest = text[begin..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_terminal_punctuation_only() {
        let s = split_sentences("Cast ingot from alloy. Mill ingot with depth 1.5 into plate.");
        assert_eq!(
            s,
            [
                "Cast ingot from alloy.",
                "Mill ingot with depth 1.5 into plate."
            ]
        );
        assert!(split_sentences("   ").is_empty());
    }
}
