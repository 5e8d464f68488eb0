//! Tokenization, stemming and name matching shared by the extractor and
//! the matcher.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub lower: String,
    pub start: usize,
    pub end: usize,
}

fn token_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z0-9]+(?:[.\-'/][A-Za-z0-9]+)*").unwrap())
}

pub fn tokenize(s: &str) -> Vec<Token> {
    token_re()
        .find_iter(s)
        .map(|m| Token {
            text: m.as_str().to_string(),
            lower: m.as_str().to_lowercase(),
            start: m.start(),
            end: m.end(),
        })
        .collect()
}

pub fn words(s: &str) -> Vec<String> {
    tokenize(s).into_iter().map(|t| t.lower).collect()
}

/// Light suffix stripping: `-ing`, `-ed`, `-es`, `-s`, then a trailing `e`,
/// each only when at least three characters remain.
pub fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    let n = w.chars().count();
    let mut s: &str = &w;
    for suffix in ["ing", "ed", "es", "s"] {
        if s.ends_with(suffix) && n >= suffix.len() + 3 && !(suffix == "s" && s.ends_with("ss")) {
            s = &s[..s.len() - suffix.len()];
            break;
        }
    }
    let mut out = s.to_string();
    if out.len() >= 4 && out.ends_with('e') {
        out.pop();
    }
    out
}

pub fn stem_phrase(s: &str) -> String {
    words(s)
        .iter()
        .map(|w| stem(w))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn stem_set<'a>(texts: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    texts
        .into_iter()
        .flat_map(words)
        .map(|w| stem(&w))
        .collect()
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// `"Feed Rate"` → `"feed_rate"`.
pub fn snake(s: &str) -> String {
    words(s).join("_")
}

pub fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
        && s.chars()
            .next()
            .is_some_and(|c| c.is_ascii_digit() || c == '-')
}

/// A name compiled for token-wise matching.
#[derive(Clone, Debug)]
pub struct NamePattern<T> {
    pub tokens: Vec<String>,
    pub target: T,
}

/// Finds non-overlapping longest matches of `patterns` in `tokens`, left to
/// right, skipping positions where `blocked` is set. Returns
/// `(first token, end token exclusive, pattern index)`.
pub fn longest_matches<T>(
    tokens: &[Token],
    patterns: &[NamePattern<T>],
    blocked: &[bool],
) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, usize)> = None;
        if !blocked[i] {
            for (k, p) in patterns.iter().enumerate() {
                let len = p.tokens.len();
                if len == 0 || i + len > tokens.len() || best.is_some_and(|(l, _)| l >= len) {
                    continue;
                }
                if (0..len).all(|o| !blocked[i + o] && tokens[i + o].lower == p.tokens[o]) {
                    best = Some((len, k));
                }
            }
        }
        match best {
            Some((len, k)) => {
                out.push((i, i + len, k));
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_collapse_inflections() {
        for (a, b) in [
            ("mill", "Milling"),
            ("milled", "mill"),
            ("hone", "honing"),
            ("polishes", "polish"),
            ("assemble", "assembling"),
            ("engraved", "Engraving"),
            ("deburr", "deburring"),
            ("bore", "bored"),
        ] {
            assert_eq!(stem(a), stem(b), "{a} vs {b}");
        }
        assert_eq!(stem("press"), "press");
        assert_ne!(stem("mill"), stem("drill"));
    }

    #[test]
    fn tokens_keep_decimals_and_units() {
        let t = words("feed 1.5 mm/min, CNC-Lathe-A.");
        assert_eq!(t, ["feed", "1.5", "mm/min", "cnc-lathe-a"]);
        assert_eq!(snake("Feed  Rate"), "feed_rate");
    }

    #[test]
    fn longest_match_wins() {
        let toks = tokenize("use the vertical mill and the mill");
        let pats = vec![
            NamePattern {
                tokens: words("mill"),
                target: 0,
            },
            NamePattern {
                tokens: words("vertical mill"),
                target: 1,
            },
        ];
        let blocked = vec![false; toks.len()];
        let m = longest_matches(&toks, &pats, &blocked);
        assert_eq!(m, [(2, 4, 1), (6, 7, 0)]);
    }
}
