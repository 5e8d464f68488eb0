//! Rule-based extraction of actions and pseudo-labelled entities.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::doc::{split_sentences, DocKind, ProcedureDoc};
use super::text::{self, longest_matches, stem, NamePattern, Token};
use crate::dsl::{DslDefinition, ParamValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PseudoLabel {
    Machine,
    Duration,
    Param,
    Property,
}

/// A labelled byte span of the source sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub label: PseudoLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowRole {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMention {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub role: FlowRole,
    /// Flow unit def the surface form names (identifier or alias).
    pub flow_def: String,
    pub properties: BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedParam {
    pub name: String,
    pub value: ParamValue,
    pub unit: Option<String>,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedAction {
    pub sentence_index: usize,
    /// Text the spans refer to (the description column for table rows).
    pub sentence: String,
    pub verb_text: String,
    pub object_texts: Vec<String>,
    pub entity_spans: Vec<EntitySpan>,
    pub flows: Vec<FlowMention>,
    /// Machine id of the mentioned machine.
    pub machine: Option<String>,
    pub duration: Option<u32>,
    pub params: Vec<ExtractedParam>,
}

impl ExtractedAction {
    pub fn inputs(&self) -> impl Iterator<Item = &FlowMention> {
        self.flows.iter().filter(|f| f.role == FlowRole::Input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &FlowMention> {
        self.flows.iter().filter(|f| f.role == FlowRole::Output)
    }
}

/// Pluggable extraction seam. Implementations must be deterministic.
pub trait ExtractorAdapter {
    fn extract(&self, sentence: &str) -> Vec<ExtractedAction>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionEmpty {
    pub sentence_index: usize,
    pub sentence: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub actions: Vec<ExtractedAction>,
    pub empty: Vec<ExtractionEmpty>,
}

/// Names the extractor recognizes.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    /// Stemmed surface forms of each operation's name and aliases.
    pub op_forms: BTreeMap<String, BTreeSet<String>>,
    pub flows: Vec<NamePattern<String>>,
    pub machines: Vec<NamePattern<String>>,
}

impl Vocabulary {
    pub fn from_dsl(d: &DslDefinition) -> Self {
        let mut v = Vocabulary::default();
        for op in d.operation_defs.values() {
            v.add_op(&op.identifier, op.aliases.iter().map(String::as_str));
        }
        for def in d.flow_unit_defs.values() {
            v.add_flow(&def.identifier, &def.identifier);
            for a in &def.aliases {
                v.add_flow(a, &def.identifier);
            }
        }
        for m in &d.machine_catalog {
            v.add_machine(&m.name, &m.machine_id);
        }
        v
    }

    pub fn add_op<'a>(&mut self, op_id: &str, aliases: impl IntoIterator<Item = &'a str>) {
        let forms = self.op_forms.entry(op_id.to_string()).or_default();
        forms.insert(text::stem_phrase(op_id));
        forms.extend(aliases.into_iter().map(text::stem_phrase));
    }

    pub fn add_flow(&mut self, surface: &str, def: &str) {
        self.flows.push(NamePattern {
            tokens: text::words(surface),
            target: def.to_string(),
        });
    }

    pub fn add_machine(&mut self, name: &str, machine_id: &str) {
        self.machines.push(NamePattern {
            tokens: text::words(name),
            target: machine_id.to_string(),
        });
    }

    fn is_op_form(&self, stemmed: &str) -> bool {
        self.op_forms.values().any(|f| f.contains(stemmed))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RuleExtractor {
    pub vocab: Vocabulary,
}

impl RuleExtractor {
    pub fn new(vocab: Vocabulary) -> Self {
        RuleExtractor { vocab }
    }

    pub fn from_dsl(d: &DslDefinition) -> Self {
        RuleExtractor::new(Vocabulary::from_dsl(d))
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "on", "of", "in", "for", "to", "with",
    "using", "use", "and", "then", "it", "this", "that", "by", "at", "from", "into", "set", "next",
    "first", "finally", "after", "takes",
];
const OUTPUT_CUES: &[&str] = &[
    "into",
    "obtain",
    "obtaining",
    "yield",
    "yielding",
    "yields",
    "produce",
    "produces",
    "producing",
    "make",
    "making",
    "makes",
    "giving",
    "gives",
    "forming",
    "form",
];
const ARTICLES: &[&str] = &["a", "an", "the"];
const RESERVED_PARAMS: &[&str] = &[
    "duration", "time", "input", "inputs", "output", "outputs", "machine",
];

fn duration_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(\d+)\s*(minutes?|mins?|hours?|hrs?|h)\b").unwrap())
}

fn colon_param_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:set\s+)?([A-Za-z][A-Za-z ]*?)\s*:\s*(-?\d+(?:\.\d+)?)\s*([A-Za-z%/][A-Za-z0-9%/]*)?\s*\.?\s*$")
            .unwrap()
    })
}

fn parse_scalar(s: &str) -> ParamValue {
    match s.trim().parse::<f64>() {
        Ok(x) => ParamValue::number(x),
        Err(_) => ParamValue::text(s.trim()),
    }
}

/// Byte ranges of `( ... )` groups.
fn parentheticals(s: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, c) in s.char_indices() {
        match c {
            '(' if open.is_none() => open = Some(i),
            ')' => {
                if let Some(o) = open.take() {
                    out.push((o, i + 1));
                }
            }
            _ => {}
        }
    }
    out
}

fn inside(ranges: &[(usize, usize)], at: usize) -> bool {
    ranges.iter().any(|&(a, b)| a <= at && at < b)
}

impl ExtractorAdapter for RuleExtractor {
    fn extract(&self, sentence: &str) -> Vec<ExtractedAction> {
        let tokens = text::tokenize(sentence);
        if tokens.is_empty() {
            return Vec::new();
        }
        let parens = parentheticals(sentence);
        let mut blocked: Vec<bool> = tokens.iter().map(|t| inside(&parens, t.start)).collect();
        let mut entities = Vec::new();

        let mut machine = None;
        for (a, b, k) in longest_matches(&tokens, &self.vocab.machines, &blocked) {
            if machine.is_none() {
                machine = Some(self.vocab.machines[k].target.clone());
            }
            entities.push(span(sentence, &tokens[a..b], PseudoLabel::Machine));
            blocked[a..b].iter_mut().for_each(|x| *x = true);
        }

        let params = self.params(sentence, &tokens, &parens);
        let in_param = |t: &Token| params.iter().any(|p| p.start <= t.start && t.end <= p.end);
        for p in &params {
            entities.push(EntitySpan {
                start: p.start,
                end: p.end,
                text: sentence[p.start..p.end].to_string(),
                label: PseudoLabel::Param,
            });
        }
        for (i, t) in tokens.iter().enumerate() {
            if in_param(t) {
                blocked[i] = true;
            }
        }

        let mut duration = None;
        for m in duration_re().captures_iter(sentence) {
            let whole = m.get(0).unwrap();
            if inside(&parens, whole.start())
                || params
                    .iter()
                    .any(|p| p.start <= whole.start() && whole.end() <= p.end)
            {
                continue;
            }
            let n: u64 = m[1].parse().unwrap_or(0);
            let unit = m[2].to_lowercase();
            let minutes = if unit.starts_with('h') { n * 60 } else { n };
            if duration.is_none() {
                duration = u32::try_from(minutes).ok();
            }
            entities.push(EntitySpan {
                start: whole.start(),
                end: whole.end(),
                text: whole.as_str().to_string(),
                label: PseudoLabel::Duration,
            });
            for (i, t) in tokens.iter().enumerate() {
                if whole.start() <= t.start && t.end <= whole.end() {
                    blocked[i] = true;
                }
            }
        }

        let mut flows = Vec::new();
        let flow_hits = longest_matches(&tokens, &self.vocab.flows, &blocked);
        let mut prev_end_tok: Option<usize> = None;
        let mut from_seen_at: Option<usize> = None;
        for (a, b, k) in &flow_hits {
            let (a, b) = (*a, *b);
            let gap: Vec<&str> = tokens[prev_end_tok.unwrap_or(0)..a]
                .iter()
                .map(|t| t.lower.as_str())
                .collect();
            let lead: Vec<&str> = tokens[a.saturating_sub(3).max(prev_end_tok.unwrap_or(0))..a]
                .iter()
                .map(|t| t.lower.as_str())
                .filter(|w| !ARTICLES.contains(w))
                .collect();
            let role = if lead.iter().any(|w| OUTPUT_CUES.contains(w)) {
                FlowRole::Output
            } else if prev_end_tok.is_some()
                && gap.iter().all(|w| *w == "and" || ARTICLES.contains(w))
            {
                flows
                    .last()
                    .map_or(FlowRole::Input, |f: &FlowMention| f.role)
            } else {
                FlowRole::Input
            };
            if lead.last() == Some(&"from") && from_seen_at.is_none() {
                from_seen_at = Some(flows.len());
            }
            let (start, end) = (tokens[a].start, tokens[b - 1].end);
            let properties = self.mention_properties(sentence, end, &parens, &mut entities);
            flows.push(FlowMention {
                text: sentence[start..end].to_string(),
                start,
                end,
                role,
                flow_def: self.vocab.flows[*k].target.clone(),
                properties,
            });
            blocked[a..b].iter_mut().for_each(|x| *x = true);
            prev_end_tok = Some(b);
        }
        // "cast <ingot> from <alloy>": mentions before a from-phrase are products
        if let Some(at) = from_seen_at {
            for f in flows[..at].iter_mut() {
                f.role = FlowRole::Output;
            }
        }

        let verb = tokens
            .iter()
            .zip(&blocked)
            .find(|(t, &b)| !b && self.vocab.is_op_form(&stem(&t.lower)))
            .or_else(|| {
                tokens.iter().zip(&blocked).find(|(t, &b)| {
                    !b && t.lower.chars().all(|c| c.is_ascii_alphabetic())
                        && !STOPWORDS.contains(&t.lower.as_str())
                })
            })
            .map(|(t, _)| t.lower.clone());
        let Some(verb_text) = verb else {
            if flows.is_empty() && entities.is_empty() {
                return Vec::new();
            }
            return vec![action(
                sentence,
                String::new(),
                flows,
                entities,
                machine,
                duration,
                params,
            )];
        };
        vec![action(
            sentence, verb_text, flows, entities, machine, duration, params,
        )]
    }
}

fn action(
    sentence: &str,
    verb_text: String,
    flows: Vec<FlowMention>,
    mut entity_spans: Vec<EntitySpan>,
    machine: Option<String>,
    duration: Option<u32>,
    params: Vec<ExtractedParam>,
) -> ExtractedAction {
    entity_spans.sort_by_key(|e| (e.start, e.end));
    ExtractedAction {
        sentence_index: 0,
        sentence: sentence.to_string(),
        verb_text,
        object_texts: flows.iter().map(|f| f.text.clone()).collect(),
        entity_spans,
        flows,
        machine,
        duration,
        params,
    }
}

fn span(sentence: &str, toks: &[Token], label: PseudoLabel) -> EntitySpan {
    let (start, end) = (toks[0].start, toks[toks.len() - 1].end);
    EntitySpan {
        start,
        end,
        text: sentence[start..end].to_string(),
        label,
    }
}

impl RuleExtractor {
    /// `with <name> <value> [unit] and ...` clauses and `name: value unit`
    /// segments outside parentheses.
    fn params(&self, s: &str, tokens: &[Token], parens: &[(usize, usize)]) -> Vec<ExtractedParam> {
        let mut out: Vec<ExtractedParam> = Vec::new();
        if let Some(w) = tokens
            .iter()
            .position(|t| t.lower == "with" && !inside(parens, t.start))
        {
            let clause_end = s[tokens[w].end..]
                .find(';')
                .map_or(s.len(), |i| tokens[w].end + i);
            let clause: Vec<&Token> = tokens[w + 1..]
                .iter()
                .filter(|t| t.end <= clause_end)
                .collect();
            let mut chunk: Vec<&Token> = Vec::new();
            let mut chunks = Vec::new();
            for (i, t) in clause.iter().enumerate() {
                let comma_before = i > 0 && s[clause[i - 1].end..t.start].contains(',');
                if t.lower == "and" || comma_before {
                    if !chunk.is_empty() {
                        chunks.push(std::mem::take(&mut chunk));
                    }
                    if t.lower == "and" {
                        continue;
                    }
                }
                chunk.push(t);
            }
            if !chunk.is_empty() {
                chunks.push(chunk);
            }
            for c in chunks {
                let Some(i) = c.iter().position(|t| text::is_number(&t.lower)) else {
                    continue;
                };
                if i == 0 {
                    continue;
                }
                let name = c[..i]
                    .iter()
                    .map(|t| t.lower.as_str())
                    .collect::<Vec<_>>()
                    .join("_");
                if RESERVED_PARAMS.contains(&name.as_str()) {
                    continue;
                }
                let unit = (i + 1 < c.len()).then(|| {
                    c[i + 1..]
                        .iter()
                        .map(|t| t.text.as_str())
                        .collect::<Vec<_>>()
                        .join(" ")
                });
                out.push(ExtractedParam {
                    name,
                    value: parse_scalar(&c[i].text),
                    unit,
                    start: c[0].start,
                    end: c[c.len() - 1].end,
                });
            }
        }

        let mut seg_start = 0;
        for (i, c) in s.char_indices().chain(std::iter::once((s.len(), ';'))) {
            if (c == ',' || c == ';') && !inside(parens, i) {
                let seg = &s[seg_start..i];
                if let Some(m) = colon_param_re().captures(seg) {
                    let name = text::snake(&m[1]);
                    let overlaps = out.iter().any(|p| p.start < i && seg_start < p.end);
                    if !RESERVED_PARAMS.contains(&name.as_str()) && !name.is_empty() && !overlaps {
                        let name_m = m.get(1).unwrap();
                        let last = m.get(3).or(m.get(2)).unwrap();
                        out.push(ExtractedParam {
                            name,
                            value: parse_scalar(&m[2]),
                            unit: m.get(3).map(|u| u.as_str().to_string()),
                            start: seg_start + name_m.start(),
                            end: seg_start + last.end(),
                        });
                    }
                }
                seg_start = i + c.len_utf8();
            }
        }
        out.sort_by_key(|p| p.start);
        out
    }

    fn mention_properties(
        &self,
        s: &str,
        mention_end: usize,
        parens: &[(usize, usize)],
        entities: &mut Vec<EntitySpan>,
    ) -> BTreeMap<String, ParamValue> {
        let mut props = BTreeMap::new();
        let rest = &s[mention_end..];
        let skipped = rest.len() - rest.trim_start().len();
        let Some(&(a, b)) = parens.iter().find(|&&(a, _)| a == mention_end + skipped) else {
            return props;
        };
        for part in s[a + 1..b - 1].split(',') {
            if let Some((k, v)) = part.split_once(':') {
                let name = text::snake(k);
                if !name.is_empty() && !v.trim().is_empty() {
                    props.insert(name, parse_scalar(v));
                }
            }
        }
        entities.push(EntitySpan {
            start: a,
            end: b,
            text: s[a..b].to_string(),
            label: PseudoLabel::Property,
        });
        props
    }
}

/// Runs the adapter over every sentence (or row description) in order.
/// Rows take their verb from the name column.
pub fn extract_actions(doc: &ProcedureDoc, adapter: &dyn ExtractorAdapter) -> Extraction {
    let mut out = Extraction::default();
    match doc.kind {
        DocKind::NaturalLanguage => {
            let sentences: Vec<String> = doc
                .sentences
                .iter()
                .flat_map(|s| {
                    let parts = split_sentences(s);
                    if parts.is_empty() {
                        vec![String::new()]
                    } else {
                        parts
                    }
                })
                .collect();
            for (i, s) in sentences.iter().enumerate() {
                let acts: Vec<_> = adapter
                    .extract(s)
                    .into_iter()
                    .filter(|a| !a.verb_text.is_empty())
                    .collect();
                if acts.is_empty() {
                    out.empty.push(ExtractionEmpty {
                        sentence_index: i,
                        sentence: s.clone(),
                    });
                }
                for mut a in acts {
                    a.sentence_index = i;
                    out.actions.push(a);
                }
            }
        }
        DocKind::SemiStructured => {
            for (i, row) in doc.rows.iter().enumerate() {
                let verb = row.name.trim().to_lowercase();
                let mut acts = adapter.extract(&row.description);
                if acts.is_empty() {
                    acts.push(action(
                        &row.description,
                        String::new(),
                        vec![],
                        vec![],
                        None,
                        None,
                        vec![],
                    ));
                }
                for mut a in acts.into_iter().take(1) {
                    a.sentence_index = i;
                    if !verb.is_empty() {
                        a.verb_text = verb.clone();
                    }
                    if a.verb_text.is_empty() {
                        out.empty.push(ExtractionEmpty {
                            sentence_index: i,
                            sentence: row.description.clone(),
                        });
                    } else {
                        out.actions.push(a);
                    }
                }
            }
        }
    }
    out
}
