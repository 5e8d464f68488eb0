use crate::abstraction::DocRow;
use crate::dsl::ParamValue;

/// Surface material for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepText {
    pub verb: String,
    pub participle: String,
    pub gerund: String,
    pub machine: String,
    pub duration: u32,
    /// Rendered input mentions, properties included.
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// `(snake_case name, value, unit)`.
    pub params: Vec<(String, ParamValue, String)>,
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn words(name: &str) -> String {
    name.replace('_', " ")
}

fn with_unit(v: &ParamValue, unit: &str) -> String {
    if unit.is_empty() {
        v.to_string()
    } else {
        format!("{v} {unit}")
    }
}

/// Fills template `t` (from the bundled bank) with `s`.
pub fn render_sentence(template: &str, s: &StepText) -> String {
    let inputs = s.inputs.join(" and ");
    let outputs = s.outputs.join(" and ");
    let out = |lead: &str| {
        if s.outputs.is_empty() {
            String::new()
        } else {
            format!("{lead}{outputs}")
        }
    };
    let with = if s.params.is_empty() {
        String::new()
    } else {
        let items: Vec<String> = s
            .params
            .iter()
            .map(|(n, v, _)| format!("{} {v}", words(n)))
            .collect();
        format!(" with {}", items.join(" and "))
    };
    let set = if s.params.is_empty() {
        String::new()
    } else {
        let items: Vec<String> = s
            .params
            .iter()
            .map(|(n, v, u)| format!("{}: {}", words(n), with_unit(v, u)))
            .collect();
        format!("; set {}", items.join(", "))
    };
    template
        .replace("{Verb}", &capitalize(&s.verb))
        .replace("{verb}", &s.verb)
        .replace("{participle}", &s.participle)
        .replace("{Gerund}", &capitalize(&s.gerund))
        .replace("{machine}", &s.machine)
        .replace("{duration}", &s.duration.to_string())
        .replace("{inputs}", &inputs)
        .replace("{is}", if s.inputs.len() > 1 { "are" } else { "is" })
        .replace("{into}", &out(" into "))
        .replace("{obtain}", &out(" to obtain "))
        .replace("{yielding}", &out(", yielding "))
        .replace("{produces}", &out(" and produces "))
        .replace("{make}", &out(" to make "))
        .replace("{with}", &with)
        .replace("{set}", &set)
}

/// Route-sheet style row: the operation name plus a terse description.
pub fn render_row(s: &StepText) -> DocRow {
    let mut desc = format!("use the {}", s.machine);
    if !s.inputs.is_empty() {
        desc.push_str(&format!(" on {}", s.inputs.join(" and ")));
    }
    if !s.outputs.is_empty() {
        desc.push_str(&format!(" to make {}", s.outputs.join(" and ")));
    }
    desc.push_str(&format!(", {} min", s.duration));
    for (n, v, u) in &s.params {
        desc.push_str(&format!(", {}: {}", words(n), with_unit(v, u)));
    }
    DocRow {
        name: capitalize(&s.gerund),
        description: desc,
    }
}
