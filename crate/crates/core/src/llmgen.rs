//! Structured prompts for description and template generation, and tolerant
//! parsing of what chat models send back.
//!
//! Prompts are assembled from four parts: a background persona, definitions
//! of the terms the model must produce, task-specific guidance, and an output
//! specification. Replies are mined for the first balanced JSON value, so code
//! fences and chatty preambles do not matter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::types::{placeholders, Label, LabelId, SlotTemplate, TaskKind, TaskSpec, TemplateText};

/// Default self-scored fluency a template needs to be kept.
pub const FLUENCY_THRESHOLD: f64 = 9.5;

/// Capability hints offered to the description generator by default.
pub const DEFAULT_CAPABILITY_HINTS: [&str; 5] = [
    "event sequence",
    "negation",
    "anaphora",
    "semantic role labeling",
    "logic",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedShape {
    DescriptionList,
    TemplateJson,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub expected_shape: ExpectedShape,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationBatch {
    pub descriptions: Vec<String>,
    pub templates: Vec<SlotTemplate>,
    /// Raw JSON of each rejected item with the reason it was rejected.
    pub rejected: Vec<(String, String)>,
}

fn persona(task: &TaskSpec, extra_role: &str) -> String {
    let topic = match task.task_kind {
        TaskKind::SingleText => "emotion in text",
        TaskKind::TextPair => "meaning shared between sentences",
    };
    format!(
        "You are a linguist{extra_role} who specializes in restructuring sentences and analyzing {topic} for {} tasks.\n\
         You can devise sentence structures that are entirely different from one another; every structure you propose is distinctive and representative.\n\
         All content you produce belongs to the {} scenario.",
        task.task_name(),
        task.scenario
    )
}

fn label_phrase(task: &TaskSpec, label: &Label) -> String {
    match task.task_kind {
        TaskKind::SingleText => format!("{} sentiment", label.name),
        TaskKind::TextPair => format!("sentence pairs showing {}", label.name),
    }
}

fn label_listing(task: &TaskSpec) -> String {
    let parts: Vec<String> = task
        .labels
        .iter()
        .map(|l| format!("{}-{}", l.id, l.name))
        .collect();
    format!(
        "The current task has {} labels, namely {}.",
        task.labels.len(),
        parts.join(", ")
    )
}

/// Prompt asking for `n_descriptions` sentence-structure descriptions whose
/// sentences carry `target_label`.
pub fn build_description_prompt(
    task: &TaskSpec,
    target_label: &Label,
    n_descriptions: usize,
    capability_hints: &[&str],
) -> Result<PromptBundle> {
    if n_descriptions == 0 {
        return Err(Error::contract("n_descriptions must be at least 1"));
    }
    let phrase = label_phrase(task, target_label);
    let mut user = String::new();
    user.push_str("Read the following definitions carefully and keep them in mind.\n\n### DEFINITIONS\n\n");
    let _ = writeln!(
        user,
        "Description: the structure of a sentence. Descriptions serve the {} task; sentences written from a description should help expose weaknesses of a model.",
        task.task_name()
    );
    let _ = writeln!(user, "{}", label_listing(task));
    let _ = writeln!(
        user,
        "A sample description: \"A {phrase} sentence that answers a question of the opposite polarity with the word no.\"\n"
    );
    user.push_str("### RETURN\n\n[\"Description1\", \"Description2\", \"Description3\", ...]\n\n");
    let _ = writeln!(user, "Target label: {}-{}", target_label.id, target_label.name);
    let _ = writeln!(
        user,
        "Your task is to generate {n_descriptions} sentence structure descriptions whose sentences express {phrase}, yet are likely to be misread by a model."
    );
    if !capability_hints.is_empty() {
        let _ = writeln!(
            user,
            "Every description must involve at least one of these capabilities: {}.",
            capability_hints.join(", ")
        );
    }
    let _ = writeln!(
        user,
        "Keep in mind that every resulting sentence must express {phrase} (label {}).",
        target_label.id
    );
    let _ = writeln!(
        user,
        "Begin every description with \"A {phrase} sentence.\""
    );
    user.push_str("Reply with the JSON list only and nothing else.");
    Ok(PromptBundle {
        system: persona(task, ""),
        user,
        expected_shape: ExpectedShape::DescriptionList,
    })
}

/// Prompt asking for `templates_per_description` templates per description.
pub fn build_template_prompt(
    descriptions: &[String],
    task: &TaskSpec,
    target_label: &Label,
    templates_per_description: usize,
) -> Result<PromptBundle> {
    if descriptions.is_empty() {
        return Err(Error::contract("template prompt needs at least one description"));
    }
    if templates_per_description == 0 {
        return Err(Error::contract("templates_per_description must be at least 1"));
    }
    let phrase = label_phrase(task, target_label);
    let mut user = String::new();
    user.push_str("Read the following definitions carefully and keep them in mind.\n\n## DEFINITIONS\n");
    user.push_str("1. Description: the sentence structure of a sentence. Sentences generated from a description must follow that structure.\n");
    user.push_str("2. Template: a word-filling template derived from the sentence structure. Candidate words are marked with \"{}\" and gathered in the pool.\n");
    let _ = writeln!(user, "3. label: {}", label_listing(task));
    user.push_str("4. pool: a JSON object mapping each \"{}\" slot of the template to its list of candidate words.\n");
    user.push_str("5. Example: the complete sentence obtained by filling the template with words from the pool.\n");
    if task.task_kind == TaskKind::TextPair {
        user.push_str("6. For this task \"template\" is a list of two template strings (the sentence pair) that share one pool.\n");
    }
    user.push_str("\nHere is an example:\n\n## EXAMPLE\n\"\"\"\n");
    user.push_str("Description: A negative sentiment sentence built around a negative verb.\n");
    user.push_str("Template: {I} {neg_verb} {thing}.\n");
    user.push_str("pool: {\"I\": [\"me\", \"him\", \"she\", \"mary\", \"them\"], \"neg_verb\": [\"hate\", \"dislike\"], \"thing\": [\"basketball\", \"ball\", \"anything\"]}\n");
    user.push_str("For example: I hate everything.\n");
    user.push_str("important_keys: neg_verb\n\"\"\"\n\n");
    user.push_str("### RETURN\nReturn JSON in exactly this format:\n");
    user.push_str("{\n  \"Description\": <term>,\n  \"Templates\": [\n    {\n      \"template\": <term>, \"label\": <term>,\n      \"pool\": <term>, \"example\": <term>,\n      \"check_label\": <term>, \"score\": <term>\n    },\n    {<term>}, ...]\n}\n\n");
    let _ = writeln!(
        user,
        "Generate the templates, candidate words and labels for the descriptions below. Each sentence description requires {templates_per_description} templates."
    );
    let _ = writeln!(user, "Target label: {}-{}", target_label.id, target_label.name);
    user.push_str("\nDescriptions:\n");
    for (i, d) in descriptions.iter().enumerate() {
        let _ = writeln!(user, "{}. {}", i + 1, d);
    }
    let _ = writeln!(
        user,
        "\nAll of these descriptions express {phrase}, so every template you write must express {phrase} too."
    );
    let _ = writeln!(
        user,
        "Rate how natural and fluent each template is on a scale of 0 to 10 in \"score\"; only templates scoring {FLUENCY_THRESHOLD} or above will be used."
    );
    user.push_str("Make sure each template is able to expose defects of the model.\n");
    user.push_str("Avoid repeated words by rephrasing, and never end a template with a number.\n");
    let _ = writeln!(user, "Write templates about {}.", task.scenario);
    user.push_str("Return JSON only, in no other format.\n");
    let emphasis = format!("{phrase} (the label is {})!", target_label.id);
    let _ = write!(user, "Attention: must express {emphasis} {emphasis} {emphasis}");
    Ok(PromptBundle {
        system: persona(task, " and critic"),
        user,
        expected_shape: ExpectedShape::TemplateJson,
    })
}

/// Byte range of the first balanced JSON object or array in `raw`.
fn balanced_spans(raw: &str) -> impl Iterator<Item = (usize, usize)> + '_ {
    let bytes = raw.as_bytes();
    let mut search_from = 0;
    core::iter::from_fn(move || {
        while search_from < bytes.len() {
            let rel = raw[search_from..].find(['{', '['])?;
            let start = search_from + rel;
            search_from = start + 1;
            let mut depth = 0usize;
            let mut in_str: Option<u8> = None;
            let mut escaped = false;
            for (i, &b) in bytes.iter().enumerate().skip(start) {
                if let Some(q) = in_str {
                    if escaped {
                        escaped = false;
                    } else if b == b'\\' {
                        escaped = true;
                    } else if b == q {
                        in_str = None;
                    }
                    continue;
                }
                match b {
                    b'"' | b'\'' => in_str = Some(b),
                    b'{' | b'[' => depth += 1,
                    b'}' | b']' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some((start, i + 1));
                        }
                    }
                    _ => {}
                }
            }
        }
        None
    })
}

/// Parses a Python-style list of quoted strings such as `['a', "b"]`.
fn parse_python_string_list(s: &str) -> Option<Vec<String>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    let mut out = Vec::new();
    let mut chars = inner.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace() || *c == ',') {
            chars.next();
        }
        let Some(q) = chars.next() else { break };
        if q != '\'' && q != '"' {
            return None;
        }
        let mut item = String::new();
        let mut closed = false;
        while let Some(c) = chars.next() {
            match c {
                '\\' => item.push(chars.next()?),
                c if c == q => {
                    closed = true;
                    break;
                }
                c => item.push(c),
            }
        }
        if !closed {
            return None;
        }
        out.push(item);
    }
    Some(out)
}

/// First JSON value embedded in `raw`.
pub fn extract_json(raw: &str) -> Result<Value> {
    for (s, e) in balanced_spans(raw) {
        let candidate = &raw[s..e];
        if let Ok(v) = serde_json::from_str::<Value>(candidate) {
            return Ok(v);
        }
        if let Some(list) = parse_python_string_list(candidate) {
            return Ok(Value::Array(list.into_iter().map(Value::String).collect()));
        }
    }
    Err(Error::NoJson { raw: raw.into() })
}

fn get_ci<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a Value> {
    obj.get(key)
        .or_else(|| obj.iter().find(|(k, _)| k.eq_ignore_ascii_case(key)).map(|(_, v)| v))
}

fn label_value(v: &Value) -> Option<LabelId> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|n| LabelId::try_from(n).ok()),
        Value::String(s) => {
            let digits: String = s.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse().ok()
        }
        _ => None,
    }
}

fn score_value(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches("/10").trim().parse().ok(),
        _ => None,
    }
}

/// Converts one raw template item, or explains why it is unusable.
pub fn parse_template_item(item: &Value, description: &str) -> core::result::Result<SlotTemplate, String> {
    let obj = item.as_object().ok_or("template item is not an object")?;
    let template = match get_ci(obj, "template").ok_or("missing field template")? {
        Value::String(s) => TemplateText(alloc::vec![s.clone()]),
        Value::Array(items) => TemplateText(
            items
                .iter()
                .map(|v| v.as_str().map(ToString::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or("template list must hold strings")?,
        ),
        _ => return Err("template must be a string or list of strings".into()),
    };
    let label = label_value(get_ci(obj, "label").ok_or("missing field label")?)
        .ok_or("label is not a label id")?;
    let check_label = label_value(get_ci(obj, "check_label").ok_or("missing field check_label")?)
        .ok_or("check_label is not a label id")?;
    let score = score_value(get_ci(obj, "score").ok_or("missing field score")?)
        .ok_or("score is not a number")?;
    let example = match get_ci(obj, "example") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("example must be a string".into()),
        None => String::new(),
    };
    let pool_obj = get_ci(obj, "pool")
        .ok_or("missing field pool")?
        .as_object()
        .ok_or("pool must be an object")?;
    let mut pool = BTreeMap::new();
    for (slot, words) in pool_obj {
        let words = words
            .as_array()
            .ok_or_else(|| format!("pool entry {slot:?} is not a list"))?
            .iter()
            .map(|w| match w {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format!("pool entry {slot:?} holds a non-string"))?;
        pool.insert(slot.clone(), words);
    }
    let mut t = SlotTemplate {
        id: String::new(),
        description: description.into(),
        template,
        label,
        pool,
        example,
        check_label,
        score,
    };
    structural_violations(&t).into_iter().next().map_or(Ok(()), Err)?;
    t.ensure_id();
    Ok(t)
}

/// Checks that need no task knowledge: placeholder syntax, slot/pool
/// bijection and pool contents.
fn structural_violations(t: &SlotTemplate) -> Vec<String> {
    let mut out = Vec::new();
    if t.template.0.is_empty() || t.template.0.iter().any(|s| s.trim().is_empty()) {
        out.push("empty template string".into());
    }
    let mut used = BTreeSet::new();
    for text in &t.template.0 {
        match placeholders(text) {
            Ok(names) => used.extend(names.into_iter().map(ToString::to_string)),
            Err(e) => out.push(format!("malformed placeholder: {e}")),
        }
    }
    for slot in &used {
        if !t.pool.contains_key(slot) {
            out.push(format!("unhoused slot {slot:?}"));
        }
    }
    for (key, words) in &t.pool {
        if !used.contains(key) {
            out.push(format!("unused pool key {key:?}"));
        }
        if words.is_empty() {
            out.push(format!("empty pool {key:?}"));
        }
        if words.iter().any(|w| w.trim().is_empty()) {
            out.push(format!("empty word in pool {key:?}"));
        }
        let distinct: BTreeSet<&String> = words.iter().collect();
        if distinct.len() != words.len() {
            out.push(format!("duplicate word in pool {key:?}"));
        }
    }
    out
}

/// Extracts descriptions or templates from a chat reply.
pub fn parse_generation_response(raw: &str, shape: ExpectedShape) -> Result<GenerationBatch> {
    let value = extract_json(raw)?;
    let mut batch = GenerationBatch::default();
    match shape {
        ExpectedShape::DescriptionList => {
            let items = match &value {
                Value::Array(items) => items.clone(),
                Value::Object(obj) => match get_ci(obj, "descriptions") {
                    Some(Value::Array(items)) => items.clone(),
                    _ => return Err(Error::NoJson { raw: raw.into() }),
                },
                _ => return Err(Error::NoJson { raw: raw.into() }),
            };
            for item in items {
                match item.as_str().map(str::trim) {
                    Some(s) if !s.is_empty() => push_unique(&mut batch.descriptions, s),
                    _ => batch.rejected.push((item.to_string(), "description is not a non-empty string".into())),
                }
            }
        }
        ExpectedShape::TemplateJson => {
            let groups: Vec<&Value> = match &value {
                Value::Array(items) => items.iter().collect(),
                other => alloc::vec![other],
            };
            for group in groups {
                let Some(obj) = group.as_object() else {
                    batch.rejected.push((group.to_string(), "group is not an object".into()));
                    continue;
                };
                if let Some(items) = get_ci(obj, "templates") {
                    let description = get_ci(obj, "description")
                        .and_then(Value::as_str)
                        .unwrap_or("")
                        .trim();
                    if !description.is_empty() {
                        push_unique(&mut batch.descriptions, description);
                    }
                    let Some(items) = items.as_array() else {
                        batch.rejected.push((items.to_string(), "Templates is not a list".into()));
                        continue;
                    };
                    for item in items {
                        match parse_template_item(item, description) {
                            Ok(t) => batch.templates.push(t),
                            Err(reason) => batch.rejected.push((item.to_string(), reason)),
                        }
                    }
                } else {
                    match parse_template_item(group, "") {
                        Ok(t) => batch.templates.push(t),
                        Err(reason) => batch.rejected.push((group.to_string(), reason)),
                    }
                }
            }
        }
    }
    Ok(batch)
}

fn push_unique(list: &mut Vec<String>, item: &str) {
    if !list.iter().any(|d| d == item) {
        list.push(item.into());
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Full template check against a task. Never fails; reports every problem.
pub fn validate_template(t: &SlotTemplate, task: &TaskSpec) -> ValidationReport {
    let mut report = ValidationReport {
        violations: structural_violations(t),
        warnings: Vec::new(),
    };
    if t.template.0.len() != task.arity() {
        report.violations.push(format!(
            "template has {} strings, task expects {}",
            t.template.0.len(),
            task.arity()
        ));
    }
    if !task.has_label(t.label) {
        report.violations.push("label out of range".into());
    }
    if !task.has_label(t.check_label) {
        report.violations.push("check_label out of range".into());
    }
    if t.label != t.check_label {
        report.violations.push(format!(
            "label {} differs from check_label {}",
            t.label, t.check_label
        ));
    }
    if t.example.trim().is_empty() {
        report.violations.push("empty example".into());
    }
    if !(0.0..=10.0).contains(&t.score) {
        report.violations.push(format!("score {} outside [0, 10]", t.score));
    }
    // words of the example that neither the fixed template text nor any pool explains
    let mut known: BTreeSet<String> = BTreeSet::new();
    for text in &t.template.0 {
        let mut stripped = String::new();
        let mut depth = 0;
        for c in text.chars() {
            match c {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ if depth == 0 => stripped.push(c),
                _ => stripped.push(' '),
            }
        }
        known.extend(crate::text::word_tokens(&stripped));
    }
    for words in t.pool.values() {
        for w in words {
            known.extend(crate::text::word_tokens(w));
        }
    }
    for word in crate::text::word_tokens(&t.example) {
        if !known.contains(&word) {
            report
                .warnings
                .push(format!("example word {word:?} is not in the pool"));
        }
    }
    report
}

/// Keeps templates whose self-reported score is at least `threshold`.
pub fn filter_by_fluency(templates: &[SlotTemplate], threshold: f64) -> Vec<SlotTemplate> {
    templates
        .iter()
        .filter(|t| t.score >= threshold)
        .cloned()
        .collect()
}

/// Moves templates that fail task validation or the fluency gate into `rejected`.
pub fn finalize_batch(batch: GenerationBatch, task: &TaskSpec, threshold: f64) -> GenerationBatch {
    let mut out = GenerationBatch {
        descriptions: batch.descriptions,
        templates: Vec::new(),
        rejected: batch.rejected,
    };
    let mut seen = BTreeSet::new();
    for mut t in batch.templates {
        t.ensure_id();
        let report = validate_template(&t, task);
        let raw = serde_json::to_string(&t).unwrap_or_default();
        if !report.is_valid() {
            out.rejected.push((raw, report.violations.join("; ")));
        } else if t.score < threshold {
            out.rejected
                .push((raw, format!("fluency score {} below {threshold}", t.score)));
        } else if !seen.insert(t.id.clone()) {
            out.rejected.push((raw, "duplicate template".into()));
        } else {
            out.templates.push(t);
        }
    }
    out
}

/// Knobs for [`generate_templates`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub descriptions_per_label: usize,
    pub templates_per_description: usize,
    pub fluency_threshold: f64,
    pub capability_hints: Vec<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            descriptions_per_label: 3,
            templates_per_description: 2,
            fluency_threshold: FLUENCY_THRESHOLD,
            capability_hints: DEFAULT_CAPABILITY_HINTS.iter().map(|h| h.to_string()).collect(),
        }
    }
}

/// Runs description then template generation for every label of `task`.
///
/// Templates whose label differs from the label being generated are rejected
/// along with those that fail validation or the fluency gate.
pub fn generate_templates(
    task: &TaskSpec,
    chat: &dyn crate::model::ChatModel,
    cfg: &GenerationConfig,
) -> Result<GenerationBatch> {
    task.validate()?;
    let hints: Vec<&str> = cfg.capability_hints.iter().map(String::as_str).collect();
    let mut out = GenerationBatch::default();
    let mut seen_ids = BTreeSet::new();
    for label in &task.labels {
        let call = |prompt: &PromptBundle, what: &str| {
            chat.chat(&prompt.system, &prompt.user).map_err(|source| Error::ModelCall {
                context: format!("{what} generation for label {}", label.id),
                source,
            })
        };
        let prompt = build_description_prompt(task, label, cfg.descriptions_per_label, &hints)?;
        let reply = call(&prompt, "description")?;
        let mut described = parse_generation_response(&reply, ExpectedShape::DescriptionList)?;
        described.descriptions.truncate(cfg.descriptions_per_label);
        out.rejected.append(&mut described.rejected);
        if described.descriptions.is_empty() {
            continue;
        }
        let prompt = build_template_prompt(&described.descriptions, task, label, cfg.templates_per_description)?;
        let reply = call(&prompt, "template")?;
        let mut parsed = parse_generation_response(&reply, ExpectedShape::TemplateJson)?;
        let (matching, other): (Vec<SlotTemplate>, Vec<SlotTemplate>) =
            parsed.templates.drain(..).partition(|t| t.label == label.id);
        for t in other {
            let raw = serde_json::to_string(&t).unwrap_or_default();
            out.rejected.push((raw, format!("label {} requested but {} returned", label.id, t.label)));
        }
        parsed.templates = matching;
        let batch = finalize_batch(parsed, task, cfg.fluency_threshold);
        for d in described.descriptions.iter().chain(&batch.descriptions) {
            push_unique(&mut out.descriptions, d);
        }
        out.rejected.extend(batch.rejected);
        for t in batch.templates {
            if seen_ids.insert(t.id.clone()) {
                out.templates.push(t);
            }
        }
    }
    Ok(out)
}
