//! Failure-rate evaluation of a suite against a subject model, and report rendering.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::model::{ChatModel, Classifier};
use crate::types::{CapabilityTag, LabelId, TaskKind, TaskSpec, TestCase, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParsedAnswer {
    Label(LabelId),
    Unparseable,
}

impl ParsedAnswer {
    pub fn label(self) -> Option<LabelId> {
        match self {
            ParsedAnswer::Label(l) => Some(l),
            ParsedAnswer::Unparseable => None,
        }
    }
}

/// The answer format line shown to chat subjects, e.g. `Ans=negative-0/positive-1`.
pub fn answer_format(task: &TaskSpec) -> String {
    let options: Vec<String> = task.labels.iter().map(|l| format!("{}-{}", l.name, l.id)).collect();
    format!("Ans={}", options.join("/"))
}

/// Finds the first `ans = <label>` in `reply` (ASCII case-insensitive).
///
/// The value may be a label name (longest name wins when several share a
/// prefix) or a label id; after a name, a `-<id>` suffix is ignored.
pub fn parse_llm_answer(reply: &str, task: &TaskSpec) -> ParsedAnswer {
    let lower = reply.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut names: Vec<(String, LabelId)> = task.labels.iter().map(|l| (l.name.to_ascii_lowercase(), l.id)).collect();
    names.sort_by(|a, b| b.0.len().cmp(&a.0.len()));

    let mut from = 0;
    while let Some(found) = lower[from..].find("ans") {
        let at = from + found;
        from = at + 3;
        if at > 0 && bytes[at - 1].is_ascii_alphanumeric() {
            continue;
        }
        let mut i = at + 3;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() || bytes[i] != b'=' {
            continue;
        }
        i += 1;
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || matches!(bytes[i], b'"' | b'\'' | b'[' | b'(' | b'*')) {
            i += 1;
        }
        let rest = &lower[i..];
        if let Some((_, id)) = names.iter().find(|(n, _)| {
            !n.is_empty()
                && rest.starts_with(n.as_str())
                && !rest.as_bytes().get(n.len()).is_some_and(|b| b.is_ascii_alphabetic())
        }) {
            return ParsedAnswer::Label(*id);
        }
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        if !digits.is_empty() {
            if let Ok(id) = digits.parse::<LabelId>() {
                if task.has_label(id) {
                    return ParsedAnswer::Label(id);
                }
            }
        }
    }
    ParsedAnswer::Unparseable
}

/// System and user prompt asking a chat subject to label one case.
pub fn build_answer_prompt(case: &TestCase, task: &TaskSpec) -> (String, String) {
    let system = "You are a careful annotator. Answer only in the requested format.".to_string();
    let names: Vec<&str> = task.labels.iter().map(|l| l.name.as_str()).collect();
    let user = match task.task_kind {
        TaskKind::SingleText => format!(
            "Decide which label fits the text in square brackets: {}.\n[{}]\nReply exactly as: {}",
            names.join(" or "),
            case.texts[0],
            answer_format(task)
        ),
        TaskKind::TextPair => format!(
            "Decide whether these two sentences carry the same meaning ({}).\nSentence 1: {}\nSentence 2: {}\nReply exactly as: {}",
            names.join(" or "),
            case.texts[0],
            case.texts.get(1).map(String::as_str).unwrap_or(""),
            answer_format(task)
        ),
    };
    (system, user)
}

/// The model under evaluation.
#[derive(Clone, Copy)]
pub enum Subject<'a> {
    Classify(&'a dyn Classifier),
    Chat(&'a dyn ChatModel),
}

impl Subject<'_> {
    pub fn id(&self) -> &str {
        match self {
            Subject::Classify(c) => c.id(),
            Subject::Chat(c) => c.id(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub case_id: String,
    pub expected_label: LabelId,
    pub predicted_label: Option<LabelId>,
    pub failed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Queries the subject once. Transport errors and unparseable replies are
/// recorded as failures rather than aborting the evaluation.
pub fn evaluate_case(case: &TestCase, subject: Subject<'_>, task: &TaskSpec) -> CaseOutcome {
    let mut out = CaseOutcome {
        case_id: case.id.clone(),
        expected_label: case.expected_label,
        predicted_label: None,
        failed: true,
        reply: None,
        error: None,
    };
    match subject {
        Subject::Classify(c) => match c.classify(&case.texts) {
            Ok(r) => out.predicted_label = Some(r.predicted_label),
            Err(e) => out.error = Some(e.to_string()),
        },
        Subject::Chat(c) => {
            let (system, user) = build_answer_prompt(case, task);
            match c.chat(&system, &user) {
                Ok(reply) => {
                    out.predicted_label = parse_llm_answer(&reply, task).label();
                    if out.predicted_label.is_none() {
                        out.error = Some("unparseable answer".into());
                    }
                    out.reply = Some(reply);
                }
                Err(e) => out.error = Some(e.to_string()),
            }
        }
    }
    out.failed = out.predicted_label != Some(case.expected_label);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub total: usize,
    pub failures: usize,
    pub failure_rate: Fraction,
}

impl Bucket {
    fn new(total: usize, failures: usize) -> Self {
        Bucket { total, failures, failure_rate: Fraction::new(failures as u64, total.max(1) as u64) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subject_model_id: String,
    pub suite_name: String,
    pub total: usize,
    pub failures: usize,
    pub failure_rate: Fraction,
    /// Failures among them that came from unparseable or missing answers.
    pub unanswered: usize,
    pub by_capability: BTreeMap<String, Bucket>,
    pub by_template: BTreeMap<String, Fraction>,
}

/// Aggregates outcomes (in suite order) into a report.
pub fn build_report(suite: &TestSuite, subject_id: &str, outcomes: &[CaseOutcome]) -> Result<EvalReport> {
    if suite.cases.is_empty() {
        return Err(Error::contract("cannot evaluate an empty suite"));
    }
    if outcomes.len() != suite.cases.len() {
        return Err(Error::contract("one outcome per case is required"));
    }
    let mut caps: BTreeMap<CapabilityTag, (usize, usize)> = BTreeMap::new();
    let mut templates: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut failures = 0;
    let mut unanswered = 0;
    for (case, o) in suite.cases.iter().zip(outcomes) {
        if o.case_id != case.id {
            return Err(Error::contract(format!("outcome for {} out of order", o.case_id)));
        }
        let f = usize::from(o.failed);
        failures += f;
        unanswered += usize::from(o.predicted_label.is_none());
        for tag in &case.capability_tags {
            let e = caps.entry(*tag).or_default();
            e.0 += 1;
            e.1 += f;
        }
        let t = templates.entry(case.template_id().unwrap_or("unknown").to_string()).or_default();
        t.0 += 1;
        t.1 += f;
    }
    let total = suite.cases.len();
    Ok(EvalReport {
        subject_model_id: subject_id.to_string(),
        suite_name: suite.name.clone(),
        total,
        failures,
        failure_rate: Fraction::new(failures as u64, total as u64),
        unanswered,
        by_capability: caps
            .into_iter()
            .map(|(tag, (n, f))| (tag.as_str().to_string(), Bucket::new(n, f)))
            .collect(),
        by_template: templates
            .into_iter()
            .map(|(t, (n, f))| (t, Fraction::new(f as u64, n as u64)))
            .collect(),
    })
}

/// Sequential evaluation of every case.
pub fn evaluate_suite(suite: &TestSuite, subject: Subject<'_>) -> Result<(EvalReport, Vec<CaseOutcome>)> {
    if suite.cases.is_empty() {
        return Err(Error::contract("cannot evaluate an empty suite"));
    }
    let outcomes: Vec<CaseOutcome> = suite.cases.iter().map(|c| evaluate_case(c, subject, &suite.task)).collect();
    Ok((build_report(suite, subject.id(), &outcomes)?, outcomes))
}

/// Suites as rows, subjects as columns, failure rates in cells; the last row
/// is the unweighted mean of each column.
pub fn render_markdown(reports: &[EvalReport]) -> String {
    let mut suites: Vec<&str> = Vec::new();
    let mut subjects: Vec<&str> = Vec::new();
    for r in reports {
        if !suites.contains(&r.suite_name.as_str()) {
            suites.push(&r.suite_name);
        }
        if !subjects.contains(&r.subject_model_id.as_str()) {
            subjects.push(&r.subject_model_id);
        }
    }
    let cell = |suite: &str, subject: &str| {
        reports
            .iter()
            .find(|r| r.suite_name == suite && r.subject_model_id == subject)
    };
    let mut out = String::new();
    let _ = write!(out, "| suite |");
    for s in &subjects {
        let _ = write!(out, " {s} |");
    }
    out.push_str("\n|---|");
    for _ in &subjects {
        out.push_str("---|");
    }
    out.push('\n');
    for suite in &suites {
        let _ = write!(out, "| {suite} |");
        for subject in &subjects {
            match cell(suite, subject) {
                Some(r) => {
                    let _ = write!(out, " {} |", r.failure_rate.percent());
                }
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out.push_str("| average (unweighted) |");
    for subject in &subjects {
        let rates: Vec<Fraction> = suites.iter().filter_map(|s| cell(s, subject)).map(|r| r.failure_rate).collect();
        let mean = unweighted_mean(&rates);
        let _ = write!(out, " {} |", mean.map(|m| m.percent()).unwrap_or_else(|| "-".into()));
    }
    out.push('\n');
    out
}

/// Exact arithmetic mean of rates.
pub fn unweighted_mean(rates: &[Fraction]) -> Option<Fraction> {
    if rates.is_empty() {
        return None;
    }
    let mut acc = num_rational::Ratio::<u64>::new(0, 1);
    for r in rates {
        acc += num_rational::Ratio::new(r.numer(), r.denom());
    }
    let mean = acc / num_rational::Ratio::from_integer(rates.len() as u64);
    Some(Fraction::new(*mean.numer(), *mean.denom()))
}

/// One row per capability bucket, then a `TOTAL` row.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("subject,suite,bucket,total,failures,failure_rate\n");
    let mut row = |bucket: &str, total: usize, failures: usize, rate: &Fraction| {
        let _ = writeln!(
            out,
            "{},{},{bucket},{total},{failures},{}",
            csv_field(&report.subject_model_id),
            csv_field(&report.suite_name),
            rate.percent()
        );
    };
    for (tag, b) in &report.by_capability {
        row(tag, b.total, b.failures, &b.failure_rate);
    }
    row("TOTAL", report.total, report.failures, &report.failure_rate);
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pretty JSON of the full report, newline-terminated.
pub fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn answer_formats() {
        let sa = TaskSpec::sentiment("reviews");
        let sts = TaskSpec::similarity("pairs");
        assert_eq!(parse_llm_answer("Ans=negative-0", &sa), ParsedAnswer::Label(0));
        assert_eq!(parse_llm_answer("ANS = positive-1.", &sa), ParsedAnswer::Label(1));
        assert_eq!(parse_llm_answer("I think it's positive", &sa), ParsedAnswer::Unparseable);
        assert_eq!(parse_llm_answer("Ans=similarity-1", &sts), ParsedAnswer::Label(1));
        assert_eq!(parse_llm_answer("Ans=dissimilarity-0", &sts), ParsedAnswer::Label(0));
        assert_eq!(parse_llm_answer("trans=1 then Ans=0", &sa), ParsedAnswer::Label(0));
        assert_eq!(answer_format(&sa), "Ans=negative-0/positive-1");
    }

    #[test]
    fn report_arithmetic() {
        let mut suite = TestSuite::new("s", crate::types::Stage::Final, 42, TaskSpec::sentiment("x"));
        let cases: Vec<TestCase> =
            (0..10).map(|i| TestCase::original(vec![format!("case {i}")], 0, "tpl", "")).collect();
        suite.extend_unique(cases);
        let outcomes: Vec<CaseOutcome> = suite
            .cases
            .iter()
            .enumerate()
            .map(|(i, c)| CaseOutcome {
                case_id: c.id.clone(),
                expected_label: 0,
                predicted_label: Some(u32::from(i < 3)),
                failed: i < 3,
                reply: None,
                error: None,
            })
            .collect();
        let r = build_report(&suite, "m", &outcomes).unwrap();
        assert_eq!(r.failure_rate, Fraction::new(3, 10));
        assert_eq!(r.failure_rate.percent(), "30.00%");
        assert_eq!(render_csv(&r).lines().count(), 3);
        assert_eq!(render_json(&r), render_json(&r));
        assert!(render_markdown(&[r]).contains("30.00%"));
    }
}
