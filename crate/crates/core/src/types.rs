//! Domain types shared by every pipeline stage.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::hashing;

pub type LabelId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub id: LabelId,
    pub name: String,
}

impl Label {
    pub fn new(id: LabelId, name: impl Into<String>) -> Self {
        Label {
            id,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    SingleText,
    TextPair,
}

impl TaskKind {
    pub fn arity(self) -> usize {
        match self {
            TaskKind::SingleText => 1,
            TaskKind::TextPair => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_kind: TaskKind,
    pub labels: Vec<Label>,
    pub scenario: String,
}

impl TaskSpec {
    /// Binary sentiment analysis over the given scenario.
    pub fn sentiment(scenario: impl Into<String>) -> Self {
        TaskSpec {
            task_kind: TaskKind::SingleText,
            labels: alloc::vec![Label::new(0, "negative"), Label::new(1, "positive")],
            scenario: scenario.into(),
        }
    }

    /// Binary semantic similarity over sentence pairs.
    pub fn similarity(scenario: impl Into<String>) -> Self {
        TaskSpec {
            task_kind: TaskKind::TextPair,
            labels: alloc::vec![
                Label::new(0, "dissimilarity"),
                Label::new(1, "similarity")
            ],
            scenario: scenario.into(),
        }
    }

    pub fn arity(&self) -> usize {
        self.task_kind.arity()
    }

    pub fn label(&self, id: LabelId) -> Option<&Label> {
        self.labels.iter().find(|l| l.id == id)
    }

    pub fn has_label(&self, id: LabelId) -> bool {
        (id as usize) < self.labels.len()
    }

    /// Short human-readable name of the task, used in prompts.
    pub fn task_name(&self) -> &'static str {
        match self.task_kind {
            TaskKind::SingleText => "sentiment analysis",
            TaskKind::TextPair => "semantic text similarity",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() < 2 {
            return Err(Error::contract("a task needs at least two labels"));
        }
        for (i, label) in self.labels.iter().enumerate() {
            if label.id as usize != i {
                return Err(Error::contract(format!(
                    "label ids must be dense and ordered: position {i} holds id {}",
                    label.id
                )));
            }
            if label.name.trim().is_empty() {
                return Err(Error::contract(format!("label {i} has an empty name")));
            }
        }
        Ok(())
    }
}

/// Template strings: one for single-text tasks, two for pair tasks.
///
/// Serialized as a bare string when there is one, so template files keep the
/// `"template": "..."` shape generators return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateText(pub Vec<String>);

impl Serialize for TemplateText {
    fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        if self.0.len() == 1 {
            serializer.serialize_str(&self.0[0])
        } else {
            self.0.serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for TemplateText {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            One(String),
            Many(Vec<String>),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::One(s) => TemplateText(alloc::vec![s]),
            Repr::Many(v) => TemplateText(v),
        })
    }
}

/// A word-filling schema: template strings with `{slot}` placeholders and a
/// candidate pool per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotTemplate {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub template: TemplateText,
    pub label: LabelId,
    pub pool: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub example: String,
    pub check_label: LabelId,
    pub score: f64,
}

impl SlotTemplate {
    /// Slot names in order of first appearance across the template strings.
    pub fn slots(&self) -> Result<Vec<String>> {
        let mut out: Vec<String> = Vec::new();
        for text in &self.template.0 {
            for name in placeholders(text)? {
                if !out.iter().any(|s| s == name) {
                    out.push(name.to_string());
                }
            }
        }
        Ok(out)
    }

    /// Content-derived id used when a template arrives without one.
    pub fn derived_id(&self) -> String {
        let label = self.label.to_le_bytes();
        let mut parts: Vec<&[u8]> = alloc::vec![b"template".as_slice(), self.description.as_bytes()];
        for t in &self.template.0 {
            parts.push(t.as_bytes());
        }
        for (k, words) in &self.pool {
            parts.push(k.as_bytes());
            for w in words {
                parts.push(w.as_bytes());
            }
        }
        parts.push(&label);
        format!("tpl-{}", hashing::short_hex(parts))
    }

    pub fn ensure_id(&mut self) {
        if self.id.is_empty() {
            self.id = self.derived_id();
        }
    }

    /// Fills every placeholder from `values` (slot name -> word).
    pub fn render(&self, values: &BTreeMap<&str, &str>) -> Result<Vec<String>> {
        self.template
            .0
            .iter()
            .map(|t| fill_placeholders(t, values))
            .collect()
    }
}

/// Placeholder names in `text`, in order, duplicates included.
pub fn placeholders(text: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(Error::contract(format!(
                "unbalanced '}}' at byte {} of {text:?}",
                offset + open
            )));
        }
        let after = &rest[open + 1..];
        let close = after
            .find(['{', '}'])
            .filter(|&i| after.as_bytes()[i] == b'}')
            .ok_or_else(|| Error::contract(format!("unterminated placeholder in {text:?}")))?;
        let name = after[..close].trim();
        if name.is_empty() {
            return Err(Error::contract(format!("empty placeholder in {text:?}")));
        }
        out.push(name);
        let consumed = open + 1 + close + 1;
        offset += consumed;
        rest = &rest[consumed..];
    }
    Ok(out)
}

fn fill_placeholders(text: &str, values: &BTreeMap<&str, &str>) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::contract(format!("unterminated placeholder in {text:?}")))?;
        let name = rest[open + 1..open + close].trim();
        let value = values
            .get(name)
            .ok_or_else(|| Error::contract(format!("no value for slot {name:?}")))?;
        out.push_str(value);
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CapabilityTag {
    Original,
    Expand,
    Taxonomy,
    Fairness,
    PreRob,
    AdvRob,
}

impl CapabilityTag {
    pub const ALL: [CapabilityTag; 6] = [
        CapabilityTag::Original,
        CapabilityTag::Expand,
        CapabilityTag::Taxonomy,
        CapabilityTag::Fairness,
        CapabilityTag::PreRob,
        CapabilityTag::AdvRob,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CapabilityTag::Original => "ORIGINAL",
            CapabilityTag::Expand => "EXPAND",
            CapabilityTag::Taxonomy => "TAXONOMY",
            CapabilityTag::Fairness => "FAIRNESS",
            CapabilityTag::PreRob => "PRE_ROB",
            CapabilityTag::AdvRob => "ADV_ROB",
        }
    }
}

impl fmt::Display for CapabilityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseStatus {
    Active,
    Dropped,
    Refined,
}

/// One step of a case's history. The first entry's `parent` is a template id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub stage: String,
    pub parent: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub texts: Vec<String>,
    pub expected_label: LabelId,
    pub capability_tags: BTreeSet<CapabilityTag>,
    pub provenance: Vec<ProvenanceEntry>,
    pub status: CaseStatus,
}

impl TestCase {
    /// A freshly instantiated case rooted at `template_id`.
    pub fn original(
        texts: Vec<String>,
        expected_label: LabelId,
        template_id: &str,
        summary: impl Into<String>,
    ) -> Self {
        let mut tags = BTreeSet::new();
        tags.insert(CapabilityTag::Original);
        TestCase {
            id: hashing::case_id(&texts, expected_label),
            texts,
            expected_label,
            capability_tags: tags,
            provenance: alloc::vec![ProvenanceEntry {
                stage: "instantiate".into(),
                parent: template_id.into(),
                summary: summary.into(),
            }],
            status: CaseStatus::Active,
        }
    }

    /// Template id at the root of the provenance chain.
    pub fn template_id(&self) -> Option<&str> {
        self.provenance.first().map(|p| p.parent.as_str())
    }

    /// Id of the case this one was derived from, if any.
    pub fn parent_id(&self) -> Option<&str> {
        if self.provenance.len() > 1 {
            self.provenance.last().map(|p| p.parent.as_str())
        } else {
            None
        }
    }

    pub fn has_tag(&self, tag: CapabilityTag) -> bool {
        self.capability_tags.contains(&tag)
    }
}

/// Derives a child case from `parent`.
///
/// The child keeps the parent's expected label, gains `tag` (and loses
/// ORIGINAL, which marks underived cases), and its provenance grows by one
/// entry pointing at the parent.
pub fn derive_case(
    parent: &TestCase,
    new_texts: Vec<String>,
    stage_name: &str,
    tag: Option<CapabilityTag>,
    summary: impl Into<String>,
) -> Result<TestCase> {
    if new_texts.len() != parent.texts.len() {
        return Err(Error::contract(format!(
            "derived case has {} texts but its parent has {}",
            new_texts.len(),
            parent.texts.len()
        )));
    }
    if new_texts.iter().any(|t| t.trim().is_empty()) {
        return Err(Error::contract("derived case has an empty text"));
    }
    if new_texts == parent.texts {
        return Err(Error::contract("derived case is identical to its parent"));
    }
    let mut tags = parent.capability_tags.clone();
    if let Some(tag) = tag {
        tags.remove(&CapabilityTag::Original);
        tags.insert(tag);
    }
    let mut provenance = parent.provenance.clone();
    provenance.push(ProvenanceEntry {
        stage: stage_name.into(),
        parent: parent.id.clone(),
        summary: summary.into(),
    });
    Ok(TestCase {
        id: hashing::case_id(&new_texts, parent.expected_label),
        texts: new_texts,
        expected_label: parent.expected_label,
        capability_tags: tags,
        provenance,
        status: CaseStatus::Active,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "T_o")]
    Initial,
    #[serde(rename = "T_1")]
    Verified,
    #[serde(rename = "T_tax")]
    Taxonomy,
    #[serde(rename = "T_fair")]
    Fairness,
    #[serde(rename = "T_pre_rob")]
    PreRobustness,
    #[serde(rename = "T_c")]
    Expanded,
    #[serde(rename = "T_adv_rob")]
    Adversarial,
    #[serde(rename = "T_final")]
    Final,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Initial,
        Stage::Verified,
        Stage::Taxonomy,
        Stage::Fairness,
        Stage::PreRobustness,
        Stage::Expanded,
        Stage::Adversarial,
        Stage::Final,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Initial => "T_o",
            Stage::Verified => "T_1",
            Stage::Taxonomy => "T_tax",
            Stage::Fairness => "T_fair",
            Stage::PreRobustness => "T_pre_rob",
            Stage::Expanded => "T_c",
            Stage::Adversarial => "T_adv_rob",
            Stage::Final => "T_final",
        }
    }

    /// Position in the pipeline; the three capability expansions share a rank.
    pub fn rank(self) -> u8 {
        match self {
            Stage::Initial => 0,
            Stage::Verified => 1,
            Stage::Taxonomy | Stage::Fairness | Stage::PreRobustness => 2,
            Stage::Expanded => 3,
            Stage::Adversarial => 4,
            Stage::Final => 5,
        }
    }

    /// Whether a suite at `self` may be built from a suite at `input`.
    pub fn may_follow(self, input: Stage) -> bool {
        match self {
            Stage::Initial => false,
            Stage::Verified => input == Stage::Initial,
            Stage::Taxonomy | Stage::Fairness | Stage::PreRobustness => input == Stage::Verified,
            Stage::Expanded => input.rank() == 2 || input == Stage::Verified,
            Stage::Adversarial => input == Stage::Expanded,
            Stage::Final => input == Stage::Expanded || input == Stage::Adversarial,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestSuite {
    pub name: String,
    pub stage: Stage,
    pub cases: Vec<TestCase>,
    pub seed: u64,
    pub task: TaskSpec,
}

impl TestSuite {
    pub fn new(name: impl Into<String>, stage: Stage, seed: u64, task: TaskSpec) -> Self {
        TestSuite {
            name: name.into(),
            stage,
            cases: Vec::new(),
            seed,
            task,
        }
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Appends cases whose id is not yet present, keeping the first occurrence.
    pub fn extend_unique(&mut self, cases: impl IntoIterator<Item = TestCase>) {
        let mut seen: BTreeSet<String> = self.cases.iter().map(|c| c.id.clone()).collect();
        for case in cases {
            if seen.insert(case.id.clone()) {
                self.cases.push(case);
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    /// Checks unique ids, text arity and label range.
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        let mut seen = BTreeSet::new();
        for case in &self.cases {
            if !seen.insert(case.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate case id {}", case.id)));
            }
            if case.texts.len() != self.task.arity() {
                return Err(Error::Integrity(format!(
                    "case {} has {} texts, task expects {}",
                    case.id,
                    case.texts.len(),
                    self.task.arity()
                )));
            }
            if case.texts.iter().any(|t| t.is_empty()) {
                return Err(Error::Integrity(format!("case {} has an empty text", case.id)));
            }
            if !self.task.has_label(case.expected_label) {
                return Err(Error::Integrity(format!(
                    "case {} has label {} outside the task",
                    case.id, case.expected_label
                )));
            }
            if case.provenance.is_empty() {
                return Err(Error::Integrity(format!("case {} has no provenance", case.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Drop,
    Keep,
    Refine,
}

/// One panel member's verdict. `None` fields mean the model was unavailable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub model_id: String,
    pub predicted_label: Option<LabelId>,
    pub vote_bit: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub case_id: String,
    pub votes: Vec<VoteRecord>,
    pub consistency_score: Fraction,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_case_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}
