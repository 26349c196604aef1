//! Differential label verification.
//!
//! Each panel model votes 1 when it predicts a case's expected label. The
//! consistency score is the exact fraction of available models voting 1, and
//! the routing rule decides what happens to the case:
//!
//! | mode        | score = 1 | 1/2 < score < 1 | score <= 1/2     |
//! |-------------|-----------|-----------------|------------------|
//! | preliminary | drop      | keep            | refine, keep x'  |
//! | final       | drop      | keep            | keep             |

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::llmgen::extract_json;
use crate::model::{ChatModel, Classifier};
use crate::types::{
    derive_case, CaseStatus, Decision, LabelId, Stage, TaskKind, TaskSpec, TestCase, TestSuite,
    VerificationRecord, VoteRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolicyMode {
    Preliminary,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerificationPolicy {
    pub mode: PolicyMode,
    /// Score refined cases again and keep them only if they route to KEEP.
    pub reverify_refined: bool,
}

impl Default for VerificationPolicy {
    fn default() -> Self {
        VerificationPolicy {
            mode: PolicyMode::Preliminary,
            reverify_refined: false,
        }
    }
}

impl VerificationPolicy {
    pub fn final_filter() -> Self {
        VerificationPolicy {
            mode: PolicyMode::Final,
            reverify_refined: false,
        }
    }
}

/// Two or more classifiers sharing the task's label set.
pub struct VotingPanel<'a> {
    models: Vec<&'a dyn Classifier>,
}

impl<'a> VotingPanel<'a> {
    pub fn new(models: Vec<&'a dyn Classifier>) -> Result<Self> {
        if models.len() < 2 {
            return Err(Error::contract(format!(
                "a voting panel needs at least 2 models, got {}",
                models.len()
            )));
        }
        Ok(VotingPanel { models })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[&'a dyn Classifier] {
        &self.models
    }
}

pub fn vote_bit(predicted: LabelId, expected: LabelId) -> u8 {
    u8::from(predicted == expected)
}

/// One model's vote; transport or model failures yield an unavailable vote.
pub fn vote(model: &dyn Classifier, case: &TestCase) -> VoteRecord {
    match model.classify(&case.texts) {
        Ok(r) => VoteRecord {
            model_id: model.id().into(),
            predicted_label: Some(r.predicted_label),
            vote_bit: Some(vote_bit(r.predicted_label, case.expected_label)),
        },
        Err(_) => VoteRecord {
            model_id: model.id().into(),
            predicted_label: None,
            vote_bit: None,
        },
    }
}

/// Sum of available vote bits over the number of available votes.
pub fn score_votes(votes: &[VoteRecord]) -> Option<Fraction> {
    let available: Vec<u8> = votes.iter().filter_map(|v| v.vote_bit).collect();
    if available.is_empty() {
        return None;
    }
    let sum: u64 = available.iter().map(|&b| u64::from(b)).sum();
    Some(Fraction::new(sum, available.len() as u64))
}

pub fn consistency_score(panel: &VotingPanel<'_>, case: &TestCase) -> Result<(Fraction, Vec<VoteRecord>)> {
    let votes: Vec<VoteRecord> = panel.models.iter().map(|m| vote(*m, case)).collect();
    let score = score_votes(&votes).ok_or_else(|| Error::Verification {
        case_id: case.id.clone(),
        message: "every panel model was unavailable".into(),
    })?;
    Ok((score, votes))
}

/// The routing rule as a pure function of the score.
pub fn route(score: Fraction, mode: PolicyMode) -> Decision {
    if score == Fraction::ONE {
        Decision::Drop
    } else if score > Fraction::HALF || mode == PolicyMode::Final {
        Decision::Keep
    } else {
        Decision::Refine
    }
}

/// Prompts asking a chat model to rewrite a case so it clearly carries its label.
pub fn build_refine_prompt(case: &TestCase, task: &TaskSpec) -> (String, String) {
    let label = task
        .label(case.expected_label)
        .map(|l| l.name.clone())
        .unwrap_or_else(|| case.expected_label.to_string());
    let system = format!(
        "You are a linguist who rewrites test sentences for {} models so that their intended label is unambiguous.",
        task.task_name()
    );
    let user = match task.task_kind {
        TaskKind::SingleText => format!(
            "Rewrite the following so it clearly expresses label {label} while staying natural; return JSON {{\"text\": ...}}\n\nLabel: {}-{label}\nText: {}",
            case.expected_label, case.texts[0]
        ),
        TaskKind::TextPair => format!(
            "Rewrite the following so it clearly expresses label {label} while staying natural; return JSON {{\"texts\": [<sentence 1>, <sentence 2>]}}\n\nLabel: {}-{label}\nSentence 1: {}\nSentence 2: {}",
            case.expected_label, case.texts[0], case.texts[1]
        ),
    };
    (system, user)
}

/// Rewritten texts from a refinement reply.
pub fn parse_refinement(reply: &str, arity: usize) -> core::result::Result<Vec<String>, String> {
    let value = extract_json(reply).map_err(|_| "no JSON in refinement reply".to_string())?;
    let obj = value.as_object().ok_or("refinement reply is not an object")?;
    let field = obj
        .get("texts")
        .or_else(|| obj.get("text"))
        .ok_or("refinement reply lacks text")?;
    let texts: Vec<String> = match field {
        Value::String(s) => alloc::vec![s.trim().to_string()],
        Value::Array(items) => items
            .iter()
            .map(|v| v.as_str().map(|s| s.trim().to_string()))
            .collect::<Option<Vec<_>>>()
            .ok_or("refinement texts must be strings")?,
        _ => return Err("refinement text must be a string".into()),
    };
    if texts.len() != arity {
        return Err(format!("refinement returned {} texts, expected {arity}", texts.len()));
    }
    if texts.iter().any(|t| t.is_empty()) {
        return Err("refinement returned an empty text".into());
    }
    Ok(texts)
}

/// Asks the chat model for x' and derives it from x with the same label.
pub fn refine_case(case: &TestCase, task: &TaskSpec, chat: &dyn ChatModel) -> Result<TestCase> {
    let (system, user) = build_refine_prompt(case, task);
    let reply = chat.chat(&system, &user).map_err(|source| Error::ModelCall {
        context: format!("refinement of case {}", case.id),
        source,
    })?;
    let texts = parse_refinement(&reply, case.texts.len()).map_err(|m| Error::Verification {
        case_id: case.id.clone(),
        message: m,
    })?;
    let mut child = derive_case(case, texts, "refine", None, "llm-refined").map_err(|e| Error::Verification {
        case_id: case.id.clone(),
        message: format!("refinement unusable: {e}"),
    })?;
    child.status = CaseStatus::Refined;
    Ok(child)
}

/// Result of verifying one case: the audit record and the case that
/// survives into the output suite, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub record: VerificationRecord,
    pub kept: Option<TestCase>,
}

pub fn verify_case(
    case: &TestCase,
    panel: &VotingPanel<'_>,
    task: &TaskSpec,
    policy: VerificationPolicy,
    refiner: Option<&dyn ChatModel>,
) -> Result<VerifyOutcome> {
    let (score, votes) = consistency_score(panel, case)?;
    let decision = route(score, policy.mode);
    let mut record = VerificationRecord {
        case_id: case.id.clone(),
        votes,
        consistency_score: score,
        decision,
        refined_case_id: None,
        diagnostic: None,
    };
    let kept = match decision {
        Decision::Drop => None,
        Decision::Keep => Some(case.clone()),
        Decision::Refine => {
            let refined = match refiner {
                Some(chat) => refine_case(case, task, chat),
                None => Err(Error::contract("no refinement model configured")),
            };
            match refined {
                Ok(x) => {
                    record.refined_case_id = Some(x.id.clone());
                    if policy.reverify_refined {
                        let (s, _) = consistency_score(panel, &x)?;
                        if route(s, PolicyMode::Preliminary) == Decision::Keep {
                            Some(x)
                        } else {
                            record.diagnostic = Some(format!("refined case scored {s} on re-verification"));
                            None
                        }
                    } else {
                        Some(x)
                    }
                }
                Err(e) => {
                    record.diagnostic = Some(format!("kept unrefined: {e}"));
                    Some(case.clone())
                }
            }
        }
    };
    Ok(VerifyOutcome { record, kept })
}

/// Builds the output suite from per-case outcomes, in input order.
pub fn assemble(
    outcomes: Vec<VerifyOutcome>,
    name: &str,
    stage: Stage,
    task: &TaskSpec,
    seed: u64,
) -> (TestSuite, Vec<VerificationRecord>) {
    let mut suite = TestSuite::new(name, stage, seed, task.clone());
    let mut records = Vec::with_capacity(outcomes.len());
    let mut kept = Vec::new();
    for o in outcomes {
        records.push(o.record);
        kept.extend(o.kept);
    }
    suite.extend_unique(kept);
    (suite, records)
}

/// Preliminary verification of `T_o` into `T_1`.
pub fn verify_suite(
    suite: &TestSuite,
    panel: &VotingPanel<'_>,
    policy: VerificationPolicy,
    refiner: Option<&dyn ChatModel>,
) -> Result<(TestSuite, Vec<VerificationRecord>)> {
    let outcomes = suite
        .cases
        .iter()
        .map(|c| verify_case(c, panel, &suite.task, policy, refiner))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(outcomes, "verified", Stage::Verified, &suite.task, suite.seed))
}

/// `T_final`: every case whose consistency score is below 1.
pub fn final_filter(
    cases: &[TestCase],
    panel: &VotingPanel<'_>,
    task: &TaskSpec,
    seed: u64,
) -> Result<(TestSuite, Vec<VerificationRecord>)> {
    let outcomes = cases
        .iter()
        .map(|c| verify_case(c, panel, task, VerificationPolicy::final_filter(), None))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(outcomes, "final", Stage::Final, task, seed))
}
