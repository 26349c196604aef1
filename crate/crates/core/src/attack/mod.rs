//! Adversarial robustness extension: greedy character/word attacks and a
//! discrete particle swarm search over synonym substitutions.

pub mod edit;
pub mod extend;
pub mod greedy;
pub mod pso;
pub mod transforms;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Classifier, ClassifyResult, ModelError};
use crate::types::LabelId;

pub use edit::levenshtein;
pub use extend::{adversarial_extend, assemble_adversarial, attack_case, select_attack_targets, AttackContext};
pub use greedy::{deepwordbug_attack, textbugger_attack, word_importance_ranking};
pub use pso::{pso_attack, pso_search, PsoOutcome};
pub use transforms::{apply_transform, char_transforms, CharTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub population: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp.
    pub v_max: f64,
    /// Per-dimension probability of a random reset after each move.
    pub mutation_rate: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            population: 20,
            iterations: 10,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            v_max: 4.0,
            mutation_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackBudget {
    pub max_levenshtein: usize,
    pub min_cosine_sim: f64,
    pub max_queries: usize,
    pub pso: PsoParams,
}

impl Default for AttackBudget {
    fn default() -> Self {
        AttackBudget {
            max_levenshtein: 30,
            min_cosine_sim: 0.8,
            max_queries: 500,
            pso: PsoParams::default(),
        }
    }
}

impl AttackBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_cosine_sim > 0.0 && self.min_cosine_sim <= 1.0) {
            return Err(Error::contract("min_cosine_sim must lie in (0, 1]"));
        }
        if self.max_queries == 0 {
            return Err(Error::contract("max_queries must be positive"));
        }
        let p = &self.pso;
        if p.population == 0 {
            return Err(Error::contract("pso population must be positive"));
        }
        if [p.inertia, p.cognitive, p.social, p.v_max].iter().any(|x| !(*x >= 0.0)) || p.cognitive + p.social <= 0.0 {
            return Err(Error::contract("pso coefficients must be non-negative with cognitive + social > 0"));
        }
        if !(0.0..=1.0).contains(&p.mutation_rate) {
            return Err(Error::contract("pso mutation_rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recipe {
    DeepWordBug,
    TextBugger,
    Pso,
}

impl Recipe {
    pub const ALL: [Recipe; 3] = [Recipe::DeepWordBug, Recipe::TextBugger, Recipe::Pso];

    pub fn as_str(self) -> &'static str {
        match self {
            Recipe::DeepWordBug => "deepwordbug",
            Recipe::TextBugger => "textbugger",
            Recipe::Pso => "pso",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Recipe {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::contract(alloc::format!("unknown attack recipe {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl ConstraintCheck {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        ConstraintCheck { name: name.to_string(), value, limit, passed: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        ConstraintCheck { name: name.to_string(), value, limit, passed: value >= limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub case_id: String,
    pub recipe: Recipe,
    pub victim_id: String,
    pub success: bool,
    pub original_texts: Vec<String>,
    pub adversarial_texts: Vec<String>,
    pub queries_used: usize,
    pub victim_pred_before: Option<LabelId>,
    pub victim_pred_after: Option<LabelId>,
    pub perturbed_tokens: usize,
    pub constraint_report: Vec<ConstraintCheck>,
    pub diagnostic: Option<String>,
}

impl AttackResult {
    pub(crate) fn start(case_id: &str, recipe: Recipe, victim_id: &str, texts: &[String]) -> Self {
        AttackResult {
            case_id: case_id.to_string(),
            recipe,
            victim_id: victim_id.to_string(),
            success: false,
            original_texts: texts.to_vec(),
            adversarial_texts: texts.to_vec(),
            queries_used: 0,
            victim_pred_before: None,
            victim_pred_after: None,
            perturbed_tokens: 0,
            constraint_report: Vec::new(),
            diagnostic: None,
        }
    }

    pub(crate) fn fail(mut self, why: impl Into<String>) -> Self {
        self.success = false;
        self.diagnostic = Some(why.into());
        self
    }
}

/// Victim wrapper that counts queries and refuses to exceed the budget.
pub(crate) struct QueryCounter<'a> {
    victim: &'a dyn Classifier,
    pub used: usize,
    max: usize,
}

pub(crate) enum Query {
    Answer(ClassifyResult),
    Exhausted,
}

impl<'a> QueryCounter<'a> {
    pub fn new(victim: &'a dyn Classifier, max: usize) -> Self {
        QueryCounter { victim, used: 0, max }
    }

    pub fn query(&mut self, texts: &[String]) -> core::result::Result<Query, ModelError> {
        if self.used >= self.max {
            return Ok(Query::Exhausted);
        }
        self.used += 1;
        self.victim.classify(texts).map(Query::Answer)
    }
}

/// `texts` with the first entry replaced.
pub(crate) fn with_first(texts: &[String], first: String) -> Vec<String> {
    let mut out = texts.to_vec();
    out[0] = first;
    out
}
