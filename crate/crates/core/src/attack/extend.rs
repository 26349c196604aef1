use alloc::format;
use alloc::vec::Vec;

use super::greedy::{deepwordbug_attack, textbugger_attack};
use super::pso::pso_attack;
use super::{AttackBudget, AttackResult, Recipe};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::hashing::stream_rng;
use crate::instantiate::sample_indices;
use crate::lexicon::Lexicon;
use crate::model::{Classifier, Embedder};
use crate::pos::Tagger;
use crate::types::{derive_case, CapabilityTag, Stage, TestCase, TestSuite};

/// Shared resources the recipes draw on.
#[derive(Clone, Copy)]
pub struct AttackContext<'a> {
    pub lexicon: &'a Lexicon,
    pub tagger: &'a Tagger,
    /// Required by TextBugger only.
    pub embedder: Option<&'a dyn Embedder>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialOutput {
    pub suite: TestSuite,
    pub results: Vec<AttackResult>,
}

/// `ceil(fraction * |T_c|)` cases drawn without replacement, in suite order.
pub fn select_attack_targets(t_c: &TestSuite, fraction: Fraction) -> Vec<TestCase> {
    let n = t_c.cases.len();
    let k = fraction.ceil_mul(n).min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut rng = stream_rng(t_c.seed, &["attack-targets"]);
    sample_indices(&mut rng, n as u128, k as u128)
        .into_iter()
        .map(|i| t_c.cases[i as usize].clone())
        .collect()
}

/// One recipe against one victim; the RNG stream is keyed by all three so
/// results do not depend on scheduling.
pub fn attack_case(
    case: &TestCase,
    recipe: Recipe,
    victim: &dyn Classifier,
    budget: &AttackBudget,
    ctx: AttackContext<'_>,
    seed: u64,
) -> AttackResult {
    let mut rng = stream_rng(seed, &["attack", &case.id, recipe.as_str(), victim.id()]);
    match recipe {
        Recipe::DeepWordBug => deepwordbug_attack(case, victim, budget, &mut rng),
        Recipe::TextBugger => match ctx.embedder {
            Some(embedder) => textbugger_attack(case, victim, budget, embedder, ctx.lexicon, ctx.tagger, &mut rng),
            None => AttackResult::start(&case.id, recipe, victim.id(), &case.texts)
                .fail("no embedding endpoint configured"),
        },
        Recipe::Pso => pso_attack(case, victim, budget, ctx.lexicon, ctx.tagger, &mut rng),
    }
}

/// Builds `T_adv_rob` from attack results: one ADV_ROB child per success.
pub fn assemble_adversarial(t_c: &TestSuite, results: &[AttackResult]) -> Result<TestSuite> {
    let mut suite = TestSuite::new("adversarial", Stage::Adversarial, t_c.seed, t_c.task.clone());
    let mut children = Vec::new();
    for r in results.iter().filter(|r| r.success) {
        let parent = t_c
            .get(&r.case_id)
            .ok_or_else(|| Error::Integrity(format!("attack result for unknown case {}", r.case_id)))?;
        let summary = format!("recipe={} victim={} queries={}", r.recipe, r.victim_id, r.queries_used);
        children.push(derive_case(
            parent,
            r.adversarial_texts.clone(),
            "adversarial",
            Some(CapabilityTag::AdvRob),
            summary,
        )?);
    }
    suite.extend_unique(children);
    Ok(suite)
}

/// Samples `T_c`, runs every recipe against every victim and assembles `T_adv_rob`.
pub fn adversarial_extend(
    t_c: &TestSuite,
    victims: &[&dyn Classifier],
    recipes: &[Recipe],
    budget: &AttackBudget,
    ctx: AttackContext<'_>,
    fraction: Fraction,
) -> Result<AdversarialOutput> {
    if victims.is_empty() || recipes.is_empty() {
        return Err(Error::contract("adversarial extension needs at least one victim and one recipe"));
    }
    budget.validate()?;
    let mut results = Vec::new();
    for case in select_attack_targets(t_c, fraction) {
        for &recipe in recipes {
            for victim in victims {
                results.push(attack_case(&case, recipe, *victim, budget, ctx, t_c.seed));
            }
        }
    }
    let suite = assemble_adversarial(t_c, &results)?;
    Ok(AdversarialOutput { suite, results })
}

/// Default share of `T_c` that is attacked.
pub fn default_attack_fraction() -> Fraction {
    Fraction::new(1, 10)
}
