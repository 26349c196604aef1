//! Greedy attacks ordered by word importance.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;

use super::edit::levenshtein;
use super::transforms::char_transforms;
use super::{with_first, AttackBudget, AttackResult, ConstraintCheck, Query, QueryCounter, Recipe};
use crate::lexicon::{is_multiword, LexPos, Lexicon};
use crate::model::{cosine, Classifier, Embedder, ModelError};
use crate::pos::Tagger;
use crate::text::{delete_token, match_case, replace_token_core, token_core, tokens};
use crate::types::{LabelId, TestCase};

/// Token indices of `case.texts[0]` sorted by how much deleting the token
/// lowers P(expected label); ties keep the lower index first.
pub fn word_importance_ranking(case: &TestCase, victim: &dyn Classifier) -> Result<Vec<usize>, ModelError> {
    let mut counter = QueryCounter::new(victim, usize::MAX);
    let base = match counter.query(&case.texts)? {
        Query::Answer(r) => r.prob(case.expected_label),
        Query::Exhausted => unreachable!("unbounded counter"),
    };
    Ok(rank(&mut counter, &case.texts, case.expected_label, base)?.unwrap_or_default())
}

/// `None` when the query budget ran out first.
fn rank(
    counter: &mut QueryCounter<'_>,
    texts: &[String],
    expected: LabelId,
    base: f64,
) -> Result<Option<Vec<usize>>, ModelError> {
    let n = tokens(&texts[0]).len();
    if n <= 1 {
        return Ok(Some((0..n).collect()));
    }
    let mut scored = Vec::with_capacity(n);
    for i in 0..n {
        let reduced = delete_token(&texts[0], i).unwrap_or_default();
        match counter.query(&with_first(texts, reduced))? {
            Query::Answer(r) => scored.push((base - r.prob(expected), i)),
            Query::Exhausted => return Ok(None),
        }
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Some(scored.into_iter().map(|(_, i)| i).collect()))
}

enum Constraint<'a> {
    Levenshtein(usize),
    Cosine {
        embedder: &'a dyn Embedder,
        min: f64,
        original: Vec<f64>,
    },
}

impl Constraint<'_> {
    /// Measured value and whether `perturbed` is admissible.
    fn check(&self, original: &str, perturbed: &str) -> Result<ConstraintCheck, ModelError> {
        Ok(match self {
            Constraint::Levenshtein(max) => {
                ConstraintCheck::at_most("levenshtein", levenshtein(original, perturbed) as f64, *max as f64)
            }
            Constraint::Cosine { embedder, min, original } => {
                let v = embedder.embed(perturbed)?;
                ConstraintCheck::at_least("cosine_similarity", cosine(original, &v), *min)
            }
        })
    }
}

struct Step {
    text: String,
    prob: f64,
    pred: LabelId,
    check: ConstraintCheck,
}

fn greedy_attack<R, F>(
    case: &TestCase,
    victim: &dyn Classifier,
    budget: &AttackBudget,
    recipe: Recipe,
    constraint: Constraint<'_>,
    rng: &mut R,
    mut candidates: F,
) -> AttackResult
where
    R: Rng + ?Sized,
    F: FnMut(&str, &mut R) -> Vec<String>,
{
    let mut res = AttackResult::start(&case.id, recipe, victim.id(), &case.texts);
    let y = case.expected_label;
    let mut counter = QueryCounter::new(victim, budget.max_queries);

    macro_rules! ask {
        ($texts:expr) => {
            match counter.query($texts) {
                Ok(Query::Answer(r)) => r,
                Ok(Query::Exhausted) => {
                    res.queries_used = counter.used;
                    return res.fail("query budget exhausted");
                }
                Err(e) => {
                    res.queries_used = counter.used;
                    return res.fail(format!("victim error: {e}"));
                }
            }
        };
    }

    let base = ask!(&case.texts);
    res.victim_pred_before = Some(base.predicted_label);
    res.victim_pred_after = Some(base.predicted_label);
    if base.predicted_label != y {
        res.queries_used = counter.used;
        return res.fail("victim already mispredicts the unperturbed case");
    }
    let order = match rank(&mut counter, &case.texts, y, base.prob(y)) {
        Ok(Some(order)) => order,
        Ok(None) => {
            res.queries_used = counter.used;
            return res.fail("query budget exhausted during word ranking");
        }
        Err(e) => {
            res.queries_used = counter.used;
            return res.fail(format!("victim error: {e}"));
        }
    };

    let original = case.texts[0].clone();
    let mut current = original.clone();
    let mut current_prob = base.prob(y);
    let mut last_check: Option<ConstraintCheck> = None;
    let mut perturbed = BTreeSet::new();

    for idx in order {
        let Some(token) = tokens(&current).get(idx).map(|t| t.to_string()) else { continue };
        let core = token_core(&token).to_string();
        if !core.chars().any(char::is_alphabetic) {
            continue;
        }
        let mut best: Option<Step> = None;
        for cand in candidates(&core, rng) {
            let Some(text) = replace_token_core(&current, idx, &cand) else { continue };
            if text == current {
                continue;
            }
            let check = match constraint.check(&original, &text) {
                Ok(c) => c,
                Err(e) => {
                    res.queries_used = counter.used;
                    res.adversarial_texts = with_first(&case.texts, current);
                    return res.fail(format!("constraint model error: {e}"));
                }
            };
            if !check.passed {
                continue;
            }
            let r = ask!(&with_first(&case.texts, text.clone()));
            let step = Step { prob: r.prob(y), pred: r.predicted_label, text, check };
            let better = match &best {
                None => true,
                Some(b) => {
                    let (sf, bf) = (step.pred != y, b.pred != y);
                    (sf && !bf) || (sf == bf && step.prob < b.prob)
                }
            };
            if better {
                best = Some(step);
            }
        }
        let Some(step) = best else { continue };
        if step.prob >= current_prob && step.pred == y {
            continue;
        }
        current = step.text;
        current_prob = step.prob;
        perturbed.insert(idx);
        res.victim_pred_after = Some(step.pred);
        res.adversarial_texts = with_first(&case.texts, current.clone());
        res.perturbed_tokens = perturbed.len();
        last_check = Some(step.check);
        if step.pred != y {
            res.success = true;
            res.queries_used = counter.used;
            res.constraint_report = last_check.into_iter().collect();
            res.constraint_report.push(ConstraintCheck::at_most(
                "queries",
                counter.used as f64,
                budget.max_queries as f64,
            ));
            return res;
        }
    }
    res.queries_used = counter.used;
    res.constraint_report = last_check.into_iter().collect();
    res.fail("no admissible perturbation flipped the victim")
}

/// Character-level greedy attack under a whole-text Levenshtein bound.
pub fn deepwordbug_attack<R: Rng + ?Sized>(
    case: &TestCase,
    victim: &dyn Classifier,
    budget: &AttackBudget,
    rng: &mut R,
) -> AttackResult {
    greedy_attack(
        case,
        victim,
        budget,
        Recipe::DeepWordBug,
        Constraint::Levenshtein(budget.max_levenshtein),
        rng,
        |word, rng| char_transforms(word, rng),
    )
}

/// Up to `n` single-word lexicon synonyms of `word`, cased like it.
pub fn synonym_candidates(word: &str, lexicon: &Lexicon, tagger: &Tagger, n: usize) -> Vec<String> {
    let poses: Vec<LexPos> = match LexPos::from_tag(tagger.tag_word(word)) {
        Some(p) => alloc::vec![p],
        None => LexPos::ALL.to_vec(),
    };
    let mut out: Vec<String> = Vec::new();
    for pos in poses {
        for syn in lexicon.synonyms(word, pos) {
            if out.len() == n {
                return out;
            }
            if is_multiword(&syn) {
                continue;
            }
            let cased = match_case(word, &syn);
            if !out.contains(&cased) && cased != word {
                out.push(cased);
            }
        }
    }
    out
}

/// Character and synonym greedy attack under an embedding-similarity bound.
pub fn textbugger_attack<R: Rng + ?Sized>(
    case: &TestCase,
    victim: &dyn Classifier,
    budget: &AttackBudget,
    embedder: &dyn Embedder,
    lexicon: &Lexicon,
    tagger: &Tagger,
    rng: &mut R,
) -> AttackResult {
    let original = match embedder.embed(&case.texts[0]) {
        Ok(v) => v,
        Err(e) => {
            return AttackResult::start(&case.id, Recipe::TextBugger, victim.id(), &case.texts)
                .fail(format!("embedding failed: {e}"))
        }
    };
    let constraint = Constraint::Cosine { embedder, min: budget.min_cosine_sim, original };
    greedy_attack(case, victim, budget, Recipe::TextBugger, constraint, rng, |word, rng| {
        let mut c = char_transforms(word, rng);
        for s in synonym_candidates(word, lexicon, tagger, 5) {
            if !c.contains(&s) {
                c.push(s);
            }
        }
        c
    })
}
