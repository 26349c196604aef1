//! Discrete particle swarm search over per-position substitution choices.
//!
//! A particle is a vector of option indices, one per perturbable position
//! (index 0 keeps the original word). Each dimension carries a real
//! velocity that grows while the particle disagrees with its personal or
//! the global best; the logistic of the velocity is the probability of
//! moving that dimension, and a move copies the value from the global best
//! with probability `social / (cognitive + social)` and from the personal
//! best otherwise. A small random reset keeps the swarm from collapsing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::greedy::synonym_candidates;
use super::{with_first, AttackBudget, AttackResult, ConstraintCheck, PsoParams, Query, QueryCounter, Recipe};
use crate::lexicon::Lexicon;
use crate::model::{Classifier, ModelError};
use crate::pos::Tagger;
use crate::text::{replace_token_core, token_core, tokens};
use crate::types::{LabelId, TestCase};

/// Substitution options considered per position, besides the original word.
pub const MAX_OPTIONS_PER_POSITION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    /// Search stops as soon as a successful point is found.
    pub success: bool,
}

impl Evaluation {
    fn beats(&self, other: &Evaluation) -> bool {
        (self.success && !other.success) || (self.success == other.success && self.fitness > other.fitness)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best: Vec<usize>,
    /// `None` only when no point could be evaluated.
    pub best_eval: Option<Evaluation>,
    /// Distinct points evaluated.
    pub evaluations: usize,
    pub exhausted: bool,
}

struct Memo<F> {
    seen: BTreeMap<Vec<usize>, Evaluation>,
    max: usize,
    fitness: F,
}

impl<F, E> Memo<F>
where
    F: FnMut(&[usize]) -> Result<Evaluation, E>,
{
    fn eval(&mut self, x: &[usize]) -> Result<Option<Evaluation>, E> {
        if let Some(e) = self.seen.get(x) {
            return Ok(Some(*e));
        }
        if self.seen.len() >= self.max {
            return Ok(None);
        }
        let e = (self.fitness)(x)?;
        self.seen.insert(x.to_vec(), e);
        Ok(Some(e))
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-v))
}

/// Maximizes `fitness` over the grid `0..dims[0] × 0..dims[1] × ...`.
///
/// Particle 0 starts at the all-zero point; the rest start uniformly at
/// random. At most `max_evals` distinct points are evaluated; repeated
/// points are served from a cache.
pub fn pso_search<R, E, F>(
    dims: &[usize],
    params: &PsoParams,
    max_evals: usize,
    rng: &mut R,
    fitness: F,
) -> Result<PsoOutcome, E>
where
    R: Rng + ?Sized,
    F: FnMut(&[usize]) -> Result<Evaluation, E>,
{
    let mut memo = Memo { seen: BTreeMap::new(), max: max_evals, fitness };
    let zero = vec![0usize; dims.len()];
    let mut outcome = PsoOutcome { best: zero.clone(), best_eval: None, evaluations: 0, exhausted: false };
    if dims.iter().any(|&d| d == 0) {
        return Ok(outcome);
    }

    let population = params.population.max(1);
    let mut positions: Vec<Vec<usize>> = Vec::with_capacity(population);
    positions.push(zero);
    for _ in 1..population {
        positions.push(dims.iter().map(|&d| rng.gen_range(0..d)).collect());
    }
    let mut velocities = vec![vec![0.0f64; dims.len()]; population];
    let mut pbest: Vec<(Vec<usize>, Evaluation)> = Vec::with_capacity(population);

    macro_rules! finish {
        ($exhausted:expr) => {{
            outcome.evaluations = memo.seen.len();
            outcome.exhausted = $exhausted;
            return Ok(outcome);
        }};
    }
    macro_rules! offer {
        ($x:expr, $e:expr) => {
            if outcome.best_eval.map_or(true, |b| $e.beats(&b)) {
                outcome.best = $x.clone();
                outcome.best_eval = Some($e);
            }
            if $e.success {
                finish!(false);
            }
        };
    }

    for x in &positions {
        let Some(e) = memo.eval(x)? else { finish!(true) };
        pbest.push((x.clone(), e));
        offer!(x, e);
    }

    let pull = params.social / (params.cognitive + params.social);
    for _ in 0..params.iterations {
        for p in 0..population {
            let gbest = outcome.best.clone();
            for d in 0..dims.len() {
                let x = positions[p][d];
                let to_personal = f64::from(u8::from(x != pbest[p].0[d]));
                let to_global = f64::from(u8::from(x != gbest[d]));
                let v = params.inertia * velocities[p][d]
                    + params.cognitive * rng.gen::<f64>() * to_personal
                    + params.social * rng.gen::<f64>() * to_global;
                let v = v.clamp(-params.v_max, params.v_max);
                velocities[p][d] = v;
                if (to_personal > 0.0 || to_global > 0.0) && rng.gen::<f64>() < logistic(v) {
                    positions[p][d] = if rng.gen::<f64>() < pull { gbest[d] } else { pbest[p].0[d] };
                }
                if rng.gen::<f64>() < params.mutation_rate {
                    positions[p][d] = rng.gen_range(0..dims[d]);
                }
            }
            // Revisits cost nothing but teach nothing; nudge off known points.
            for _ in 0..2 * dims.len() {
                if !memo.seen.contains_key(&positions[p]) {
                    break;
                }
                let d = rng.gen_range(0..dims.len());
                positions[p][d] = rng.gen_range(0..dims[d]);
            }
            let x = positions[p].clone();
            let Some(e) = memo.eval(&x)? else { finish!(true) };
            if e.beats(&pbest[p].1) {
                pbest[p] = (x.clone(), e);
            }
            offer!(x, e);
        }
    }
    finish!(false)
}

/// Synonym-substitution attack searched by [`pso_search`].
pub fn pso_attack<R: Rng + ?Sized>(
    case: &TestCase,
    victim: &dyn Classifier,
    budget: &AttackBudget,
    lexicon: &Lexicon,
    tagger: &Tagger,
    rng: &mut R,
) -> AttackResult {
    let mut res = AttackResult::start(&case.id, Recipe::Pso, victim.id(), &case.texts);
    let y = case.expected_label;
    let text = case.texts[0].clone();

    let mut positions = Vec::new();
    let mut options: Vec<Vec<String>> = Vec::new();
    for (idx, token) in tokens(&text).iter().enumerate() {
        let core = token_core(token);
        if !core.chars().all(char::is_alphabetic) || core.is_empty() {
            continue;
        }
        let syns = synonym_candidates(core, lexicon, tagger, MAX_OPTIONS_PER_POSITION);
        if !syns.is_empty() {
            positions.push(idx);
            let mut opts = vec![core.to_string()];
            opts.extend(syns);
            options.push(opts);
        }
    }
    if positions.is_empty() {
        return res.fail("empty search space: no token has lexicon synonyms");
    }
    let realize = |choice: &[usize]| -> String {
        let mut out = text.clone();
        for (d, &c) in choice.iter().enumerate() {
            if c != 0 {
                out = replace_token_core(&out, positions[d], &options[d][c]).unwrap_or(out);
            }
        }
        out
    };

    let mut counter = QueryCounter::new(victim, budget.max_queries);
    let base = match counter.query(&case.texts) {
        Ok(Query::Answer(r)) => r,
        Ok(Query::Exhausted) => return res.fail("query budget exhausted"),
        Err(e) => {
            res.queries_used = counter.used;
            return res.fail(format!("victim error: {e}"));
        }
    };
    res.victim_pred_before = Some(base.predicted_label);
    res.victim_pred_after = Some(base.predicted_label);
    if base.predicted_label != y {
        res.queries_used = counter.used;
        return res.fail("victim already mispredicts the unperturbed case");
    }

    let dims: Vec<usize> = options.iter().map(Vec::len).collect();
    let mut preds: BTreeMap<Vec<usize>, LabelId> = BTreeMap::new();
    let searched = pso_search(&dims, &budget.pso, budget.max_queries, rng, |choice| {
        if choice.iter().all(|&c| c == 0) {
            preds.insert(choice.to_vec(), base.predicted_label);
            return Ok(Evaluation { fitness: 1.0 - base.prob(y), success: false });
        }
        match counter.query(&with_first(&case.texts, realize(choice)))? {
            Query::Answer(r) => {
                preds.insert(choice.to_vec(), r.predicted_label);
                Ok(Evaluation { fitness: 1.0 - r.prob(y), success: r.predicted_label != y })
            }
            Query::Exhausted => Err(ModelError::Contract("query budget exhausted".into())),
        }
    });
    res.queries_used = counter.used;
    let outcome = match searched {
        Ok(o) => o,
        Err(e) => return res.fail(format!("victim error: {e}")),
    };
    let best_text = realize(&outcome.best);
    res.perturbed_tokens = outcome.best.iter().filter(|&&c| c != 0).count();
    res.victim_pred_after = preds.get(&outcome.best).copied();
    res.adversarial_texts = with_first(&case.texts, best_text);
    res.constraint_report = vec![ConstraintCheck::at_most(
        "queries",
        res.queries_used as f64,
        budget.max_queries as f64,
    )];
    if outcome.best_eval.is_some_and(|e| e.success) {
        res.success = true;
        res
    } else if outcome.exhausted {
        res.fail("query budget exhausted")
    } else {
        res.fail("swarm found no substitution that flips the victim")
    }
}
