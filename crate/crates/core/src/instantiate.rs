//! Template instantiation and masked-LM expansion into the initial suite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::hashing::stream_rng;
use crate::model::MaskFiller;
use crate::pos::Tagger;
use crate::text::{self, MASK};
use crate::types::{derive_case, CapabilityTag, SlotTemplate, Stage, TaskSpec, TestCase, TestSuite};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstantiationConfig {
    pub samples_per_template: usize,
    pub mask_select_fraction: f64,
    pub masks_per_case: usize,
    pub fills_per_mask: usize,
    pub seed: u64,
    /// Never mask a leading proper noun (the sentence subject).
    pub protect_subject: bool,
}

impl Default for InstantiationConfig {
    fn default() -> Self {
        InstantiationConfig {
            samples_per_template: 500,
            mask_select_fraction: 0.2,
            masks_per_case: 5,
            fills_per_mask: 10,
            seed: 42,
            protect_subject: true,
        }
    }
}

impl InstantiationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_select_fraction > 0.0 && self.mask_select_fraction <= 1.0) {
            return Err(Error::contract(format!(
                "mask_select_fraction {} must be in (0, 1]",
                self.mask_select_fraction
            )));
        }
        if self.samples_per_template == 0 || self.masks_per_case == 0 || self.fills_per_mask == 0 {
            return Err(Error::contract("instantiation counts must be at least 1"));
        }
        Ok(())
    }

    fn select_fraction(&self) -> Fraction {
        Fraction::from_f64_approx(self.mask_select_fraction).unwrap_or(Fraction::ONE)
    }
}

/// A case with exactly one token replaced by the mask literal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskTemplate {
    pub parent_case_id: String,
    pub text_with_single_mask: String,
    pub masked_word: String,
    pub masked_index: usize,
}

/// Uniform sample of `k` distinct integers below `n` (Floyd's algorithm), sorted.
pub(crate) fn sample_indices<R: Rng + ?Sized>(rng: &mut R, n: u128, k: u128) -> Vec<u128> {
    let mut chosen = BTreeSet::new();
    for j in (n - k)..n {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// Expands a template into its original cases.
///
/// All combinations are emitted (first slot varying slowest) when there are
/// at most `samples_per_template`; otherwise that many distinct combinations
/// are drawn uniformly and emitted in combination order.
pub fn instantiate_template<R: Rng + ?Sized>(
    t: &SlotTemplate,
    cfg: &InstantiationConfig,
    rng: &mut R,
) -> Result<Vec<TestCase>> {
    let slots = t.slots()?;
    if slots.is_empty() || t.pool.is_empty() {
        return Err(Error::contract(format!("template {} has no slots to fill", t.id)));
    }
    let pools: Vec<&Vec<String>> = slots
        .iter()
        .map(|s| {
            t.pool
                .get(s)
                .filter(|p| !p.is_empty())
                .ok_or_else(|| Error::contract(format!("template {} has no pool for slot {s:?}", t.id)))
        })
        .collect::<Result<_>>()?;
    let total = pools
        .iter()
        .try_fold(1u128, |acc, p| acc.checked_mul(p.len() as u128))
        .ok_or_else(|| Error::contract("pool product overflows"))?;
    let cap = cfg.samples_per_template as u128;
    let indices: Vec<u128> = if total <= cap {
        (0..total).collect()
    } else {
        sample_indices(rng, total, cap)
    };
    let template_id = if t.id.is_empty() { t.derived_id() } else { t.id.clone() };
    let mut out = Vec::with_capacity(indices.len());
    for index in indices {
        let mut rem = index;
        let mut picks = alloc::vec![0usize; pools.len()];
        for (i, pool) in pools.iter().enumerate().rev() {
            let n = pool.len() as u128;
            picks[i] = (rem % n) as usize;
            rem /= n;
        }
        let values: BTreeMap<&str, &str> = slots
            .iter()
            .zip(&picks)
            .zip(&pools)
            .map(|((s, &p), pool)| (s.as_str(), pool[p].as_str()))
            .collect();
        let texts = t.render(&values)?;
        let summary = slots
            .iter()
            .map(|s| format!("{s}={}", values[s.as_str()]))
            .collect::<Vec<_>>()
            .join(", ");
        out.push(TestCase::original(texts, t.label, &template_id, summary));
    }
    Ok(out)
}

/// `ceil(fraction * |cases|)` cases drawn without replacement, in input order.
pub fn select_for_masking<R: Rng + ?Sized>(
    cases: &[TestCase],
    cfg: &InstantiationConfig,
    rng: &mut R,
) -> Vec<TestCase> {
    let k = cfg.select_fraction().ceil_mul(cases.len()).min(cases.len());
    if k == 0 {
        return Vec::new();
    }
    sample_indices(rng, cases.len() as u128, k as u128)
        .into_iter()
        .map(|i| cases[i as usize].clone())
        .collect()
}

/// Token positions eligible for masking in `text`.
pub fn maskable_positions(text: &str, tagger: &Tagger, protect_subject: bool) -> Vec<usize> {
    text::tokens(text)
        .iter()
        .enumerate()
        .filter(|(i, tok)| {
            let core = text::token_core(tok);
            text::is_alpha_word(core)
                && !tok.contains('[')
                && !(protect_subject && *i == 0 && tagger.is_proper_noun(tok))
        })
        .map(|(i, _)| i)
        .collect()
}

/// One single-mask template per chosen position of the case's first text.
pub fn make_mask_templates<R: Rng + ?Sized>(
    case: &TestCase,
    cfg: &InstantiationConfig,
    tagger: &Tagger,
    rng: &mut R,
) -> Result<Vec<MaskTemplate>> {
    let text = &case.texts[0];
    let positions = maskable_positions(text, tagger, cfg.protect_subject);
    if positions.is_empty() {
        return Err(Error::contract(format!("case {} has no maskable token", case.id)));
    }
    let k = cfg.masks_per_case.min(positions.len());
    let toks = text::tokens(text);
    Ok(sample_indices(rng, positions.len() as u128, k as u128)
        .into_iter()
        .map(|i| {
            let pos = positions[i as usize];
            MaskTemplate {
                parent_case_id: case.id.clone(),
                text_with_single_mask: text::replace_token_core(text, pos, MASK)
                    .expect("maskable token has a core"),
                masked_word: String::from(text::token_core(toks[pos])),
                masked_index: pos,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskExpansion {
    pub cases: Vec<TestCase>,
    pub diagnostics: Vec<String>,
}

/// Replaces masks with the filler's top candidates, yielding EXPAND children.
///
/// Mask positions are drawn from a stream keyed by the run seed and the case
/// id. Candidates equal to the masked word (ignoring case) or not purely
/// alphabetic are skipped and backfilled from lower-ranked candidates.
pub fn mask_expand(
    cases: &[TestCase],
    cfg: &InstantiationConfig,
    tagger: &Tagger,
    filler: &dyn MaskFiller,
) -> Result<MaskExpansion> {
    let mut out = MaskExpansion::default();
    for case in cases {
        let mut rng = stream_rng(cfg.seed, &["mask-positions", &case.id]);
        let templates = match make_mask_templates(case, cfg, tagger, &mut rng) {
            Ok(t) => t,
            Err(e) => {
                out.diagnostics.push(format!("skipped {}: {e}", case.id));
                continue;
            }
        };
        for mt in templates {
            out.cases.extend(fill_mask_template(case, &mt, cfg.fills_per_mask, filler)?);
        }
    }
    Ok(out)
}

/// Candidates requested per wanted fill, leaving room for skipped ones.
pub const FILL_OVERSAMPLE: usize = 3;

/// Children of one mask template, best candidate first.
pub fn fill_mask_template(
    parent: &TestCase,
    mt: &MaskTemplate,
    fills: usize,
    filler: &dyn MaskFiller,
) -> Result<Vec<TestCase>> {
    let result = filler
        .fill_mask(&mt.text_with_single_mask, fills * FILL_OVERSAMPLE)
        .map_err(|source| Error::ModelCall {
            context: format!(
                "fill-mask for case {} position {}",
                mt.parent_case_id, mt.masked_index
            ),
            source,
        })?;
    let mut used: BTreeSet<String> = BTreeSet::new();
    used.insert(mt.masked_word.to_lowercase());
    let mut children = Vec::new();
    for cand in &result.candidates {
        if children.len() == fills {
            break;
        }
        let word = cand.token.trim();
        if !text::is_alpha_word(word) || !used.insert(word.to_lowercase()) {
            continue;
        }
        let replacement = text::match_case(&mt.masked_word, word);
        let Some(new_text) = text::replace_token_core(&parent.texts[0], mt.masked_index, &replacement) else {
            continue;
        };
        let mut texts = parent.texts.clone();
        texts[0] = new_text;
        let child = derive_case(
            parent,
            texts,
            "mask-expand",
            Some(CapabilityTag::Expand),
            format!("mask@{}:{}->{}", mt.masked_index, mt.masked_word, replacement),
        )?;
        children.push(child);
    }
    Ok(children)
}

/// `T_o`: originals followed by expansions, deduplicated by case id.
pub fn build_initial_suite(
    originals: Vec<TestCase>,
    expansions: Vec<TestCase>,
    task: &TaskSpec,
    seed: u64,
) -> TestSuite {
    let mut suite = TestSuite::new("initial", Stage::Initial, seed, task.clone());
    suite.extend_unique(originals);
    suite.extend_unique(expansions);
    suite
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FillCandidate, FillResult, ModelError};
    use alloc::string::ToString;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_template() -> SlotTemplate {
        let mut pool = BTreeMap::new();
        pool.insert("I".to_string(), vec!["me", "him", "she", "mary", "them"].into_iter().map(String::from).collect());
        pool.insert("neg_verb".to_string(), vec!["hate".to_string(), "dislike".to_string()]);
        pool.insert("thing".to_string(), vec!["basketball", "ball", "anything"].into_iter().map(String::from).collect());
        let mut t = SlotTemplate {
            id: String::new(),
            description: "A negative sentiment sentence built around a negative verb.".into(),
            template: crate::types::TemplateText(vec!["{I} {neg_verb} {thing}.".into()]),
            label: 0,
            pool,
            example: "I hate everything.".into(),
            check_label: 0,
            score: 9.6,
        };
        t.ensure_id();
        t
    }

    fn cube_template() -> SlotTemplate {
        let mut pool = BTreeMap::new();
        for slot in ["a", "b", "c"] {
            pool.insert(slot.to_string(), (0..10).map(|i| format!("{slot}{i}")).collect());
        }
        SlotTemplate {
            id: "cube".into(),
            description: String::new(),
            template: crate::types::TemplateText(vec!["{a} {b} {c}".into()]),
            label: 1,
            pool,
            example: "a0 b0 c0".into(),
            check_label: 1,
            score: 10.0,
        }
    }

    #[test]
    fn sample_pools_emit_all_thirty() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cases = instantiate_template(&sample_template(), &InstantiationConfig::default(), &mut rng).unwrap();
        assert_eq!(cases.len(), 30);
        assert_eq!(cases[0].texts[0], "me hate basketball.");
        assert!(cases.iter().all(|c| c.expected_label == 0 && c.has_tag(CapabilityTag::Original)));
        let ids: BTreeSet<_> = cases.iter().map(|c| c.id.clone()).collect();
        assert_eq!(ids.len(), 30);
    }

    #[test]
    fn large_product_is_capped_and_deterministic() {
        let cfg = InstantiationConfig::default();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            instantiate_template(&cube_template(), &cfg, &mut rng).unwrap()
        };
        let a = run();
        assert_eq!(a.len(), 500);
        let distinct: BTreeSet<_> = a.iter().map(|c| c.texts[0].clone()).collect();
        assert_eq!(distinct.len(), 500);
        assert_eq!(a, run());
    }

    #[test]
    fn empty_pool_list_is_contract_error() {
        let mut t = cube_template();
        t.pool.clear();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(instantiate_template(&t, &InstantiationConfig::default(), &mut rng).is_err());
    }

    fn cases(n: usize) -> Vec<TestCase> {
        (0..n)
            .map(|i| TestCase::original(vec![format!("the film number {i} was dull")], 0, "t", ""))
            .collect()
    }

    #[test]
    fn selection_uses_ceiling() {
        let cfg = InstantiationConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(select_for_masking(&cases(10), &cfg, &mut rng).len(), 2);
        assert_eq!(select_for_masking(&cases(1), &cfg, &mut rng).len(), 1);
        assert_eq!(select_for_masking(&cases(15), &cfg, &mut rng).len(), 3);
        let all = InstantiationConfig {
            mask_select_fraction: 1.0,
            ..cfg
        };
        assert_eq!(select_for_masking(&cases(7), &all, &mut rng), cases(7));
    }

    #[test]
    fn mask_template_counts() {
        let cfg = InstantiationConfig::default();
        let tagger = Tagger::shipped();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eight = TestCase::original(vec!["we really did not enjoy that long film today".into()], 0, "t", "");
        let mts = make_mask_templates(&eight, &cfg, &tagger, &mut rng).unwrap();
        assert_eq!(mts.len(), 5);
        let idx: BTreeSet<_> = mts.iter().map(|m| m.masked_index).collect();
        assert_eq!(idx.len(), 5);
        for m in &mts {
            assert_eq!(m.text_with_single_mask.matches(MASK).count(), 1);
            assert_eq!(text::tokens(&eight.texts[0])[m.masked_index], m.masked_word);
        }
        let three = TestCase::original(vec!["I hate it".into()], 0, "t", "");
        assert_eq!(make_mask_templates(&three, &cfg, &tagger, &mut rng).unwrap().len(), 3);
        let none = TestCase::original(vec!["123 456 !!!".into()], 0, "t", "");
        assert!(make_mask_templates(&none, &cfg, &tagger, &mut rng).is_err());
    }

    #[test]
    fn leading_name_is_protected() {
        let tagger = Tagger::shipped();
        assert_eq!(maskable_positions("Mary liked it", &tagger, true), vec![1, 2]);
        assert_eq!(maskable_positions("Mary liked it", &tagger, false), vec![0, 1, 2]);
    }

    struct FixedFiller(Vec<&'static str>);

    impl MaskFiller for FixedFiller {
        fn id(&self) -> &str {
            "fixed"
        }
        fn fill_mask(&self, text: &str, top_k: usize) -> core::result::Result<FillResult, ModelError> {
            crate::model::require_single_mask(text)?;
            Ok(FillResult {
                candidates: self
                    .0
                    .iter()
                    .take(top_k)
                    .enumerate()
                    .map(|(i, t)| FillCandidate {
                        token: t.to_string(),
                        log_prob: -(i as f64) - 0.1,
                    })
                    .collect(),
            })
        }
    }

    #[test]
    fn masked_word_is_skipped_and_backfilled() {
        let parent = TestCase::original(vec!["I hate it".into()], 0, "t", "");
        let mt = MaskTemplate {
            parent_case_id: parent.id.clone(),
            text_with_single_mask: "I [MASK] it".into(),
            masked_word: "hate".into(),
            masked_index: 1,
        };
        let filler = FixedFiller(vec!["Hate", "love", "12", "love", "want", "need"]);
        let kids = fill_mask_template(&parent, &mt, 2, &filler).unwrap();
        let texts: Vec<_> = kids.iter().map(|k| k.texts[0].as_str()).collect();
        assert_eq!(texts, vec!["I love it", "I want it"]);
        for k in &kids {
            assert_eq!(text::differing_positions(&parent.texts[0], &k.texts[0]).unwrap().len(), 1);
            assert!(k.has_tag(CapabilityTag::Expand));
        }
    }

    #[test]
    fn initial_suite_dedups() {
        let originals = cases(3);
        let mut expansions = cases(2);
        expansions.push(TestCase::original(vec!["brand new".into()], 0, "t", ""));
        let suite = build_initial_suite(originals.clone(), expansions, &TaskSpec::sentiment("x"), 42);
        assert_eq!(suite.len(), 4);
        let only = build_initial_suite(originals.clone(), vec![], &TaskSpec::sentiment("x"), 42);
        assert_eq!(only.cases, originals);
    }
}
