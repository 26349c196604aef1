//! Capability expansions applied to the verified suite: taxonomy word swaps,
//! fairness appositives and light spelling noise.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attack::transforms::{apply_transform, CharTransform};
use crate::error::{Error, Result};
use crate::hashing::stream_rng;
use crate::instantiate::sample_indices;
use crate::lexicon::{LexPos, Lexicon, TaxonomyGate};
use crate::model::MaskFiller;
use crate::pos::{Pos, Tagger};
use crate::text::{self, is_alpha_word, match_case, replace_token_core, token_core, tokens, MASK};
use crate::types::{derive_case, CapabilityTag, Stage, TestCase, TestSuite};

const SHIPPED_ATTRIBUTES: &str = include_str!("../data/attributes.json");
const SHIPPED_CONTRACTIONS: &str = include_str!("../data/contractions.tsv");

pub const FAIRNESS_CATEGORIES: [&str; 5] =
    ["skin_color", "sexual_orientation", "religion", "occupation", "nationality"];

// ---------------------------------------------------------------- MLM gate

#[derive(Debug, Clone, PartialEq)]
pub struct GateVerdict {
    pub accepted: bool,
    pub delta: Option<f64>,
    pub diagnostic: Option<String>,
}

/// Gate decisions for several candidates at one position, from a single
/// scoring call.
pub fn mlm_gate_many(
    original_text: &str,
    position: usize,
    candidates: &[&str],
    filler: &dyn MaskFiller,
    gate: &TaxonomyGate,
) -> Result<Vec<GateVerdict>> {
    let token = tokens(original_text)
        .get(position)
        .copied()
        .ok_or_else(|| Error::contract(format!("position {position} out of range")))?;
    let original = token_core(token);
    let masked = replace_token_core(original_text, position, MASK)
        .ok_or_else(|| Error::contract(format!("token {position} has no word to mask")))?;
    let mut query: Vec<&str> = Vec::with_capacity(candidates.len() + 1);
    query.push(original);
    query.extend_from_slice(candidates);
    let scores = filler.score_tokens(&masked, &query).map_err(|source| Error::ModelCall {
        context: format!("scoring candidates at position {position}"),
        source,
    })?;
    if scores.len() != query.len() {
        return Err(Error::ModelCall {
            context: format!("scoring candidates at position {position}"),
            source: crate::model::ModelError::Contract("score count mismatch".into()),
        });
    }
    let Some(base) = scores[0] else {
        let why = format!("original token {original:?} not in scorer vocabulary");
        return Ok(candidates
            .iter()
            .map(|_| GateVerdict { accepted: false, delta: None, diagnostic: Some(why.clone()) })
            .collect());
    };
    Ok(candidates
        .iter()
        .zip(&scores[1..])
        .map(|(cand, score)| match score {
            Some(s) => {
                let delta = libm::fabs(s - base);
                GateVerdict { accepted: delta < gate.score_delta_threshold, delta: Some(delta), diagnostic: None }
            }
            None => GateVerdict {
                accepted: false,
                delta: None,
                diagnostic: Some(format!("candidate {cand:?} not in scorer vocabulary")),
            },
        })
        .collect())
}

/// Whether swapping token `position` for `candidate` keeps the masked-LM
/// log-probability within the gate threshold (strictly).
pub fn mlm_gate(
    original_text: &str,
    position: usize,
    candidate: &str,
    filler: &dyn MaskFiller,
    gate: &TaxonomyGate,
) -> Result<GateVerdict> {
    Ok(mlm_gate_many(original_text, position, &[candidate], filler, gate)?.remove(0))
}

// ---------------------------------------------------------------- taxonomy

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpansionOutput {
    pub children: Vec<TestCase>,
    pub diagnostics: Vec<String>,
}

/// Children of `case` where one content word is replaced by a gated lexicon
/// neighbour of the same part of speech. At most `cap` children are kept,
/// chosen uniformly with `rng`.
pub fn taxonomy_expand<R: Rng + ?Sized>(
    case: &TestCase,
    lexicon: &Lexicon,
    tagger: &Tagger,
    filler: &dyn MaskFiller,
    gate: &TaxonomyGate,
    cap: usize,
    rng: &mut R,
) -> Result<ExpansionOutput> {
    let mut out = ExpansionOutput::default();
    let text = &case.texts[0];
    for (idx, token) in tokens(text).iter().enumerate() {
        let core = token_core(token);
        if !is_alpha_word(core) {
            continue;
        }
        let pos = tagger.tag_word(token);
        let Some(lex_pos) = LexPos::from_tag(pos) else { continue };
        let surfaces: Vec<String> = lexicon
            .lexical_candidates(core, lex_pos, gate)
            .into_iter()
            .map(|c| match_case(core, &c))
            .filter(|c| tagger.tag_word(c) == pos && c != core)
            .collect();
        if surfaces.is_empty() {
            continue;
        }
        let refs: Vec<&str> = surfaces.iter().map(String::as_str).collect();
        let verdicts = mlm_gate_many(text, idx, &refs, filler, gate)?;
        for (surface, verdict) in surfaces.iter().zip(verdicts) {
            if !verdict.accepted {
                if let Some(d) = verdict.diagnostic {
                    out.diagnostics.push(format!("{}: {d}", case.id));
                }
                continue;
            }
            let Some(new_text) = replace_token_core(text, idx, surface) else { continue };
            let mut texts = case.texts.clone();
            texts[0] = new_text;
            out.children.push(derive_case(
                case,
                texts,
                "taxonomy",
                Some(CapabilityTag::Taxonomy),
                format!("taxonomy@{idx}:{core}->{surface}"),
            )?);
        }
    }
    if out.children.len() > cap {
        let keep = sample_indices(rng, out.children.len() as u128, cap as u128);
        let all = core::mem::take(&mut out.children);
        out.children = keep.into_iter().map(|i| all[i as usize].clone()).collect();
    }
    Ok(out)
}

// ---------------------------------------------------------------- fairness

/// Demographic phrases per category, inserted as appositives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeLexicon {
    pub categories: BTreeMap<String, Vec<String>>,
}

impl AttributeLexicon {
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_ATTRIBUTES).expect("shipped attribute lexicon is valid")
    }

    /// Reads a JSON object of `category -> [phrase, ...]`.
    pub fn from_json(json: &str) -> Result<Self> {
        let categories: BTreeMap<String, Vec<String>> = serde_json::from_str(json)
            .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
        let lex = AttributeLexicon { categories };
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::contract("attribute lexicon has no categories"));
        }
        for (name, phrases) in &self.categories {
            if phrases.is_empty() || phrases.iter().any(|p| p.trim().is_empty() || p.contains(',')) {
                return Err(Error::contract(format!(
                    "attribute category {name:?} must hold non-empty phrases without commas"
                )));
            }
        }
        Ok(())
    }
}

/// Token index of the sentence subject: the first noun before the first verb.
/// Words the dictionary does not know at all count as nouns here.
pub fn locate_subject(text: &str, tagger: &Tagger) -> Option<usize> {
    let tags = tagger.tag(text);
    let first_verb = tags.iter().position(|(_, p)| *p == Pos::Verb)?;
    tags[..first_verb].iter().position(|(t, p)| {
        let core = token_core(t);
        is_alpha_word(core) && (*p == Pos::Noun || (*p == Pos::Other && tagger.lookup(core).is_none()))
    })
}

fn article(phrase: &str) -> &'static str {
    match phrase.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// `text` with an appositive after token `subject`.
pub fn insert_appositive(text: &str, subject: usize, category: &str, phrase: &str) -> Option<String> {
    let (start, end) = *text::token_spans(text).get(subject)?;
    let token = &text[start..end];
    let (_, core_end) = text::core_range(token);
    let split = start + core_end;
    let appositive = if category == "occupation" {
        format!(", {} {phrase},", article(phrase))
    } else {
        format!(", who is {phrase},")
    };
    let rest = &text[split..];
    // punctuation already trailing the subject ("Mary, ...") replaces our closing comma
    let rest = rest.strip_prefix(',').unwrap_or(rest);
    Some(format!("{}{}{}", &text[..split], appositive, rest))
}

/// Up to `k` phrases per category inserted after the subject.
pub fn fairness_expand<R: Rng + ?Sized>(
    case: &TestCase,
    attributes: &AttributeLexicon,
    tagger: &Tagger,
    k: usize,
    rng: &mut R,
) -> Result<ExpansionOutput> {
    let mut out = ExpansionOutput::default();
    let text = &case.texts[0];
    let Some(subject) = locate_subject(text, tagger) else {
        out.diagnostics.push(format!("{}: no subject found", case.id));
        return Ok(out);
    };
    for (category, phrases) in &attributes.categories {
        let take = k.min(phrases.len());
        if take == 0 {
            continue;
        }
        for i in sample_indices(rng, phrases.len() as u128, take as u128) {
            let phrase = &phrases[i as usize];
            let Some(new_text) = insert_appositive(text, subject, category, phrase) else { continue };
            let mut texts = case.texts.clone();
            texts[0] = new_text;
            out.children.push(derive_case(
                case,
                texts,
                "fairness",
                Some(CapabilityTag::Fairness),
                format!("fairness:{category}={phrase}"),
            )?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- preliminary robustness

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionTable {
    /// (contraction, expansion), both lowercase.
    pub pairs: Vec<(String, String)>,
}

impl Default for ContractionTable {
    fn default() -> Self {
        Self::shipped()
    }
}

impl ContractionTable {
    pub fn shipped() -> Self {
        Self::from_tsv(SHIPPED_CONTRACTIONS)
    }

    pub fn from_tsv(tsv: &str) -> Self {
        let pairs = tsv
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| {
                let (c, e) = l.split_once('\t')?;
                Some((c.trim().to_lowercase(), e.trim().to_lowercase()))
            })
            .filter(|(c, e)| !c.is_empty() && !e.is_empty())
            .collect();
        ContractionTable { pairs }
    }

    /// First contraction in `text` expanded, or else the first expansion contracted.
    pub fn toggle(&self, text: &str) -> Option<String> {
        let toks = tokens(text);
        for (i, tok) in toks.iter().enumerate() {
            let core = token_core(tok);
            let lower = core.to_lowercase().replace('\u{2019}', "'");
            if let Some((_, expansion)) = self.pairs.iter().find(|(c, _)| *c == lower) {
                return replace_token_core(text, i, &match_case(core, expansion));
            }
        }
        let lowered: Vec<String> = toks.iter().map(|t| t.to_lowercase()).collect();
        for (contraction, expansion) in &self.pairs {
            let words: Vec<&str> = expansion.split(' ').collect();
            if words.len() < 2 {
                continue;
            }
            for i in 0..lowered.len().saturating_sub(words.len() - 1) {
                let last = i + words.len() - 1;
                let interior_match = (0..words.len() - 1).all(|j| lowered[i + j] == words[j]);
                if interior_match && token_core(&lowered[last]) == words[words.len() - 1] {
                    let first_core = token_core(toks[i]);
                    let suffix = &toks[last][text::core_range(toks[last]).1..];
                    let mut rebuilt: Vec<String> = toks[..i].iter().map(|t| t.to_string()).collect();
                    rebuilt.push(format!("{}{suffix}", match_case(first_core, contraction)));
                    rebuilt.extend(toks[last + 1..].iter().map(|t| t.to_string()));
                    return Some(rebuilt.join(" "));
                }
            }
        }
        None
    }
}

/// Kinds of spelling noise, each yielding at most one child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    KeyboardTypo,
    AdjacentSwap,
    CharDeletion,
    PunctuationDoubling,
    Contraction,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::KeyboardTypo,
        NoiseKind::AdjacentSwap,
        NoiseKind::CharDeletion,
        NoiseKind::PunctuationDoubling,
        NoiseKind::Contraction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::KeyboardTypo => "keyboard_typo",
            NoiseKind::AdjacentSwap => "adjacent_swap",
            NoiseKind::CharDeletion => "char_deletion",
            NoiseKind::PunctuationDoubling => "punctuation_doubling",
            NoiseKind::Contraction => "contraction",
        }
    }
}

fn perturb_random_word<R: Rng + ?Sized>(
    text: &str,
    min_len: usize,
    kind: CharTransform,
    rng: &mut R,
) -> Option<(usize, String)> {
    let eligible: Vec<usize> = tokens(text)
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            let c = token_core(t);
            is_alpha_word(c) && c.chars().count() >= min_len
        })
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let idx = eligible[rng.gen_range(0..eligible.len())];
    let core = token_core(tokens(text)[idx]);
    let variant = apply_transform(core, kind, rng)?;
    Some((idx, replace_token_core(text, idx, &variant)?))
}

fn double_punctuation(text: &str) -> Option<String> {
    let (i, c) = text.char_indices().rev().find(|(_, c)| matches!(c, '.' | '!' | '?' | ','))?;
    let mut out = String::with_capacity(text.len() + 1);
    out.push_str(&text[..i]);
    out.push(c);
    out.push_str(&text[i..]);
    Some(out)
}

/// One child per applicable noise kind.
pub fn preliminary_robustness_expand<R: Rng + ?Sized>(
    case: &TestCase,
    contractions: &ContractionTable,
    rng: &mut R,
) -> Result<ExpansionOutput> {
    let mut out = ExpansionOutput::default();
    let text = &case.texts[0];
    for kind in NoiseKind::ALL {
        let produced = match kind {
            NoiseKind::KeyboardTypo => perturb_random_word(text, 2, CharTransform::Substitution, rng),
            NoiseKind::AdjacentSwap => perturb_random_word(text, 2, CharTransform::Swap, rng),
            NoiseKind::CharDeletion => perturb_random_word(text, 4, CharTransform::Deletion, rng),
            NoiseKind::PunctuationDoubling => double_punctuation(text).map(|t| (0, t)),
            NoiseKind::Contraction => contractions.toggle(text).map(|t| (0, t)),
        };
        let Some((_, new_text)) = produced else { continue };
        if new_text == *text {
            continue;
        }
        let mut texts = case.texts.clone();
        texts[0] = new_text;
        let child = derive_case(case, texts, "pre-robustness", Some(CapabilityTag::PreRob), kind.as_str())?;
        if !out.children.iter().any(|c| c.id == child.id) {
            out.children.push(child);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- suites

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpandConfig {
    pub taxonomy: bool,
    pub fairness: bool,
    pub pre_rob: bool,
    pub gate: TaxonomyGate,
    pub taxonomy_cap: usize,
    pub fairness_k: usize,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig {
            taxonomy: true,
            fairness: true,
            pre_rob: true,
            gate: TaxonomyGate::default(),
            taxonomy_cap: 20,
            fairness_k: 2,
        }
    }
}

impl ExpandConfig {
    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        if self.fairness_k == 0 {
            return Err(Error::contract("fairness_k must be positive"));
        }
        Ok(())
    }
}

/// Resources the expansions read.
#[derive(Clone, Copy)]
pub struct ExpandResources<'a> {
    pub lexicon: &'a Lexicon,
    pub tagger: &'a Tagger,
    pub attributes: &'a AttributeLexicon,
    pub contractions: &'a ContractionTable,
    pub filler: &'a dyn MaskFiller,
}

/// Per-parent outputs of the three expansions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaseExpansions {
    pub taxonomy: ExpansionOutput,
    pub fairness: ExpansionOutput,
    pub pre_rob: ExpansionOutput,
}

/// Runs the enabled expansions on one case, each with its own RNG stream.
pub fn expand_case(case: &TestCase, cfg: &ExpandConfig, res: ExpandResources<'_>, seed: u64) -> Result<CaseExpansions> {
    let mut out = CaseExpansions::default();
    if cfg.taxonomy {
        let mut rng = stream_rng(seed, &["taxonomy", &case.id]);
        out.taxonomy = taxonomy_expand(case, res.lexicon, res.tagger, res.filler, &cfg.gate, cfg.taxonomy_cap, &mut rng)?;
    }
    if cfg.fairness {
        let mut rng = stream_rng(seed, &["fairness", &case.id]);
        out.fairness = fairness_expand(case, res.attributes, res.tagger, cfg.fairness_k, &mut rng)?;
    }
    if cfg.pre_rob {
        let mut rng = stream_rng(seed, &["pre-robustness", &case.id]);
        out.pre_rob = preliminary_robustness_expand(case, res.contractions, &mut rng)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedSuites {
    pub taxonomy: TestSuite,
    pub fairness: TestSuite,
    pub pre_rob: TestSuite,
    pub merged: TestSuite,
    pub diagnostics: Vec<String>,
}

/// Collects per-case expansions (in `t1` order) into the four stage suites.
pub fn assemble_expansions(t1: &TestSuite, per_case: Vec<CaseExpansions>) -> Result<ExpandedSuites> {
    let mut tax = TestSuite::new("taxonomy", Stage::Taxonomy, t1.seed, t1.task.clone());
    let mut fair = TestSuite::new("fairness", Stage::Fairness, t1.seed, t1.task.clone());
    let mut pre = TestSuite::new("pre-robustness", Stage::PreRobustness, t1.seed, t1.task.clone());
    let mut diagnostics = Vec::new();
    for e in per_case {
        tax.extend_unique(e.taxonomy.children);
        fair.extend_unique(e.fairness.children);
        pre.extend_unique(e.pre_rob.children);
        diagnostics.extend(e.taxonomy.diagnostics);
        diagnostics.extend(e.fairness.diagnostics);
        diagnostics.extend(e.pre_rob.diagnostics);
    }
    let merged = merge_expansions(t1, &tax, &fair, &pre)?;
    Ok(ExpandedSuites { taxonomy: tax, fairness: fair, pre_rob: pre, merged, diagnostics })
}

/// Sequential convenience over [`expand_case`] and [`assemble_expansions`].
pub fn expand_suite(t1: &TestSuite, cfg: &ExpandConfig, res: ExpandResources<'_>) -> Result<ExpandedSuites> {
    cfg.validate()?;
    let per_case = t1
        .cases
        .iter()
        .map(|c| expand_case(c, cfg, res, t1.seed))
        .collect::<Result<Vec<_>>>()?;
    assemble_expansions(t1, per_case)
}

/// `T_c`: the union of the three expansion suites, deduplicated by case id.
pub fn merge_expansions(t1: &TestSuite, tax: &TestSuite, fair: &TestSuite, pre_rob: &TestSuite) -> Result<TestSuite> {
    for s in [tax, fair, pre_rob] {
        if s.task != t1.task || s.seed != t1.seed {
            return Err(Error::contract(format!(
                "suite {:?} does not share task and seed with {:?}",
                s.name, t1.name
            )));
        }
    }
    let mut merged = TestSuite::new("expanded", Stage::Expanded, t1.seed, t1.task.clone());
    for s in [tax, fair, pre_rob] {
        merged.extend_unique(s.cases.iter().cloned());
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FillCandidate, FillResult, ModelError};
    use alloc::vec;

    struct TableFiller(Vec<(&'static str, f64)>);
    impl MaskFiller for TableFiller {
        fn id(&self) -> &str {
            "table"
        }
        fn fill_mask(&self, _: &str, top_k: usize) -> core::result::Result<FillResult, ModelError> {
            Ok(FillResult {
                candidates: self
                    .0
                    .iter()
                    .take(top_k)
                    .map(|(t, p)| FillCandidate { token: t.to_string(), log_prob: *p })
                    .collect(),
            })
        }
    }

    #[test]
    fn gate_boundary_is_strict() {
        let filler = TableFiller(vec![("hate", -1.0), ("near", -1.99), ("far", -2.0)]);
        let gate = TaxonomyGate::default();
        let v = mlm_gate("I hate it", 1, "near", &filler, &gate).unwrap();
        assert!(v.accepted);
        assert!((v.delta.unwrap() - 0.99).abs() < 1e-12);
        assert!(!mlm_gate("I hate it", 1, "far", &filler, &gate).unwrap().accepted);
        assert!(mlm_gate("I hate it", 1, "hate", &filler, &gate).unwrap().accepted);
        let missing = mlm_gate("I hate it", 1, "absent", &filler, &gate).unwrap();
        assert!(!missing.accepted && missing.diagnostic.is_some());
    }

    #[test]
    fn appositive_insertion() {
        assert_eq!(
            insert_appositive("Mary liked the film.", 0, "nationality", "Mexican").unwrap(),
            "Mary, who is Mexican, liked the film."
        );
        assert_eq!(
            insert_appositive("Mary liked the film.", 0, "occupation", "engineer").unwrap(),
            "Mary, an engineer, liked the film."
        );
        assert_eq!(locate_subject("Mary liked the film.", &Tagger::shipped()), Some(0));
        assert_eq!(locate_subject("I hate films", &Tagger::shipped()), None);
    }

    #[test]
    fn fairness_counts_and_subsequence() {
        let case = TestCase::original(vec!["The waiter was rude.".into()], 0, "t", "");
        let mut rng = stream_rng(42, &[]);
        let out = fairness_expand(&case, &AttributeLexicon::shipped(), &Tagger::shipped(), 2, &mut rng).unwrap();
        assert_eq!(out.children.len(), 10);
        let parent = text::word_tokens(&case.texts[0]);
        for c in &out.children {
            assert!(text::is_subsequence(&parent, &text::word_tokens(&c.texts[0])), "{}", c.texts[0]);
            assert_eq!(c.expected_label, 0);
        }
    }

    #[test]
    fn contractions_toggle_both_ways() {
        let t = ContractionTable::shipped();
        assert_eq!(t.toggle("I don't like it.").unwrap(), "I do not like it.");
        assert_eq!(t.toggle("It is not good.").unwrap(), "It isn't good.");
        assert_eq!(t.toggle("Great film"), None);
    }

    #[test]
    fn pre_rob_is_deterministic_and_label_preserving() {
        let case = TestCase::original(vec!["The movie isn't great.".into()], 1, "t", "");
        let a = preliminary_robustness_expand(&case, &ContractionTable::shipped(), &mut stream_rng(42, &[])).unwrap();
        let b = preliminary_robustness_expand(&case, &ContractionTable::shipped(), &mut stream_rng(42, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.children.len(), 5);
        assert!(a.children.iter().all(|c| c.expected_label == 1 && c.has_tag(CapabilityTag::PreRob)));
        let short = TestCase::original(vec!["bad".into()], 0, "t", "");
        let out = preliminary_robustness_expand(&short, &ContractionTable::shipped(), &mut stream_rng(1, &[])).unwrap();
        assert!(out.children.iter().all(|c| c.texts[0].len() >= 3));
    }
}
