//! Reader for lexical databases in the WordNet data-file layout, and the
//! synonym / hypernym / hyponym queries taxonomy expansion needs.
//!
//! A data line looks like
//!
//! ```text
//! 00000413 37 v 02 hate 0 detest 0 002 @ 00000290 v 0000 ~ 00000519 v 0000 01 + 08 00 | gloss
//! ```
//!
//! offset, lexicographer file, synset type, word count (hex), word/lex-id
//! pairs, pointer count, pointers (symbol, offset, pos, source/target), verb
//! frames, then the gloss. The offset is the line's byte position in its file.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pos::Pos;

pub mod shipped {
    //! The lexicon snapshot compiled into the crate.
    pub const DATA_NOUN: &str = include_str!("../data/lexicon/data.noun");
    pub const DATA_VERB: &str = include_str!("../data/lexicon/data.verb");
    pub const DATA_ADJ: &str = include_str!("../data/lexicon/data.adj");
    pub const DATA_ADV: &str = include_str!("../data/lexicon/data.adv");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LexPos {
    Noun,
    Verb,
    Adj,
    Adv,
}

impl LexPos {
    pub const ALL: [LexPos; 4] = [LexPos::Noun, LexPos::Verb, LexPos::Adj, LexPos::Adv];

    pub fn from_tag(pos: Pos) -> Option<LexPos> {
        match pos {
            Pos::Noun => Some(LexPos::Noun),
            Pos::Verb => Some(LexPos::Verb),
            Pos::Adj => Some(LexPos::Adj),
            Pos::Adv => Some(LexPos::Adv),
            Pos::Other => None,
        }
    }

    pub fn tag(self) -> Pos {
        match self {
            LexPos::Noun => Pos::Noun,
            LexPos::Verb => Pos::Verb,
            LexPos::Adj => Pos::Adj,
            LexPos::Adv => Pos::Adv,
        }
    }

    fn from_char(c: &str) -> Option<LexPos> {
        match c {
            "n" => Some(LexPos::Noun),
            "v" => Some(LexPos::Verb),
            "a" | "s" => Some(LexPos::Adj),
            "r" => Some(LexPos::Adv),
            _ => None,
        }
    }

    pub fn data_file_name(self) -> &'static str {
        match self {
            LexPos::Noun => "data.noun",
            LexPos::Verb => "data.verb",
            LexPos::Adj => "data.adj",
            LexPos::Adv => "data.adv",
        }
    }
}

pub type SynsetKey = (LexPos, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub key: SynsetKey,
    /// Lemmas with adjective markers removed; multiword lemmas keep their `_`.
    pub lemmas: Vec<String>,
    pub hypernyms: Vec<SynsetKey>,
    pub hyponyms: Vec<SynsetKey>,
    pub similar: Vec<SynsetKey>,
    pub gloss: String,
}

/// Gate parameters for taxonomy candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaxonomyGate {
    /// Maximum |log p(candidate) - log p(original)| at the mask, exclusive.
    pub score_delta_threshold: f64,
    /// Hyponyms must be reachable in fewer than this many edges.
    pub hyponym_max_depth: usize,
}

impl Default for TaxonomyGate {
    fn default() -> Self {
        TaxonomyGate {
            score_delta_threshold: 1.0,
            hyponym_max_depth: 3,
        }
    }
}

impl TaxonomyGate {
    pub fn validate(&self) -> Result<()> {
        if !(self.score_delta_threshold > 0.0) {
            return Err(Error::contract("score_delta_threshold must be positive"));
        }
        if self.hyponym_max_depth < 1 {
            return Err(Error::contract("hyponym_max_depth must be at least 1"));
        }
        Ok(())
    }
}

/// How a surface word relates to the lemma it was found under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inflection {
    Base,
    /// Plural noun or third-person verb.
    S,
    Past,
    Gerund,
}

/// Re-applies an inflection to a base-form lemma.
pub fn inflect(lemma: &str, inflection: Inflection) -> String {
    let ends_consonant_y = lemma.len() > 1
        && lemma.ends_with('y')
        && !matches!(lemma.as_bytes()[lemma.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u');
    let stem_y = || lemma[..lemma.len() - 1].to_string();
    match inflection {
        Inflection::Base => lemma.to_string(),
        Inflection::S => {
            if ["s", "x", "z", "ch", "sh"].iter().any(|s| lemma.ends_with(s)) {
                format!("{lemma}es")
            } else if ends_consonant_y {
                format!("{}ies", stem_y())
            } else {
                format!("{lemma}s")
            }
        }
        Inflection::Past => {
            if lemma.ends_with('e') {
                format!("{lemma}d")
            } else if ends_consonant_y {
                format!("{}ied", stem_y())
            } else {
                format!("{lemma}ed")
            }
        }
        Inflection::Gerund => {
            if lemma.ends_with('e') && !lemma.ends_with("ee") && lemma.len() > 2 {
                format!("{}ing", &lemma[..lemma.len() - 1])
            } else {
                format!("{lemma}ing")
            }
        }
    }
}

/// Detachment rules per part of speech: (suffix, replacement, inflection).
fn detachment_rules(pos: LexPos) -> &'static [(&'static str, &'static str, Inflection)] {
    match pos {
        LexPos::Noun => &[
            ("ies", "y", Inflection::S),
            ("ches", "ch", Inflection::S),
            ("shes", "sh", Inflection::S),
            ("ses", "s", Inflection::S),
            ("xes", "x", Inflection::S),
            ("zes", "z", Inflection::S),
            ("s", "", Inflection::S),
        ],
        LexPos::Verb => &[
            ("ies", "y", Inflection::S),
            ("es", "e", Inflection::S),
            ("es", "", Inflection::S),
            ("s", "", Inflection::S),
            ("ied", "y", Inflection::Past),
            ("ed", "e", Inflection::Past),
            ("ed", "", Inflection::Past),
            ("ing", "e", Inflection::Gerund),
            ("ing", "", Inflection::Gerund),
        ],
        LexPos::Adj | LexPos::Adv => &[],
    }
}

fn clean_lemma(raw: &str) -> String {
    let base = match raw.find('(') {
        Some(i) if raw.ends_with(')') => &raw[..i],
        _ => raw,
    };
    base.to_string()
}

pub fn is_multiword(lemma: &str) -> bool {
    lemma.contains('_') || lemma.contains(' ')
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    synsets: BTreeMap<SynsetKey, Synset>,
    index: BTreeMap<(LexPos, String), Vec<SynsetKey>>,
}

fn lex_err(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Lexicon {
        file: file.into(),
        line,
        message: message.into(),
    }
}

/// Parses one data file. Lines starting with two spaces (license header) are skipped.
pub fn parse_data_file(pos: LexPos, file_name: &str, contents: &str) -> Result<Vec<Synset>> {
    let mut out = Vec::new();
    let mut byte_offset = 0usize;
    for (i, raw_line) in contents.split_inclusive('\n').enumerate() {
        let line_no = i + 1;
        let line_start = byte_offset;
        byte_offset += raw_line.len();
        let line = raw_line.trim_end_matches(['\n', '\r']);
        if line.starts_with("  ") || line.trim().is_empty() {
            continue;
        }
        let (fields, gloss) = match line.split_once(" | ") {
            Some((f, g)) => (f, g.trim()),
            None => (line.trim_end_matches(" |"), ""),
        };
        let mut it = fields.split_ascii_whitespace();
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| lex_err(file_name, line_no, format!("missing {what}")))
        };
        let offset_str = next("offset")?;
        let offset: u64 = offset_str
            .parse()
            .map_err(|_| lex_err(file_name, line_no, format!("bad offset {offset_str:?}")))?;
        if offset != line_start as u64 {
            return Err(lex_err(
                file_name,
                line_no,
                format!("offset {offset} does not match byte position {line_start}"),
            ));
        }
        next("lexicographer file")?;
        let ss_type = next("synset type")?;
        let ss_pos = LexPos::from_char(ss_type)
            .ok_or_else(|| lex_err(file_name, line_no, format!("bad synset type {ss_type:?}")))?;
        if ss_pos != pos {
            return Err(lex_err(
                file_name,
                line_no,
                format!("synset type {ss_type:?} in a {pos:?} file"),
            ));
        }
        let w_cnt_str = next("word count")?;
        let w_cnt = usize::from_str_radix(w_cnt_str, 16)
            .map_err(|_| lex_err(file_name, line_no, format!("bad word count {w_cnt_str:?}")))?;
        let mut lemmas = Vec::with_capacity(w_cnt);
        for _ in 0..w_cnt {
            let word = next("word")?;
            next("lex id")?;
            lemmas.push(clean_lemma(word));
        }
        let p_cnt_str = next("pointer count")?;
        let p_cnt: usize = p_cnt_str
            .parse()
            .map_err(|_| lex_err(file_name, line_no, format!("bad pointer count {p_cnt_str:?}")))?;
        let mut synset = Synset {
            key: (pos, offset),
            lemmas,
            hypernyms: Vec::new(),
            hyponyms: Vec::new(),
            similar: Vec::new(),
            gloss: gloss.to_string(),
        };
        for _ in 0..p_cnt {
            let symbol = next("pointer symbol")?;
            let target_str = next("pointer offset")?;
            let target: u64 = target_str
                .parse()
                .map_err(|_| lex_err(file_name, line_no, format!("bad pointer offset {target_str:?}")))?;
            let target_pos_str = next("pointer pos")?;
            let target_pos = LexPos::from_char(target_pos_str)
                .ok_or_else(|| lex_err(file_name, line_no, format!("bad pointer pos {target_pos_str:?}")))?;
            next("source/target")?;
            let key = (target_pos, target);
            match symbol {
                "@" | "@i" => synset.hypernyms.push(key),
                "~" | "~i" => synset.hyponyms.push(key),
                "&" => synset.similar.push(key),
                _ => {}
            }
        }
        out.push(synset);
    }
    Ok(out)
}

impl Lexicon {
    /// Builds a lexicon from `(pos, file name, contents)` data files.
    pub fn from_data_files(files: &[(LexPos, &str, &str)]) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (pos, name, contents) in files {
            for synset in parse_data_file(*pos, name, contents)? {
                for lemma in &synset.lemmas {
                    let entry = lex.index.entry((*pos, lemma.to_lowercase())).or_default();
                    if !entry.contains(&synset.key) {
                        entry.push(synset.key);
                    }
                }
                lex.synsets.insert(synset.key, synset);
            }
        }
        lex.check_acyclic()?;
        Ok(lex)
    }

    /// The snapshot compiled into the crate.
    pub fn shipped() -> Self {
        Self::from_data_files(&[
            (LexPos::Noun, "data.noun", shipped::DATA_NOUN),
            (LexPos::Verb, "data.verb", shipped::DATA_VERB),
            (LexPos::Adj, "data.adj", shipped::DATA_ADJ),
            (LexPos::Adv, "data.adv", shipped::DATA_ADV),
        ])
        .expect("shipped lexicon parses")
    }

    pub fn synset_count(&self) -> usize {
        self.synsets.len()
    }

    pub fn synset(&self, key: SynsetKey) -> Option<&Synset> {
        self.synsets.get(&key)
    }

    fn check_acyclic(&self) -> Result<()> {
        for relation in [0u8, 1] {
            let edges = |s: &Synset| -> Vec<SynsetKey> {
                if relation == 0 { s.hypernyms.clone() } else { s.hyponyms.clone() }
            };
            // 0 = unvisited, 1 = on stack, 2 = done
            let mut state: BTreeMap<SynsetKey, u8> = BTreeMap::new();
            for &start in self.synsets.keys() {
                if state.contains_key(&start) {
                    continue;
                }
                let mut stack: Vec<(SynsetKey, usize)> = alloc::vec![(start, 0)];
                state.insert(start, 1);
                while let Some((node, child_idx)) = stack.pop() {
                    let children = self.synsets.get(&node).map(edges).unwrap_or_default();
                    if child_idx < children.len() {
                        stack.push((node, child_idx + 1));
                        let child = children[child_idx];
                        match state.get(&child) {
                            Some(1) => {
                                return Err(Error::Lexicon {
                                    file: child.0.data_file_name().into(),
                                    line: 0,
                                    message: format!("cycle through synset {}", child.1),
                                })
                            }
                            Some(_) => {}
                            None => {
                                state.insert(child, 1);
                                stack.push((child, 0));
                            }
                        }
                    } else {
                        state.insert(node, 2);
                    }
                }
            }
        }
        Ok(())
    }

    /// Synsets containing `word` (any case) or one of its base forms, with
    /// the inflection that was undone to find them.
    pub fn lookup(&self, word: &str, pos: LexPos) -> Option<(Vec<&Synset>, Inflection, String)> {
        let lower = word.to_lowercase();
        let find = |lemma: &str| {
            self.index.get(&(pos, lemma.to_string())).map(|keys| {
                keys.iter()
                    .filter_map(|k| self.synsets.get(k))
                    .collect::<Vec<_>>()
            })
        };
        if let Some(found) = find(&lower) {
            return Some((found, Inflection::Base, lower));
        }
        for (suffix, replacement, inflection) in detachment_rules(pos) {
            if let Some(stem) = lower.strip_suffix(suffix) {
                if stem.is_empty() {
                    continue;
                }
                let base = format!("{stem}{replacement}");
                if let Some(found) = find(&base) {
                    return Some((found, *inflection, base));
                }
            }
        }
        None
    }

    pub fn contains(&self, word: &str, pos: LexPos) -> bool {
        self.lookup(word, pos).is_some()
    }

    /// Other lemmas sharing a synset with `word`, in file order.
    pub fn synonyms(&self, word: &str, pos: LexPos) -> Vec<String> {
        let Some((synsets, _, base)) = self.lookup(word, pos) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for s in synsets {
            for l in &s.lemmas {
                if l.to_lowercase() != base && !out.contains(l) {
                    out.push(l.clone());
                }
            }
        }
        out
    }

    pub fn hypernyms(&self, word: &str, pos: LexPos) -> Vec<String> {
        let Some((synsets, _, _)) = self.lookup(word, pos) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for s in synsets {
            for k in &s.hypernyms {
                if let Some(h) = self.synsets.get(k) {
                    for l in &h.lemmas {
                        if !out.contains(l) {
                            out.push(l.clone());
                        }
                    }
                }
            }
        }
        out
    }

    /// Hyponym lemmas reachable in fewer than `max_depth` edges, nearest first.
    pub fn hyponyms(&self, word: &str, pos: LexPos, max_depth: usize) -> Vec<String> {
        let Some((synsets, _, _)) = self.lookup(word, pos) else {
            return Vec::new();
        };
        let mut seen: BTreeSet<SynsetKey> = synsets.iter().map(|s| s.key).collect();
        let mut queue: VecDeque<(SynsetKey, usize)> = synsets.iter().map(|s| (s.key, 0)).collect();
        let mut out = Vec::new();
        while let Some((key, depth)) = queue.pop_front() {
            let Some(s) = self.synsets.get(&key) else { continue };
            if depth + 1 >= max_depth {
                continue;
            }
            for child in &s.hyponyms {
                if seen.insert(*child) {
                    if let Some(c) = self.synsets.get(child) {
                        for l in &c.lemmas {
                            if !out.contains(l) {
                                out.push(l.clone());
                            }
                        }
                    }
                    queue.push_back((*child, depth + 1));
                }
            }
        }
        out
    }

    /// Single-word replacement candidates for `word`: synonyms, direct
    /// hypernyms and depth-bounded hyponyms, re-inflected like `word`.
    pub fn lexical_candidates(&self, word: &str, pos: LexPos, gate: &TaxonomyGate) -> Vec<String> {
        let Some((_, inflection, base)) = self.lookup(word, pos) else {
            return Vec::new();
        };
        let mut out: Vec<String> = Vec::new();
        let lemmas = self
            .synonyms(word, pos)
            .into_iter()
            .chain(self.hypernyms(word, pos))
            .chain(self.hyponyms(word, pos, gate.hyponym_max_depth));
        for lemma in lemmas {
            let lower = lemma.to_lowercase();
            if is_multiword(&lower) || lower == base {
                continue;
            }
            let surface = inflect(&lower, inflection);
            if surface != word.to_lowercase() && !out.contains(&surface) {
                out.push(surface);
            }
        }
        out
    }

    /// All lemma strings of one part of speech (lowercased), sorted.
    pub fn lemmas(&self, pos: LexPos) -> Vec<&str> {
        self.index
            .keys()
            .filter(|(p, _)| *p == pos)
            .map(|(_, l)| l.as_str())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn shipped_lexicon_parses() {
        let lex = Lexicon::shipped();
        assert!(lex.synset_count() > 100);
        assert_eq!(lex.synonyms("hate", LexPos::Verb), vec!["detest".to_string()]);
        assert_eq!(lex.hypernyms("hate", LexPos::Verb), vec!["dislike".to_string()]);
        assert!(lex.synonyms("Movie", LexPos::Noun).contains(&"film".to_string()));
        assert!(lex.synonyms("sad", LexPos::Adj).contains(&"unhappy".to_string()));
        assert!(lex.contains("sad", LexPos::Adj));
    }

    #[test]
    fn hyponym_depth_is_exclusive() {
        let lex = Lexicon::shipped();
        let d1 = lex.hyponyms("show", LexPos::Noun, 1);
        let d2 = lex.hyponyms("show", LexPos::Noun, 2);
        let d3 = lex.hyponyms("show", LexPos::Noun, 3);
        assert!(d1.is_empty());
        assert!(d2.contains(&"film".to_string()) && !d2.contains(&"comedy".to_string()));
        assert!(d3.contains(&"comedy".to_string()) && !d3.contains(&"farce".to_string()));
        assert!(d2.iter().all(|w| d3.contains(w)));
    }

    #[test]
    fn candidates_exclude_self_and_multiword() {
        let lex = Lexicon::shipped();
        let c = lex.lexical_candidates("film", LexPos::Noun, &TaxonomyGate::default());
        assert!(c.contains(&"movie".to_string()));
        assert!(c.contains(&"show".to_string()));
        assert!(c.contains(&"documentary".to_string()));
        assert!(!c.iter().any(|w| w == "film" || w.contains('_')));
        assert!(lex.lexical_candidates("qwerty", LexPos::Noun, &TaxonomyGate::default()).is_empty());
    }

    #[test]
    fn inflected_lookup_reinflects() {
        let lex = Lexicon::shipped();
        let c = lex.lexical_candidates("films", LexPos::Noun, &TaxonomyGate::default());
        assert!(c.contains(&"movies".to_string()));
        let c = lex.lexical_candidates("hated", LexPos::Verb, &TaxonomyGate::default());
        assert!(c.contains(&"detested".to_string()));
        assert_eq!(inflect("comedy", Inflection::S), "comedies");
        assert_eq!(inflect("loathe", Inflection::Gerund), "loathing");
    }

    #[test]
    fn rejects_bad_offsets_and_cycles() {
        let bad = "00000007 03 n 01 thing 0 000 | x\n";
        assert!(matches!(
            parse_data_file(LexPos::Noun, "data.noun", bad),
            Err(Error::Lexicon { line: 1, .. })
        ));
        let a = "00000000 03 n 01 a 0 001 @ 00000031 n 0000 | x\n";
        let b = "00000031 03 n 01 b 0 001 @ 00000000 n 0000 | y\n";
        let text = alloc::format!("{a}{b}");
        assert!(Lexicon::from_data_files(&[(LexPos::Noun, "data.noun", &text)]).is_err());
    }
}
