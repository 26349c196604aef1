//! Dictionary part-of-speech tagger with suffix fallbacks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text::token_core;

const SHIPPED_TAGS: &str = include_str!("../data/tags.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pos {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

impl Pos {
    pub fn is_content(self) -> bool {
        !matches!(self, Pos::Other)
    }

    fn parse(s: &str) -> Option<Pos> {
        Some(match s {
            "NOUN" => Pos::Noun,
            "VERB" => Pos::Verb,
            "ADJ" => Pos::Adj,
            "ADV" => Pos::Adv,
            "OTHER" => Pos::Other,
            _ => return None,
        })
    }
}

/// Inflectional endings tried when a word is missing from the dictionary:
/// (suffix, replacement, part of speech of the base form).
const INFLECTIONS: [(&str, &str, Pos); 10] = [
    ("ies", "y", Pos::Noun),
    ("ies", "y", Pos::Verb),
    ("es", "", Pos::Noun),
    ("s", "", Pos::Noun),
    ("s", "", Pos::Verb),
    ("ied", "y", Pos::Verb),
    ("ed", "e", Pos::Verb),
    ("ed", "", Pos::Verb),
    ("ing", "e", Pos::Verb),
    ("ing", "", Pos::Verb),
];

const SUFFIXES: [(&str, Pos); 20] = [
    ("ly", Pos::Adv),
    ("ing", Pos::Verb),
    ("ed", Pos::Verb),
    ("ize", Pos::Verb),
    ("ise", Pos::Verb),
    ("ous", Pos::Adj),
    ("ful", Pos::Adj),
    ("ive", Pos::Adj),
    ("able", Pos::Adj),
    ("ible", Pos::Adj),
    ("less", Pos::Adj),
    ("ic", Pos::Adj),
    ("al", Pos::Adj),
    ("tion", Pos::Noun),
    ("sion", Pos::Noun),
    ("ment", Pos::Noun),
    ("ness", Pos::Noun),
    ("ity", Pos::Noun),
    ("ship", Pos::Noun),
    ("ism", Pos::Noun),
];

#[derive(Debug, Clone)]
pub struct Tagger {
    dict: BTreeMap<String, Pos>,
}

impl Default for Tagger {
    fn default() -> Self {
        Self::shipped()
    }
}

impl Tagger {
    /// Tagger over the dictionary compiled into this crate.
    pub fn shipped() -> Self {
        Self::from_tsv(SHIPPED_TAGS)
    }

    /// Reads `word<TAB>TAG` lines; `#` starts a comment, bad lines are skipped.
    pub fn from_tsv(tsv: &str) -> Self {
        let dict = tsv
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(|l| {
                let (w, t) = l.split_once('\t')?;
                Some((w.trim().to_lowercase(), Pos::parse(t.trim())?))
            })
            .collect();
        Tagger { dict }
    }

    pub fn lookup(&self, word: &str) -> Option<Pos> {
        self.dict.get(&word.to_lowercase()).copied()
    }

    /// Tag of a single token (surrounding punctuation ignored).
    pub fn tag_word(&self, token: &str) -> Pos {
        let core = token_core(token);
        if core.is_empty() {
            return Pos::Other;
        }
        let lower = core.to_lowercase();
        if let Some(p) = self.dict.get(&lower) {
            return *p;
        }
        for (suffix, replacement, pos) in INFLECTIONS {
            if let Some(stem) = lower.strip_suffix(suffix) {
                if stem.len() < 2 {
                    continue;
                }
                let mut base = stem.to_string();
                base.push_str(replacement);
                if self.dict.get(&base) == Some(&pos) {
                    return pos;
                }
            }
        }
        if core.chars().next().is_some_and(char::is_uppercase) {
            return Pos::Noun;
        }
        if lower.len() > 4 {
            for (suffix, pos) in SUFFIXES {
                if lower.ends_with(suffix) {
                    return pos;
                }
            }
        }
        Pos::Other
    }

    /// Tags every whitespace token of `text`, in order.
    pub fn tag(&self, text: &str) -> Vec<(String, Pos)> {
        text.split_whitespace()
            .map(|t| (t.to_string(), self.tag_word(t)))
            .collect()
    }

    /// Capitalized word the dictionary does not know, e.g. a person's name.
    pub fn is_proper_noun(&self, token: &str) -> bool {
        let core = token_core(token);
        core.chars().next().is_some_and(char::is_uppercase)
            && core.chars().all(char::is_alphabetic)
            && !self.dict.contains_key(&core.to_lowercase())
    }
}

/// Tags `text` with the shipped dictionary.
pub fn pos_tag(text: &str) -> Vec<(String, Pos)> {
    Tagger::shipped().tag(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn shipped_dictionary_examples() {
        let tags = pos_tag("I hate films");
        assert_eq!(
            tags,
            vec![
                ("I".to_string(), Pos::Other),
                ("hate".to_string(), Pos::Verb),
                ("films".to_string(), Pos::Noun)
            ]
        );
        assert!(pos_tag("").is_empty());
        assert_eq!(pos_tag("The plot was dull."), pos_tag("The plot was dull."));
    }

    #[test]
    fn fallbacks() {
        let t = Tagger::shipped();
        assert_eq!(t.tag_word("Mary"), Pos::Noun);
        assert!(t.is_proper_noun("Mary"));
        assert!(!t.is_proper_noun("I"));
        assert!(!t.is_proper_noun("The"));
        assert_eq!(t.tag_word("quietly"), Pos::Adv);
        assert_eq!(t.tag_word("hated"), Pos::Verb);
        assert_eq!(t.tag_word("zzz"), Pos::Other);
        assert_eq!(t.tag_word("..."), Pos::Other);
    }
}
