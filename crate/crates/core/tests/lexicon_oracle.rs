//! Lexicon traversal checked against a second, deliberately different reader
//! of the shipped data files: it follows hypernym pointers backwards instead
//! of hyponym pointers forwards.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use testforge_core::lexicon::{LexPos, Lexicon, TaxonomyGate};

struct Oracle {
    /// synset offset -> lemmas
    lemmas: BTreeMap<u64, Vec<String>>,
    /// synset offset -> child offsets, built from `@` pointers of the children
    children: BTreeMap<u64, BTreeSet<u64>>,
    parents: BTreeMap<u64, BTreeSet<u64>>,
    /// lowercased lemma -> synsets
    index: BTreeMap<String, BTreeSet<u64>>,
}

fn read_data(file: &str) -> String {
    let path = format!("{}/data/lexicon/{file}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

impl Oracle {
    fn load(file: &str) -> Oracle {
        let text = read_data(file);
        let mut o = Oracle {
            lemmas: BTreeMap::new(),
            children: BTreeMap::new(),
            parents: BTreeMap::new(),
            index: BTreeMap::new(),
        };
        for line in text.lines().filter(|l| !l.starts_with(' ') && !l.is_empty()) {
            let head = line.split(" | ").next().unwrap();
            let f: Vec<&str> = head.split(' ').filter(|s| !s.is_empty()).collect();
            let offset: u64 = f[0].parse().unwrap();
            let words = usize::from_str_radix(f[3], 16).unwrap();
            let lemmas: Vec<String> = (0..words).map(|i| f[4 + 2 * i].to_string()).collect();
            for l in &lemmas {
                o.index.entry(l.to_lowercase()).or_default().insert(offset);
            }
            o.lemmas.insert(offset, lemmas);
            let mut p = 4 + 2 * words;
            let pointers: usize = f[p].parse().unwrap();
            p += 1;
            for _ in 0..pointers {
                if f[p] == "@" || f[p] == "@i" {
                    let parent: u64 = f[p + 1].parse().unwrap();
                    o.children.entry(parent).or_default().insert(offset);
                    o.parents.entry(offset).or_default().insert(parent);
                }
                p += 4;
            }
        }
        o
    }

    /// Lemmas of synsets strictly below `word`'s synsets, with their BFS depth.
    fn hyponym_depths(&self, word: &str) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        let Some(start) = self.index.get(word) else { return out };
        let mut depth: BTreeMap<u64, usize> = start.iter().map(|s| (*s, 0)).collect();
        let mut queue: VecDeque<u64> = start.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            let d = depth[&s];
            for c in self.children.get(&s).into_iter().flatten() {
                if !depth.contains_key(c) {
                    depth.insert(*c, d + 1);
                    queue.push_back(*c);
                    for l in &self.lemmas[c] {
                        out.entry(l.clone()).or_insert(d + 1);
                    }
                }
            }
        }
        out
    }

    fn related_within(&self, word: &str, max_depth: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for s in self.index.get(word).into_iter().flatten() {
            out.extend(self.lemmas[s].iter().cloned());
            for p in self.parents.get(s).into_iter().flatten() {
                out.extend(self.lemmas[p].iter().cloned());
            }
        }
        out.extend(self.hyponym_depths(word).into_iter().filter(|(_, d)| *d < max_depth).map(|(l, _)| l));
        out.into_iter().map(|l| l.to_lowercase()).collect()
    }
}

const FILES: [(LexPos, &str); 2] = [(LexPos::Noun, "data.noun"), (LexPos::Verb, "data.verb")];

#[test]
fn hyponyms_match_reverse_hypernym_bfs_within_depth() {
    let lex = Lexicon::shipped();
    let max_depth = TaxonomyGate::default().hyponym_max_depth;
    let mut checked = 0;
    for (pos, file) in FILES {
        let oracle = Oracle::load(file);
        for word in oracle.index.keys().filter(|w| !w.contains('_')) {
            let got: BTreeSet<String> = lex.hyponyms(word, pos, max_depth).into_iter().collect();
            let depths = oracle.hyponym_depths(word);
            let want: BTreeSet<String> =
                depths.iter().filter(|(_, d)| **d < max_depth).map(|(l, _)| l.clone()).collect();
            assert_eq!(got, want, "{pos:?} {word}");
            for l in &got {
                assert!(depths[l] < max_depth);
            }
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} lemmas checked");
}

#[test]
fn every_taxonomy_candidate_is_a_bounded_relative() {
    let lex = Lexicon::shipped();
    let gate = TaxonomyGate::default();
    for (pos, file) in FILES {
        let oracle = Oracle::load(file);
        for word in oracle.index.keys().filter(|w| !w.contains('_')) {
            let allowed = oracle.related_within(word, gate.hyponym_max_depth);
            for cand in lex.lexical_candidates(word, pos, &gate) {
                assert!(allowed.contains(&cand), "{pos:?} {word} -> {cand}");
                assert_ne!(&cand, word);
                assert!(!cand.contains(' ') && !cand.contains('_'));
            }
        }
    }
}

#[test]
fn pointer_files_are_mutually_consistent() {
    // Every `~` pointer should be mirrored by an `@` pointer and vice versa.
    let lex = Lexicon::shipped();
    for (pos, file) in FILES {
        let oracle = Oracle::load(file);
        for (parent, kids) in &oracle.children {
            let s = lex.synset((pos, *parent)).expect("parent synset present");
            let forward: BTreeSet<u64> = s.hyponyms.iter().map(|k| k.1).collect();
            assert_eq!(&forward, kids, "{pos:?} {parent}");
        }
    }
}
