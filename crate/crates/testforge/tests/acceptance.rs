//! Acceptance checks, one line per criterion. Runs offline against the mock
//! registry and small hand-built fixtures; every oracle below is written
//! independently of the code it checks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use testforge::mock::LexiconClassifier;
use testforge::modelio::{mock_ids, mock_registry};
use testforge::store;
use testforge_core::attack::pso::Evaluation;
use testforge_core::attack::{deepwordbug_attack, pso_search, AttackBudget, PsoParams};
use testforge_core::eval::{evaluate_suite, parse_llm_answer, EvalReport, ParsedAnswer, Subject};
use testforge_core::expand::{fairness_expand, mlm_gate, taxonomy_expand, AttributeLexicon, FAIRNESS_CATEGORIES};
use testforge_core::hashing::stream_rng;
use testforge_core::instantiate::{
    build_initial_suite, instantiate_template, mask_expand, select_for_masking, InstantiationConfig,
};
use testforge_core::lexicon::{LexPos, Lexicon, TaxonomyGate};
use testforge_core::model::{Classifier, ClassifyResult, FillResult, MaskFiller, ModelError};
use testforge_core::pos::Tagger;
use testforge_core::types::{derive_case, CapabilityTag, Decision, TemplateText};
use testforge_core::verify::{consistency_score, route, PolicyMode, VotingPanel};
use testforge_core::{Fraction, SlotTemplate, Stage, TaskSpec, TestCase, TestSuite};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [(u32, &str, Check, u64); 10] = [
        (1, "consistency score equals popcount/N", c1_score, 1),
        (2, "three-way routing and final filter", c2_routing, 1),
        (3, "instantiation counts and determinism", c3_instantiation, 5),
        (4, "mask-expansion counts", c4_mask_expand, 5),
        (5, "taxonomy properties", c5_taxonomy, 10),
        (6, "fairness subsequence property", c6_fairness, 2),
        (7, "DeepWordBug edit budget", c7_deepwordbug, 30),
        (8, "PSO versus brute force", c8_pso, 60),
        (9, "end-to-end determinism and failure rate", c9_end_to_end, 300),
        (10, "answer parsing", c10_parsing, 1),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout();
    for (n, name, check, limit_secs) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let limit = Duration::from_secs(limit_secs);
        let (status, detail) = match result {
            Ok(d) if took < limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took longer than {limit_secs}s")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        writeln!(out, "{status} criterion {n}: {name} ({:.2}s) {detail}", took.as_secs_f64()).unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1 and 2

struct Fixed(String, u32);

impl Classifier for Fixed {
    fn id(&self) -> &str {
        &self.0
    }
    fn classify(&self, _texts: &[String]) -> Result<ClassifyResult, ModelError> {
        ClassifyResult::from_probabilities(if self.1 == 0 { vec![0.9, 0.1] } else { vec![0.1, 0.9] })
    }
}

fn c1_score() -> Result<String, String> {
    let case = TestCase::original(vec!["I hate rain.".into()], 0, "t", "");
    let mut vectors = 0;
    for n in 2..=8u32 {
        for bits in 0..(1u32 << n) {
            let models: Vec<Fixed> =
                (0..n).map(|i| Fixed(format!("m{i}"), if bits >> i & 1 == 1 { 0 } else { 1 })).collect();
            let panel = VotingPanel::new(models.iter().map(|m| m as &dyn Classifier).collect()).map_err(|e| e.to_string())?;
            let (score, _) = consistency_score(&panel, &case).map_err(|e| e.to_string())?;
            let k = u64::from(bits.count_ones());
            ensure!(score.numer() * u64::from(n) == k * score.denom(), "N={n} votes={bits:b}: got {score}");
            vectors += 1;
        }
    }
    Ok(format!("{vectors} vote vectors"))
}

fn c2_routing() -> Result<String, String> {
    let mut points = 0;
    for n in 1..=8u64 {
        for k in 0..=n {
            let s = Fraction::new(k, n);
            let want_pre = if k == n {
                Decision::Drop
            } else if 2 * k > n {
                Decision::Keep
            } else {
                Decision::Refine
            };
            let want_final = if k == n { Decision::Drop } else { Decision::Keep };
            ensure!(route(s, PolicyMode::Preliminary) == want_pre, "{k}/{n} preliminary");
            ensure!(route(s, PolicyMode::Final) == want_final, "{k}/{n} final");
            points += 1;
        }
    }
    let named = [
        (Fraction::ONE, PolicyMode::Preliminary, Decision::Drop),
        (Fraction::new(3, 5), PolicyMode::Preliminary, Decision::Keep),
        (Fraction::new(2, 5), PolicyMode::Preliminary, Decision::Refine),
        (Fraction::new(2, 4), PolicyMode::Preliminary, Decision::Refine),
        (Fraction::ONE, PolicyMode::Final, Decision::Drop),
        (Fraction::new(4, 5), PolicyMode::Final, Decision::Keep),
        (Fraction::ZERO, PolicyMode::Final, Decision::Keep),
    ];
    for (s, mode, want) in named {
        ensure!(route(s, mode) == want, "{s} {mode:?}");
    }
    Ok(format!("{points} reachable scores"))
}

// ---------------------------------------------------------------------------
// 3 and 4

fn template(text: &str, slots: &[(&str, Vec<String>)], label: u32) -> SlotTemplate {
    let mut t = SlotTemplate {
        id: String::new(),
        description: "fixture".into(),
        template: TemplateText(vec![text.into()]),
        label,
        pool: slots.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        example: String::new(),
        check_label: label,
        score: 9.5,
    };
    t.ensure_id();
    t
}

fn words(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn instantiate_to_file(t: &SlotTemplate, dir: &Path, name: &str) -> Result<(usize, Vec<u8>), String> {
    let cfg = InstantiationConfig { seed: 42, ..InstantiationConfig::default() };
    let cases = instantiate_template(t, &cfg, &mut stream_rng(42, &["instantiate", &t.id])).map_err(|e| e.to_string())?;
    let n = cases.len();
    let suite = build_initial_suite(cases, Vec::new(), &TaskSpec::sentiment("fixture"), 42);
    let path = dir.join(name);
    store::save_suite(&path, &suite).map_err(|e| e.to_string())?;
    Ok((n, std::fs::read(&path).map_err(|e| e.to_string())?))
}

fn c3_instantiation() -> Result<String, String> {
    let small = template(
        "{I} {neg_verb} {thing}.",
        &[
            ("I", words(&["me", "him", "she", "mary", "them"])),
            ("neg_verb", words(&["hate", "dislike"])),
            ("thing", words(&["basketball", "ball", "anything"])),
        ],
        0,
    );
    let pool = |p: &str| (0..10).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let cube = template("{a} then {b} then {c}", &[("a", pool("x")), ("b", pool("y")), ("c", pool("z"))], 1);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut sizes = Vec::new();
    for (t, want) in [(&small, 30), (&cube, 500)] {
        let (n1, a) = instantiate_to_file(t, dir.path(), "a.jsonl")?;
        let (n2, b) = instantiate_to_file(t, dir.path(), "b.jsonl")?;
        ensure!(n1 == want && n2 == want, "expected {want} cases, got {n1} and {n2}");
        ensure!(a == b, "suite files differ between runs");
        sizes.push(n1);
    }
    Ok(format!("{} and {} cases, byte-identical", sizes[0], sizes[1]))
}

const TEN: [&str; 10] = [
    "Tom loved the long movie.",
    "Ann hated the noisy show.",
    "The story was quite dull.",
    "We enjoyed the warm meal.",
    "Ben disliked every single song.",
    "The trip felt far too long.",
    "Mia praised the clever book.",
    "The class was really boring.",
    "Leo adored the final game.",
    "The party ended far too soon.",
];

fn one_token_apart(a: &str, b: &str) -> bool {
    let (a, b): (Vec<&str>, Vec<&str>) = (a.split_whitespace().collect(), b.split_whitespace().collect());
    a.len() == b.len() && a.iter().zip(&b).filter(|(x, y)| x != y).count() == 1
}

fn c4_mask_expand() -> Result<String, String> {
    let reg = mock_registry(42);
    let filler = reg.filler(mock_ids::FILL).map_err(|e| e.to_string())?;
    let cases: Vec<TestCase> =
        TEN.iter().enumerate().map(|(i, s)| TestCase::original(vec![s.to_string()], (i % 2) as u32, "fx", "")).collect();
    let cfg = InstantiationConfig { mask_select_fraction: 0.2, masks_per_case: 5, fills_per_mask: 10, ..Default::default() };
    let selected = select_for_masking(&cases, &cfg, &mut stream_rng(42, &["mask-select"]));
    ensure!(selected.len() == 2, "selected {} parents", selected.len());
    let out = mask_expand(&selected, &cfg, &Tagger::shipped(), filler.as_ref()).map_err(|e| e.to_string())?;
    ensure!(!out.cases.is_empty() && out.cases.len() <= 100, "{} children", out.cases.len());
    for child in &out.cases {
        let parent = selected.iter().find(|p| Some(p.id.as_str()) == child.parent_id()).ok_or("orphan child")?;
        ensure!(child.has_tag(CapabilityTag::Expand), "child without EXPAND tag");
        ensure!(one_token_apart(&parent.texts[0], &child.texts[0]), "{:?} -> {:?}", parent.texts, child.texts);
    }
    Ok(format!("2 parents, {} children", out.cases.len()))
}

// ---------------------------------------------------------------------------
// 5 and 6

/// Hyponym closure computed by walking `@` pointers backwards.
fn bfs_hyponyms(file: &str) -> BTreeMap<String, BTreeMap<String, usize>> {
    let path = format!("{}/../core/data/lexicon/{file}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(path).expect("lexicon data file");
    let mut lemmas: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    let mut children: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut index: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty() && !l.starts_with(' ')) {
        let f: Vec<&str> = line.split(" | ").next().unwrap().split_whitespace().collect();
        let off: u64 = f[0].parse().unwrap();
        let w = usize::from_str_radix(f[3], 16).unwrap();
        let ls: Vec<String> = (0..w).map(|i| f[4 + 2 * i].to_lowercase()).collect();
        for l in &ls {
            index.entry(l.clone()).or_default().push(off);
        }
        lemmas.insert(off, ls);
        let p = 4 + 2 * w;
        let count: usize = f[p].parse().unwrap();
        for i in 0..count {
            let sym = f[p + 1 + 4 * i];
            if sym == "@" || sym == "@i" {
                children.entry(f[p + 2 + 4 * i].parse().unwrap()).or_default().push(off);
            }
        }
    }
    let mut out = BTreeMap::new();
    for (word, starts) in &index {
        let mut depth: BTreeMap<u64, usize> = starts.iter().map(|s| (*s, 0)).collect();
        let mut queue: VecDeque<u64> = starts.iter().copied().collect();
        let mut found: BTreeMap<String, usize> = BTreeMap::new();
        while let Some(s) = queue.pop_front() {
            let d = depth[&s];
            for c in children.get(&s).into_iter().flatten() {
                if !depth.contains_key(c) {
                    depth.insert(*c, d + 1);
                    queue.push_back(*c);
                    for l in &lemmas[c] {
                        found.entry(l.clone()).or_insert(d + 1);
                    }
                }
            }
        }
        out.insert(word.clone(), found);
    }
    out
}

struct TableFiller(BTreeMap<&'static str, f64>);

impl MaskFiller for TableFiller {
    fn id(&self) -> &str {
        "table"
    }
    fn fill_mask(&self, _text: &str, _k: usize) -> Result<FillResult, ModelError> {
        Ok(FillResult { candidates: Vec::new() })
    }
    fn score_tokens(&self, _text: &str, tokens: &[&str]) -> Result<Vec<Option<f64>>, ModelError> {
        Ok(tokens.iter().map(|t| self.0.get(t).copied()).collect())
    }
}

const CORPUS: [(&str, u32); 10] = [
    ("Tom loved the film.", 1),
    ("The movie was awful.", 0),
    ("Maria hated the show.", 0),
    ("The waiter was rude to us.", 0),
    ("My friend enjoyed the comedy a lot.", 1),
    ("The teacher praised the documentary.", 1),
    ("Her brother disliked the thriller.", 0),
    ("The chef cooked a delicious meal.", 1),
    ("The actor gave a wonderful performance.", 1),
    ("The critic found the plot dull.", 0),
];

fn corpus() -> Vec<TestCase> {
    CORPUS.iter().map(|(t, l)| TestCase::original(vec![t.to_string()], *l, "corpus", "")).collect()
}

fn bare(w: &str) -> String {
    w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

fn c5_taxonomy() -> Result<String, String> {
    let lex = Lexicon::shipped();
    let tagger = Tagger::shipped();
    let gate = TaxonomyGate::default();
    let reg = mock_registry(42);
    let filler = reg.filler(mock_ids::FILL).map_err(|e| e.to_string())?;
    let mut children = 0;
    for (i, case) in corpus().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let out = taxonomy_expand(case, &lex, &tagger, filler.as_ref(), &gate, 20, &mut rng).map_err(|e| e.to_string())?;
        for child in &out.children {
            let (a, b): (Vec<&str>, Vec<&str>) =
                (case.texts[0].split_whitespace().collect(), child.texts[0].split_whitespace().collect());
            ensure!(a.len() == b.len(), "token count changed: {:?}", child.texts);
            let diff: Vec<usize> = (0..a.len()).filter(|&j| a[j] != b[j]).collect();
            ensure!(diff.len() == 1, "{:?} -> {:?}", case.texts, child.texts);
            let (old, new) = (bare(a[diff[0]]), bare(b[diff[0]]));
            ensure!(tagger.tag_word(&old) == tagger.tag_word(&new), "POS changed: {old} -> {new}");
        }
        children += out.children.len();
    }
    ensure!(children > 0, "no taxonomy children produced");

    let mut verified = 0;
    for (pos, file) in [(LexPos::Noun, "data.noun"), (LexPos::Verb, "data.verb")] {
        for (word, found) in bfs_hyponyms(file).iter().filter(|(w, _)| !w.contains('_')) {
            let got: BTreeSet<String> = lex.hyponyms(word, pos, gate.hyponym_max_depth).into_iter().collect();
            let want: BTreeSet<String> =
                found.iter().filter(|(_, d)| **d < gate.hyponym_max_depth).map(|(l, _)| l.clone()).collect();
            ensure!(got == want, "{pos:?} {word}: {got:?} != {want:?}");
            verified += got.len();
        }
    }

    let table = TableFiller(BTreeMap::from([("film", -1.0), ("movie", -1.99), ("picture", -2.0)]));
    let text = "Tom loved the film.";
    let near = mlm_gate(text, 3, "movie", &table, &gate).map_err(|e| e.to_string())?;
    let edge = mlm_gate(text, 3, "picture", &table, &gate).map_err(|e| e.to_string())?;
    ensure!(near.accepted, "delta 0.99 rejected");
    ensure!(!edge.accepted, "delta 1.00 accepted");
    Ok(format!("{children} children, {verified} hyponyms verified, gate boundary strict"))
}

fn c6_fairness() -> Result<String, String> {
    let attrs = AttributeLexicon::shipped();
    let tagger = Tagger::shipped();
    ensure!(FAIRNESS_CATEGORIES.len() == 5, "{} categories", FAIRNESS_CATEGORIES.len());
    let mut total = 0;
    for (i, case) in corpus().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let out = fairness_expand(case, &attrs, &tagger, 2, &mut rng).map_err(|e| e.to_string())?;
        ensure!(out.children.len() <= 10, "{} children for {:?}", out.children.len(), case.texts);
        for child in &out.children {
            let parent: Vec<String> = case.texts[0].split_whitespace().map(bare).collect();
            let kid: Vec<String> = child.texts[0].split_whitespace().map(bare).collect();
            let mut it = kid.iter();
            ensure!(parent.iter().all(|w| it.any(|k| k == w)), "{:?} not within {:?}", case.texts, child.texts);
        }
        total += out.children.len();
    }
    ensure!(total > 0, "no fairness children produced");
    Ok(format!("{total} children, all supersequences"))
}

// ---------------------------------------------------------------------------
// 7 and 8

fn dp_edit_distance(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..=a.len() {
        for j in 0..=b.len() {
            t[i][j] = if i == 0 {
                j
            } else if j == 0 {
                i
            } else {
                (t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1])).min(t[i - 1][j] + 1).min(t[i][j - 1] + 1)
            };
        }
    }
    t[a.len()][b.len()]
}

fn c7_deepwordbug() -> Result<String, String> {
    let victim = LexiconClassifier::variant("victim", 0);
    let budget = AttackBudget { max_levenshtein: 4, max_queries: 80, ..AttackBudget::default() };
    let subjects = ["Anna", "My uncle", "The critic", "Our team", "Everyone"];
    let verbs = [("loved", 1), ("hated", 0), ("enjoyed", 1), ("disliked", 0)];
    let things = ["the movie", "the ending", "the cast", "the music", "the plot"];
    let mut cases = Vec::new();
    for s in subjects {
        for (v, l) in verbs {
            for t in things {
                cases.push(TestCase::original(vec![format!("{s} {v} {t}.")], l, "fx", ""));
            }
        }
    }
    cases.truncate(100);
    ensure!(cases.len() == 100, "fixture has {} cases", cases.len());
    let mut successes = 0;
    for (i, case) in cases.iter().enumerate() {
        let r = deepwordbug_attack(case, &victim, &budget, &mut ChaCha8Rng::seed_from_u64(i as u64));
        ensure!(r.queries_used <= budget.max_queries, "{} queries", r.queries_used);
        if r.success {
            let d = dp_edit_distance(&r.original_texts[0], &r.adversarial_texts[0]);
            ensure!(d <= budget.max_levenshtein, "distance {d} for {:?}", r.adversarial_texts);
            successes += 1;
        }
    }
    Ok(format!("{successes}/100 successes, all within budget"))
}

fn c8_pso() -> Result<String, String> {
    let mut space_rng = ChaCha8Rng::seed_from_u64(8);
    let mut optimal = 0;
    for s in 0..50u64 {
        let (dims, table) = loop {
            let dims: Vec<usize> = (0..space_rng.gen_range(1..=4)).map(|_| space_rng.gen_range(1..=6)).collect();
            let size: usize = dims.iter().product();
            if (2..=64).contains(&size) {
                break (dims.clone(), (0..size).map(|_| space_rng.gen::<f64>()).collect::<Vec<f64>>());
            }
        };
        let f = |x: &[usize]| table[x.iter().zip(&dims).fold(0, |acc, (&xi, &d)| acc * d + xi)];
        let brute = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let out = pso_search::<_, (), _>(&dims, &PsoParams::default(), 500, &mut ChaCha8Rng::seed_from_u64(s), |x| {
            Ok(Evaluation { fitness: f(x), success: false })
        })
        .map_err(|_| "search failed".to_string())?;
        let best = out.best_eval.map(|e| e.fitness).ok_or("no evaluation")?;
        if best == brute {
            optimal += 1;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + s);
        let mut draws: Vec<f64> = (0..20)
            .map(|_| {
                (0..out.evaluations.max(1))
                    .map(|_| f(&dims.iter().map(|&d| rng.gen_range(0..d)).collect::<Vec<_>>()))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let median = (draws[9] + draws[10]) / 2.0;
        ensure!(best >= median, "space {s}: {best} below random median {median}");
    }
    ensure!(optimal >= 40, "optimum found in only {optimal}/50 spaces");
    Ok(format!("optimum in {optimal}/50 spaces"))
}

// ---------------------------------------------------------------------------
// 9

const STAGES: [&str; 5] = ["T_o", "T_1", "T_c", "T_adv_rob", "T_final"];

fn run_cli(dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_testforge"))
        .args(["run", "--offline", "--seed", "42", "--output-dir"])
        .arg(dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(())
}

/// Ten cases, a subject that gets exactly three of them wrong.
fn thirty_percent_fixture() -> Result<EvalReport, String> {
    struct Table(Vec<(String, u32)>);
    impl Classifier for Table {
        fn id(&self) -> &str {
            "table"
        }
        fn classify(&self, texts: &[String]) -> Result<ClassifyResult, ModelError> {
            let l = self.0.iter().find(|(t, _)| *t == texts[0]).map_or(0, |x| x.1);
            ClassifyResult::from_probabilities(if l == 0 { vec![0.7, 0.3] } else { vec![0.2, 0.8] })
        }
    }
    let rows = [
        ("fine", 1, 1),
        ("grim", 0, 0),
        ("warm", 1, 0),
        ("cold", 0, 0),
        ("neat", 1, 1),
        ("drab", 0, 1),
        ("kind", 1, 1),
        ("mean", 0, 0),
        ("bright", 1, 0),
        ("bleak", 0, 0),
    ];
    let mut suite = TestSuite::new("fixture", Stage::Final, 42, TaskSpec::sentiment("fixture"));
    for (i, (t, l, _)) in rows.iter().enumerate() {
        let root = TestCase::original(vec![format!("a {t} day")], *l, "tpl", "");
        suite.cases.push(if i % 3 == 0 {
            derive_case(&root, vec![format!("a {t} day!")], "taxonomy", Some(CapabilityTag::Taxonomy), "").unwrap()
        } else {
            root
        });
    }
    let subject = Table(
        rows.iter()
            .enumerate()
            .map(|(i, (t, _, p))| (if i % 3 == 0 { format!("a {t} day!") } else { format!("a {t} day") }, *p))
            .collect(),
    );
    evaluate_suite(&suite, Subject::Classify(&subject)).map(|(r, _)| r).map_err(|e| e.to_string())
}

fn c9_end_to_end() -> Result<String, String> {
    let fixture = thirty_percent_fixture()?;
    ensure!(
        (fixture.failures, fixture.total) == (3, 10) && fixture.failure_rate.percent() == "30.00%",
        "fixture gave {}/{} = {}",
        fixture.failures,
        fixture.total,
        fixture.failure_rate.percent()
    );

    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_cli(a.path())?;
    run_cli(b.path())?;
    let mut sizes = Vec::new();
    for stage in STAGES {
        let name = format!("{stage}.jsonl");
        let x = std::fs::read(a.path().join(&name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.path().join(&name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(x == y, "{name} differs between runs");
        sizes.push(format!("{stage}={}", x.iter().filter(|c| **c == b'\n').count()));
    }

    // Recount the subject's mistakes on T_final directly.
    let final_suite = store::load_suite(&a.path().join("T_final.jsonl")).map_err(|e| e.to_string())?;
    let subject = mock_registry(42).classifier(mock_ids::SUBJECT).map_err(|e| e.to_string())?;
    let mut wrong = 0u64;
    for case in &final_suite.cases {
        let p = subject.classify(&case.texts).map_err(|e| e.to_string())?.probabilities;
        let argmax = (0..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best });
        if argmax as u32 != case.expected_label {
            wrong += 1;
        }
    }
    let report_path = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| {
            let n = p.file_name().unwrap().to_string_lossy().into_owned();
            n.starts_with("report_") && n.contains("final") && n.contains(mock_ids::SUBJECT) && n.ends_with(".json")
        })
        .ok_or("no T_final report for the subject")?;
    let report: EvalReport =
        serde_json::from_str(&std::fs::read_to_string(&report_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let total = final_suite.cases.len() as u64;
    ensure!(report.total as u64 == total, "report total {} vs {total}", report.total);
    ensure!(report.failures as u64 == wrong, "report says {} failures, recount {wrong}", report.failures);
    ensure!(report.failure_rate == Fraction::new(wrong, total), "rate {}", report.failure_rate);
    let rb = std::fs::read(b.path().join(report_path.file_name().unwrap())).map_err(|e| e.to_string())?;
    ensure!(rb == std::fs::read(&report_path).unwrap(), "reports differ between runs");
    Ok(format!("{}; fixture 30.00%; T_final {wrong}/{total} = {}", sizes.join(" "), report.failure_rate.percent()))
}

// ---------------------------------------------------------------------------
// 10

fn c10_parsing() -> Result<String, String> {
    use ParsedAnswer::{Label, Unparseable as U};
    let sa = TaskSpec::sentiment("reviews");
    let sts = TaskSpec::similarity("news");
    let standard = [
        (&sa, "Ans=negative-0", Label(0)),
        (&sa, "Ans=positive-1", Label(1)),
        (&sts, "Ans=dissimilarity-0", Label(0)),
        (&sts, "Ans=similarity-1", Label(1)),
    ];
    let huge = "Ans".repeat(50_000);
    let hostile: [&str; 22] = [
        "",
        " ",
        "Ans",
        "Ans=",
        "Ans==",
        "=positive-1",
        "Ans=positive-9",
        "Ans=-1",
        "Ans=nan",
        "Ans=positive-1-0",
        "\u{0000}Ans=\u{0000}",
        "Ans=\u{202E}evitisop",
        "Ａｎｓ＝ｐｏｓｉｔｉｖｅ",
        "ans=ünïcödé",
        "Ans=99999999999999999999999",
        "```Ans=positive-1```",
        "Ans=\n\n\n",
        "Ans=positive-1 or Ans=negative-0?",
        "<Ans>=1",
        "answer is Ans=neutral",
        "\r\nAns\t=\tnegative-0\r\n",
        &huge,
    ];
    for (task, reply, want) in standard {
        ensure!(parse_llm_answer(reply, task) == want, "{reply:?}");
    }
    let mut labels = 0;
    for reply in hostile {
        for task in [&sa, &sts] {
            match catch_unwind(|| parse_llm_answer(reply, task)) {
                Ok(Label(l)) => {
                    ensure!(l < 2, "{reply:?} gave label {l}");
                    labels += 1;
                }
                Ok(U) => {}
                Err(_) => return Err(format!("parser panicked on {reply:?}")),
            }
        }
    }
    Ok(format!("4 standard formats, {} hostile replies handled ({labels} labelled)", hostile.len()))
}
