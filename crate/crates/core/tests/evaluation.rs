use proptest::prelude::*;
use testforge_core::eval::{
    answer_format, evaluate_suite, parse_llm_answer, render_csv, render_markdown, unweighted_mean, ParsedAnswer,
    Subject,
};
use testforge_core::model::{ChatModel, Classifier, ClassifyResult, ModelError};
use testforge_core::types::{derive_case, CapabilityTag};
use testforge_core::{Fraction, Stage, TaskSpec, TestCase, TestSuite};

fn sa() -> TaskSpec {
    TaskSpec::sentiment("movie reviews")
}

fn sts() -> TaskSpec {
    TaskSpec::similarity("news")
}

#[test]
fn answer_formats_shown_to_subjects() {
    assert_eq!(answer_format(&sa()), "Ans=negative-0/positive-1");
    assert_eq!(answer_format(&sts()), "Ans=dissimilarity-0/similarity-1");
}

#[test]
fn adversarial_answer_fixtures() {
    use ParsedAnswer::{Label, Unparseable as U};
    let long = "ans ".repeat(10_000);
    let (sa, sts) = (sa(), sts());
    let fixtures: Vec<(&TaskSpec, &str, ParsedAnswer)> = vec![
        (&sa, "Ans=negative-0", Label(0)),
        (&sa, "ANS = positive-1.", Label(1)),
        (&sa, "I think it's positive", U),
        (&sts, "Ans=dissimilarity-0", Label(0)),
        (&sts, "Ans=similarity-1", Label(1)),
        (&sa, "", U),
        (&sa, "Ans=", U),
        (&sa, "Ans=neutral-2", U),
        (&sa, "Answer: positive", U),
        (&sa, "ans=1", Label(1)),
        (&sa, "ans=7", U),
        (&sa, "Reasoning first.\nAns = \"negative-0\"", Label(0)),
        (&sa, "Ans=[positive-1]", Label(1)),
        (&sa, "trans=positive", U),
        (&sa, "Ans=positively", U),
        (&sa, "Ans=positive-1\nAns=negative-0", Label(1)),
        (&sa, "Ans=\u{1F4A5}\u{00E9}", U),
        (&sa, "ans==negative", U),
        (&sa, "The ans is positive", U),
        (&sa, "**Ans=**negative-0", Label(0)),
        (&sa, "ANS=NEGATIVE-0", Label(0)),
        (&sa, "Ans = 0 (negative)", Label(0)),
        (&sa, long.as_str(), U),
        (&sts, "ans: similarity\nans=dissimilarity", Label(0)),
    ];
    assert!(fixtures.len() >= 20);
    for (task, reply, want) in fixtures {
        assert_eq!(parse_llm_answer(reply, task), want, "{reply:?}");
    }
}

proptest! {
    #[test]
    fn parser_is_total(reply in "\\PC{0,200}") {
        let _ = parse_llm_answer(&reply, &sa());
        let _ = parse_llm_answer(&reply, &sts());
    }

    #[test]
    fn parser_reads_back_every_formatted_answer(label in 0u32..2, pad in "[ \t]{0,3}", prefix in "[a-z .]{0,30}") {
        let task = sa();
        let name = &task.label(label).unwrap().name;
        let reply = format!("{prefix}\nAns{pad}={pad}{name}-{label}");
        prop_assert_eq!(parse_llm_answer(&reply, &task), ParsedAnswer::Label(label));
    }
}

/// Predicts by looking the text up in a fixed table.
struct Lookup(Vec<(String, u32)>);

impl Classifier for Lookup {
    fn id(&self) -> &str {
        "lookup"
    }
    fn classify(&self, texts: &[String]) -> Result<ClassifyResult, ModelError> {
        let label = self.0.iter().find(|(t, _)| *t == texts[0]).map(|x| x.1).unwrap_or(0);
        ClassifyResult::from_probabilities(if label == 0 { vec![0.8, 0.2] } else { vec![0.3, 0.7] })
    }
}

fn ten_case_suite() -> (TestSuite, Lookup) {
    let rows = [
        ("a good film", 1, 1),
        ("a bad film", 0, 0),
        ("a fine plot", 1, 0),
        ("a dull plot", 0, 0),
        ("great acting", 1, 1),
        ("weak acting", 0, 1),
        ("lovely music", 1, 1),
        ("awful music", 0, 0),
        ("nice ending", 1, 0),
        ("poor ending", 0, 0),
    ];
    let mut suite = TestSuite::new("fixture", Stage::Final, 42, sa());
    for (i, (t, expected, _)) in rows.iter().enumerate() {
        let root = TestCase::original(vec![t.to_string()], *expected, &format!("tpl-{}", i % 2), "");
        let case = if i < 4 {
            derive_case(&root, vec![format!("{t}!")], "taxonomy", Some(CapabilityTag::Taxonomy), "").unwrap()
        } else {
            root
        };
        suite.cases.push(case);
    }
    (suite, Lookup(rows.iter().enumerate().map(|(i, (t, _, p))| (if i < 4 { format!("{t}!") } else { t.to_string() }, *p)).collect()))
}

#[test]
fn three_of_ten_mispredicted_is_thirty_percent() {
    let (suite, subject) = ten_case_suite();
    let (report, outcomes) = evaluate_suite(&suite, Subject::Classify(&subject)).unwrap();
    assert_eq!((report.total, report.failures), (10, 3));
    assert_eq!(report.failure_rate, Fraction::new(3, 10));
    assert_eq!(report.failure_rate.percent(), "30.00%");
    assert_eq!(outcomes.iter().filter(|o| o.failed).count(), 3);
    let tax = &report.by_capability["TAXONOMY"];
    let orig = &report.by_capability["ORIGINAL"];
    assert_eq!((tax.total, tax.failures), (4, 1));
    assert_eq!((orig.total, orig.failures), (6, 2));
    assert_eq!(render_csv(&report), render_csv(&report));
    let csv = render_csv(&report);
    assert_eq!(csv.lines().count(), 1 + report.by_capability.len() + 1);
    assert!(csv.lines().last().unwrap().ends_with("TOTAL,10,3,30.00%"));
    assert!(render_markdown(&[report]).contains("30.00%"));
}

#[test]
fn all_correct_is_zero_and_empty_suite_is_an_error() {
    let (suite, _) = ten_case_suite();
    let oracle = Lookup(suite.cases.iter().map(|c| (c.texts[0].clone(), c.expected_label)).collect());
    let (report, _) = evaluate_suite(&suite, Subject::Classify(&oracle)).unwrap();
    assert_eq!(report.failure_rate, Fraction::ZERO);
    let empty = TestSuite::new("empty", Stage::Final, 42, sa());
    assert!(evaluate_suite(&empty, Subject::Classify(&oracle)).is_err());
}

struct Mumbler;

impl ChatModel for Mumbler {
    fn id(&self) -> &str {
        "mumbler"
    }
    fn chat(&self, _system: &str, user: &str) -> Result<String, ModelError> {
        if user.contains("good") {
            Ok("Ans=positive-1".into())
        } else if user.contains("bad") {
            Err(ModelError::transport("mumbler", "timeout"))
        } else {
            Ok("no idea".into())
        }
    }
}

#[test]
fn chat_failures_and_unparseable_replies_count_as_failures() {
    let (suite, _) = ten_case_suite();
    let (report, outcomes) = evaluate_suite(&suite, Subject::Chat(&Mumbler)).unwrap();
    let good = outcomes.iter().find(|o| o.case_id == suite.cases[0].id).unwrap();
    assert!(!good.failed);
    let bad = outcomes.iter().find(|o| o.case_id == suite.cases[1].id).unwrap();
    assert!(bad.failed && bad.error.is_some());
    assert_eq!(report.failures, 9);
}

#[test]
fn unweighted_mean_ignores_suite_sizes() {
    let m = unweighted_mean(&[Fraction::new(1, 10), Fraction::new(1, 2)]).unwrap();
    assert_eq!(m, Fraction::new(3, 10));
    assert!(unweighted_mean(&[]).is_none());
}
