//! Deterministic in-process stand-ins for every remote model role, used by
//! `--offline` runs and the test suites.

use std::collections::BTreeSet;

use serde::Deserialize;
use testforge_core::hashing::hash64;
use testforge_core::model::{
    ChatModel, Classifier, ClassifyResult, Embedder, FillCandidate, FillResult, MaskFiller, ModelError,
};
use testforge_core::text::word_tokens;
use testforge_core::TaskSpec;

const POSITIVE: &[&str] = &[
    "love", "loved", "loves", "like", "liked", "likes", "enjoy", "enjoyed", "adore", "adored", "great",
    "good", "excellent", "wonderful", "amazing", "fantastic", "brilliant", "delightful", "happy",
    "pleasant", "superb", "best", "beautiful", "fun", "funny", "charming", "perfect", "masterpiece",
    "recommend", "recommended", "praise", "praised", "impressive", "moving", "fresh", "delicious",
    "glad", "terrific", "lovely", "outstanding", "favorite", "awesome",
];

const NEGATIVE: &[&str] = &[
    "hate", "hated", "hates", "dislike", "disliked", "detest", "despise", "loathe", "bad", "terrible",
    "awful", "horrible", "boring", "dull", "worst", "poor", "sad", "disappointing", "disappointed",
    "annoying", "mediocre", "ugly", "waste", "wasted", "stupid", "bland", "tedious", "painful",
    "mess", "rude", "slow", "flat", "weak", "lame", "dreadful", "unpleasant", "angry", "regret",
    "tired", "cold", "broken", "failure",
];

const NEGATORS: &[&str] = &["not", "no", "never", "nothing", "nobody", "neither", "nor", "without", "hardly", "cannot"];

fn is_negator(word: &str) -> bool {
    NEGATORS.contains(&word) || word.ends_with("n't")
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Keyword-counting classifier. Single texts are scored for sentiment; text
/// pairs are scored for similarity by word-set overlap.
#[derive(Debug, Clone)]
pub struct LexiconClassifier {
    pub id: String,
    pub positive: BTreeSet<String>,
    pub negative: BTreeSet<String>,
    /// Words after a negator whose polarity is flipped; 0 disables negation handling.
    pub negation_window: usize,
    pub bias: f64,
    pub gain: f64,
    pub similarity_threshold: f64,
}

impl LexiconClassifier {
    /// Variant `k` of a family of deliberately different panel members.
    pub fn variant(id: &str, k: usize) -> Self {
        let keep = |words: &[&str], drop_every: usize, offset: usize| -> BTreeSet<String> {
            words
                .iter()
                .enumerate()
                .filter(|(i, _)| drop_every == 0 || (i + offset) % drop_every != 0)
                .map(|(_, w)| w.to_string())
                .collect()
        };
        let (drop_every, window, bias, gain, threshold) = match k % 6 {
            0 => (0, 3, 0.0, 1.5, 0.5),
            1 => (0, 1, 0.1, 1.5, 0.4),
            2 => (11, 3, 0.3, 1.0, 0.6),
            3 => (9, 2, -0.3, 2.0, 0.45),
            4 => (7, 3, 0.2, 0.8, 0.55),
            _ => (7, 1, -0.2, 1.2, 0.5),
        };
        LexiconClassifier {
            id: id.to_string(),
            positive: keep(POSITIVE, drop_every, k),
            negative: keep(NEGATIVE, drop_every, k + 1),
            negation_window: window,
            bias,
            gain,
            similarity_threshold: threshold,
        }
    }

    pub fn sentiment_score(&self, text: &str) -> f64 {
        let mut score = 0.0;
        let mut negating = 0usize;
        let mut weight = 1.0;
        for word in word_tokens(text) {
            if word == "but" {
                weight = 2.0;
                negating = 0;
                continue;
            }
            if self.negation_window > 0 && is_negator(&word) {
                negating = self.negation_window + 1;
            }
            let polarity = if self.positive.contains(&word) {
                1.0
            } else if self.negative.contains(&word) {
                -1.0
            } else {
                0.0
            };
            let flip = if negating > 0 && !is_negator(&word) { -1.0 } else { 1.0 };
            score += weight * polarity * flip;
            negating = negating.saturating_sub(1);
        }
        score
    }

    pub fn similarity(a: &str, b: &str) -> f64 {
        let sa: BTreeSet<String> = word_tokens(a).into_iter().collect();
        let sb: BTreeSet<String> = word_tokens(b).into_iter().collect();
        let union = sa.union(&sb).count();
        if union == 0 {
            return 1.0;
        }
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

impl Classifier for LexiconClassifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn classify(&self, texts: &[String]) -> Result<ClassifyResult, ModelError> {
        let p = match texts {
            [one] => logistic(self.gain * self.sentiment_score(one) + self.bias),
            [a, b] => logistic(10.0 * (Self::similarity(a, b) - self.similarity_threshold)),
            _ => return Err(ModelError::model(&self.id, format!("expected 1 or 2 texts, got {}", texts.len()))),
        };
        ClassifyResult::from_probabilities(vec![1.0 - p, p])
    }
}

const FILL_VOCAB: &[&str] = &[
    "good", "bad", "great", "film", "movie", "story", "plot", "actor", "music", "scene", "ending", "show",
    "book", "meal", "food", "service", "place", "room", "day", "night", "really", "very", "quite", "truly",
    "so", "always", "never", "often", "love", "like", "hate", "enjoy", "watch", "see", "read", "find",
    "new", "old", "long", "short", "funny", "boring", "nice", "awful", "simple", "strange", "friend",
    "family", "team", "city", "game", "song", "picture", "drama", "comedy", "hotel", "trip", "car",
    "phone", "class", "teacher", "waiter", "cook", "dinner", "lunch", "coffee", "it", "this", "that",
    "everything", "nothing", "someone", "people", "they", "we", "you", "he", "she",
];

/// Masked-LM stand-in: hash-derived logits in `[0, 4)` over a fixed
/// vocabulary, log-softmax normalised. Any alphabetic token can be scored.
#[derive(Debug, Clone)]
pub struct HashFiller {
    pub id: String,
    pub seed: u64,
}

impl HashFiller {
    fn logit(&self, context: &str, token: &str) -> f64 {
        let h = hash64(&[&self.seed.to_le_bytes(), b"fill", context.as_bytes(), token.as_bytes()]);
        4.0 * (h >> 11) as f64 / (1u64 << 53) as f64
    }

    fn normalizer(&self, context: &str) -> f64 {
        let logits: Vec<f64> = FILL_VOCAB.iter().map(|w| self.logit(context, w)).collect();
        let max = logits.iter().cloned().fold(f64::MIN, f64::max);
        max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }
}

impl MaskFiller for HashFiller {
    fn id(&self) -> &str {
        &self.id
    }

    fn fill_mask(&self, text: &str, top_k: usize) -> Result<FillResult, ModelError> {
        testforge_core::model::require_single_mask(text)?;
        let z = self.normalizer(text);
        let mut candidates: Vec<FillCandidate> = FILL_VOCAB
            .iter()
            .map(|w| FillCandidate { token: w.to_string(), log_prob: self.logit(text, w) - z })
            .collect();
        candidates.sort_by(|a, b| b.log_prob.total_cmp(&a.log_prob).then_with(|| a.token.cmp(&b.token)));
        candidates.truncate(top_k);
        Ok(FillResult { candidates })
    }

    fn score_tokens(&self, text: &str, tokens: &[&str]) -> Result<Vec<Option<f64>>, ModelError> {
        testforge_core::model::require_single_mask(text)?;
        let z = self.normalizer(text);
        Ok(tokens
            .iter()
            .map(|t| {
                let ok = !t.is_empty() && t.chars().all(char::is_alphabetic);
                ok.then(|| self.logit(text, &t.to_lowercase()) - z)
            })
            .collect())
    }
}

/// Feature-hashing sentence embedder over words and character trigrams.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub id: String,
    pub dims: usize,
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ModelError> {
        let mut v = vec![0.0; self.dims];
        let mut add = |feature: &str, weight: f64| {
            let h = hash64(&[b"embed", feature.as_bytes()]);
            let idx = (h % self.dims as u64) as usize;
            let sign = if (h >> 63) == 1 { -1.0 } else { 1.0 };
            v[idx] += sign * weight;
        };
        for word in word_tokens(text) {
            add(&word, 1.0);
            let padded: Vec<char> = format!(" {word} ").chars().collect();
            for tri in padded.windows(3) {
                add(&tri.iter().collect::<String>(), 0.5);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
struct ChatFixtures {
    /// label name -> descriptions
    descriptions: std::collections::BTreeMap<String, Vec<String>>,
    /// label name -> raw template reply
    templates: std::collections::BTreeMap<String, serde_json::Value>,
    /// label name -> sentence appended by refinement
    refinements: std::collections::BTreeMap<String, String>,
}

const CHAT_FIXTURES: &str = include_str!("../data/mock_chat.json");

/// Chat stand-in that recognises the prompts this toolkit sends.
#[derive(Debug, Clone)]
pub struct ScriptedChat {
    pub id: String,
    pub seed: u64,
    fixtures: ChatFixtures,
    answerer: LexiconClassifier,
}

impl ScriptedChat {
    pub fn new(id: &str, seed: u64) -> Self {
        ScriptedChat {
            id: id.to_string(),
            seed,
            fixtures: serde_json::from_str(CHAT_FIXTURES).expect("chat fixtures parse"),
            answerer: LexiconClassifier::variant("chat-answerer", 0),
        }
    }

    fn target_label(prompt: &str) -> Option<(u32, String)> {
        let line = prompt.lines().find_map(|l| l.strip_prefix("Target label: "))?;
        let (id, name) = line.trim().split_once('-')?;
        Some((id.parse().ok()?, name.to_string()))
    }

    fn answer(&self, prompt: &str) -> Result<String, ModelError> {
        let garble = hash64(&[&self.seed.to_le_bytes(), b"garble", prompt.as_bytes()]) % 13 == 0;
        if garble {
            return Ok("I would rather not commit to a single label here.".into());
        }
        let pair = prompt.contains("Sentence 1: ");
        let texts: Vec<String> = if pair {
            ["Sentence 1: ", "Sentence 2: "]
                .iter()
                .filter_map(|p| prompt.lines().find_map(|l| l.strip_prefix(p)).map(str::to_string))
                .collect()
        } else {
            prompt
                .lines()
                .find(|l| l.starts_with('[') && l.ends_with(']'))
                .map(|l| vec![l[1..l.len() - 1].to_string()])
                .unwrap_or_default()
        };
        if texts.is_empty() {
            return Err(ModelError::model(&self.id, "could not find the text to label"));
        }
        let task = if pair { TaskSpec::similarity("") } else { TaskSpec::sentiment("") };
        let label = self.answerer.classify(&texts)?.predicted_label;
        let name = &task.labels[label as usize].name;
        Ok(format!("Reasoning done.\nAns={name}-{label}"))
    }

    fn refine(&self, prompt: &str) -> Result<String, ModelError> {
        let field = |prefix: &str| prompt.lines().find_map(|l| l.strip_prefix(prefix)).map(str::trim);
        let name = field("Label: ")
            .and_then(|l| l.split_once('-'))
            .map(|(_, n)| n.to_string())
            .ok_or_else(|| ModelError::model(&self.id, "no label in refinement prompt"))?;
        let addition = self.fixtures.refinements.get(&name).cloned().unwrap_or_default();
        if let Some(text) = field("Text: ") {
            return Ok(serde_json::json!({ "text": format!("{text} {addition}").trim() }).to_string());
        }
        match (field("Sentence 1: "), field("Sentence 2: ")) {
            (Some(a), Some(b)) => {
                let second = if name == "similarity" { a.to_string() } else { format!("{b} {addition}") };
                Ok(serde_json::json!({ "texts": [a, second] }).to_string())
            }
            _ => Err(ModelError::model(&self.id, "no text in refinement prompt")),
        }
    }
}

impl ChatModel for ScriptedChat {
    fn id(&self) -> &str {
        &self.id
    }

    fn chat(&self, _system: &str, user: &str) -> Result<String, ModelError> {
        if user.contains("sentence structure descriptions") {
            let (_, name) = Self::target_label(user).ok_or_else(|| ModelError::model(&self.id, "no target label"))?;
            let list = self.fixtures.descriptions.get(&name).cloned().unwrap_or_default();
            return Ok(format!("Here you go:\n{}", serde_json::to_string_pretty(&list).unwrap_or_default()));
        }
        if user.contains("\"Templates\"") && user.contains("Target label: ") {
            let (_, name) = Self::target_label(user).ok_or_else(|| ModelError::model(&self.id, "no target label"))?;
            let reply = self.fixtures.templates.get(&name).cloned().unwrap_or(serde_json::Value::Null);
            return Ok(format!("```json\n{}\n```", serde_json::to_string_pretty(&reply).unwrap_or_default()));
        }
        if user.starts_with("Rewrite the following") {
            return self.refine(user);
        }
        if user.contains("Ans=") {
            return self.answer(user);
        }
        Err(ModelError::model(&self.id, "unrecognised prompt"))
    }
}
