//! Pipeline configuration file (JSON, frozen `schema_version` 1).
//!
//! Every field except `schema_version` has a default; the default
//! configuration runs entirely against the offline mock registry.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use testforge_core::attack::{AttackBudget, Recipe};
use testforge_core::expand::{AttributeLexicon, ContractionTable, ExpandConfig};
use testforge_core::instantiate::InstantiationConfig;
use testforge_core::lexicon::{LexPos, Lexicon};
use testforge_core::llmgen::GenerationConfig;
use testforge_core::pos::Tagger;
use testforge_core::verify::VerificationPolicy;
use testforge_core::{Fraction, Stage, TaskSpec};

use crate::error::{TfError, TfResult};
use crate::modelio::{mock_ids, EndpointSpec, ModelRegistry};

pub const CONFIG_SCHEMA: u32 = 1;

/// Endpoint ids bound to each pipeline role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roles {
    pub panel: Vec<String>,
    pub generator: String,
    pub refiner: Option<String>,
    pub fill_mask: String,
    pub embed: Option<String>,
    pub subjects: Vec<String>,
    /// Attack victims; empty means the first panel model.
    pub victims: Vec<String>,
}

impl Default for Roles {
    fn default() -> Self {
        Roles {
            panel: mock_ids::PANEL.iter().map(|s| s.to_string()).collect(),
            generator: mock_ids::CHAT.into(),
            refiner: Some(mock_ids::CHAT.into()),
            fill_mask: mock_ids::FILL.into(),
            embed: Some(mock_ids::EMBED.into()),
            subjects: vec![mock_ids::SUBJECT.into(), mock_ids::CHAT.into()],
            victims: Vec::new(),
        }
    }
}

/// Sampling temperature sent to chat endpoints, per use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Temperatures {
    pub generation: f64,
    pub refinement: f64,
    pub evaluation: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Temperatures { generation: 0.7, refinement: 0.0, evaluation: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackStageConfig {
    pub enabled: bool,
    pub recipes: Vec<Recipe>,
    /// Share of T_c attacked, rounded up.
    pub fraction: f64,
    pub budget: AttackBudget,
}

impl Default for AttackStageConfig {
    fn default() -> Self {
        AttackStageConfig { enabled: true, recipes: Recipe::ALL.to_vec(), fraction: 0.1, budget: AttackBudget::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Suites evaluated against every subject, by stage name.
    pub suites: Vec<Stage>,
    pub formats: Vec<ReportFormat>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            suites: vec![Stage::Initial, Stage::Final],
            formats: vec![ReportFormat::Markdown, ReportFormat::Csv, ReportFormat::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub task: TaskSpec,
    /// Overrides every stage-level seed.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub endpoints: Vec<EndpointSpec>,
    pub roles: Roles,
    /// Human-authored templates; when set, generation is skipped.
    pub templates_path: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub instantiation: InstantiationConfig,
    pub verification: VerificationPolicy,
    pub expansion: ExpandConfig,
    pub attack: AttackStageConfig,
    pub evaluation: EvaluationConfig,
    pub temperatures: Temperatures,
    /// Directory holding `data.noun`, `data.verb`, `data.adj`, `data.adv`.
    pub lexicon_dir: Option<PathBuf>,
    pub attributes_path: Option<PathBuf>,
    pub contractions_path: Option<PathBuf>,
    /// Word-to-tag TSV for the part-of-speech tagger.
    pub tags_path: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA,
            task: TaskSpec::sentiment("movie reviews"),
            seed: 42,
            output_dir: PathBuf::from("testforge-out"),
            endpoints: Vec::new(),
            roles: Roles::default(),
            templates_path: None,
            generation: GenerationConfig::default(),
            instantiation: InstantiationConfig::default(),
            verification: VerificationPolicy::default(),
            expansion: ExpandConfig::default(),
            attack: AttackStageConfig::default(),
            evaluation: EvaluationConfig::default(),
            temperatures: Temperatures::default(),
            lexicon_dir: None,
            attributes_path: None,
            contractions_path: None,
            tags_path: None,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> TfResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TfError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> TfResult<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| TfError::Config(format!("invalid config: {e}")))?;
        if cfg.schema_version != CONFIG_SCHEMA {
            return Err(TfError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets the run seed and pushes it into the stage configurations.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.instantiation.seed = seed;
        self
    }

    pub fn attack_fraction(&self) -> TfResult<Fraction> {
        Fraction::from_f64_approx(self.attack.fraction)
            .filter(|f| *f > Fraction::ZERO && *f <= Fraction::ONE)
            .ok_or_else(|| TfError::Config(format!("attack.fraction {} must lie in (0, 1]", self.attack.fraction)))
    }

    /// Attack victims after applying the first-panel-model default.
    pub fn victims(&self) -> Vec<String> {
        if self.roles.victims.is_empty() {
            self.roles.panel.iter().take(1).cloned().collect()
        } else {
            self.roles.victims.clone()
        }
    }

    /// Checks internal consistency and that every role resolves in `reg`.
    pub fn validate(&self, reg: &ModelRegistry) -> TfResult<()> {
        let cfg_err = |e: testforge_core::Error| TfError::Config(e.to_string());
        self.task.validate().map_err(cfg_err)?;
        self.instantiation.validate().map_err(cfg_err)?;
        self.expansion.validate().map_err(cfg_err)?;
        self.attack.budget.validate().map_err(cfg_err)?;
        self.attack_fraction()?;
        let t = &self.temperatures;
        if [t.generation, t.refinement, t.evaluation].iter().any(|x| !(0.0..=2.0).contains(x)) {
            return Err(TfError::Config("chat temperatures must lie in [0, 2]".into()));
        }
        if self.instantiation.seed != self.seed {
            return Err(TfError::Config("instantiation.seed must equal the run seed".into()));
        }
        let r = &self.roles;
        if r.panel.len() < 2 {
            return Err(TfError::Config("the verification panel needs at least two models".into()));
        }
        for id in &r.panel {
            reg.classifier(id)?;
        }
        if self.templates_path.is_none() {
            reg.chat(&r.generator)?;
        }
        if let Some(id) = &r.refiner {
            reg.chat(id)?;
        }
        reg.filler(&r.fill_mask)?;
        if let Some(id) = &r.embed {
            reg.embedder(id)?;
        }
        if self.attack.enabled {
            if self.attack.recipes.is_empty() {
                return Err(TfError::Config("attack.recipes is empty".into()));
            }
            if self.attack.recipes.contains(&Recipe::TextBugger) && r.embed.is_none() {
                return Err(TfError::Config("the textbugger recipe needs roles.embed".into()));
            }
            for id in self.victims() {
                reg.classifier(&id)?;
            }
        }
        if r.subjects.is_empty() {
            return Err(TfError::Config("roles.subjects is empty".into()));
        }
        for id in &r.subjects {
            if reg.classifier(id).is_err() && reg.chat(id).is_err() {
                return Err(TfError::Config(format!("subject {id:?} is neither a CLASSIFY nor a CHAT endpoint")));
            }
        }
        Ok(())
    }
}

/// Linguistic resources, loaded from configured paths or the shipped data.
pub struct Resources {
    pub lexicon: Lexicon,
    pub tagger: Tagger,
    pub attributes: AttributeLexicon,
    pub contractions: ContractionTable,
}

fn read(path: &Path) -> TfResult<String> {
    std::fs::read_to_string(path).map_err(|e| TfError::Config(format!("cannot read {}: {e}", path.display())))
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> TfResult<Self> {
        let lexicon = match &cfg.lexicon_dir {
            None => Lexicon::shipped(),
            Some(dir) => {
                let mut files = Vec::new();
                for pos in LexPos::ALL {
                    let name = pos.data_file_name();
                    files.push((pos, name, read(&dir.join(name))?));
                }
                let borrowed: Vec<(LexPos, &str, &str)> = files.iter().map(|(p, n, c)| (*p, *n, c.as_str())).collect();
                Lexicon::from_data_files(&borrowed).map_err(|e| TfError::Config(e.to_string()))?
            }
        };
        let tagger = match &cfg.tags_path {
            None => Tagger::shipped(),
            Some(p) => Tagger::from_tsv(&read(p)?),
        };
        let attributes = match &cfg.attributes_path {
            None => AttributeLexicon::shipped(),
            Some(p) => AttributeLexicon::from_json(&read(p)?).map_err(|e| TfError::Config(e.to_string()))?,
        };
        let contractions = match &cfg.contractions_path {
            None => ContractionTable::shipped(),
            Some(p) => ContractionTable::from_tsv(&read(p)?),
        };
        Ok(Resources { lexicon, tagger, attributes, contractions })
    }
}
