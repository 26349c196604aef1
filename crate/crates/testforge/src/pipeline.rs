//! Stage orchestration. Each stage reads its input suite, writes its output
//! (plus audit sidecars) into the output directory, and only then lets the
//! next stage start. Per-case work fans out over rayon; results are collected
//! in input order so outputs do not depend on scheduling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use testforge_core::attack::{attack_case, select_attack_targets, AttackContext, AttackResult, assemble_adversarial};
use testforge_core::eval::{build_report, evaluate_case, EvalReport, Subject};
use testforge_core::expand::{assemble_expansions, expand_case, ExpandResources};
use testforge_core::hashing::stream_rng;
use testforge_core::instantiate::{build_initial_suite, instantiate_template, mask_expand, select_for_masking};
use testforge_core::llmgen::{generate_templates, validate_template};
use testforge_core::model::Classifier;
use testforge_core::verify::{assemble, verify_case, VerificationPolicy, VotingPanel};
use testforge_core::{SlotTemplate, Stage, TestSuite};

use crate::config::{PipelineConfig, Resources};
use crate::error::{TfError, TfResult};
use crate::modelio::ModelRegistry;
use crate::report::emit_reports;
use crate::store;

/// A persisted artifact the pipeline can resume from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Checkpoint {
    Templates,
    Initial,
    Verified,
    Expanded,
    Adversarial,
    Final,
}

impl Checkpoint {
    pub fn as_str(self) -> &'static str {
        match self {
            Checkpoint::Templates => "templates",
            Checkpoint::Initial => "T_o",
            Checkpoint::Verified => "T_1",
            Checkpoint::Expanded => "T_c",
            Checkpoint::Adversarial => "T_adv_rob",
            Checkpoint::Final => "T_final",
        }
    }
}

impl fmt::Display for Checkpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Checkpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        use Checkpoint::*;
        [Templates, Initial, Verified, Expanded, Adversarial, Final]
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown stage {s:?} (expected templates, T_o, T_1, T_c, T_adv_rob or T_final)"))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub stage_sizes: Vec<(String, usize)>,
    pub reports: Vec<EvalReport>,
}

pub struct Pipeline<'a> {
    pub cfg: &'a PipelineConfig,
    pub reg: &'a ModelRegistry,
    pub res: &'a Resources,
}

fn stage_err(stage: &str, last: Option<Checkpoint>) -> impl Fn(TfError) -> TfError + '_ {
    move |e| match e {
        TfError::Config(_) | TfError::Stage { .. } => e,
        other => TfError::Stage {
            stage: stage.to_string(),
            last_persisted: last.map(|c| c.to_string()),
            message: other.to_string(),
        },
    }
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a PipelineConfig, reg: &'a ModelRegistry, res: &'a Resources) -> Self {
        Pipeline { cfg, reg, res }
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    pub fn stage_path(&self, stage: Stage) -> PathBuf {
        store::stage_path(self.out_dir(), stage)
    }

    fn save(&self, suite: &TestSuite) -> TfResult<()> {
        suite.validate()?;
        store::save_suite(&self.stage_path(suite.stage), suite)
    }

    /// Templates from `templates_path`, or generated by the chat model.
    pub fn generate(&self) -> TfResult<Vec<SlotTemplate>> {
        let path = self.out_dir().join(store::TEMPLATES_FILE);
        let templates = match &self.cfg.templates_path {
            Some(p) => {
                let templates = store::load_templates(p)?;
                for t in &templates {
                    let report = validate_template(t, &self.cfg.task);
                    if !report.is_valid() {
                        return Err(TfError::Config(format!("template {} is invalid: {:?}", t.id, report)));
                    }
                }
                templates
            }
            None => {
                let chat = self.reg.chat_at(&self.cfg.roles.generator, self.cfg.temperatures.generation)?;
                let batch = generate_templates(&self.cfg.task, chat.as_ref(), &self.cfg.generation)?;
                #[derive(Serialize)]
                struct Rejected<'r> {
                    raw: &'r str,
                    reason: &'r str,
                }
                let rejected: Vec<Rejected<'_>> =
                    batch.rejected.iter().map(|(raw, reason)| Rejected { raw, reason }).collect();
                store::write_jsonl(&self.out_dir().join(store::GENERATION_REJECTS_FILE), &rejected)?;
                batch.templates
            }
        };
        if templates.is_empty() {
            return Err(TfError::Stage {
                stage: "gen-templates".into(),
                last_persisted: None,
                message: "no usable templates".into(),
            });
        }
        store::save_templates(&path, &templates)?;
        log::info!("templates: {}", templates.len());
        Ok(templates)
    }

    /// Instantiation and mask expansion into T_o.
    pub fn instantiate(&self, templates: &[SlotTemplate]) -> TfResult<TestSuite> {
        let icfg = &self.cfg.instantiation;
        let mut originals = Vec::new();
        let mut selected = Vec::new();
        for t in templates {
            let mut rng = stream_rng(self.cfg.seed, &["instantiate", &t.id]);
            let cases = instantiate_template(t, icfg, &mut rng)?;
            let mut rng = stream_rng(self.cfg.seed, &["mask-select", &t.id]);
            selected.extend(select_for_masking(&cases, icfg, &mut rng));
            originals.extend(cases);
        }
        let filler = self.reg.filler(&self.cfg.roles.fill_mask)?;
        let per_case = selected
            .par_iter()
            .map(|c| mask_expand(std::slice::from_ref(c), icfg, &self.res.tagger, filler.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut expansions = Vec::new();
        for e in per_case {
            for d in &e.diagnostics {
                log::debug!("mask-expand: {d}");
            }
            expansions.extend(e.cases);
        }
        let suite = build_initial_suite(originals, expansions, &self.cfg.task, self.cfg.seed);
        self.save(&suite)?;
        log::info!("T_o: {} cases", suite.len());
        Ok(suite)
    }

    fn panel(&self) -> TfResult<Vec<std::sync::Arc<dyn Classifier>>> {
        self.cfg.roles.panel.iter().map(|id| Ok(self.reg.classifier(id)?)).collect()
    }

    /// Runs the panel over `cases` under `policy`, writing the suite and its records.
    fn run_verification(
        &self,
        cases: &[testforge_core::TestCase],
        policy: VerificationPolicy,
        name: &str,
        stage: Stage,
    ) -> TfResult<TestSuite> {
        let models = self.panel()?;
        let panel = VotingPanel::new(models.iter().map(|m| m.as_ref()).collect())?;
        let refiner = match (&self.cfg.roles.refiner, stage) {
            (Some(id), Stage::Verified) => Some(self.reg.chat_at(id, self.cfg.temperatures.refinement)?),
            _ => None,
        };
        let outcomes = cases
            .par_iter()
            .map(|c| verify_case(c, &panel, &self.cfg.task, policy, refiner.as_deref()))
            .collect::<Result<Vec<_>, _>>()?;
        let (suite, records) = assemble(outcomes, name, stage, &self.cfg.task, self.cfg.seed);
        store::write_jsonl(&store::records_path(self.out_dir(), stage), &records)?;
        self.save(&suite)?;
        log::info!("{stage}: {} of {} cases kept", suite.len(), cases.len());
        Ok(suite)
    }

    /// Preliminary label verification of T_o into T_1.
    pub fn verify(&self, t_o: &TestSuite) -> TfResult<TestSuite> {
        self.run_verification(&t_o.cases, self.cfg.verification, "verified", Stage::Verified)
    }

    /// Capability expansions of T_1; writes T_tax, T_fair, T_pre_rob and T_c.
    pub fn expand(&self, t_1: &TestSuite) -> TfResult<TestSuite> {
        let ecfg = &self.cfg.expansion;
        ecfg.validate().map_err(|e| TfError::Config(e.to_string()))?;
        let filler = self.reg.filler(&self.cfg.roles.fill_mask)?;
        let res = ExpandResources {
            lexicon: &self.res.lexicon,
            tagger: &self.res.tagger,
            attributes: &self.res.attributes,
            contractions: &self.res.contractions,
            filler: filler.as_ref(),
        };
        let per_case = t_1
            .cases
            .par_iter()
            .map(|c| expand_case(c, ecfg, res, t_1.seed))
            .collect::<Result<Vec<_>, _>>()?;
        let out = assemble_expansions(t_1, per_case)?;
        store::write_jsonl(&self.out_dir().join(store::EXPAND_DIAGNOSTICS_FILE), &out.diagnostics)?;
        for s in [&out.taxonomy, &out.fairness, &out.pre_rob, &out.merged] {
            self.save(s)?;
        }
        log::info!(
            "T_c: {} cases (taxonomy {}, fairness {}, pre-robustness {})",
            out.merged.len(),
            out.taxonomy.len(),
            out.fairness.len(),
            out.pre_rob.len()
        );
        Ok(out.merged)
    }

    /// Adversarial extension of a sample of T_c into T_adv_rob.
    pub fn attack(&self, t_c: &TestSuite) -> TfResult<TestSuite> {
        let acfg = &self.cfg.attack;
        let victims = self
            .cfg
            .victims()
            .iter()
            .map(|id| Ok(self.reg.classifier(id)?))
            .collect::<TfResult<Vec<_>>>()?;
        let embedder = match &self.cfg.roles.embed {
            Some(id) => Some(self.reg.embedder(id)?),
            None => None,
        };
        let ctx = AttackContext { lexicon: &self.res.lexicon, tagger: &self.res.tagger, embedder: embedder.as_deref() };
        let targets = select_attack_targets(t_c, self.cfg.attack_fraction()?);
        let mut jobs = Vec::new();
        for case in &targets {
            for victim in &victims {
                for &recipe in &acfg.recipes {
                    jobs.push((case, victim.as_ref(), recipe));
                }
            }
        }
        let results: Vec<AttackResult> = jobs
            .par_iter()
            .map(|(case, victim, recipe)| attack_case(case, *recipe, *victim, &acfg.budget, ctx, t_c.seed))
            .collect();
        store::write_jsonl(&self.out_dir().join(store::ATTACK_LOG_FILE), &results)?;
        let suite = assemble_adversarial(t_c, &results)?;
        self.save(&suite)?;
        log::info!(
            "T_adv_rob: {} successes from {} attempts on {} cases",
            suite.len(),
            results.len(),
            targets.len()
        );
        Ok(suite)
    }

    /// Final filter over T_c and (when present) T_adv_rob into T_final.
    pub fn finalize(&self, t_c: &TestSuite, adversarial: Option<&TestSuite>) -> TfResult<TestSuite> {
        let mut cases = t_c.cases.clone();
        if let Some(adv) = adversarial {
            cases.extend(adv.cases.iter().cloned());
        }
        self.run_verification(&cases, VerificationPolicy::final_filter(), "final", Stage::Final)
    }

    /// Every suite against every subject, with report files written.
    pub fn evaluate(&self, suites: &[TestSuite]) -> TfResult<Vec<EvalReport>> {
        let mut reports = Vec::new();
        for suite in suites {
            for id in &self.cfg.roles.subjects {
                reports.push(self.evaluate_one(suite, id)?);
            }
        }
        emit_reports(&reports, &self.cfg.evaluation.formats, self.out_dir())?;
        Ok(reports)
    }

    fn evaluate_one(&self, suite: &TestSuite, subject_id: &str) -> TfResult<EvalReport> {
        let classifier = self.reg.classifier(subject_id).ok();
        let chat = self.reg.chat_at(subject_id, self.cfg.temperatures.evaluation).ok();
        let subject = match (&classifier, &chat) {
            (Some(c), _) => Subject::Classify(c.as_ref()),
            (None, Some(c)) => Subject::Chat(c.as_ref()),
            (None, None) => return Err(TfError::Config(format!("unknown subject {subject_id:?}"))),
        };
        let outcomes: Vec<_> = suite.cases.par_iter().map(|c| evaluate_case(c, subject, &suite.task)).collect();
        for o in outcomes.iter().filter(|o| o.error.is_some()) {
            log::debug!("{subject_id} on {}: {}", o.case_id, o.error.as_deref().unwrap_or_default());
        }
        let report = build_report(suite, subject_id, &outcomes)?;
        let name = format!("eval_{}_{}.outcomes.jsonl", suite.stage.as_str(), crate::report::file_safe(subject_id));
        store::write_jsonl(&self.out_dir().join(name), &outcomes)?;
        Ok(report)
    }

    /// Runs every stage after `resume_from` (or all of them), then evaluates.
    ///
    /// When resuming, only the resume point is required on disk; earlier
    /// suites are picked up for evaluation if present.
    pub fn run(&self, resume_from: Option<Checkpoint>) -> TfResult<RunSummary> {
        use Checkpoint::*;
        let runs = |c: Checkpoint| resume_from.map_or(true, |s| s < c);
        let mut last = resume_from;
        let mut summary = RunSummary::default();
        let mut suites: Vec<Option<TestSuite>> = vec![None; Stage::ALL.len()];
        let slot = |st: Stage| Stage::ALL.iter().position(|s| *s == st).expect("known stage");

        // Loads a stage that was skipped; `required` stages must exist.
        let load_skipped = |st: Stage, required: bool| -> TfResult<Option<TestSuite>> {
            let path = self.stage_path(st);
            if required || path.exists() {
                Ok(Some(store::load_suite(&path)?))
            } else {
                Ok(None)
            }
        };

        let templates = match resume_from {
            None => {
                let t = self.generate().map_err(stage_err("gen-templates", last))?;
                last = Some(Templates);
                Some(t)
            }
            Some(Templates) => Some(store::load_templates(&self.out_dir().join(store::TEMPLATES_FILE))?),
            Some(_) => None,
        };

        suites[slot(Stage::Initial)] = match &templates {
            Some(t) => {
                let s = self.instantiate(t).map_err(stage_err("instantiate", last))?;
                last = Some(Initial);
                Some(s)
            }
            None => load_skipped(Stage::Initial, resume_from == Some(Initial))?,
        };

        suites[slot(Stage::Verified)] = if runs(Verified) {
            let t_o = suites[slot(Stage::Initial)].as_ref().expect("T_o available");
            let s = self.verify(t_o).map_err(stage_err("verify-labels", last))?;
            last = Some(Verified);
            Some(s)
        } else {
            load_skipped(Stage::Verified, resume_from == Some(Verified))?
        };

        suites[slot(Stage::Expanded)] = if runs(Expanded) {
            let t_1 = suites[slot(Stage::Verified)].as_ref().expect("T_1 available");
            let s = self.expand(t_1).map_err(stage_err("expand", last))?;
            last = Some(Expanded);
            Some(s)
        } else {
            load_skipped(Stage::Expanded, resume_from == Some(Expanded) || runs(Final))?
        };

        suites[slot(Stage::Adversarial)] = if self.cfg.attack.enabled && runs(Adversarial) {
            let t_c = suites[slot(Stage::Expanded)].as_ref().expect("T_c available");
            let s = self.attack(t_c).map_err(stage_err("attack", last))?;
            last = Some(Adversarial);
            Some(s)
        } else if self.cfg.attack.enabled {
            load_skipped(Stage::Adversarial, resume_from == Some(Adversarial))?
        } else {
            None
        };

        suites[slot(Stage::Final)] = if runs(Final) {
            let t_c = suites[slot(Stage::Expanded)].as_ref().expect("T_c available");
            let adv = suites[slot(Stage::Adversarial)].as_ref();
            let s = self.finalize(t_c, adv).map_err(stage_err("finalize", last))?;
            last = Some(Final);
            Some(s)
        } else {
            load_skipped(Stage::Final, true)?
        };

        for s in suites.iter().flatten() {
            summary.stage_sizes.push((s.stage.as_str().to_string(), s.len()));
        }
        let mut to_eval = Vec::new();
        for &stage in &self.cfg.evaluation.suites {
            let loaded = match suites[slot(stage)].take() {
                Some(s) => Some(s),
                None => load_skipped(stage, false)?,
            };
            match loaded {
                Some(s) if !s.is_empty() => to_eval.push(s),
                Some(_) => log::warn!("{stage} is empty; not evaluated"),
                None => log::warn!("{stage} is not available; not evaluated"),
            }
        }
        summary.reports = self.evaluate(&to_eval).map_err(stage_err("evaluate", last))?;
        Ok(summary)
    }
}
