use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use testforge::config::{PipelineConfig, ReportFormat, Resources};
use testforge::error::{TfError, TfResult};
use testforge::modelio::{mock_registry, ModelRegistry};
use testforge::pipeline::{Checkpoint, Pipeline};
use testforge::report::emit_reports;
use testforge::store;
use testforge_core::attack::Recipe;
use testforge_core::eval::EvalReport;
use testforge_core::Stage;

#[derive(Parser)]
#[command(name = "testforge", version, about = "Generate, verify, expand and run behavioral test suites for text classifiers")]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the built-in deterministic mock models instead of HTTP endpoints.
    #[arg(long, global = true)]
    offline: bool,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArg {
    /// Input suite file; defaults to the stage file in the output directory.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ask the generator model for templates and write templates.json.
    GenTemplates,
    /// Instantiate templates and mask-expand into T_o.
    Instantiate {
        /// Template file (JSON array); defaults to templates.json in the output directory.
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        samples_per_template: Option<usize>,
        #[arg(long)]
        mask_select_fraction: Option<f64>,
        #[arg(long)]
        masks_per_case: Option<usize>,
        #[arg(long)]
        fills_per_mask: Option<usize>,
    },
    /// Preliminary differential verification of T_o into T_1.
    VerifyLabels(InputArg),
    /// Taxonomy, fairness and preliminary robustness expansion of T_1 into T_c.
    Expand {
        #[command(flatten)]
        input: InputArg,
        #[arg(long)]
        taxonomy: bool,
        #[arg(long)]
        fairness: bool,
        #[arg(long)]
        pre_rob: bool,
    },
    /// Adversarial extension of T_c into T_adv_rob.
    Attack {
        #[command(flatten)]
        input: InputArg,
        #[arg(long, value_delimiter = ',')]
        recipes: Vec<Recipe>,
        #[arg(long, value_delimiter = ',')]
        victims: Vec<String>,
    },
    /// Final filter of T_c (and T_adv_rob when present) into T_final.
    Finalize {
        #[command(flatten)]
        input: InputArg,
        /// Adversarial suite; defaults to T_adv_rob.jsonl when it exists.
        #[arg(long)]
        adversarial: Option<PathBuf>,
    },
    /// Evaluate suites against the configured subjects and write reports.
    Evaluate {
        /// Suite files; defaults to the configured evaluation suites.
        #[arg(long = "suite")]
        suites: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        subjects: Vec<String>,
    },
    /// Re-render the markdown table from report JSON files.
    Report {
        /// Report JSON files; defaults to report_*.json in the output directory.
        inputs: Vec<PathBuf>,
    },
    /// Run every stage in order.
    Run {
        /// Continue after this persisted stage (templates, T_o, T_1, T_c, T_adv_rob, T_final).
        #[arg(long)]
        resume_from: Option<Checkpoint>,
    },
}

fn load_config(cli: &Cli) -> TfResult<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg = cfg.with_seed(seed);
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    Ok(cfg)
}

fn registry(cli: &Cli, cfg: &PipelineConfig) -> TfResult<ModelRegistry> {
    if cli.offline {
        Ok(mock_registry(cfg.seed))
    } else {
        Ok(ModelRegistry::from_specs(&cfg.endpoints, cfg.cache_dir.as_deref())?)
    }
}

fn input_or(p: &Pipeline<'_>, input: &InputArg, stage: Stage) -> TfResult<testforge_core::TestSuite> {
    let path = input.input.clone().unwrap_or_else(|| p.stage_path(stage));
    store::load_suite(&path)
}

fn collect_report_files(dir: &Path) -> TfResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| TfError::io(dir, e))? {
        let path = entry.map_err(|e| TfError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("report_") && name.ends_with(".json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Re-renders report files; needs no models.
fn report(inputs: &[PathBuf], out_dir: &Path) -> TfResult<()> {
    let files = if inputs.is_empty() { collect_report_files(out_dir)? } else { inputs.to_vec() };
    let mut reports = Vec::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| TfError::io(f, e))?;
        let r: EvalReport =
            serde_json::from_str(&text).map_err(|e| TfError::Config(format!("{}: not a report: {e}", f.display())))?;
        reports.push(r);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| TfError::io(out_dir, e))?;
    emit_reports(&reports, &[ReportFormat::Markdown], out_dir)?;
    print!("{}", testforge_core::eval::render_markdown(&reports));
    Ok(())
}

fn execute(cli: Cli) -> TfResult<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Instantiate { templates, samples_per_template, mask_select_fraction, masks_per_case, fills_per_mask } => {
            let i = &mut cfg.instantiation;
            if let Some(v) = samples_per_template {
                i.samples_per_template = *v;
            }
            if let Some(v) = mask_select_fraction {
                i.mask_select_fraction = *v;
            }
            if let Some(v) = masks_per_case {
                i.masks_per_case = *v;
            }
            if let Some(v) = fills_per_mask {
                i.fills_per_mask = *v;
            }
            if let Some(t) = templates {
                cfg.templates_path = Some(t.clone());
            }
        }
        Command::Expand { taxonomy, fairness, pre_rob, .. } if *taxonomy || *fairness || *pre_rob => {
            cfg.expansion.taxonomy = *taxonomy;
            cfg.expansion.fairness = *fairness;
            cfg.expansion.pre_rob = *pre_rob;
        }
        Command::Attack { recipes, victims, .. } => {
            if !recipes.is_empty() {
                cfg.attack.recipes = recipes.clone();
            }
            if !victims.is_empty() {
                cfg.roles.victims = victims.clone();
            }
        }
        Command::Evaluate { subjects, .. } if !subjects.is_empty() => cfg.roles.subjects = subjects.clone(),
        _ => {}
    }
    if let Command::Report { inputs } = &cli.command {
        return report(inputs, &cfg.output_dir);
    }
    let reg = registry(&cli, &cfg)?;
    cfg.validate(&reg)?;
    let res = Resources::load(&cfg)?;
    let p = Pipeline::new(&cfg, &reg, &res);
    std::fs::create_dir_all(p.out_dir()).map_err(|e| TfError::io(p.out_dir(), e))?;

    match cli.command {
        Command::GenTemplates => {
            let t = p.generate()?;
            println!("{} templates written", t.len());
        }
        Command::Instantiate { templates, .. } => {
            let path = templates
                .or_else(|| cfg.templates_path.clone())
                .unwrap_or_else(|| p.out_dir().join(store::TEMPLATES_FILE));
            let t = store::load_templates(&path)?;
            let s = p.instantiate(&t)?;
            println!("T_o: {} cases", s.len());
        }
        Command::VerifyLabels(input) => {
            let s = p.verify(&input_or(&p, &input, Stage::Initial)?)?;
            println!("T_1: {} cases", s.len());
        }
        Command::Expand { input, .. } => {
            let s = p.expand(&input_or(&p, &input, Stage::Verified)?)?;
            println!("T_c: {} cases", s.len());
        }
        Command::Attack { input, .. } => {
            let s = p.attack(&input_or(&p, &input, Stage::Expanded)?)?;
            println!("T_adv_rob: {} cases", s.len());
        }
        Command::Finalize { input, adversarial } => {
            let t_c = input_or(&p, &input, Stage::Expanded)?;
            let default_adv = p.stage_path(Stage::Adversarial);
            let adv = match adversarial {
                Some(path) => Some(store::load_suite(&path)?),
                None if default_adv.exists() => Some(store::load_suite(&default_adv)?),
                None => None,
            };
            let s = p.finalize(&t_c, adv.as_ref())?;
            println!("T_final: {} cases", s.len());
        }
        Command::Evaluate { suites, .. } => {
            let paths: Vec<PathBuf> = if suites.is_empty() {
                cfg.evaluation.suites.iter().map(|s| p.stage_path(*s)).collect()
            } else {
                suites
            };
            let loaded = paths.iter().map(|path| store::load_suite(path)).collect::<TfResult<Vec<_>>>()?;
            for r in p.evaluate(&loaded)? {
                println!("{} on {}: {}/{} = {}", r.subject_model_id, r.suite_name, r.failures, r.total, r.failure_rate.percent());
            }
        }
        Command::Report { .. } => unreachable!("handled before model setup"),
        Command::Run { resume_from } => {
            let summary = p.run(resume_from)?;
            for (stage, n) in &summary.stage_sizes {
                println!("{stage}: {n} cases");
            }
            for r in &summary.reports {
                println!("{} on {}: {}/{} = {}", r.subject_model_id, r.suite_name, r.failures, r.total, r.failure_rate.percent());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
