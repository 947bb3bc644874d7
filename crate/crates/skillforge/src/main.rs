use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use skillforge::checkpoint;
use skillforge::llmgen::{generate_skills, ChatEndpointConfig, Family, PromptTemplate, ProposingFactory};
use skillforge::report;
use skillforge::suite::{load_suite, LoadedSuite};
use skillforge_core::harness::{
    default_presets, run_suite, summarize, EvalOptions, LibraryConfig, Method, SkillLibrary, WorldFactory,
};
use skillforge_core::learner::TrainMode;
use skillforge_core::planner::plan_from;
use skillforge_core::{
    build_graph, parse_skill_file, serialize_skill_file, validate_against_db, Condition, ParseMode, SkillDefinition,
    SkillGraph, SkillKind,
};

const LIBRARY_KIND: &str = "skill_library";

#[derive(Parser)]
#[command(name = "skillforge", version, about = "Skill graphs, plan search and skill training in a crafting gridworld")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Spawn,
    Goexplore,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a skill file and build its graph.
    Validate {
        skills: PathBuf,
        /// Curated skill file to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the graph in Graphviz format.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Items allowed without a producing skill, comma-separated.
        #[arg(long, value_delimiter = ',')]
        primitives: Vec<String>,
    },
    /// Print the plan for one goal.
    Plan {
        #[arg(long)]
        skills: PathBuf,
        #[arg(long)]
        goal: String,
        /// Starting items as name=count, comma-separated.
        #[arg(long, value_delimiter = ',')]
        initial: Vec<String>,
    },
    /// Train a skill library and save it with its learning curves.
    Train {
        #[arg(long)]
        skills: PathBuf,
        /// Train only these manipulation skills (finding is always trained).
        #[arg(long, value_delimiter = ',')]
        skill: Vec<String>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Library learner settings as TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// World presets are taken from this suite file.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate methods on a task suite.
    Eval {
        #[arg(long)]
        skills: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "plan4mc,zero_shot,half_steps,no_find")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 30)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Saved library; trained fresh from `--seed` when absent.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Scripted chat replies for the interactive_llm method.
        #[arg(long)]
        llm_fixture: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ask a chat endpoint for skill definitions.
    Skillgen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, value_delimiter = ',', required = true)]
        skills: Vec<String>,
        /// Read the reply from this file instead of the network.
        #[arg(long)]
        offline: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Curated skill file to validate the reply against.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the parsed definitions here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_defs(path: &Path) -> Result<Vec<SkillDefinition>> {
    parse_skill_file(&read(path)?, ParseMode::Strict).with_context(|| format!("parsing {}", path.display()))
}

fn load_graph(path: &Path, primitives: &[String]) -> Result<(Vec<SkillDefinition>, SkillGraph)> {
    let defs = load_defs(path)?;
    let prims: BTreeSet<String> = primitives.iter().cloned().collect();
    let graph = build_graph(&defs, &prims)?;
    Ok((defs, graph))
}

fn parse_initial(pairs: &[String]) -> Result<Condition> {
    let mut c = Condition::new();
    for p in pairs {
        let (k, v) = p.split_once('=').with_context(|| format!("expected name=count, got `{p}`"))?;
        c.add(k.trim(), v.trim().parse().with_context(|| format!("bad count in `{p}`"))?);
    }
    Ok(c)
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Validate {
            skills,
            reference,
            dot,
            primitives,
        } => {
            let (defs, graph) = load_graph(&skills, &primitives)?;
            let count = |k| defs.iter().filter(|d| d.kind == k).count();
            println!(
                "{} skills ({} finding, {} manipulation, {} crafting), {} edges",
                defs.len(),
                count(SkillKind::Finding),
                count(SkillKind::Manipulation),
                count(SkillKind::Crafting),
                graph.edge_count()
            );
            if let Some(path) = dot {
                skillforge::write_atomic(&path, graph.to_dot().as_bytes())?;
            }
            if let Some(r) = reference {
                let found = validate_against_db(&defs, &load_defs(&r)?);
                for d in &found {
                    println!("{d}");
                }
                println!("{} discrepancies", found.len());
            }
        }
        Cmd::Plan { skills, goal, initial } => {
            let (_, graph) = load_graph(&skills, &[])?;
            let plan = plan_from(&graph, &goal, &parse_initial(&initial)?, Default::default())?;
            for (i, s) in plan.steps.iter().enumerate() {
                println!("{:>4}  {s}", i + 1);
            }
            println!("{} steps, {} distinct skills", plan.len(), plan.distinct().len());
        }
        Cmd::Train {
            skills,
            skill,
            mode,
            config,
            suite,
            seed,
            out,
        } => {
            let mut defs = load_defs(&skills)?;
            if !skill.is_empty() {
                for s in &skill {
                    if !defs.iter().any(|d| &d.name == s && d.kind == SkillKind::Manipulation) {
                        bail!("`{s}` is not a manipulation skill in {}", skills.display());
                    }
                }
                defs.retain(|d| skill.contains(&d.name));
            }
            let mut cfg = match config {
                Some(p) => toml::from_str(&read(&p)?)?,
                None => LibraryConfig::seeded(seed),
            };
            if let Some(m) = mode {
                cfg.mode = match m {
                    Mode::Spawn => TrainMode::SpawnNearby,
                    Mode::Goexplore => TrainMode::GoExplore,
                };
            }
            let presets = match suite {
                Some(p) => load_suite(&p)?.presets,
                None => default_presets(),
            };
            let trained = skillforge_core::harness::train_library(&defs, &presets, &cfg)?;
            std::fs::create_dir_all(out.join("curves"))?;
            checkpoint::save(&out.join("library.json"), LIBRARY_KIND, &trained.library)?;
            for (name, curve) in &trained.curves {
                let path = out.join("curves").join(format!("{name}.csv"));
                skillforge::write_atomic(&path, report::training_curve_csv(curve)?.as_bytes())?;
                let last = curve.smoothed.last().copied().unwrap_or(0.0);
                println!("{name:<24} {:>6} episodes  smoothed success {last:.3}", curve.records.len());
            }
        }
        Cmd::Eval {
            skills,
            suite,
            methods,
            episodes,
            seed,
            library,
            llm_fixture,
            out,
        } => {
            let (defs, graph) = load_graph(&skills, &[])?;
            let LoadedSuite { suite, presets } = load_suite(&suite)?;
            let methods = methods
                .iter()
                .map(|m| Method::parse(m).with_context(|| format!("unknown method `{m}`")))
                .collect::<Result<Vec<_>>>()?;
            let library: SkillLibrary = match library {
                Some(p) => checkpoint::load(&p, LIBRARY_KIND)?,
                None => skillforge_core::harness::train_library(&defs, &presets, &LibraryConfig::seeded(seed))?.library,
            };
            let opts = EvalOptions::for_suite(&suite);
            let inner = WorldFactory {
                presets,
                library: &library,
            };
            let reports = if methods.contains(&Method::InteractiveLlm) {
                let mut endpoint = ChatEndpointConfig::from_env();
                endpoint.offline_fixture = llm_fixture;
                let factory = ProposingFactory {
                    inner,
                    endpoint,
                    skills: graph.skills().map(|d| d.name.clone()).collect(),
                };
                run_suite(&graph, &suite, &factory, &methods, episodes, seed, &opts)?
            } else {
                run_suite(&graph, &suite, &inner, &methods, episodes, seed, &opts)?
            };
            report::write_eval(&out, &reports)?;
            for s in summarize(&reports) {
                println!("{:<8} {:<16} {:>3} tasks  success {:.3}", s.set, s.method.as_str(), s.tasks, s.mean_success);
            }
        }
        Cmd::Skillgen {
            family,
            skills,
            offline,
            cache,
            reference,
            out,
        } => {
            let mut endpoint = ChatEndpointConfig::from_env();
            endpoint.offline_fixture = offline;
            endpoint.cache_dir = cache;
            let mut client = endpoint.client()?;
            let template = PromptTemplate::builtin(family);
            let gen = generate_skills(client.as_mut(), &template, &skills, endpoint.cache_dir.as_deref())?;
            println!("{} definitions parsed", gen.defs.len());
            for f in &gen.failures {
                println!("parse failure in `{}`: {}", f.skill, f.reason);
            }
            for m in &gen.missing {
                println!("missing: {m}");
            }
            if let Some(r) = reference {
                let found = validate_against_db(&gen.defs, &load_defs(&r)?);
                for d in &found {
                    println!("{d}");
                }
                println!("{} discrepancies", found.len());
            }
            let text = serialize_skill_file(&gen.defs);
            match out {
                Some(p) => skillforge::write_atomic(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
