//! Task-suite evaluation: the interactive planner and its ablations run over
//! paired seeds, with per-skill success curves.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::SkillGraph;
use crate::learner::{
    manip_kind, train_explorer, train_goal_nav, train_manipulation, training_arena, HierarchicalFinder, LearnerConfig,
    LearnerError, PolicyTable, TablePolicy, TrainMode, TrainingCurve,
};
use crate::planner::{
    apply_skill, plan_from, replan_and_execute_with, Condition, PlanError, PlannerOptions, ReplanOptions, SkillExecutor,
    SkillOutcome, StepCaps, Task,
};
use crate::skilldef::{Counts, ItemId, SkillDefinition, SkillKind};
use crate::world::{self, generate_world, ScriptedPolicy, WorldConfig, WorldError, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Plan4mc,
    ZeroShot,
    HalfSteps,
    NoFind,
    InteractiveLlm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Plan4mc,
        Method::ZeroShot,
        Method::HalfSteps,
        Method::NoFind,
        Method::InteractiveLlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Plan4mc => "plan4mc",
            Method::ZeroShot => "zero_shot",
            Method::HalfSteps => "half_steps",
            Method::NoFind => "no_find",
            Method::InteractiveLlm => "interactive_llm",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteTask {
    /// Task-set label used for aggregation (wood, stone, mob, iron, ...).
    pub set: String,
    pub task: Task,
    /// Planning steps the suite expects for the initial plan.
    pub planning_steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSuite {
    pub tasks: Vec<SuiteTask>,
    /// Per-skill execution steps, used for budgets and per-attempt caps.
    pub execute_steps: BTreeMap<ItemId, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub success: bool,
    pub env_steps: u64,
    pub outcomes: Vec<SkillOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: ItemId,
    pub set: String,
    pub method: Method,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_env_steps: f64,
    pub budget: u64,
    pub planning_steps: usize,
    pub involved_skills: usize,
    /// 1.0, then one point per distinct planned skill.
    pub curve: Vec<f64>,
    /// The skills behind `curve[1..]`.
    pub curve_skills: Vec<ItemId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set: String,
    pub method: Method,
    pub tasks: usize,
    pub mean_success: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HarnessError {
    Plan(PlanError),
    World(WorldError),
    UnknownPreset(String),
    NoProposer,
    Proposer(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Plan(e) => write!(f, "{e}"),
            HarnessError::World(e) => write!(f, "{e}"),
            HarnessError::UnknownPreset(p) => write!(f, "unknown world preset `{p}`"),
            HarnessError::NoProposer => f.write_str("interactive_llm needs a skill proposer"),
            HarnessError::Proposer(m) => write!(f, "skill proposer failed: {m}"),
        }
    }
}

impl core::error::Error for HarnessError {}

impl From<PlanError> for HarnessError {
    fn from(e: PlanError) -> Self {
        HarnessError::Plan(e)
    }
}

impl From<WorldError> for HarnessError {
    fn from(e: WorldError) -> Self {
        HarnessError::World(e)
    }
}

/// What the interactive proposer is told about its previous suggestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    InvalidName,
    AlreadyDone,
    Success,
    Failure,
}

/// Source of next-skill suggestions for the interactive baseline.
pub trait SkillProposer {
    fn propose(
        &mut self,
        task: &Task,
        condition: &Condition,
        feedback: Option<Feedback>,
        history: &[ItemId],
    ) -> Result<ItemId, String>;
}

/// Builds one fresh executor per episode.
pub trait ExecutorFactory {
    type Exec: SkillExecutor;

    fn make(&self, task: &Task, seed: u64) -> Result<Self::Exec, HarnessError>;

    fn proposer(&self, _task: &Task, _seed: u64) -> Option<Box<dyn SkillProposer + '_>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub planner: PlannerOptions,
    pub caps: StepCaps,
    /// Manipulation cap multiplier when finding steps are dropped.
    pub manipulation_cap_factor: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            planner: PlannerOptions::default(),
            caps: StepCaps::default(),
            manipulation_cap_factor: 2,
        }
    }
}

impl EvalOptions {
    /// Per-attempt caps taken from a suite's step table.
    pub fn for_suite(suite: &TaskSuite) -> Self {
        EvalOptions {
            caps: StepCaps {
                per_skill: suite.execute_steps.clone(),
                ..StepCaps::default()
            },
            ..EvalOptions::default()
        }
    }
}

/// Episode budget: the task's own limit, or twice the summed step table
/// over the initial plan.
pub fn task_budget(plan: &[ItemId], task: &Task, steps: &BTreeMap<ItemId, u64>, caps: &StepCaps) -> u64 {
    if task.max_env_steps > 0 {
        return task.max_env_steps;
    }
    2 * plan
        .iter()
        .map(|s| steps.get(s).copied().unwrap_or_else(|| caps.per_skill.get(s).copied().unwrap_or(caps.manipulation)))
        .sum::<u64>()
}

/// Run the initial plan once, stopping at the first failed skill.
pub fn zero_shot<E: SkillExecutor + ?Sized>(
    graph: &SkillGraph,
    task: &Task,
    executor: &mut E,
    budget: u64,
    opts: &EvalOptions,
) -> EpisodeLog {
    let mut log = EpisodeLog {
        seed: 0,
        success: false,
        env_steps: 0,
        outcomes: Vec::new(),
    };
    let cond = executor.read_condition();
    if cond.get(&task.goal) == 0 {
        let Ok(plan) = plan_from(graph, &task.goal, &cond, opts.planner) else {
            return log;
        };
        for name in &plan.steps {
            let Some(skill) = graph.skill(name) else { break };
            if log.env_steps >= budget {
                break;
            }
            let cap = opts.caps.cap(skill).min(budget - log.env_steps).max(1);
            let out = executor.execute_skill(skill, cap);
            log.env_steps += out.env_steps.clamp(1, cap);
            let ok = out.success;
            log.outcomes.push(out);
            if !ok {
                break;
            }
        }
    }
    log.success = executor.read_condition().get(&task.goal) >= 1;
    log
}

fn obtain_held(skill: &SkillDefinition, cond: &Condition) -> bool {
    skill.obtain.iter().all(|(k, &n)| cond.get(k) >= n)
}

/// Interactive baseline: a proposer names each next skill, which is executed
/// and reported back. Rejected proposals cost one step.
pub fn interactive<E: SkillExecutor + ?Sized>(
    graph: &SkillGraph,
    task: &Task,
    executor: &mut E,
    proposer: &mut dyn SkillProposer,
    budget: u64,
    opts: &EvalOptions,
) -> Result<EpisodeLog, HarnessError> {
    let mut log = EpisodeLog {
        seed: 0,
        success: false,
        env_steps: 0,
        outcomes: Vec::new(),
    };
    let mut history: Vec<ItemId> = Vec::new();
    let mut feedback = None;
    loop {
        let cond = executor.read_condition();
        if cond.get(&task.goal) >= 1 {
            log.success = true;
            return Ok(log);
        }
        if log.env_steps >= budget {
            return Ok(log);
        }
        let name = proposer
            .propose(task, &cond, feedback, &history)
            .map_err(HarnessError::Proposer)?;
        history.push(name.clone());
        let Some(skill) = graph.skill(&name) else {
            feedback = Some(Feedback::InvalidName);
            log.env_steps += 1;
            continue;
        };
        if skill.name != task.goal && obtain_held(skill, &cond) {
            feedback = Some(Feedback::AlreadyDone);
            log.env_steps += 1;
            continue;
        }
        let cap = opts.caps.cap(skill).min(budget - log.env_steps).max(1);
        let out = executor.execute_skill(skill, cap);
        log.env_steps += out.env_steps.clamp(1, cap);
        feedback = Some(if out.success { Feedback::Success } else { Feedback::Failure });
        log.outcomes.push(out);
    }
}

/// Planned skills in first-occurrence order.
pub fn distinct_steps(plan: &[ItemId]) -> Vec<ItemId> {
    let mut seen = BTreeSet::new();
    plan.iter().filter(|s| seen.insert(s.as_str())).cloned().collect()
}

/// 1.0 followed by, for each distinct planned skill in order, the fraction
/// of episodes that got at least that far: the skill, or a skill planned
/// after it, succeeded at least once. A later success counts because the
/// earlier step can be skipped when its result is already at hand (a tree
/// that spawned nearby). The curve is non-increasing.
pub fn step_success_curve(logs: &[EpisodeLog], plan: &[ItemId]) -> Vec<f64> {
    let steps = distinct_steps(plan);
    let mut curve = Vec::with_capacity(steps.len() + 1);
    curve.push(1.0);
    if logs.is_empty() {
        return curve;
    }
    let reached: Vec<Option<usize>> = logs
        .iter()
        .map(|l| steps.iter().rposition(|s| l.outcomes.iter().any(|o| o.success && &o.skill == s)))
        .collect();
    for i in 0..steps.len() {
        let hit = reached.iter().filter(|r| r.is_some_and(|j| j >= i)).count();
        curve.push(hit as f64 / logs.len() as f64);
    }
    curve
}

/// Evaluate one method on one task over seeds `seed..seed + episodes`.
pub fn run_task<F: ExecutorFactory>(
    graph: &SkillGraph,
    task: &SuiteTask,
    factory: &F,
    method: Method,
    episodes: usize,
    seed: u64,
    steps: &BTreeMap<ItemId, u64>,
    opts: &EvalOptions,
) -> Result<EvalReport, HarnessError> {
    let t = &task.task;
    let plan = plan_from(graph, &t.goal, &t.initial, opts.planner)?;
    let full_budget = task_budget(&plan.steps, t, steps, &opts.caps);
    let budget = if method == Method::HalfSteps { full_budget / 2 } else { full_budget };
    let replan = ReplanOptions {
        planner: opts.planner,
        caps: opts.caps.clone(),
        skip_finding: method == Method::NoFind,
        manipulation_cap_factor: if method == Method::NoFind { opts.manipulation_cap_factor } else { 1 },
    };
    let mut logs = Vec::with_capacity(episodes);
    for i in 0..episodes as u64 {
        let s = seed + i;
        let mut exec = factory.make(t, s)?;
        let mut log = match method {
            Method::Plan4mc | Method::HalfSteps | Method::NoFind => {
                let r = replan_and_execute_with(graph, t, &mut exec, budget, &replan);
                EpisodeLog {
                    seed: s,
                    success: r.success,
                    env_steps: r.env_steps_used,
                    outcomes: r.outcomes,
                }
            }
            Method::ZeroShot => zero_shot(graph, t, &mut exec, budget, opts),
            Method::InteractiveLlm => {
                let mut p = factory.proposer(t, s).ok_or(HarnessError::NoProposer)?;
                interactive(graph, t, &mut exec, p.as_mut(), budget, opts)?
            }
        };
        log.seed = s;
        logs.push(log);
    }
    let curve_plan: Vec<ItemId> = if method == Method::NoFind {
        plan.steps
            .iter()
            .filter(|s| graph.skill(s).is_some_and(|d| d.kind != SkillKind::Finding))
            .cloned()
            .collect()
    } else {
        plan.steps.clone()
    };
    let n = logs.len().max(1) as f64;
    let success_rate = logs.iter().filter(|l| l.success).count() as f64 / n;
    let curve = step_success_curve(&logs, &curve_plan);
    if curve_plan.last() == Some(&t.goal) && !logs.is_empty() {
        debug_assert_eq!(curve.last().copied(), Some(success_rate), "goal skill curve point");
    }
    Ok(EvalReport {
        task: t.goal.clone(),
        set: task.set.clone(),
        method,
        episodes,
        success_rate,
        mean_env_steps: logs.iter().map(|l| l.env_steps as f64).sum::<f64>() / n,
        budget,
        planning_steps: plan.len(),
        involved_skills: plan.distinct().len(),
        curve,
        curve_skills: distinct_steps(&curve_plan),
    })
}

/// Every method on every task, tasks in suite order.
pub fn run_suite<F: ExecutorFactory>(
    graph: &SkillGraph,
    suite: &TaskSuite,
    factory: &F,
    methods: &[Method],
    episodes: usize,
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<EvalReport>, HarnessError> {
    let mut out = Vec::with_capacity(suite.tasks.len() * methods.len());
    for task in &suite.tasks {
        for &m in methods {
            out.push(run_task(graph, task, factory, m, episodes, seed, &suite.execute_steps, opts)?);
        }
    }
    Ok(out)
}

/// Mean success per (task set, method), sets in first-appearance order.
pub fn summarize(reports: &[EvalReport]) -> Vec<SetSummary> {
    let mut order: Vec<(String, Method)> = Vec::new();
    let mut acc: BTreeMap<(String, Method), (usize, f64)> = BTreeMap::new();
    for r in reports {
        let key = (r.set.clone(), r.method);
        let e = acc.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (0, 0.0)
        });
        e.0 += 1;
        e.1 += r.success_rate;
    }
    order
        .into_iter()
        .map(|k| {
            let (n, sum) = acc[&k];
            SetSummary {
                set: k.0,
                method: k.1,
                tasks: n,
                mean_success: sum / n as f64,
            }
        })
        .collect()
}

// ---- executors ----

/// Skill-level simulator: each skill succeeds with a fixed probability when
/// its inputs are present. A failed non-crafting skill loses track of nearby
/// entities, as walking away from them would.
#[derive(Clone, Debug)]
pub struct SimulatedExecutor {
    pub condition: Condition,
    pub default_p: f64,
    pub success_p: BTreeMap<ItemId, f64>,
    rng: ChaCha8Rng,
}

impl SimulatedExecutor {
    pub fn new(initial: Condition, p: f64, seed: u64) -> Self {
        SimulatedExecutor {
            condition: initial,
            default_p: p,
            success_p: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SkillExecutor for SimulatedExecutor {
    fn execute_skill(&mut self, skill: &SkillDefinition, _step_cap: u64) -> SkillOutcome {
        let p = self.success_p.get(&skill.name).copied().unwrap_or(self.default_p).clamp(0.0, 1.0);
        let lucky = self.rng.gen_bool(p);
        let mut next = self.condition.clone();
        let success = lucky && apply_skill(skill, &mut next, 0).is_ok();
        if success {
            self.condition = next;
        } else if skill.kind != SkillKind::Crafting {
            self.condition.clear_nearby();
        }
        SkillOutcome {
            skill: skill.name.clone(),
            success,
            env_steps: 1,
            obtained: if success { skill.obtain.clone() } else { Counts::new() },
        }
    }

    fn read_condition(&self) -> Condition {
        self.condition.clone()
    }
}

/// Uniform-probability simulated executors, seeded per episode.
#[derive(Clone, Copy, Debug)]
pub struct SimulatedFactory {
    pub p: f64,
}

impl ExecutorFactory for SimulatedFactory {
    type Exec = SimulatedExecutor;

    fn make(&self, task: &Task, seed: u64) -> Result<SimulatedExecutor, HarnessError> {
        Ok(SimulatedExecutor::new(task.initial.clone(), self.p, seed))
    }
}

/// Trained tables for every learnable skill. Missing tables fall back to the
/// scripted controller.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillLibrary {
    pub nav: Option<PolicyTable>,
    pub explorer: Option<PolicyTable>,
    pub manipulation: BTreeMap<ItemId, PolicyTable>,
    pub goal_distance: i32,
}

/// Learner settings for every table in a [`SkillLibrary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LibraryConfig {
    pub nav: LearnerConfig,
    pub explorer: LearnerConfig,
    pub manipulation: LearnerConfig,
    pub mode: TrainMode,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        LibraryConfig::seeded(0)
    }
}

impl LibraryConfig {
    pub fn seeded(seed: u64) -> Self {
        LibraryConfig {
            nav: LearnerConfig::goal_nav(seed.wrapping_add(1)),
            explorer: LearnerConfig::explorer(seed.wrapping_add(2)),
            manipulation: LearnerConfig::manipulation(seed.wrapping_add(3)),
            mode: TrainMode::SpawnNearby,
        }
    }
}

/// Tables plus the training curves they came from.
#[derive(Clone, Debug, Default)]
pub struct TrainedLibrary {
    pub library: SkillLibrary,
    pub curves: BTreeMap<String, TrainingCurve>,
}

/// Preset with the most of `kind`; ties and kind-less skills go to the
/// first preset by name.
pub fn preset_for<'p>(presets: &'p BTreeMap<String, WorldConfig>, kind: &str) -> Option<&'p WorldConfig> {
    let amount = |c: &WorldConfig| {
        c.resource_densities
            .get(kind)
            .copied()
            .or_else(|| c.mob_counts.get(kind).map(|&n| f64::from(n)))
            .unwrap_or(0.0)
    };
    presets
        .values()
        .fold(None, |best: Option<&WorldConfig>, c| match best {
            Some(b) if amount(b) >= amount(c) => Some(b),
            _ => Some(c),
        })
}

/// Train the finding skill in the open arena, then one table per
/// manipulation skill in the preset richest in its target.
pub fn train_library(
    defs: &[SkillDefinition],
    presets: &BTreeMap<String, WorldConfig>,
    cfg: &LibraryConfig,
) -> Result<TrainedLibrary, LearnerError> {
    let arena = training_arena(cfg.nav.seed);
    let nav = train_goal_nav(&arena, &cfg.nav)?;
    let explorer = train_explorer(&arena, &nav.table, &cfg.explorer)?;
    let mut out = TrainedLibrary::default();
    for d in defs.iter().filter(|d| d.kind == SkillKind::Manipulation) {
        let (kind, _) = manip_kind(d);
        let Some(world) = preset_for(presets, &kind) else { continue };
        let finding = Some((&explorer.table, &nav.table));
        let t = train_manipulation(world, d, cfg.mode, finding, &cfg.manipulation)?;
        out.curves.insert(d.name.clone(), t.curve);
        out.library.manipulation.insert(d.name.clone(), t.table);
    }
    out.curves.insert("goal_nav".into(), nav.curve);
    out.curves.insert("explorer".into(), explorer.curve);
    out.library.nav = Some(nav.table);
    out.library.explorer = Some(explorer.table);
    out.library.goal_distance = cfg.explorer.goal_distance;
    Ok(out)
}

pub struct WorldExecutor<'a> {
    pub state: WorldState,
    library: &'a SkillLibrary,
    seed: u64,
    calls: u64,
}

impl<'a> WorldExecutor<'a> {
    pub fn new(state: WorldState, library: &'a SkillLibrary, seed: u64) -> Self {
        WorldExecutor {
            state,
            library,
            seed,
            calls: 0,
        }
    }
}

impl SkillExecutor for WorldExecutor<'_> {
    fn execute_skill(&mut self, skill: &SkillDefinition, step_cap: u64) -> SkillOutcome {
        self.calls += 1;
        let seed = self.seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ self.calls;
        let lib = self.library;
        match (skill.kind, &lib.nav, &lib.explorer, lib.manipulation.get(&skill.name)) {
            (SkillKind::Finding, Some(nav), Some(ex), _) => {
                let mut p = HierarchicalFinder::new(ex, nav, lib.goal_distance, seed);
                world::execute_skill(&mut self.state, skill, &mut p, step_cap)
            }
            (SkillKind::Manipulation, _, _, Some(t)) => {
                let mut p = TablePolicy::new(t, skill, seed);
                world::execute_skill(&mut self.state, skill, &mut p, step_cap)
            }
            _ => world::execute_skill(&mut self.state, skill, &mut ScriptedPolicy::default(), step_cap),
        }
    }

    fn read_condition(&self) -> Condition {
        world::read_condition(&self.state)
    }
}

/// Gridworld executors: a world from the task's preset with the task's
/// inventory, driven by a skill library.
#[derive(Clone, Debug)]
pub struct WorldFactory<'a> {
    pub presets: BTreeMap<String, WorldConfig>,
    pub library: &'a SkillLibrary,
}

impl<'a> ExecutorFactory for WorldFactory<'a> {
    type Exec = WorldExecutor<'a>;

    fn make(&self, task: &Task, seed: u64) -> Result<WorldExecutor<'a>, HarnessError> {
        let cfg = self
            .presets
            .get(&task.world)
            .ok_or_else(|| HarnessError::UnknownPreset(task.world.clone()))?;
        let mut state = generate_world(&cfg.with_seed(seed))?;
        state.inventory = task.initial.inventory.clone();
        Ok(WorldExecutor::new(state, self.library, seed))
    }
}

/// Presets by lowercase biome name.
pub fn default_presets() -> BTreeMap<String, WorldConfig> {
    use crate::world::Biome;
    [("plains", Biome::Plains), ("forest", Biome::Forest)]
        .into_iter()
        .map(|(n, b)| (n.to_string(), WorldConfig::preset(b, 0)))
        .collect()
}
