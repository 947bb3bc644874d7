//! Depth-first skill search, a symbolic plan checker and the interactive
//! plan/execute/replan loop.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{DependencyEdge, EdgeMode, SkillGraph};
use crate::skilldef::{is_nearby, Counts, ItemId, SkillDefinition, SkillKind};

/// Items the agent holds plus entities within reach.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub inventory: Counts,
    pub nearby: Counts,
}

impl Condition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, u32)>) -> Self {
        let mut c = Condition::new();
        for (k, v) in pairs {
            c.add(k, v);
        }
        c
    }

    fn map(&self, item: &str) -> &Counts {
        if is_nearby(item) {
            &self.nearby
        } else {
            &self.inventory
        }
    }

    fn map_mut(&mut self, item: &str) -> &mut Counts {
        if is_nearby(item) {
            &mut self.nearby
        } else {
            &mut self.inventory
        }
    }

    pub fn get(&self, item: &str) -> u32 {
        self.map(item).get(item).copied().unwrap_or(0)
    }

    pub fn set(&mut self, item: &str, n: u32) {
        let m = self.map_mut(item);
        if n == 0 {
            m.remove(item);
        } else {
            m.insert(item.to_string(), n);
        }
    }

    pub fn add(&mut self, item: &str, n: u32) {
        let v = self.get(item).saturating_add(n);
        self.set(item, v);
    }

    /// Remove up to `n` units; returns how many were removed.
    pub fn take(&mut self, item: &str, n: u32) -> u32 {
        let have = self.get(item);
        let t = have.min(n);
        self.set(item, have - t);
        t
    }

    pub fn clear_nearby(&mut self) {
        self.nearby.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, &u32)> {
        self.inventory.iter().chain(self.nearby.iter())
    }

    pub fn is_empty(&self) -> bool {
        self.inventory.is_empty() && self.nearby.is_empty()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<ItemId>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Distinct skills in order of first appearance.
    pub fn distinct(&self) -> Vec<ItemId> {
        let mut seen = Vec::new();
        for s in &self.steps {
            if !seen.contains(s) {
                seen.push(s.clone());
            }
        }
        seen
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub goal: ItemId,
    pub initial: Condition,
    pub max_env_steps: u64,
    /// Name of the world preset the task runs in.
    pub world: String,
}

impl Task {
    pub fn new(goal: &str, initial: Condition) -> Self {
        Task {
            goal: goal.to_string(),
            initial,
            max_env_steps: 0,
            world: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanError {
    UnknownItem(ItemId),
    /// A primitive item is needed but not held in sufficient quantity.
    Unobtainable(ItemId),
    PlanDepthExceeded(usize),
    MissingStepCount(ItemId),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::UnknownItem(i) => write!(f, "unknown item `{i}`"),
            PlanError::Unobtainable(i) => write!(f, "`{i}` has no producing skill and is not held"),
            PlanError::PlanDepthExceeded(n) => write!(f, "plan recursion deeper than {n}"),
            PlanError::MissingStepCount(s) => write!(f, "no step count for skill `{s}`"),
        }
    }
}

impl core::error::Error for PlanError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerOptions {
    /// Treat a held quantity as sufficient only when it strictly exceeds the need.
    pub strict_gt: bool,
    pub depth_limit: usize,
    /// Alternative parent orders tried per plan after the default order fails.
    pub order_retries: usize,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            strict_gt: false,
            depth_limit: 10_000,
            order_retries: 256,
        }
    }
}

struct Search<'a> {
    graph: &'a SkillGraph,
    state: &'a mut Condition,
    out: &'a mut Plan,
    // Required items held for a pending skill; consumption may not dip into them.
    locked: Counts,
    opts: PlannerOptions,
    retries: usize,
}

fn lookup<'g>(graph: &'g SkillGraph, item: &str) -> Result<&'g SkillDefinition, PlanError> {
    match graph.skill(item) {
        Some(s) => Ok(s),
        None if graph.primitives().contains(item) => Err(PlanError::Unobtainable(item.to_string())),
        None => Err(PlanError::UnknownItem(item.to_string())),
    }
}

impl Search<'_> {
    fn credit(&mut self, skill: &SkillDefinition) {
        if skill.kind != SkillKind::Crafting {
            self.state.clear_nearby();
        }
        for (k, &v) in &skill.obtain {
            self.state.add(k, v);
        }
    }

    fn expand(&mut self, goal: &str, depth: usize) -> Result<(), PlanError> {
        if depth > self.opts.depth_limit {
            return Err(PlanError::PlanDepthExceeded(self.opts.depth_limit));
        }
        let edges = self.graph.parents(goal).map_err(|_| PlanError::UnknownItem(goal.to_string()))?;
        // Parents that must be produced go before parents already in stock,
        // so stock taken early cannot starve a sibling's production. Nearby
        // parents stay last.
        let mut order: Vec<&DependencyEdge> = edges.iter().collect();
        order.sort_by_key(|e| (is_nearby(&e.parent), self.state.get(&e.parent) >= e.parent_qty));
        let snapshot = (self.state.clone(), self.out.steps.len(), self.locked.clone());
        let first = match self.expand_in_order(goal, depth, &order) {
            Err(e @ PlanError::Unobtainable(_)) => e,
            other => return other,
        };
        // The greedy order ran a shared stock dry. Try the other orders of the
        // inventory parents, within a fixed budget per plan.
        let free = order.iter().take_while(|e| !is_nearby(&e.parent)).count();
        let mut idx: Vec<usize> = (0..free).collect();
        while next_permutation(&mut idx) {
            if self.retries == 0 {
                break;
            }
            self.retries -= 1;
            *self.state = snapshot.0.clone();
            self.out.steps.truncate(snapshot.1);
            self.locked = snapshot.2.clone();
            let alt: Vec<&DependencyEdge> = idx.iter().map(|&i| order[i]).chain(order[free..].iter().copied()).collect();
            match self.expand_in_order(goal, depth, &alt) {
                Err(PlanError::Unobtainable(_)) => {}
                other => return other,
            }
        }
        *self.state = snapshot.0;
        self.out.steps.truncate(snapshot.1);
        self.locked = snapshot.2;
        Err(first)
    }

    fn expand_in_order(&mut self, goal: &str, depth: usize, order: &[&DependencyEdge]) -> Result<(), PlanError> {
        let graph = self.graph;
        let saved_locks = self.locked.clone();
        for e in order {
            let p = e.parent.as_str();
            let n = e.parent_qty;
            let consume = e.mode == EdgeMode::Consume;
            let have = self.state.get(p);
            let avail = if consume {
                have.saturating_sub(self.locked.get(p).copied().unwrap_or(0))
            } else {
                have
            };
            let enough = if self.opts.strict_gt { avail > n } else { avail >= n };
            let mut todo = if enough { 0 } else { n - avail };
            if consume {
                self.state.take(p, n - todo);
            }
            while todo > 0 {
                let parent = lookup(graph, p)?;
                self.expand(p, depth + 1)?;
                if parent.kind != SkillKind::Crafting {
                    self.state.clear_nearby();
                }
                let got = parent.yield_count();
                if !consume {
                    self.state.add(p, got.min(todo));
                }
                if got > todo {
                    self.state.add(p, got - todo);
                }
                for (k, &v) in &parent.obtain {
                    if k != p {
                        self.state.add(k, v);
                    }
                }
                todo = todo.saturating_sub(got);
            }
            if !consume {
                let l = self.locked.entry(p.to_string()).or_insert(0);
                *l = (*l).max(n);
            }
        }
        self.locked = saved_locks;
        self.out.steps.push(goal.to_string());
        Ok(())
    }
}

/// Advance `idx` to the next lexicographic permutation; false after the last.
fn next_permutation(idx: &mut [usize]) -> bool {
    let Some(i) = idx.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = idx.iter().rposition(|&x| x > idx[i]).expect("a larger element exists");
    idx.swap(i, j);
    idx[i + 1..].reverse();
    true
}

/// Plan one execution of `goal` from `state`, appending to `out`.
///
/// Each parent edge is satisfied from `state` when possible; otherwise the
/// parent skill is expanded repeatedly until enough units have been produced.
/// Surplus output is credited back to `state`, and every non-crafting step
/// wipes the nearby entities the planner was tracking. `needed` is accepted for
/// signature parity and ignored: one call plans one execution.
pub fn dfs_expand(
    graph: &SkillGraph,
    goal: &str,
    needed: u32,
    state: &mut Condition,
    out: &mut Plan,
) -> Result<(), PlanError> {
    dfs_expand_with(graph, goal, needed, state, out, PlannerOptions::default())
}

pub fn dfs_expand_with(
    graph: &SkillGraph,
    goal: &str,
    _needed: u32,
    state: &mut Condition,
    out: &mut Plan,
    opts: PlannerOptions,
) -> Result<(), PlanError> {
    let mut s = Search {
        graph,
        state,
        out,
        locked: Counts::new(),
        opts,
        retries: opts.order_retries,
    };
    let skill = lookup(graph, goal)?;
    s.expand(goal, 0)?;
    s.credit(skill);
    Ok(())
}

pub fn search_plan(graph: &SkillGraph, task: &Task) -> Result<Plan, PlanError> {
    plan_from(graph, &task.goal, &task.initial, PlannerOptions::default())
}

pub fn plan_from(graph: &SkillGraph, goal: &str, initial: &Condition, opts: PlannerOptions) -> Result<Plan, PlanError> {
    let mut state = initial.clone();
    let mut plan = Plan::default();
    dfs_expand_with(graph, goal, 1, &mut state, &mut plan, opts)?;
    Ok(plan)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub skill: ItemId,
    /// Condition after the step.
    pub condition: Condition,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecError {
    UnknownSkill { step: usize, skill: ItemId },
    UnsatisfiedRequirement { step: usize, item: ItemId, have: u32, need: u32 },
    UnsatisfiedConsume { step: usize, item: ItemId, have: u32, need: u32 },
}

impl fmt::Display for ExecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecError::UnknownSkill { step, skill } => write!(f, "step {step}: unknown skill `{skill}`"),
            ExecError::UnsatisfiedRequirement { step, item, have, need } => {
                write!(f, "step {step}: requires {need} `{item}`, have {have}")
            }
            ExecError::UnsatisfiedConsume { step, item, have, need } => {
                write!(f, "step {step}: consumes {need} `{item}`, have {have}")
            }
        }
    }
}

impl core::error::Error for ExecError {}

/// Apply one skill to a condition assuming it succeeds.
pub fn apply_skill(skill: &SkillDefinition, cond: &mut Condition, step: usize) -> Result<(), ExecError> {
    for (k, &need) in &skill.require {
        let have = cond.get(k);
        if have < need {
            return Err(ExecError::UnsatisfiedRequirement {
                step,
                item: k.clone(),
                have,
                need,
            });
        }
    }
    for (k, &need) in &skill.consume {
        let have = cond.get(k);
        if have < need {
            return Err(ExecError::UnsatisfiedConsume {
                step,
                item: k.clone(),
                have,
                need,
            });
        }
    }
    for (k, &need) in &skill.consume {
        cond.take(k, need);
    }
    if skill.kind != SkillKind::Crafting {
        cond.clear_nearby();
    }
    for (k, &v) in &skill.obtain {
        cond.add(k, v);
    }
    Ok(())
}

/// Run a plan symbolically, checking every step's inputs.
pub fn symbolic_execute(
    graph: &SkillGraph,
    plan: &Plan,
    initial: &Condition,
) -> Result<(Condition, Vec<StepRecord>), ExecError> {
    let mut cond = initial.clone();
    let mut trace = Vec::with_capacity(plan.len());
    for (i, name) in plan.steps.iter().enumerate() {
        let skill = graph.skill(name).ok_or_else(|| ExecError::UnknownSkill {
            step: i,
            skill: name.clone(),
        })?;
        apply_skill(skill, &mut cond, i)?;
        trace.push(StepRecord {
            index: i,
            skill: name.clone(),
            condition: cond.clone(),
        });
    }
    Ok((cond, trace))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillOutcome {
    pub skill: ItemId,
    pub success: bool,
    pub env_steps: u64,
    pub obtained: Counts,
}

/// Anything that can run skills and report the agent's condition.
pub trait SkillExecutor {
    fn execute_skill(&mut self, skill: &SkillDefinition, step_cap: u64) -> SkillOutcome;
    fn read_condition(&self) -> Condition;
}

/// Per-attempt step caps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCaps {
    pub per_skill: BTreeMap<ItemId, u64>,
    pub finding: u64,
    pub manipulation: u64,
    pub crafting: u64,
}

impl Default for StepCaps {
    fn default() -> Self {
        StepCaps {
            per_skill: BTreeMap::new(),
            finding: 200,
            manipulation: 100,
            crafting: 1,
        }
    }
}

impl StepCaps {
    pub fn uniform(n: u64) -> Self {
        StepCaps {
            per_skill: BTreeMap::new(),
            finding: n,
            manipulation: n,
            crafting: n,
        }
    }

    pub fn cap(&self, skill: &SkillDefinition) -> u64 {
        if let Some(&n) = self.per_skill.get(&skill.name) {
            return n;
        }
        match skill.kind {
            SkillKind::Finding => self.finding,
            SkillKind::Manipulation => self.manipulation,
            SkillKind::Crafting => self.crafting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub env_steps_used: u64,
    pub executed_skills: Vec<ItemId>,
    pub outcomes: Vec<SkillOutcome>,
    pub planner_error: Option<PlanError>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplanOptions {
    pub planner: PlannerOptions,
    pub caps: StepCaps,
    /// Drop finding steps from every plan and let manipulation skills search on their own.
    pub skip_finding: bool,
    pub manipulation_cap_factor: u64,
}

impl Default for ReplanOptions {
    fn default() -> Self {
        ReplanOptions {
            planner: PlannerOptions::default(),
            caps: StepCaps::default(),
            skip_finding: false,
            manipulation_cap_factor: 1,
        }
    }
}

/// Alternate planning and execution: plan from the current condition, run
/// only the first planned skill, read the condition back and repeat until the
/// goal is held or `budget` environment steps are spent.
pub fn replan_and_execute<E: SkillExecutor + ?Sized>(
    graph: &SkillGraph,
    task: &Task,
    executor: &mut E,
    budget: u64,
) -> EpisodeResult {
    replan_and_execute_with(graph, task, executor, budget, &ReplanOptions::default())
}

pub fn replan_and_execute_with<E: SkillExecutor + ?Sized>(
    graph: &SkillGraph,
    task: &Task,
    executor: &mut E,
    budget: u64,
    opts: &ReplanOptions,
) -> EpisodeResult {
    let mut res = EpisodeResult::default();
    loop {
        let cond = executor.read_condition();
        if cond.get(&task.goal) >= 1 {
            res.success = true;
            return res;
        }
        if res.env_steps_used >= budget {
            return res;
        }
        let plan = match plan_from(graph, &task.goal, &cond, opts.planner) {
            Ok(p) => p,
            Err(e) => {
                res.planner_error = Some(e);
                return res;
            }
        };
        let next = plan
            .steps
            .iter()
            .filter_map(|s| graph.skill(s))
            .find(|s| !(opts.skip_finding && s.kind == SkillKind::Finding))
            .or_else(|| plan.steps.first().and_then(|s| graph.skill(s)));
        let Some(skill) = next else {
            return res;
        };
        let mut cap = opts.caps.cap(skill);
        if opts.skip_finding && skill.kind == SkillKind::Manipulation {
            cap = cap.saturating_mul(opts.manipulation_cap_factor.max(1));
        }
        let cap = cap.min(budget - res.env_steps_used).max(1);
        let outcome = executor.execute_skill(skill, cap);
        res.env_steps_used += outcome.env_steps.clamp(1, cap);
        res.executed_skills.push(skill.name.clone());
        res.outcomes.push(outcome);
    }
}

/// Twice the summed per-skill step counts of the initial plan.
pub fn estimate_budget(graph: &SkillGraph, task: &Task, per_skill_steps: &BTreeMap<ItemId, u64>) -> Result<u64, PlanError> {
    let plan = search_plan(graph, task)?;
    let mut total = 0u64;
    for s in &plan.steps {
        let n = per_skill_steps
            .get(s)
            .ok_or_else(|| PlanError::MissingStepCount(s.clone()))?;
        total += n;
    }
    Ok(2 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::skilldef::SkillDefinition as S;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn wood_graph() -> SkillGraph {
        let mut log = S::simple("log", &[("log_nearby", 1)], &[], 1).unwrap();
        log.kind = SkillKind::Manipulation;
        let defs = vec![
            S::simple("log_nearby", &[], &[], 1).unwrap(),
            log,
            S::simple("planks", &[("log", 1)], &[], 4).unwrap(),
            S::simple("stick", &[("planks", 2)], &[], 4).unwrap(),
        ];
        build_graph(&defs, &BTreeSet::new()).unwrap()
    }

    #[test]
    fn parentless_goal() {
        let g = wood_graph();
        let mut state = Condition::new();
        let mut out = Plan::default();
        dfs_expand(&g, "log_nearby", 1, &mut state, &mut out).unwrap();
        assert_eq!(out.steps, ["log_nearby"]);
        assert_eq!(state, Condition::from_pairs([("log_nearby", 1)]));
    }

    #[test]
    fn stick_from_planks() {
        let g = wood_graph();
        let mut state = Condition::from_pairs([("planks", 2)]);
        let mut out = Plan::default();
        dfs_expand(&g, "stick", 1, &mut state, &mut out).unwrap();
        assert_eq!(out.steps, ["stick"]);
        assert_eq!(state, Condition::from_pairs([("stick", 4)]));
    }

    #[test]
    fn stick_from_nothing() {
        let g = wood_graph();
        let plan = search_plan(&g, &Task::new("stick", Condition::new())).unwrap();
        assert_eq!(plan.steps, ["log_nearby", "log", "planks", "stick"]);
    }

    #[test]
    fn goal_already_held_still_planned() {
        let g = wood_graph();
        let plan = search_plan(&g, &Task::new("planks", Condition::from_pairs([("planks", 1), ("log", 1)]))).unwrap();
        assert_eq!(plan.steps, ["planks"]);
    }

    #[test]
    fn strict_mode_matches_on_exact_holdings() {
        let g = wood_graph();
        let init = Condition::from_pairs([("planks", 2)]);
        let strict = PlannerOptions {
            strict_gt: true,
            ..Default::default()
        };
        let a = plan_from(&g, "stick", &init, PlannerOptions::default()).unwrap();
        let b = plan_from(&g, "stick", &init, strict).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_primitive_is_an_error() {
        let defs = vec![S::simple("a", &[("ore", 2)], &[], 1).unwrap()];
        let prims: BTreeSet<ItemId> = ["ore".to_string()].into();
        let g = build_graph(&defs, &prims).unwrap();
        let t = Task::new("a", Condition::from_pairs([("ore", 1)]));
        assert_eq!(search_plan(&g, &t), Err(PlanError::Unobtainable("ore".into())));
        let t = Task::new("a", Condition::from_pairs([("ore", 2)]));
        assert_eq!(search_plan(&g, &t).unwrap().steps, ["a"]);
    }

    #[test]
    fn required_tool_is_not_consumed_by_a_sibling() {
        // c requires t and consumes m; m is made by consuming a t.
        let defs = vec![
            S::simple("t", &[], &[], 1).unwrap(),
            S::simple("m", &[("t", 1)], &[], 1).unwrap(),
            S::simple("c", &[("m", 1)], &[("t", 1)], 1).unwrap(),
        ];
        let g = build_graph(&defs, &BTreeSet::new()).unwrap();
        let t = Task::new("c", Condition::new());
        let plan = search_plan(&g, &t).unwrap();
        let (fin, _) = symbolic_execute(&g, &plan, &t.initial).unwrap();
        assert_eq!(fin.get("c"), 1);
        assert_eq!(plan.steps, ["t", "t", "m", "c"]);
    }

    #[test]
    fn symbolic_checks() {
        let defs = vec![
            S::simple("cobblestone", &[], &[], 1).unwrap(),
            S::simple("stick", &[], &[], 4).unwrap(),
            S::simple("crafting_table_nearby", &[], &[], 1).unwrap(),
            S::simple("stone_pickaxe", &[("cobblestone", 3), ("stick", 2)], &[("crafting_table_nearby", 1)], 1).unwrap(),
        ];
        let g = build_graph(&defs, &BTreeSet::new()).unwrap();
        let x = Condition::from_pairs([("stick", 3)]);
        let (fin, trace) = symbolic_execute(&g, &Plan::default(), &x).unwrap();
        assert_eq!(fin, x);
        assert!(trace.is_empty());
        let plan = Plan {
            steps: vec!["stone_pickaxe".into()],
        };
        let init = Condition::from_pairs([("cobblestone", 3), ("stick", 2)]);
        assert_eq!(
            symbolic_execute(&g, &plan, &init).unwrap_err(),
            ExecError::UnsatisfiedRequirement {
                step: 0,
                item: "crafting_table_nearby".into(),
                have: 0,
                need: 1
            }
        );
    }

    struct AlwaysWorks {
        cond: Condition,
    }

    impl SkillExecutor for AlwaysWorks {
        fn execute_skill(&mut self, skill: &SkillDefinition, _cap: u64) -> SkillOutcome {
            let ok = apply_skill(skill, &mut self.cond, 0).is_ok();
            SkillOutcome {
                skill: skill.name.clone(),
                success: ok,
                env_steps: 1,
                obtained: if ok { skill.obtain.clone() } else { Counts::new() },
            }
        }

        fn read_condition(&self) -> Condition {
            self.cond.clone()
        }
    }

    #[test]
    fn no_failures_follow_the_initial_plan() {
        let g = wood_graph();
        let task = Task::new("stick", Condition::new());
        let plan = search_plan(&g, &task).unwrap();
        let mut ex = AlwaysWorks { cond: Condition::new() };
        let res = replan_and_execute(&g, &task, &mut ex, 100);
        assert!(res.success);
        assert_eq!(res.executed_skills, plan.steps);
    }

    #[test]
    fn budget_doubles_the_sum() {
        let g = wood_graph();
        let task = Task::new("stick", Condition::new());
        let steps: BTreeMap<ItemId, u64> = ["log_nearby", "log", "planks", "stick"]
            .iter()
            .map(|s| (s.to_string(), 100))
            .collect();
        assert_eq!(estimate_budget(&g, &task, &steps), Ok(800));
        let mut partial = steps.clone();
        partial.remove("log");
        assert_eq!(
            estimate_budget(&g, &task, &partial),
            Err(PlanError::MissingStepCount("log".into()))
        );
    }
}
