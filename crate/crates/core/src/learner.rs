//! Tabular learners for the three skill families.
//!
//! Goal navigation is one-step Q-learning on the navigation shaping reward.
//! The exploration policy picks a compass direction for the navigator and is
//! trained with every-visit Monte Carlo returns of the state-count reward.
//! Manipulation skills are Q-learned on a combined intrinsic/success reward,
//! starting either next to a spawned target or wherever the finding skill
//! stops.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rewards::{
    attack_reward, combat_distance_reward, combined_reward, depth_reward, goal_nav_reward, mining_distance_reward,
    state_count_reward, DepthMode, PoseSample, RewardWeights, VisitGrid,
};
use crate::skilldef::{is_nearby, SkillDefinition, SkillKind};
use crate::world::{
    chebyshev, generate_world, obtain_satisfied, skill_target, step_quiet, Action, Dir8, Layer, SkillPolicy,
    SkillTarget, WorldConfig, WorldError, WorldState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    GoalNav,
    ExplorerHigh,
    Manipulation,
}

impl PolicyKind {
    pub fn action_count(self) -> usize {
        match self {
            PolicyKind::GoalNav | PolicyKind::ExplorerHigh => 8,
            PolicyKind::Manipulation => MANIP_ACTIONS,
        }
    }
}

/// Action values keyed by an encoded discrete state. States never updated
/// read as all zeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub kind: PolicyKind,
    pub table: BTreeMap<u32, Vec<f64>>,
    pub epsilon: f64,
    /// Curve index of the episode after which this table was saved.
    pub version: u64,
    /// Skill the table was trained for, if any.
    #[serde(default)]
    pub skill: Option<String>,
}

impl PolicyTable {
    pub fn new(kind: PolicyKind) -> Self {
        PolicyTable {
            kind,
            table: BTreeMap::new(),
            epsilon: 0.0,
            version: 0,
            skill: None,
        }
    }

    pub fn actions(&self) -> usize {
        self.kind.action_count()
    }

    pub fn values(&self, s: u32) -> Option<&[f64]> {
        self.table.get(&s).map(Vec::as_slice)
    }

    pub fn value(&self, s: u32, a: usize) -> f64 {
        self.values(s).map_or(0.0, |v| v[a])
    }

    pub fn max_value(&self, s: u32) -> f64 {
        self.values(s).map_or(0.0, |v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Highest-valued action, lowest index on ties.
    pub fn greedy(&self, s: u32) -> usize {
        let Some(v) = self.values(s) else { return 0 };
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        best
    }

    pub fn epsilon_greedy<R: Rng>(&self, s: u32, eps: f64, rng: &mut R) -> usize {
        if eps > 0.0 && rng.gen_bool(eps.min(1.0)) {
            rng.gen_range(0..self.actions())
        } else {
            self.greedy(s)
        }
    }

    fn slot(&mut self, s: u32) -> &mut Vec<f64> {
        let n = self.actions();
        self.table.entry(s).or_insert_with(|| vec![0.0; n])
    }

    /// Move Q(s, a) a fraction `lr` toward `target`.
    pub fn nudge(&mut self, s: u32, a: usize, target: f64, lr: f64) {
        if lr == 0.0 {
            return;
        }
        let q = &mut self.slot(s)[a];
        *q += lr * (target - *q);
    }

    pub fn is_finite(&self) -> bool {
        self.table.values().flatten().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub episodes: usize,
    pub step_cap: u64,
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub smoothing_window: usize,
    pub goal_distance: i32,
    /// Compass directions goals are drawn from: 4 (N, E, S, W) or 8. Zero
    /// draws uniformly random offsets within `goal_distance` instead.
    pub goal_directions: u32,
    /// Chebyshev radius around the agent for spawned targets.
    pub spawn_radius: i32,
    /// Step cap for the finding run that starts a go-explore episode.
    pub find_cap: u64,
    /// Save a checkpoint every this many episodes; 0 disables.
    pub checkpoint_every: usize,
    pub weights: RewardWeights,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            episodes: 1000,
            step_cap: 100,
            learning_rate: 0.2,
            discount: 0.95,
            epsilon_start: 0.3,
            epsilon_end: 0.02,
            smoothing_window: 100,
            goal_distance: 10,
            goal_directions: 4,
            spawn_radius: 3,
            find_cap: 400,
            checkpoint_every: 0,
            weights: RewardWeights::default(),
            seed: 0,
        }
    }
}

impl LearnerConfig {
    /// Low-level navigation: random goal offsets, short episodes. Step
    /// rewards are mostly positive, so untried actions look worse than tried
    /// ones; exploration starts fully random to reach every state.
    pub fn goal_nav(seed: u64) -> Self {
        LearnerConfig {
            episodes: 30000,
            step_cap: 50,
            epsilon_start: 1.0,
            discount: 0.5,
            goal_directions: 0,
            seed,
            ..Default::default()
        }
    }

    /// High-level exploration over a trained navigator.
    pub fn explorer(seed: u64) -> Self {
        LearnerConfig {
            episodes: 20000,
            step_cap: 1000,
            learning_rate: 0.1,
            discount: 0.9,
            epsilon_start: 0.1,
            epsilon_end: 0.0,
            seed,
            ..Default::default()
        }
    }

    /// Manipulation skills. The intrinsic weight is kept small so that
    /// standing next to a target never pays more than harvesting it.
    pub fn manipulation(seed: u64) -> Self {
        LearnerConfig {
            episodes: 3000,
            step_cap: 100,
            learning_rate: 0.3,
            discount: 0.8,
            weights: RewardWeights {
                intrinsic: 0.1,
                extrinsic: 10.0,
            },
            seed,
            ..Default::default()
        }
    }

    fn epsilon(&self, ep: usize) -> f64 {
        if self.episodes <= 1 {
            return self.epsilon_start;
        }
        let t = ep as f64 / (self.episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * t
    }
}

/// Empty world the finding skill trains in, large enough that the visit
/// square around the spawn never meets the border.
pub fn training_arena(seed: u64) -> WorldConfig {
    WorldConfig {
        spawn_margin: 55,
        ..WorldConfig::empty(120, seed)
    }
}

/// Seed of the world used for episode `ep`.
pub fn episode_seed(seed: u64, ep: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(ep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub ret: f64,
    pub success: bool,
    pub env_steps: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub records: Vec<EpisodeRecord>,
    pub smoothed: Vec<f64>,
}

impl TrainingCurve {
    pub fn from_records(records: Vec<EpisodeRecord>, window: usize) -> Self {
        let flags: Vec<bool> = records.iter().map(|r| r.success).collect();
        TrainingCurve {
            smoothed: smooth(&flags, window),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Success rate over the last `n` episodes.
    pub fn tail_success(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().filter(|r| r.success).count() as f64 / tail.len() as f64
    }
}

/// Trailing moving average; the first `window - 1` points average what is
/// available.
pub fn smooth(flags: &[bool], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(flags.len());
    let mut sum = 0usize;
    for i in 0..flags.len() {
        sum += usize::from(flags[i]);
        if i >= w {
            sum -= usize::from(flags[i - w]);
        }
        out.push(sum as f64 / (i + 1).min(w) as f64);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub table: PolicyTable,
    pub curve: TrainingCurve,
    pub checkpoints: Vec<PolicyTable>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LearnerError {
    KindMismatch { expected: PolicyKind, found: PolicyKind },
    NoTargetInWorld(String),
    MissingFindingPolicy,
    NotTrainable(String),
    EmptyCurve,
    World(WorldError),
}

impl fmt::Display for LearnerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerError::KindMismatch { expected, found } => {
                write!(f, "expected a {expected:?} table, got {found:?}")
            }
            LearnerError::NoTargetInWorld(k) => write!(f, "world config places no `{k}`"),
            LearnerError::MissingFindingPolicy => f.write_str("go-explore mode needs finding policies"),
            LearnerError::NotTrainable(s) => write!(f, "skill `{s}` is not a manipulation skill"),
            LearnerError::EmptyCurve => f.write_str("empty training curve"),
            LearnerError::World(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for LearnerError {}

impl From<WorldError> for LearnerError {
    fn from(e: WorldError) -> Self {
        LearnerError::World(e)
    }
}

/// Checkpoint whose curve index has the highest smoothed success; earliest
/// wins ties.
pub fn select_model<'a>(
    curve: &TrainingCurve,
    checkpoints: &'a [PolicyTable],
    window: usize,
) -> Result<&'a PolicyTable, LearnerError> {
    if curve.is_empty() || checkpoints.is_empty() {
        return Err(LearnerError::EmptyCurve);
    }
    let flags: Vec<bool> = curve.records.iter().map(|r| r.success).collect();
    let s = smooth(&flags, window);
    let score = |c: &PolicyTable| s.get(c.version as usize).copied().unwrap_or(f64::NEG_INFINITY);
    let mut best = &checkpoints[0];
    for c in &checkpoints[1..] {
        if score(c) > score(best) {
            best = c;
        }
    }
    Ok(best)
}

// ---- goal navigation ----

const NAV_CLIP: i32 = 10;

pub fn nav_state(dx: i32, dz: i32, heading: Dir8) -> u32 {
    let w = 2 * NAV_CLIP + 1;
    let x = dx.clamp(-NAV_CLIP, NAV_CLIP) + NAV_CLIP;
    let z = dz.clamp(-NAV_CLIP, NAV_CLIP) + NAV_CLIP;
    ((z * w + x) as u32) * 8 + heading.index() as u32
}

fn draw_goal(cfg: &LearnerConfig, rng: &mut ChaCha8Rng) -> (i32, i32) {
    let d = cfg.goal_distance;
    match cfg.goal_directions {
        0 => loop {
            let o = (rng.gen_range(-d..=d), rng.gen_range(-d..=d));
            if o != (0, 0) {
                return o;
            }
        },
        k => {
            let k = k.clamp(1, 8) as usize;
            let dir = Dir8::from_index(rng.gen_range(0..k) * (8 / k));
            let (x, z) = dir.delta();
            (x * d, z * d)
        }
    }
}

fn clamp_into(state: &WorldState, p: (i32, i32)) -> (i32, i32) {
    let n = state.config.size - 1;
    (p.0.clamp(0, n), p.1.clamp(0, n))
}

/// One greedy or exploring navigation step toward `goal`. Returns the reward.
fn nav_step(w: &mut WorldState, goal: (i32, i32), a: usize) -> f64 {
    let before = chebyshev(w.agent_xz(), goal) as f64;
    step_quiet(w, &Action::Move(Dir8::from_index(a)));
    let p = w.agent_xz();
    let s = PoseSample {
        distance_to_goal: Some(chebyshev(p, goal) as f64),
        heading_alignment: w.heading.alignment(goal.0 - p.0, goal.1 - p.1),
        ..PoseSample::default()
    };
    goal_nav_reward(&s, before)
}

pub fn train_goal_nav(world: &WorldConfig, cfg: &LearnerConfig) -> Result<Trained, LearnerError> {
    let mut table = PolicyTable::new(PolicyKind::GoalNav);
    table.epsilon = cfg.epsilon_end;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut checkpoints = Vec::new();
    for ep in 0..cfg.episodes {
        let mut w = generate_world(&world.with_seed(episode_seed(cfg.seed, ep as u64)))?;
        // after one move the heading is the move direction, so only the
        // start heading needs varying
        w.heading = Dir8::from_index(rng.gen_range(0..8));
        let off = draw_goal(cfg, &mut rng);
        let a0 = w.agent_xz();
        let goal = clamp_into(&w, (a0.0 + off.0, a0.1 + off.1));
        let eps = cfg.epsilon(ep);
        let mut ret = 0.0;
        let mut success = goal == a0;
        while !success && w.elapsed_steps < cfg.step_cap {
            let p = w.agent_xz();
            let s = nav_state(goal.0 - p.0, goal.1 - p.1, w.heading);
            let a = table.epsilon_greedy(s, eps, &mut rng);
            let r = nav_step(&mut w, goal, a);
            ret += r;
            let p = w.agent_xz();
            success = p == goal;
            let target = if success {
                r
            } else {
                r + cfg.discount * table.max_value(nav_state(goal.0 - p.0, goal.1 - p.1, w.heading))
            };
            table.nudge(s, a, target, cfg.learning_rate);
        }
        records.push(EpisodeRecord {
            ret,
            success,
            env_steps: w.elapsed_steps,
        });
        save_checkpoint(cfg, ep, &table, &mut checkpoints);
    }
    table.version = cfg.episodes.saturating_sub(1) as u64;
    Ok(Trained {
        table,
        curve: TrainingCurve::from_records(records, cfg.smoothing_window),
        checkpoints,
    })
}

fn save_checkpoint(cfg: &LearnerConfig, ep: usize, table: &PolicyTable, out: &mut Vec<PolicyTable>) {
    if cfg.checkpoint_every > 0 && (ep + 1).is_multiple_of(cfg.checkpoint_every) {
        let mut t = table.clone();
        t.version = ep as u64;
        out.push(t);
    }
}

/// Steps the greedy navigator needs to reach `goal`, or `None` within `cap`.
pub fn navigate_greedy(table: &PolicyTable, w: &mut WorldState, goal: (i32, i32), cap: u64) -> Option<u64> {
    let start = w.elapsed_steps;
    while w.agent_xz() != goal {
        if w.elapsed_steps - start >= cap {
            return None;
        }
        let p = w.agent_xz();
        let a = table.greedy(nav_state(goal.0 - p.0, goal.1 - p.1, w.heading));
        step_quiet(w, &Action::Move(Dir8::from_index(a)));
    }
    Some(w.elapsed_steps - start)
}

/// Fraction of `episodes` seeded goals the greedy navigator reaches in `cap` steps.
pub fn eval_goal_nav(table: &PolicyTable, world: &WorldConfig, cfg: &LearnerConfig, episodes: usize, cap: u64) -> Result<f64, LearnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED);
    let mut hits = 0;
    for ep in 0..episodes {
        let mut w = generate_world(&world.with_seed(episode_seed(cfg.seed ^ 0x5EED, ep as u64)))?;
        let off = draw_goal(cfg, &mut rng);
        let a0 = w.agent_xz();
        let goal = clamp_into(&w, (a0.0 + off.0, a0.1 + off.1));
        if navigate_greedy(table, &mut w, goal, cap).is_some() {
            hits += 1;
        }
    }
    Ok(hits as f64 / episodes.max(1) as f64)
}

// ---- exploration ----

const VISIT_BUCKET: usize = 4;

pub fn explorer_state(grid: &VisitGrid, pos: (i32, i32)) -> u32 {
    let cells = grid.capacity() as u32;
    let cell = grid.index(pos).map_or(cells, |i| i as u32);
    let bucket = (grid.visited_count() / VISIT_BUCKET) as u32;
    bucket * (cells + 1) + cell
}

/// Drives the agent with a high-level table choosing subgoals and a frozen
/// navigator reaching them. Used for training, evaluation and as the
/// exploration half of the finding skill.
#[derive(Clone, Debug)]
pub struct Explorer<'a> {
    pub high: &'a PolicyTable,
    pub low: &'a PolicyTable,
    pub goal_distance: i32,
    subgoal: Option<(i32, i32)>,
    sub_steps: u32,
    last_pos: Option<(i32, i32)>,
}

impl<'a> Explorer<'a> {
    pub fn new(high: &'a PolicyTable, low: &'a PolicyTable, goal_distance: i32) -> Self {
        Explorer {
            high,
            low,
            goal_distance,
            subgoal: None,
            sub_steps: 0,
            last_pos: None,
        }
    }

    pub fn reset(&mut self) {
        self.subgoal = None;
        self.sub_steps = 0;
        self.last_pos = None;
    }

    fn subgoal_expired(&self, w: &WorldState) -> bool {
        match self.subgoal {
            None => true,
            Some(g) => g == w.agent_xz() || self.sub_steps >= 2 * self.goal_distance as u32,
        }
    }

    fn set_subgoal(&mut self, w: &WorldState, dir: usize) {
        let (x, z) = Dir8::from_index(dir).delta();
        let p = w.agent_xz();
        let d = self.goal_distance;
        self.subgoal = Some(clamp_into(w, (p.0 + x * d, p.1 + z * d)));
        self.sub_steps = 0;
    }

    /// Highest-valued direction whose subgoal lies inside the world. The
    /// explorer trains in an open arena and never sees a border.
    fn choose(&self, w: &WorldState, grid: &VisitGrid) -> usize {
        let s = explorer_state(grid, w.agent_xz());
        self.inside(w)
            .fold(None, |best: Option<usize>, a| match best {
                Some(b) if self.high.value(s, b) >= self.high.value(s, a) => Some(b),
                _ => Some(a),
            })
            .unwrap_or_else(|| self.high.greedy(s))
    }

    fn inside<'w>(&self, w: &'w WorldState) -> impl Iterator<Item = usize> + 'w {
        let p = w.agent_xz();
        let d = self.goal_distance;
        (0..8).filter(move |&a| {
            let (x, z) = Dir8::from_index(a).delta();
            w.in_bounds((p.0 + x * d, p.1 + z * d))
        })
    }

    /// Low-level move toward the current subgoal, with a random sidestep when
    /// the previous move was blocked.
    fn low_action<R: Rng>(&mut self, w: &WorldState, rng: &mut R) -> Action<'static> {
        let g = self.subgoal.unwrap_or(w.agent_xz());
        let p = w.agent_xz();
        let blocked = self.last_pos == Some(p);
        self.last_pos = Some(p);
        self.sub_steps += 1;
        if blocked {
            return Action::Move(Dir8::from_index(rng.gen_range(0..8)));
        }
        Action::Move(Dir8::from_index(self.low.greedy(nav_state(g.0 - p.0, g.1 - p.1, w.heading))))
    }
}

/// Exploration coverage run: `steps` primitive steps, returns grids visited.
pub trait Wanderer {
    fn act(&mut self, w: &WorldState, grid: &VisitGrid, rng: &mut ChaCha8Rng) -> Action<'static>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomWalk;

impl Wanderer for RandomWalk {
    fn act(&mut self, _w: &WorldState, _g: &VisitGrid, rng: &mut ChaCha8Rng) -> Action<'static> {
        Action::Move(Dir8::from_index(rng.gen_range(0..8)))
    }
}

/// Walks straight ahead, turning by a random amount now and then or when blocked.
#[derive(Clone, Copy, Debug)]
pub struct ForwardWithTurns {
    pub turn_prob: f64,
    last_pos: Option<(i32, i32)>,
}

impl Default for ForwardWithTurns {
    fn default() -> Self {
        ForwardWithTurns {
            turn_prob: 0.1,
            last_pos: None,
        }
    }
}

impl Wanderer for ForwardWithTurns {
    fn act(&mut self, w: &WorldState, _g: &VisitGrid, rng: &mut ChaCha8Rng) -> Action<'static> {
        let p = w.agent_xz();
        let blocked = self.last_pos == Some(p);
        self.last_pos = Some(p);
        if blocked || rng.gen_bool(self.turn_prob) {
            let turn = rng.gen_range(1..8);
            Action::Move(Dir8::from_index(w.heading.index() + turn))
        } else {
            Action::Move(w.heading)
        }
    }
}

impl Wanderer for Explorer<'_> {
    fn act(&mut self, w: &WorldState, grid: &VisitGrid, rng: &mut ChaCha8Rng) -> Action<'static> {
        if self.subgoal_expired(w) {
            let dir = self.choose(w, grid);
            self.set_subgoal(w, dir);
        }
        self.low_action(w, rng)
    }
}

/// Grids of the default visit square covered in `steps` steps, starting from
/// the world's spawn.
pub fn coverage(w: &mut WorldState, policy: &mut dyn Wanderer, steps: u64, rng: &mut ChaCha8Rng) -> usize {
    let mut grid = VisitGrid::new(w.agent_xz());
    state_count_reward(&mut grid, w.agent_xz());
    for _ in 0..steps {
        let a = policy.act(w, &grid, rng);
        step_quiet(w, &a);
        state_count_reward(&mut grid, w.agent_xz());
    }
    grid.visited_count()
}

pub fn train_explorer(world: &WorldConfig, low: &PolicyTable, cfg: &LearnerConfig) -> Result<Trained, LearnerError> {
    if low.kind != PolicyKind::GoalNav {
        return Err(LearnerError::KindMismatch {
            expected: PolicyKind::GoalNav,
            found: low.kind,
        });
    }
    let mut table = PolicyTable::new(PolicyKind::ExplorerHigh);
    table.epsilon = cfg.epsilon_end;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut checkpoints = Vec::new();
    for ep in 0..cfg.episodes {
        let mut w = generate_world(&world.with_seed(episode_seed(cfg.seed, ep as u64)))?;
        let mut grid = VisitGrid::new(w.agent_xz());
        state_count_reward(&mut grid, w.agent_xz());
        let eps = cfg.epsilon(ep);
        let mut ex = Explorer::new(&table, low, cfg.goal_distance);
        // (state, action, reward) per high-level decision
        let mut trace: Vec<(u32, usize, f64)> = Vec::new();
        while w.elapsed_steps < cfg.step_cap {
            if ex.subgoal_expired(&w) {
                let s = explorer_state(&grid, w.agent_xz());
                let a = ex.high.epsilon_greedy(s, eps, &mut rng);
                ex.set_subgoal(&w, a);
                trace.push((s, a, 0.0));
            }
            let act = ex.low_action(&w, &mut rng);
            step_quiet(&mut w, &act);
            let r = state_count_reward(&mut grid, w.agent_xz());
            if let Some(last) = trace.last_mut() {
                last.2 += r;
            }
        }
        let mut g = 0.0;
        let mut ret = 0.0;
        for &(s, a, r) in trace.iter().rev() {
            g = r + cfg.discount * g;
            ret += r;
            table.nudge(s, a, g, cfg.learning_rate);
        }
        records.push(EpisodeRecord {
            ret,
            success: false,
            env_steps: w.elapsed_steps,
        });
        save_checkpoint(cfg, ep, &table, &mut checkpoints);
    }
    table.version = cfg.episodes.saturating_sub(1) as u64;
    Ok(Trained {
        table,
        curve: TrainingCurve::from_records(records, cfg.smoothing_window),
        checkpoints,
    })
}

// ---- finding ----

/// Finding-skill controller: explore until the target shows up within
/// detection range, then navigate to it.
#[derive(Clone, Debug)]
pub struct HierarchicalFinder<'a> {
    pub explorer: Explorer<'a>,
    /// Chance of a random in-bounds subgoal direction. A purely greedy
    /// high level can cycle once the visit counts stop changing.
    pub epsilon: f64,
    grid: VisitGrid,
    rng: ChaCha8Rng,
}

impl<'a> HierarchicalFinder<'a> {
    pub fn new(high: &'a PolicyTable, low: &'a PolicyTable, goal_distance: i32, seed: u64) -> Self {
        HierarchicalFinder {
            explorer: Explorer::new(high, low, goal_distance),
            epsilon: 0.1,
            grid: VisitGrid::new((0, 0)),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

/// Ascend or dig when the target lives on the other layer.
pub fn layer_fix(w: &WorldState, kind: &str) -> Option<Action<'static>> {
    match (w.layer, w.config.layer_of(kind)) {
        (Layer::Underground, Layer::Surface) => Some(Action::Ascend),
        (Layer::Surface, Layer::Underground) => Some(Action::DigDown),
        _ => None,
    }
}

impl SkillPolicy for HierarchicalFinder<'_> {
    fn begin(&mut self, w: &WorldState, _t: &SkillTarget) {
        self.explorer.reset();
        self.grid = VisitGrid::new(w.agent_xz());
        state_count_reward(&mut self.grid, w.agent_xz());
    }

    fn act(&mut self, w: &WorldState, target: &SkillTarget) -> Action<'static> {
        let kind = target.entity().unwrap_or_default();
        if let Some(a) = layer_fix(w, kind) {
            return a;
        }
        state_count_reward(&mut self.grid, w.agent_xz());
        if let Some((_, dx, dz, _)) = w.nearest(kind, w.config.detection_radius) {
            let p = w.agent_xz();
            let goal = (p.0 + dx, p.1 + dz);
            self.explorer.subgoal = Some(goal);
            self.explorer.sub_steps = 0;
            return self.explorer.low_action(w, &mut self.rng);
        }
        if self.explorer.subgoal_expired(w) {
            let dir = if self.epsilon > 0.0 && self.rng.gen_bool(self.epsilon.min(1.0)) {
                let dirs: Vec<usize> = self.explorer.inside(w).collect();
                dirs.get(self.rng.gen_range(0..dirs.len().max(1))).copied().unwrap_or(0)
            } else {
                self.explorer.choose(w, &self.grid)
            };
            self.explorer.set_subgoal(w, dir);
        }
        self.explorer.low_action(w, &mut self.rng)
    }
}

// ---- manipulation ----

const MANIP_CLIP: i32 = 4;
const MANIP_ACTIONS: usize = 12;

pub fn manip_action(a: usize, place: &str) -> Action<'static> {
    match a {
        0..=7 => Action::Move(Dir8::from_index(a)),
        8 => Action::Interact,
        9 => Action::DigDown,
        10 => Action::Ascend,
        _ => Action::Place(place.to_string()),
    }
}

/// (clipped offset to the nearest target or none, target in front, hits
/// already landed on it, depth).
pub fn manip_state(w: &WorldState, kind: &str) -> u32 {
    let side = 2 * MANIP_CLIP + 1;
    let (off, front, hits) = match w.nearest(kind, w.config.detection_radius) {
        Some((id, dx, dz, _)) => {
            let x = dx.clamp(-MANIP_CLIP, MANIP_CLIP) + MANIP_CLIP;
            let z = dz.clamp(-MANIP_CLIP, MANIP_CLIP) + MANIP_CLIP;
            let (hx, hz) = w.heading.delta();
            let hits = w.entities[&id].hits.min(15);
            ((z * side + x) as u32, (dx, dz) == (hx, hz), hits)
        }
        None => ((side * side) as u32, false, 0),
    };
    let depth = (-w.y_depth()).clamp(0, 7) as u32;
    (((off * 2 + u32::from(front)) * 16 + hits) * 8) + depth
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    SpawnNearby,
    GoExplore,
}

/// Entity kind a manipulation skill acts on, and the item it places.
/// Entity a manipulation skill acts on, and the item it places (empty unless
/// it is a placement skill).
pub fn manip_kind(skill: &SkillDefinition) -> (String, String) {
    match skill_target(skill) {
        SkillTarget::Place(k) => (k.clone(), k),
        t => (t.entity().unwrap_or_default().to_string(), String::new()),
    }
}

/// Tabular manipulation policy; crosses layers on its own when its target
/// lives elsewhere, except for dig skills, which learn that themselves.
#[derive(Clone, Debug)]
pub struct TablePolicy<'a> {
    pub table: &'a PolicyTable,
    kind: String,
    place: String,
    dig: bool,
    rng: ChaCha8Rng,
    last: Option<(u32, (i32, i32), usize)>,
}

impl<'a> TablePolicy<'a> {
    /// Acts epsilon-greedily with the table's own epsilon.
    pub fn new(table: &'a PolicyTable, skill: &SkillDefinition, seed: u64) -> Self {
        let (kind, place) = manip_kind(skill);
        TablePolicy {
            table,
            kind,
            place,
            dig: matches!(skill_target(skill), SkillTarget::Dig(_)),
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
        }
    }
}

impl SkillPolicy for TablePolicy<'_> {
    fn act(&mut self, w: &WorldState, _t: &SkillTarget) -> Action<'static> {
        if !self.dig && self.place.is_empty() {
            if let Some(a) = layer_fix(w, &self.kind) {
                return a;
            }
        }
        let s = manip_state(w, &self.kind);
        let p = w.agent_xz();
        // a move that left the state unchanged was blocked; greedy would repeat it
        let blocked = matches!(self.last, Some((ls, lp, la)) if ls == s && lp == p && la < 8);
        let a = if blocked || self.table.values(s).is_none() {
            self.rng.gen_range(0..self.table.actions())
        } else {
            self.table.epsilon_greedy(s, self.table.epsilon, &mut self.rng)
        };
        self.last = Some((s, p, a));
        manip_action(a, &self.place)
    }
}

/// Tracks the per-skill intrinsic reward across an episode.
struct Shaper {
    kind: String,
    mob: bool,
    dig: bool,
    prev_d: Option<f64>,
    min_d: Option<f64>,
    min_y: i32,
}

impl Shaper {
    fn new(w: &WorldState, skill: &SkillDefinition, kind: &str) -> Self {
        let d = Self::dist(w, kind);
        Shaper {
            kind: kind.to_string(),
            mob: w.config.is_mob(kind),
            dig: matches!(skill_target(skill), SkillTarget::Dig(_)),
            prev_d: d,
            min_d: d,
            min_y: w.y_depth(),
        }
    }

    fn dist(w: &WorldState, kind: &str) -> Option<f64> {
        w.nearest(kind, w.config.detection_radius).map(|(_, _, _, d)| d as f64)
    }

    fn reward(&mut self, w: &WorldState) -> f64 {
        let d = Self::dist(w, &self.kind);
        let r = if self.mob {
            let s = PoseSample {
                distance_to_goal: d,
                prev_min_distance: self.min_d,
                ..PoseSample::default()
            };
            let ev = &w.last_event;
            combat_distance_reward(&s)
                + attack_reward(ev.attacked.as_deref() == Some(self.kind.as_str()), ev.target_centered)
        } else if self.dig {
            let s = PoseSample {
                y_depth: w.y_depth(),
                prev_extreme_depth: self.min_y,
                ..PoseSample::default()
            };
            let mut r = depth_reward(DepthMode::Down, &s);
            if w.layer == Layer::Underground {
                r += mining_distance_reward(self.prev_d, d);
            }
            r
        } else if self.kind.is_empty() {
            0.0
        } else {
            mining_distance_reward(self.prev_d, d)
        };
        self.prev_d = d;
        self.min_d = match (self.min_d, d) {
            (Some(m), Some(x)) => Some(m.min(x)),
            (m, x) => m.or(x),
        };
        self.min_y = self.min_y.min(w.y_depth());
        r
    }
}

/// Items a skill needs in hand for training, nearby entries excluded.
fn training_kit(skill: &SkillDefinition) -> impl Iterator<Item = (&String, u32)> {
    skill
        .consume
        .iter()
        .chain(skill.require.iter())
        .filter(|(k, _)| !is_nearby(k))
        .map(|(k, &n)| (k, n))
        .chain(skill.equip.iter().map(|k| (k, 1)))
}

fn spawn_target(w: &mut WorldState, kind: &str, radius: i32, rng: &mut ChaCha8Rng) -> bool {
    let layer = w.config.layer_of(kind);
    let p = w.agent_xz();
    let r = radius.max(1);
    for _ in 0..64 {
        let q = (p.0 + rng.gen_range(-r..=r), p.1 + rng.gen_range(-r..=r));
        if q != p && !w.occupied(layer, q) {
            w.spawn(kind, layer, q);
            return true;
        }
    }
    false
}

/// Digs down to the layer `kind` lives on, as the preceding finding or
/// digging skill would have left the agent.
fn descend_to(w: &mut WorldState, kind: &str) -> bool {
    let layer = w.config.layer_of(kind);
    for _ in 0..w.config.max_depth {
        if w.layer == layer {
            break;
        }
        step_quiet(w, &Action::DigDown);
    }
    w.layer == layer
}

/// Starting state of one manipulation training episode.
fn manip_start(
    world: &WorldConfig,
    skill: &SkillDefinition,
    kind: &str,
    mode: TrainMode,
    finding: Option<(&PolicyTable, &PolicyTable)>,
    cfg: &LearnerConfig,
    ep: u64,
    rng: &mut ChaCha8Rng,
) -> Result<WorldState, LearnerError> {
    let mut attempt = 0u64;
    loop {
        let seed = episode_seed(cfg.seed, ep.wrapping_mul(1009).wrapping_add(attempt));
        attempt += 1;
        let mut w = generate_world(&world.with_seed(seed))?;
        for (k, n) in training_kit(skill) {
            let have = w.inventory.entry(k.clone()).or_insert(0);
            *have = (*have).max(n);
        }
        let ready = match mode {
            TrainMode::SpawnNearby => match skill_target(skill) {
                SkillTarget::Harvest(_) => descend_to(&mut w, kind) && spawn_target(&mut w, kind, cfg.spawn_radius, rng),
                SkillTarget::Dig(_) => spawn_target(&mut w, kind, cfg.spawn_radius, rng),
                _ => true,
            },
            TrainMode::GoExplore => {
                if w.count_kind(kind) == 0 {
                    return Err(LearnerError::NoTargetInWorld(kind.to_string()));
                }
                let (high, low) = finding.ok_or(LearnerError::MissingFindingPolicy)?;
                let find = SkillDefinition::simple(&alloc::format!("{kind}_nearby"), &[], &[], 1)
                    .map_err(|_| LearnerError::NotTrainable(kind.to_string()))?;
                let mut finder = HierarchicalFinder::new(high, low, cfg.goal_distance, seed);
                crate::world::execute_skill(&mut w, &find, &mut finder, cfg.find_cap).success
            }
        };
        if ready {
            w.elapsed_steps = 0;
            return Ok(w);
        }
        if attempt > 50 {
            return Err(LearnerError::NoTargetInWorld(kind.to_string()));
        }
    }
}

pub fn train_manipulation(
    world: &WorldConfig,
    skill: &SkillDefinition,
    mode: TrainMode,
    finding: Option<(&PolicyTable, &PolicyTable)>,
    cfg: &LearnerConfig,
) -> Result<Trained, LearnerError> {
    if skill.kind != SkillKind::Manipulation {
        return Err(LearnerError::NotTrainable(skill.name.clone()));
    }
    if mode == TrainMode::GoExplore && finding.is_none() {
        return Err(LearnerError::MissingFindingPolicy);
    }
    let (kind, place) = manip_kind(skill);
    let dig = matches!(skill_target(skill), SkillTarget::Dig(_));
    let mut table = PolicyTable::new(PolicyKind::Manipulation);
    table.epsilon = cfg.epsilon_end;
    table.skill = Some(skill.name.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut checkpoints = Vec::new();
    // nothing to find before digging or placing
    let mode = if dig || !place.is_empty() { TrainMode::SpawnNearby } else { mode };
    for ep in 0..cfg.episodes {
        let mut w = manip_start(world, skill, &kind, mode, finding, cfg, ep as u64, &mut rng)?;
        let start_inv = w.inventory.clone();
        w.equipped = skill
            .equip
            .iter()
            .find(|t| w.inventory.get(*t).copied().unwrap_or(0) > 0)
            .cloned();
        let mut shaper = Shaper::new(&w, skill, &kind);
        let eps = cfg.epsilon(ep);
        let mut ret = 0.0;
        let mut success = obtain_satisfied(&w, skill, &start_inv);
        while !success && w.elapsed_steps < cfg.step_cap {
            let s = manip_state(&w, &kind);
            let a = table.epsilon_greedy(s, eps, &mut rng);
            step_quiet(&mut w, &manip_action(a, &place));
            success = obtain_satisfied(&w, skill, &start_inv);
            let r = combined_reward(shaper.reward(&w), success, cfg.weights);
            ret += r;
            let target = if success {
                r
            } else {
                r + cfg.discount * table.max_value(manip_state(&w, &kind))
            };
            table.nudge(s, a, target, cfg.learning_rate);
        }
        records.push(EpisodeRecord {
            ret,
            success,
            env_steps: w.elapsed_steps,
        });
        save_checkpoint(cfg, ep, &table, &mut checkpoints);
    }
    table.version = cfg.episodes.saturating_sub(1) as u64;
    Ok(Trained {
        table,
        curve: TrainingCurve::from_records(records, cfg.smoothing_window),
        checkpoints,
    })
}

/// Greedy success rate of a manipulation table from the starts of `mode`.
pub fn eval_manipulation(
    table: &PolicyTable,
    world: &WorldConfig,
    skill: &SkillDefinition,
    mode: TrainMode,
    finding: Option<(&PolicyTable, &PolicyTable)>,
    cfg: &LearnerConfig,
    episodes: usize,
) -> Result<f64, LearnerError> {
    let eval = LearnerConfig {
        seed: cfg.seed ^ 0xE7A1,
        ..*cfg
    };
    let (kind, _) = manip_kind(skill);
    let mut rng = ChaCha8Rng::seed_from_u64(eval.seed);
    let mut hits = 0;
    for ep in 0..episodes {
        let mut w = manip_start(world, skill, &kind, mode, finding, &eval, ep as u64, &mut rng)?;
        let mut policy = TablePolicy::new(table, skill, episode_seed(eval.seed, ep as u64));
        if crate::world::execute_skill(&mut w, skill, &mut policy, cfg.step_cap).success {
            hits += 1;
        }
    }
    Ok(hits as f64 / episodes.max(1) as f64)
}
