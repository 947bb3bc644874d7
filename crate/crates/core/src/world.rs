//! A seeded two-layer crafting gridworld.
//!
//! The surface holds trees, stone and mobs; digging down far enough switches
//! the agent to the underground layer, where ore lives. Distances are
//! Chebyshev throughout, so diagonal neighbours are adjacent.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::planner::{Condition, SkillOutcome};
use crate::skilldef::{is_nearby, Counts, ItemId, SkillDefinition, SkillKind, NEARBY_SUFFIX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir8 {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

// cos(k * 45deg)
const COS45: [f64; 8] = [
    1.0,
    core::f64::consts::FRAC_1_SQRT_2,
    0.0,
    -core::f64::consts::FRAC_1_SQRT_2,
    -1.0,
    -core::f64::consts::FRAC_1_SQRT_2,
    0.0,
    core::f64::consts::FRAC_1_SQRT_2,
];

impl Dir8 {
    pub const ALL: [Dir8; 8] = [Dir8::N, Dir8::NE, Dir8::E, Dir8::SE, Dir8::S, Dir8::SW, Dir8::W, Dir8::NW];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Dir8 {
        Dir8::ALL[i % 8]
    }

    /// (dx, dz) with z growing southwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Dir8::N => (0, -1),
            Dir8::NE => (1, -1),
            Dir8::E => (1, 0),
            Dir8::SE => (1, 1),
            Dir8::S => (0, 1),
            Dir8::SW => (-1, 1),
            Dir8::W => (-1, 0),
            Dir8::NW => (-1, -1),
        }
    }

    /// Nearest compass direction of an offset; `None` for the zero offset.
    pub fn from_offset(dx: i32, dz: i32) -> Option<Dir8> {
        if dx == 0 && dz == 0 {
            return None;
        }
        let (ax, az) = (i64::from(dx.unsigned_abs()), i64::from(dz.unsigned_abs()));
        // tan(22.5deg) ~ 0.41421
        let sx = if ax * 100_000 <= az * 41_421 { 0 } else { dx.signum() };
        let sz = if az * 100_000 <= ax * 41_421 { 0 } else { dz.signum() };
        Dir8::ALL.iter().copied().find(|d| d.delta() == (sx, sz))
    }

    /// Cosine of the angle between two compass directions.
    pub fn cos_to(self, other: Dir8) -> f64 {
        COS45[(other.index() + 8 - self.index()) % 8]
    }

    /// Heading alignment with an offset, quantised to the compass rose.
    pub fn alignment(self, dx: i32, dz: i32) -> f64 {
        match Dir8::from_offset(dx, dz) {
            Some(d) => self.cos_to(d),
            None => 1.0,
        }
    }
}

pub fn chebyshev(a: (i32, i32), b: (i32, i32)) -> i32 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    Surface,
    Underground,
}

impl Layer {
    fn slot(self) -> usize {
        match self {
            Layer::Surface => 0,
            Layer::Underground => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Biome {
    Plains,
    Forest,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub size: i32,
    /// Entities per 1,000 cells of their layer.
    pub resource_densities: BTreeMap<String, f64>,
    pub mob_counts: BTreeMap<String, u32>,
    /// Entity kinds that live on the underground layer.
    pub underground: Vec<String>,
    pub detection_radius: i32,
    pub reach_distance: i32,
    /// Half-width of the local observation window.
    pub view: i32,
    pub harvest_hits: BTreeMap<String, u32>,
    pub drops: BTreeMap<String, String>,
    /// Tool that must be equipped to harvest an entity kind.
    pub tools: BTreeMap<String, String>,
    pub mob_flee: bool,
    pub mob_move_prob: f64,
    pub flee_steps: u32,
    /// Depth at which the underground layer is reached.
    pub ore_depth: i32,
    pub max_depth: i32,
    /// Keep the agent's spawn cell at least this far from the border.
    pub spawn_margin: i32,
    pub seed: u64,
    pub biome: Biome,
}

fn map<V: Clone>(xs: &[(&str, V)]) -> BTreeMap<String, V> {
    xs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig::preset(Biome::Plains, 0)
    }
}

impl WorldConfig {
    pub fn preset(biome: Biome, seed: u64) -> Self {
        let (trees, stone, cows, sheep) = match biome {
            Biome::Plains | Biome::Custom => (8.0, 10.0, 6, 6),
            Biome::Forest => (30.0, 6.0, 3, 3),
        };
        WorldConfig {
            size: 48,
            resource_densities: map(&[("tree", trees), ("stone", stone), ("iron_ore", 6.0)]),
            mob_counts: map(&[("cow", cows), ("sheep", sheep)]),
            underground: vec!["iron_ore".to_string()],
            detection_radius: 8,
            reach_distance: 3,
            view: 2,
            harvest_hits: map(&[("tree", 5), ("stone", 5), ("iron_ore", 5), ("cow", 3), ("sheep", 3)]),
            drops: map(&[
                ("tree", "log".to_string()),
                ("stone", "cobblestone".to_string()),
                ("iron_ore", "iron_ore".to_string()),
                ("cow", "beef".to_string()),
                ("sheep", "mutton".to_string()),
            ]),
            tools: map(&[("stone", "wooden_pickaxe".to_string()), ("iron_ore", "stone_pickaxe".to_string())]),
            mob_flee: true,
            mob_move_prob: 0.2,
            flee_steps: 3,
            ore_depth: 3,
            max_depth: 6,
            spawn_margin: 0,
            seed,
            biome,
        }
    }

    /// An empty arena, used for training navigation and exploration.
    pub fn empty(size: i32, seed: u64) -> Self {
        WorldConfig {
            size,
            resource_densities: BTreeMap::new(),
            mob_counts: BTreeMap::new(),
            detection_radius: 8.min(size - 1),
            seed,
            biome: Biome::Custom,
            ..WorldConfig::preset(Biome::Custom, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        WorldConfig { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.size < 16 {
            return Err(WorldError::InvalidConfig("size must be at least 16".into()));
        }
        if self.detection_radius >= self.size || self.detection_radius < 0 {
            return Err(WorldError::InvalidConfig("detection radius must be below size".into()));
        }
        if self.reach_distance < 1 {
            return Err(WorldError::InvalidConfig("reach distance must be at least 1".into()));
        }
        if self.resource_densities.values().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(WorldError::InvalidConfig("densities must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.mob_move_prob) {
            return Err(WorldError::InvalidConfig("mob_move_prob must lie in [0, 1]".into()));
        }
        if self.ore_depth < 1 || self.max_depth < self.ore_depth {
            return Err(WorldError::InvalidConfig("need 1 <= ore_depth <= max_depth".into()));
        }
        if 2 * self.spawn_margin >= self.size {
            return Err(WorldError::InvalidConfig("spawn margin too large".into()));
        }
        Ok(())
    }

    pub fn layer_of(&self, kind: &str) -> Layer {
        if self.underground.iter().any(|k| k == kind) {
            Layer::Underground
        } else {
            Layer::Surface
        }
    }

    pub fn is_mob(&self, kind: &str) -> bool {
        self.mob_counts.contains_key(kind)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldError {
    InvalidConfig(String),
    InfeasibleDensity { kind: String, requested: usize, free: usize },
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::InvalidConfig(m) => write!(f, "invalid world config: {m}"),
            WorldError::InfeasibleDensity { kind, requested, free } => {
                write!(f, "cannot place {requested} `{kind}`: only {free} free cells")
            }
        }
    }
}

impl core::error::Error for WorldError {}

/// Entities to place for a density, rounding half to even.
pub fn placement_count(cells: usize, density: f64) -> usize {
    let x = cells as f64 * density / 1000.0;
    let f = x as usize;
    let frac = x - f as f64;
    if frac > 0.5 || (frac == 0.5 && f % 2 == 1) {
        f + 1
    } else {
        f
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub kind: String,
    pub layer: Layer,
    pub pos: (i32, i32),
    pub hits: u32,
    pub flee: u32,
}

/// ChaCha8 generator that serialises as seed, stream and word position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldRng(pub ChaCha8Rng);

#[derive(Serialize, Deserialize)]
struct RngRepr {
    seed: [u8; 32],
    stream: u64,
    word_pos: u128,
}

impl Serialize for WorldRng {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RngRepr {
            seed: self.0.get_seed(),
            stream: self.0.get_stream(),
            word_pos: self.0.get_word_pos(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WorldRng {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RngRepr::deserialize(d)?;
        let mut rng = ChaCha8Rng::from_seed(r.seed);
        rng.set_stream(r.stream);
        rng.set_word_pos(r.word_pos);
        Ok(WorldRng(rng))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub config: WorldConfig,
    pub layer: Layer,
    /// (x, y_depth, z); y_depth is 0 at the surface and negative below.
    pub agent_pos: (i32, i32, i32),
    pub heading: Dir8,
    pub entities: BTreeMap<u32, Entity>,
    pub inventory: Counts,
    pub equipped: Option<ItemId>,
    pub elapsed_steps: u64,
    pub rng: WorldRng,
    next_id: u32,
    // per layer, row-major; 0 is empty, otherwise entity id + 1
    occupancy: [Vec<u32>; 2],
    #[serde(skip)]
    pub last_event: StepEvent,
}

/// What the most recent step did, for reward computation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepEvent {
    pub moved: bool,
    pub attacked: Option<String>,
    pub target_centered: bool,
    pub harvested: Option<String>,
    pub crafted: bool,
    pub placed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action<'a> {
    Move(Dir8),
    Interact,
    Place(String),
    DigDown,
    Ascend,
    Craft(&'a SkillDefinition),
    Noop,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Empty,
    OutOfBounds,
    Agent,
    Entity(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LidarHit {
    pub kind: String,
    pub offset: (i32, i32),
    pub distance: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub local_window: Vec<Vec<Cell>>,
    pub lidar_hits: Vec<LidarHit>,
    pub inventory: Counts,
    pub pose: ((i32, i32, i32), Dir8),
}

pub fn generate_world(config: &WorldConfig) -> Result<WorldState, WorldError> {
    config.validate()?;
    let n = config.size;
    let cells = (n * n) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.spawn_margin;
    let agent = (rng.gen_range(m..n - m), rng.gen_range(m..n - m));
    let mut state = WorldState {
        config: config.clone(),
        layer: Layer::Surface,
        agent_pos: (agent.0, 0, agent.1),
        heading: Dir8::N,
        entities: BTreeMap::new(),
        inventory: Counts::new(),
        equipped: None,
        elapsed_steps: 0,
        rng: WorldRng(rng.clone()),
        next_id: 0,
        occupancy: [vec![0; cells], vec![0; cells]],
        last_event: StepEvent::default(),
    };
    let mut requests: Vec<(String, usize)> = config
        .resource_densities
        .iter()
        .map(|(k, &d)| (k.clone(), placement_count(cells, d)))
        .collect();
    requests.extend(config.mob_counts.iter().map(|(k, &c)| (k.clone(), c as usize)));
    for (kind, count) in requests {
        let layer = config.layer_of(&kind);
        let taken = state.occupancy[layer.slot()].iter().filter(|&&v| v != 0).count();
        let free = cells - taken - usize::from(layer == Layer::Surface);
        if count > free {
            return Err(WorldError::InfeasibleDensity {
                kind,
                requested: count,
                free,
            });
        }
        let mut placed = 0;
        while placed < count {
            let pos = (rng.gen_range(0..n), rng.gen_range(0..n));
            if state.occupied(layer, pos) || (layer == Layer::Surface && pos == agent) {
                continue;
            }
            state.spawn(&kind, layer, pos);
            placed += 1;
        }
    }
    state.rng = WorldRng(rng);
    Ok(state)
}

impl WorldState {
    fn idx(&self, pos: (i32, i32)) -> usize {
        (pos.1 * self.config.size + pos.0) as usize
    }

    pub fn in_bounds(&self, pos: (i32, i32)) -> bool {
        (0..self.config.size).contains(&pos.0) && (0..self.config.size).contains(&pos.1)
    }

    pub fn agent_xz(&self) -> (i32, i32) {
        (self.agent_pos.0, self.agent_pos.2)
    }

    pub fn y_depth(&self) -> i32 {
        self.agent_pos.1
    }

    pub fn entity_at(&self, layer: Layer, pos: (i32, i32)) -> Option<(u32, &Entity)> {
        if !self.in_bounds(pos) {
            return None;
        }
        match self.occupancy[layer.slot()][self.idx(pos)] {
            0 => None,
            v => self.entities.get(&(v - 1)).map(|e| (v - 1, e)),
        }
    }

    pub fn occupied(&self, layer: Layer, pos: (i32, i32)) -> bool {
        !self.in_bounds(pos) || self.occupancy[layer.slot()][self.idx(pos)] != 0
    }

    /// Add an entity at a free cell; returns its id.
    pub fn spawn(&mut self, kind: &str, layer: Layer, pos: (i32, i32)) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        let i = self.idx(pos);
        self.occupancy[layer.slot()][i] = id + 1;
        self.entities.insert(
            id,
            Entity {
                kind: kind.to_string(),
                layer,
                pos,
                hits: 0,
                flee: 0,
            },
        );
        id
    }

    pub fn despawn(&mut self, id: u32) -> Option<Entity> {
        let e = self.entities.remove(&id)?;
        let i = self.idx(e.pos);
        self.occupancy[e.layer.slot()][i] = 0;
        Some(e)
    }

    fn relocate(&mut self, id: u32, to: (i32, i32)) {
        let Some(e) = self.entities.get(&id) else { return };
        let (layer, from) = (e.layer, e.pos);
        let (a, b) = (self.idx(from), self.idx(to));
        self.occupancy[layer.slot()][a] = 0;
        self.occupancy[layer.slot()][b] = id + 1;
        if let Some(e) = self.entities.get_mut(&id) {
            e.pos = to;
        }
    }

    /// Move the agent to a free cell of the current layer, for scenario setup.
    pub fn teleport(&mut self, pos: (i32, i32)) -> bool {
        let blocked = self.occupied(self.layer, pos);
        if !blocked {
            self.agent_pos.0 = pos.0;
            self.agent_pos.2 = pos.1;
        }
        !blocked
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.entities.values().filter(|e| e.kind == kind).count()
    }

    /// Closest entity of `kind` on the current layer within `radius`, scanning
    /// square rings outward. Returns (id, dx, dz, distance).
    pub fn nearest(&self, kind: &str, radius: i32) -> Option<(u32, i32, i32, i32)> {
        let (ax, az) = self.agent_xz();
        let slot = self.layer.slot();
        for r in 1..=radius {
            for dz in -r..=r {
                let step = if dz == -r || dz == r { 1 } else { 2 * r };
                let mut dx = -r;
                while dx <= r {
                    let p = (ax + dx, az + dz);
                    if self.in_bounds(p) {
                        let v = self.occupancy[slot][self.idx(p)];
                        if v != 0 && self.entities[&(v - 1)].kind == kind {
                            return Some((v - 1, dx, dz, r));
                        }
                    }
                    dx += step;
                }
            }
        }
        None
    }

    pub fn observe(&self) -> Observation {
        let (ax, az) = self.agent_xz();
        let v = self.config.view;
        let mut window = Vec::with_capacity((2 * v + 1) as usize);
        for dz in -v..=v {
            let mut row = Vec::with_capacity((2 * v + 1) as usize);
            for dx in -v..=v {
                let p = (ax + dx, az + dz);
                row.push(if dx == 0 && dz == 0 {
                    Cell::Agent
                } else if !self.in_bounds(p) {
                    Cell::OutOfBounds
                } else {
                    match self.entity_at(self.layer, p) {
                        Some((_, e)) => Cell::Entity(e.kind.clone()),
                        None => Cell::Empty,
                    }
                });
            }
            window.push(row);
        }
        let r = self.config.detection_radius;
        let mut hits: Vec<LidarHit> = self
            .entities
            .values()
            .filter(|e| e.layer == self.layer)
            .map(|e| (e, chebyshev(e.pos, (ax, az))))
            .filter(|(_, d)| *d <= r)
            .map(|(e, d)| LidarHit {
                kind: e.kind.clone(),
                offset: (e.pos.0 - ax, e.pos.1 - az),
                distance: d,
            })
            .collect();
        hits.sort_by(|a, b| (a.distance, &a.kind, a.offset).cmp(&(b.distance, &b.kind, b.offset)));
        Observation {
            local_window: window,
            lidar_hits: hits,
            inventory: self.inventory.clone(),
            pose: (self.agent_pos, self.heading),
        }
    }

    fn add_item(&mut self, item: &str, n: u32) {
        *self.inventory.entry(item.to_string()).or_insert(0) += n;
    }

    fn remove_item(&mut self, item: &str, n: u32) -> bool {
        match self.inventory.get_mut(item) {
            Some(v) if *v >= n => {
                *v -= n;
                if *v == 0 {
                    self.inventory.remove(item);
                }
                true
            }
            _ => false,
        }
    }

    fn can_harvest(&self, kind: &str) -> bool {
        if !self.config.harvest_hits.contains_key(kind) {
            return false;
        }
        match self.config.tools.get(kind) {
            Some(tool) => self.equipped.as_ref() == Some(tool) && self.inventory.get(tool).copied().unwrap_or(0) > 0,
            None => true,
        }
    }

    /// Hits the front cell if it holds something harvestable, else the first
    /// harvestable neighbour clockwise from the heading.
    fn interact(&mut self) {
        let (ax, az) = self.agent_xz();
        let h = self.heading.index();
        let target = (0..8)
            .map(|k| Dir8::from_index(h + k).delta())
            .enumerate()
            .find_map(|(k, d)| {
                self.entity_at(self.layer, (ax + d.0, az + d.1))
                    .filter(|(_, e)| self.can_harvest(&e.kind))
                    .map(|(id, _)| (id, k == 0))
            });
        let Some((id, centered)) = target else { return };
        let kind = self.entities[&id].kind.clone();
        let needed = self.config.harvest_hits[&kind];
        let mob = self.config.is_mob(&kind);
        let flee = if mob && self.config.mob_flee { self.config.flee_steps } else { 0 };
        let e = self.entities.get_mut(&id).expect("occupied cell has an entity");
        e.hits += 1;
        e.flee = flee;
        let done = e.hits >= needed;
        if mob {
            self.last_event.attacked = Some(kind.clone());
            self.last_event.target_centered = centered;
        }
        if done {
            self.despawn(id);
            if let Some(item) = self.config.drops.get(&kind).cloned() {
                self.add_item(&item, 1);
            }
            self.last_event.harvested = Some(kind);
        }
    }

    fn place(&mut self, item: &str) {
        if self.inventory.get(item).copied().unwrap_or(0) == 0 {
            return;
        }
        let (ax, az) = self.agent_xz();
        let h = self.heading.index();
        let spot = (0..8)
            .map(|k| Dir8::from_index(h + k).delta())
            .map(|d| (ax + d.0, az + d.1))
            .find(|&p| !self.occupied(self.layer, p));
        if let Some(p) = spot {
            self.remove_item(item, 1);
            let layer = self.layer;
            self.spawn(item, layer, p);
            self.last_event.placed = true;
        }
    }

    fn craft(&mut self, skill: &SkillDefinition) {
        let cond = read_condition(self);
        let ok = skill.require.iter().all(|(k, &n)| cond.get(k) >= n)
            && skill.consume.iter().all(|(k, &n)| !is_nearby(k) && cond.get(k) >= n)
            && skill.obtain.keys().all(|k| !is_nearby(k));
        if !ok {
            return;
        }
        for (k, &n) in &skill.consume {
            self.remove_item(k, n);
        }
        for (k, &n) in &skill.obtain {
            self.add_item(k, n);
        }
        self.last_event.crafted = true;
    }

    fn update_layer(&mut self) {
        let below = self.agent_pos.1 <= -self.config.ore_depth;
        let want = if below { Layer::Underground } else { Layer::Surface };
        if want != self.layer {
            let xz = self.agent_xz();
            if self.occupied(want, xz) {
                // the cell on the other layer is solid; stay put
                self.agent_pos.1 += if below { 1 } else { -1 };
                return;
            }
            self.layer = want;
        }
    }

    fn move_mobs(&mut self) {
        let ids: Vec<u32> = self
            .entities
            .iter()
            .filter(|(_, e)| self.config.is_mob(&e.kind))
            .map(|(&id, _)| id)
            .collect();
        let (ax, az) = self.agent_xz();
        for id in ids {
            let (pos, layer, flee) = {
                let e = &self.entities[&id];
                (e.pos, e.layer, e.flee)
            };
            let step = if flee > 0 {
                if let Some(e) = self.entities.get_mut(&id) {
                    e.flee -= 1;
                }
                Some(((pos.0 - ax).signum(), (pos.1 - az).signum()))
            } else if self.rng.0.gen_bool(self.config.mob_move_prob) {
                Some(Dir8::from_index(self.rng.0.gen_range(0..8)).delta())
            } else {
                None
            };
            if let Some((dx, dz)) = step {
                let to = (pos.0 + dx, pos.1 + dz);
                let agent_here = layer == self.layer && to == (ax, az);
                if (dx, dz) != (0, 0) && !self.occupied(layer, to) && !agent_here {
                    self.relocate(id, to);
                }
            }
        }
    }
}

/// Advance the world by one primitive action. Invalid actions do nothing
/// beyond consuming the step. Mobs act after the agent.
pub fn step(state: &mut WorldState, action: &Action<'_>) -> Observation {
    step_quiet(state, action);
    state.observe()
}

/// [`step`] without building the observation.
pub fn step_quiet(state: &mut WorldState, action: &Action<'_>) {
    state.last_event = StepEvent::default();
    state.elapsed_steps += 1;
    match action {
        Action::Move(d) => {
            state.heading = *d;
            let (dx, dz) = d.delta();
            let to = (state.agent_pos.0 + dx, state.agent_pos.2 + dz);
            if !state.occupied(state.layer, to) {
                state.agent_pos.0 = to.0;
                state.agent_pos.2 = to.1;
                state.last_event.moved = true;
            }
        }
        Action::Interact => state.interact(),
        Action::Place(item) => state.place(item),
        Action::DigDown => {
            if state.agent_pos.1 > -state.config.max_depth {
                state.agent_pos.1 -= 1;
                state.update_layer();
            }
        }
        Action::Ascend => {
            if state.agent_pos.1 < 0 {
                state.agent_pos.1 += 1;
                state.update_layer();
            }
        }
        Action::Craft(skill) => state.craft(skill),
        Action::Noop => {}
    }
    state.move_mobs();
}

/// Inventory plus one `<kind>_nearby` entry per entity kind within reach.
pub fn read_condition(state: &WorldState) -> Condition {
    let mut c = Condition {
        inventory: state.inventory.clone(),
        nearby: Counts::new(),
    };
    let (ax, az) = state.agent_xz();
    let r = state.config.reach_distance;
    for dz in -r..=r {
        for dx in -r..=r {
            if let Some((_, e)) = state.entity_at(state.layer, (ax + dx, az + dz)) {
                c.add(&format!("{}{}", e.kind, NEARBY_SUFFIX), 1);
            }
        }
    }
    c
}

/// What a skill asks of the world.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkillTarget {
    /// Get within reach of an entity kind.
    Find(String),
    /// Interact with an entity kind until it drops an item.
    Harvest(String),
    /// Put an item down next to the agent.
    Place(String),
    /// Dig until an entity kind is within reach.
    Dig(String),
    Craft,
}

impl SkillTarget {
    pub fn entity(&self) -> Option<&str> {
        match self {
            SkillTarget::Find(k) | SkillTarget::Harvest(k) | SkillTarget::Place(k) | SkillTarget::Dig(k) => Some(k),
            SkillTarget::Craft => None,
        }
    }
}

fn strip_nearby(item: &str) -> &str {
    item.strip_suffix(NEARBY_SUFFIX).unwrap_or(item)
}

pub fn skill_target(skill: &SkillDefinition) -> SkillTarget {
    match skill.kind {
        SkillKind::Crafting => SkillTarget::Craft,
        SkillKind::Finding => SkillTarget::Find(strip_nearby(&skill.name).to_string()),
        SkillKind::Manipulation => {
            if is_nearby(&skill.name) {
                let kind = strip_nearby(&skill.name);
                if skill.consume.contains_key(kind) {
                    SkillTarget::Place(kind.to_string())
                } else {
                    SkillTarget::Dig(kind.to_string())
                }
            } else {
                let nearby = skill
                    .consume
                    .keys()
                    .chain(skill.require.keys())
                    .find(|k| is_nearby(k))
                    .map(|k| strip_nearby(k).to_string());
                SkillTarget::Harvest(nearby.unwrap_or_else(|| skill.name.clone()))
            }
        }
    }
}

/// Chooses primitive actions while a skill runs.
pub trait SkillPolicy {
    /// Called once when the skill starts.
    fn begin(&mut self, _state: &WorldState, _target: &SkillTarget) {}
    fn act(&mut self, state: &WorldState, target: &SkillTarget) -> Action<'static>;
}

/// Whether the skill's obtain map is satisfied relative to `start`.
pub fn obtain_satisfied(state: &WorldState, skill: &SkillDefinition, start: &Counts) -> bool {
    let cond = read_condition(state);
    skill.obtain.iter().all(|(k, &n)| {
        if is_nearby(k) {
            cond.get(k) >= n
        } else {
            let before = start.get(k).copied().unwrap_or(0);
            cond.get(k) >= before + n
        }
    })
}

fn gains(before: &Counts, after: &Condition) -> Counts {
    let mut out = Counts::new();
    for (k, &v) in after.iter() {
        let b = if is_nearby(k) { 0 } else { before.get(k).copied().unwrap_or(0) };
        if v > b {
            out.insert(k.clone(), v - b);
        }
    }
    out
}

/// Run one skill for at most `step_cap` primitive steps.
pub fn execute_skill(
    state: &mut WorldState,
    skill: &SkillDefinition,
    policy: &mut dyn SkillPolicy,
    step_cap: u64,
) -> SkillOutcome {
    let start_steps = state.elapsed_steps;
    let start_inv = state.inventory.clone();
    let target = skill_target(skill);
    if skill.kind == SkillKind::Manipulation {
        state.equipped = skill
            .equip
            .iter()
            .find(|t| state.inventory.get(*t).copied().unwrap_or(0) > 0)
            .cloned();
    }
    let success = match &target {
        SkillTarget::Craft => {
            if step_cap > 0 {
                step_quiet(state, &Action::Craft(skill));
            }
            obtain_satisfied(state, skill, &start_inv)
        }
        _ => {
            let done = |s: &WorldState| obtain_satisfied(s, skill, &start_inv);
            policy.begin(state, &target);
            let mut ok = done(state);
            while !ok && state.elapsed_steps - start_steps < step_cap {
                let a = policy.act(state, &target);
                step_quiet(state, &a);
                ok = done(state);
            }
            ok
        }
    };
    SkillOutcome {
        skill: skill.name.clone(),
        success,
        env_steps: state.elapsed_steps - start_steps,
        obtained: gains(&start_inv, &read_condition(state)),
    }
}

/// Policy that walks straight at the nearest visible target and acts on it.
/// Used as a reference controller in tests and as the crafting fallback.
#[derive(Clone, Debug, Default)]
pub struct ScriptedPolicy {
    pub wander: u32,
}

impl SkillPolicy for ScriptedPolicy {
    fn act(&mut self, state: &WorldState, target: &SkillTarget) -> Action<'static> {
        let r = state.config.detection_radius;
        match target {
            SkillTarget::Place(item) => Action::Place(item.clone()),
            SkillTarget::Dig(kind) => {
                if state.layer == Layer::Underground || state.y_depth() <= -state.config.ore_depth {
                    match state.nearest(kind, r) {
                        Some((_, dx, dz, _)) => Action::Move(Dir8::from_offset(dx, dz).unwrap_or(Dir8::N)),
                        None => self.roam(state),
                    }
                } else {
                    Action::DigDown
                }
            }
            SkillTarget::Find(kind) | SkillTarget::Harvest(kind) => match state.nearest(kind, r) {
                Some((_, dx, dz, d)) => {
                    let dir = Dir8::from_offset(dx, dz).unwrap_or(Dir8::N);
                    if d <= 1 && matches!(target, SkillTarget::Harvest(_)) {
                        if state.heading == dir {
                            Action::Interact
                        } else {
                            Action::Move(dir)
                        }
                    } else {
                        Action::Move(dir)
                    }
                }
                None => self.roam(state),
            },
            SkillTarget::Craft => Action::Noop,
        }
    }
}

impl ScriptedPolicy {
    fn roam(&mut self, state: &WorldState) -> Action<'static> {
        self.wander += 1;
        let d = state.heading.delta();
        let ahead = (state.agent_pos.0 + d.0, state.agent_pos.2 + d.1);
        if state.occupied(state.layer, ahead) || self.wander.is_multiple_of(15) {
            Action::Move(Dir8::from_index(state.heading.index() + 2 + (self.wander as usize % 3)))
        } else {
            Action::Move(state.heading)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bare(seed: u64) -> WorldConfig {
        WorldConfig::empty(32, seed)
    }

    #[test]
    fn compass() {
        assert_eq!(Dir8::from_offset(5, 0), Some(Dir8::E));
        assert_eq!(Dir8::from_offset(5, 1), Some(Dir8::E));
        assert_eq!(Dir8::from_offset(5, 4), Some(Dir8::SE));
        assert_eq!(Dir8::from_offset(0, -3), Some(Dir8::N));
        assert_eq!(Dir8::from_offset(-2, -2), Some(Dir8::NW));
        assert_eq!(Dir8::from_offset(0, 0), None);
        assert_eq!(Dir8::N.cos_to(Dir8::S), -1.0);
        assert_eq!(Dir8::E.cos_to(Dir8::E), 1.0);
        assert_eq!(Dir8::E.cos_to(Dir8::N), 0.0);
        for d in Dir8::ALL {
            let (dx, dz) = d.delta();
            assert_eq!(Dir8::from_offset(dx * 7, dz * 7), Some(d));
        }
    }

    #[test]
    fn rounding() {
        assert_eq!(placement_count(4096, 20.0), 82);
        assert_eq!(placement_count(1000, 2.5), 2);
        assert_eq!(placement_count(1000, 3.5), 4);
        assert_eq!(placement_count(1000, 0.0), 0);
    }

    #[test]
    fn density_on_64() {
        let mut c = bare(3);
        c.size = 64;
        c.resource_densities.insert("tree".into(), 20.0);
        let w = generate_world(&c).unwrap();
        assert_eq!(w.count_kind("tree"), 82);
    }

    #[test]
    fn empty_world() {
        let w = generate_world(&bare(9)).unwrap();
        assert!(w.entities.is_empty());
        assert!(w.in_bounds(w.agent_xz()));
    }

    #[test]
    fn infeasible_density() {
        let mut c = bare(1);
        c.size = 16;
        c.resource_densities.insert("tree".into(), 2000.0);
        assert!(matches!(generate_world(&c), Err(WorldError::InfeasibleDensity { .. })));
    }

    #[test]
    fn invalid_configs() {
        let mut c = bare(1);
        c.size = 8;
        assert!(generate_world(&c).is_err());
        let mut c = bare(1);
        c.detection_radius = 32;
        assert!(generate_world(&c).is_err());
        let mut c = bare(1);
        c.reach_distance = 0;
        assert!(generate_world(&c).is_err());
    }

    #[test]
    fn noop_only_advances_time() {
        let mut w = generate_world(&WorldConfig {
            mob_counts: BTreeMap::new(),
            ..WorldConfig::preset(Biome::Forest, 4)
        })
        .unwrap();
        let before = w.clone();
        step(&mut w, &Action::Noop);
        assert_eq!(w.elapsed_steps, 1);
        w.elapsed_steps = 0;
        assert_eq!(w, before);
    }

    #[test]
    fn harvest_threshold() {
        let mut w = generate_world(&bare(2)).unwrap();
        let (x, z) = w.agent_xz();
        let tx = if x + 1 < 32 { x + 1 } else { x - 1 };
        w.spawn("tree", Layer::Surface, (tx, z));
        w.heading = Dir8::from_offset(tx - x, 0).unwrap();
        for _ in 0..4 {
            step(&mut w, &Action::Interact);
        }
        assert_eq!(w.inventory.get("log"), None);
        step(&mut w, &Action::Interact);
        assert_eq!(w.inventory.get("log"), Some(&1));
        assert_eq!(w.count_kind("tree"), 0);
    }

    #[test]
    fn tools_gate_mining() {
        let mut w = generate_world(&bare(2)).unwrap();
        w.config.harvest_hits.insert("stone".into(), 1);
        let (x, z) = w.agent_xz();
        let sx = if x + 1 < 32 { x + 1 } else { x - 1 };
        w.spawn("stone", Layer::Surface, (sx, z));
        step(&mut w, &Action::Interact);
        assert_eq!(w.count_kind("stone"), 1);
        w.inventory.insert("wooden_pickaxe".into(), 1);
        w.equipped = Some("wooden_pickaxe".into());
        step(&mut w, &Action::Interact);
        assert_eq!(w.inventory.get("cobblestone"), Some(&1));
    }

    #[test]
    fn craft_stick_in_one_step() {
        let mut w = generate_world(&bare(5)).unwrap();
        w.inventory.insert("planks".into(), 2);
        let stick = SkillDefinition::simple("stick", &[("planks", 2)], &[], 4).unwrap();
        step(&mut w, &Action::Craft(&stick));
        assert_eq!(w.inventory.get("stick"), Some(&4));
        assert_eq!(w.inventory.get("planks"), None);
        assert_eq!(w.elapsed_steps, 1);
    }

    #[test]
    fn placed_table_is_nearby() {
        let mut w = generate_world(&bare(6)).unwrap();
        assert!(read_condition(&w).nearby.is_empty());
        w.inventory.insert("crafting_table".into(), 1);
        step(&mut w, &Action::Place("crafting_table".into()));
        let c = read_condition(&w);
        assert_eq!(c.nearby, [("crafting_table_nearby".to_string(), 1)].into());
        assert_eq!(c.get("crafting_table"), 0);
    }

    #[test]
    fn digging_switches_layer() {
        let mut w = generate_world(&bare(7)).unwrap();
        for _ in 0..3 {
            step(&mut w, &Action::DigDown);
        }
        assert_eq!(w.layer, Layer::Underground);
        assert_eq!(w.y_depth(), -3);
        step(&mut w, &Action::Ascend);
        assert_eq!(w.layer, Layer::Surface);
    }

    #[test]
    fn lidar_sorted_and_bounded() {
        let w = generate_world(&WorldConfig::preset(Biome::Forest, 11)).unwrap();
        let obs = w.observe();
        assert!(obs.lidar_hits.windows(2).all(|p| p[0].distance <= p[1].distance));
        assert!(obs.lidar_hits.iter().all(|h| h.distance <= w.config.detection_radius));
        assert_eq!(obs.local_window.len(), 5);
    }

    #[test]
    fn skill_targets() {
        let log = SkillDefinition::simple("log", &[("tree_nearby", 1)], &[], 1).unwrap();
        assert_eq!(skill_target(&log), SkillTarget::Harvest("tree".into()));
        let find = SkillDefinition::simple("tree_nearby", &[], &[], 1).unwrap();
        assert_eq!(skill_target(&find), SkillTarget::Find("tree".into()));
        let mut place = SkillDefinition::simple("crafting_table_nearby", &[("crafting_table", 1)], &[], 1).unwrap();
        place.equip = vec!["crafting_table".into()];
        place.kind = SkillKind::Manipulation;
        assert_eq!(skill_target(&place), SkillTarget::Place("crafting_table".into()));
    }

    #[test]
    fn finding_without_targets_times_out() {
        let mut w = generate_world(&bare(8)).unwrap();
        let find = SkillDefinition::simple("tree_nearby", &[], &[], 1).unwrap();
        let out = execute_skill(&mut w, &find, &mut ScriptedPolicy::default(), 40);
        assert!(!out.success);
        assert_eq!(out.env_steps, 40);
    }

    #[test]
    fn crafting_skill_takes_one_step() {
        let mut w = generate_world(&bare(5)).unwrap();
        w.inventory.insert("planks".into(), 2);
        let stick = SkillDefinition::simple("stick", &[("planks", 2)], &[], 4).unwrap();
        let out = execute_skill(&mut w, &stick, &mut ScriptedPolicy::default(), 10);
        assert!(out.success);
        assert_eq!(out.env_steps, 1);
        assert_eq!(out.obtained.get("stick"), Some(&4));
    }
}
