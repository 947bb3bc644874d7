//! Random skill sets and an exhaustive sequence search, for checking the
//! planner against something that does not share its logic.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::planner::{apply_skill, Condition};
use crate::skilldef::{Counts, ItemId, SkillDefinition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthParams {
    pub max_skills: usize,
    /// Largest quantity on any edge, yield or starting stock.
    pub max_count: u32,
    pub max_parents: usize,
    pub max_primitives: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            max_skills: 12,
            max_count: 4,
            max_parents: 3,
            max_primitives: 2,
        }
    }
}

/// One generated planning problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthTask {
    pub defs: Vec<SkillDefinition>,
    pub primitives: BTreeSet<ItemId>,
    pub initial: Condition,
    pub goal: ItemId,
}

/// A random acyclic skill set. Skills only depend on earlier skills and on
/// declared primitives. About a quarter of the skills are finding skills
/// (`f<i>_nearby`); a skill takes at most one `_nearby` parent, at count 1,
/// as in the bundled sets. Primitives start with a random stock that may be
/// too small, so some tasks are infeasible.
pub fn random_task<R: Rng>(rng: &mut R, p: &SynthParams) -> SynthTask {
    let n = rng.gen_range(1..=p.max_skills.max(1));
    let n_prim = rng.gen_range(0..=p.max_primitives);
    let primitives: Vec<ItemId> = (0..n_prim).map(|i| format!("p{i}")).collect();
    let mut names: Vec<ItemId> = Vec::with_capacity(n);
    let mut defs = Vec::with_capacity(n);
    for i in 0..n {
        if rng.gen_bool(0.25) {
            let name = format!("f{i}_nearby");
            let mut obtain = Counts::new();
            obtain.insert(name.clone(), 1);
            defs.push(SkillDefinition::new(&name, Counts::new(), Counts::new(), Vec::new(), obtain).expect("finding skill"));
            names.push(name);
            continue;
        }
        let name = format!("s{i}");
        let mut pool: Vec<&ItemId> = names.iter().chain(primitives.iter()).collect();
        pool.shuffle(rng);
        let k = rng.gen_range(0..=p.max_parents.min(pool.len()));
        let (mut consume, mut require) = (Counts::new(), Counts::new());
        let mut has_nearby = false;
        for parent in pool.into_iter().take(k) {
            let nearby = parent.ends_with("_nearby");
            if nearby && has_nearby {
                continue;
            }
            has_nearby |= nearby;
            let count = if nearby { 1 } else { rng.gen_range(1..=p.max_count) };
            if rng.gen_bool(0.5) {
                consume.insert(parent.clone(), count);
            } else {
                require.insert(parent.clone(), count);
            }
        }
        let mut obtain = Counts::new();
        obtain.insert(name.clone(), rng.gen_range(1..=p.max_count));
        defs.push(SkillDefinition::new(&name, consume, require, Vec::new(), obtain).expect("generated skill"));
        names.push(name);
    }
    let mut initial = Condition::new();
    for prim in &primitives {
        initial.add(prim, rng.gen_range(0..=p.max_count));
    }
    // a few intermediate items in hand now and then
    for name in &names {
        if !name.ends_with("_nearby") && rng.gen_bool(0.1) {
            initial.add(name, rng.gen_range(1..=p.max_count));
        }
    }
    let goal = names.choose(rng).expect("at least one skill").clone();
    SynthTask {
        defs,
        primitives: primitives.into_iter().collect(),
        initial,
        goal,
    }
}

type Key = Vec<(ItemId, u32)>;

fn key(c: &Condition) -> Key {
    c.iter().map(|(k, &v)| (k.clone(), v)).collect()
}

/// Breadth-first search over skill sequences of at most `max_len` steps,
/// every skill assumed to succeed. Returns a shortest sequence whose last
/// step is a successful run of skill `goal`, or `None`. Like the planner,
/// this counts a goal already in hand as not yet produced. Conditions
/// already seen are not expanded twice.
pub fn shortest_sequence(defs: &[SkillDefinition], goal: &str, initial: &Condition, max_len: usize) -> Option<Vec<ItemId>> {
    let mut seen: BTreeSet<Key> = BTreeSet::new();
    // condition -> (previous condition, skill index)
    let mut parent: BTreeMap<Key, (Key, usize)> = BTreeMap::new();
    let mut queue = VecDeque::new();
    seen.insert(key(initial));
    queue.push_back((initial.clone(), 0usize));
    while let Some((cond, depth)) = queue.pop_front() {
        if depth >= max_len {
            continue;
        }
        let from = key(&cond);
        for (i, d) in defs.iter().enumerate() {
            let mut next = cond.clone();
            if apply_skill(d, &mut next, depth).is_err() {
                continue;
            }
            if d.name == goal {
                let mut seq = vec![d.name.clone()];
                let mut at = from;
                while let Some((prev, i)) = parent.get(&at) {
                    seq.push(defs[*i].name.to_string());
                    at = prev.clone();
                }
                seq.reverse();
                return Some(seq);
            }
            let k = key(&next);
            if !seen.insert(k.clone()) {
                continue;
            }
            parent.insert(k, (from.clone(), i));
            queue.push_back((next, depth + 1));
        }
    }
    None
}
