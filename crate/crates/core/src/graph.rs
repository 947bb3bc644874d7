//! Quantified skill dependency graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::skilldef::{is_nearby, ItemId, SkillDefinition, SkillKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeMode {
    Consume,
    Require,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub parent: ItemId,
    pub child: ItemId,
    /// Units of the parent needed by one execution of the child skill.
    pub parent_qty: u32,
    /// Units of the child produced by one execution.
    pub child_qty: u32,
    pub mode: EdgeMode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphError {
    CyclicDependency(Vec<ItemId>),
    UnknownItem { skill: ItemId, item: ItemId },
    DuplicateSkill(ItemId),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::CyclicDependency(cycle) => write!(f, "dependency cycle: {}", cycle.join(" -> ")),
            GraphError::UnknownItem { skill, item } => {
                write!(f, "skill `{skill}` references `{item}`, which has no producing skill")
            }
            GraphError::DuplicateSkill(name) => write!(f, "skill `{name}` is defined twice"),
        }
    }
}

impl core::error::Error for GraphError {}

#[derive(Clone, Debug)]
pub struct SkillGraph {
    skills: BTreeMap<ItemId, SkillDefinition>,
    order: Vec<ItemId>,
    parents: BTreeMap<ItemId, Vec<DependencyEdge>>,
    primitives: BTreeSet<ItemId>,
}

/// Parent visiting order used by the planner.
///
/// Inventory parents come before `_nearby` parents, because gathering or
/// placing anything after a nearby entity is secured would walk away from it.
/// Within each group, require edges precede consume edges, ties broken by name.
fn edge_rank(e: &DependencyEdge) -> (bool, bool, &str) {
    (is_nearby(&e.parent), e.mode == EdgeMode::Consume, e.parent.as_str())
}

pub fn build_graph(defs: &[SkillDefinition], declared_primitives: &BTreeSet<ItemId>) -> Result<SkillGraph, GraphError> {
    let mut skills = BTreeMap::new();
    let mut order = Vec::with_capacity(defs.len());
    for d in defs {
        if skills.insert(d.name.clone(), d.clone()).is_some() {
            return Err(GraphError::DuplicateSkill(d.name.clone()));
        }
        order.push(d.name.clone());
    }
    let mut primitives = BTreeSet::new();
    let mut parents = BTreeMap::new();
    for d in defs {
        let mut edges = Vec::new();
        for (mode, map) in [(EdgeMode::Consume, &d.consume), (EdgeMode::Require, &d.require)] {
            for (item, &n) in map {
                if !skills.contains_key(item) {
                    if declared_primitives.contains(item) {
                        primitives.insert(item.clone());
                    } else {
                        return Err(GraphError::UnknownItem {
                            skill: d.name.clone(),
                            item: item.clone(),
                        });
                    }
                }
                edges.push(DependencyEdge {
                    parent: item.clone(),
                    child: d.name.clone(),
                    parent_qty: n,
                    child_qty: d.yield_count(),
                    mode,
                });
            }
        }
        edges.sort_by(|a, b| edge_rank(a).cmp(&edge_rank(b)));
        parents.insert(d.name.clone(), edges);
    }
    for p in declared_primitives {
        if !skills.contains_key(p) {
            primitives.insert(p.clone());
        }
    }
    let g = SkillGraph {
        skills,
        order,
        parents,
        primitives,
    };
    if let Some(cycle) = g.find_cycle() {
        return Err(GraphError::CyclicDependency(cycle));
    }
    Ok(g)
}

impl SkillGraph {
    pub fn skill(&self, name: &str) -> Option<&SkillDefinition> {
        self.skills.get(name)
    }

    /// Skills in definition order.
    pub fn skills(&self) -> impl Iterator<Item = &SkillDefinition> {
        self.order.iter().map(|n| &self.skills[n])
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn primitives(&self) -> &BTreeSet<ItemId> {
        &self.primitives
    }

    pub fn contains(&self, item: &str) -> bool {
        self.skills.contains_key(item) || self.primitives.contains(item)
    }

    pub fn parents(&self, item: &str) -> Result<&[DependencyEdge], GraphError> {
        if let Some(edges) = self.parents.get(item) {
            return Ok(edges);
        }
        if self.primitives.contains(item) {
            return Ok(&[]);
        }
        Err(GraphError::UnknownItem {
            skill: item.to_string(),
            item: item.to_string(),
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = &DependencyEdge> {
        self.order.iter().flat_map(|n| self.parents[n].iter())
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(Vec::len).sum()
    }

    fn find_cycle(&self) -> Option<Vec<ItemId>> {
        // 0 unvisited, 1 on stack, 2 done
        let mut color: BTreeMap<&str, u8> = BTreeMap::new();
        let mut stack: Vec<&str> = Vec::new();
        for start in self.skills.keys() {
            if color.get(start.as_str()).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut frames: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
            color.insert(start, 1);
            stack.push(start);
            while let Some(top) = frames.len().checked_sub(1) {
                let (node, next) = frames[top];
                let edges = &self.parents[node];
                if next < edges.len() {
                    let p = edges[next].parent.as_str();
                    frames[top].1 += 1;
                    if !self.skills.contains_key(p) {
                        continue;
                    }
                    match color.get(p).copied().unwrap_or(0) {
                        0 => {
                            color.insert(p, 1);
                            stack.push(p);
                            frames.push((p, 0));
                        }
                        1 => {
                            let at = stack.iter().position(|&s| s == p).unwrap_or(0);
                            return Some(stack[at..].iter().map(|s| s.to_string()).collect());
                        }
                        _ => {}
                    }
                } else {
                    color.insert(node, 2);
                    stack.pop();
                    frames.pop();
                }
            }
        }
        None
    }

    /// Skills ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<ItemId> {
        let mut done: BTreeSet<&str> = BTreeSet::new();
        let mut out = Vec::with_capacity(self.skills.len());
        fn visit<'a>(g: &'a SkillGraph, n: &'a str, done: &mut BTreeSet<&'a str>, out: &mut Vec<ItemId>) {
            if !done.insert(n) {
                return;
            }
            for e in &g.parents[n] {
                if g.skills.contains_key(&e.parent) {
                    visit(g, &e.parent, done, out);
                }
            }
            out.push(n.to_string());
        }
        for n in &self.order {
            visit(self, n, &mut done, &mut out);
        }
        out
    }

    /// Graphviz rendering: grey solid arrows consume, red dashed arrows require.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph skills {\n  rankdir=LR;\n");
        for d in self.skills() {
            let shape = match d.kind {
                SkillKind::Finding => "ellipse",
                SkillKind::Manipulation => "box",
                SkillKind::Crafting => "octagon",
            };
            out.push_str(&format!("  \"{}\" [shape={shape}];\n", d.name));
        }
        for p in &self.primitives {
            out.push_str(&format!("  \"{p}\" [shape=plaintext];\n"));
        }
        for e in self.edges() {
            let style = match e.mode {
                EdgeMode::Consume => "color=grey",
                EdgeMode::Require => "color=red, style=dashed",
            };
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{},{}\", {style}];\n",
                e.parent, e.child, e.parent_qty, e.child_qty
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skilldef::SkillDefinition as S;

    #[test]
    fn singleton() {
        let g = build_graph(&[S::simple("a", &[], &[], 1).unwrap()], &BTreeSet::new()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn two_cycle() {
        let defs = [
            S::simple("a", &[("b", 1)], &[], 1).unwrap(),
            S::simple("b", &[("a", 1)], &[], 1).unwrap(),
        ];
        assert_eq!(
            build_graph(&defs, &BTreeSet::new()).unwrap_err(),
            GraphError::CyclicDependency(vec!["a".into(), "b".into()])
        );
    }

    #[test]
    fn unknown_and_primitive() {
        let defs = [S::simple("a", &[("dirt", 1)], &[], 1).unwrap()];
        assert!(matches!(
            build_graph(&defs, &BTreeSet::new()),
            Err(GraphError::UnknownItem { .. })
        ));
        let prims: BTreeSet<ItemId> = ["dirt".to_string()].into();
        let g = build_graph(&defs, &prims).unwrap();
        assert!(g.parents("dirt").unwrap().is_empty());
        assert!(g.primitives().contains("dirt"));
    }

    #[test]
    fn stone_pickaxe_parents() {
        let defs = [
            S::simple("cobblestone", &[], &[], 1).unwrap(),
            S::simple("stick", &[], &[], 4).unwrap(),
            S::simple("crafting_table_nearby", &[], &[], 1).unwrap(),
            S::simple("stone_pickaxe", &[("cobblestone", 3), ("stick", 2)], &[("crafting_table_nearby", 1)], 1).unwrap(),
        ];
        let g = build_graph(&defs, &BTreeSet::new()).unwrap();
        let ps: Vec<(&str, u32, u32, EdgeMode)> = g
            .parents("stone_pickaxe")
            .unwrap()
            .iter()
            .map(|e| (e.parent.as_str(), e.parent_qty, e.child_qty, e.mode))
            .collect();
        assert_eq!(
            ps,
            vec![
                ("cobblestone", 3, 1, EdgeMode::Consume),
                ("stick", 2, 1, EdgeMode::Consume),
                ("crafting_table_nearby", 1, 1, EdgeMode::Require),
            ]
        );
        assert!(g.parents("crafting_table_nearby").unwrap().is_empty());
        assert!(g.parents("nope").is_err());
    }

    #[test]
    fn require_before_consume_within_group() {
        let defs = [
            S::simple("a", &[], &[], 1).unwrap(),
            S::simple("z", &[], &[], 1).unwrap(),
            S::simple("c", &[("a", 1)], &[("z", 1)], 1).unwrap(),
        ];
        let g = build_graph(&defs, &BTreeSet::new()).unwrap();
        let names: Vec<&str> = g.parents("c").unwrap().iter().map(|e| e.parent.as_str()).collect();
        assert_eq!(names, ["z", "a"]);
    }

    #[test]
    fn dot_is_deterministic() {
        let defs = [
            S::simple("a", &[], &[], 1).unwrap(),
            S::simple("b", &[("a", 2)], &[], 3).unwrap(),
        ];
        let g = build_graph(&defs, &BTreeSet::new()).unwrap();
        let dot = g.to_dot();
        assert_eq!(dot, g.to_dot());
        assert!(dot.contains("\"a\" -> \"b\" [label=\"2,3\", color=grey];"));
    }
}
