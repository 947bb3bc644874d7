//! TOML task suites and world configurations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use skillforge_core::harness::{default_presets, SuiteTask, TaskSuite};
use skillforge_core::world::WorldConfig;
use skillforge_core::{Condition, Task};

use crate::Error;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    execute_steps: BTreeMap<String, u64>,
    #[serde(default)]
    presets: BTreeMap<String, WorldConfig>,
    #[serde(default, rename = "task")]
    tasks: Vec<TaskEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskEntry {
    set: String,
    target: String,
    #[serde(default)]
    initial: BTreeMap<String, u32>,
    world: String,
    planning_steps: usize,
    /// 0 or absent: derive from the step table.
    #[serde(default)]
    max_steps: u64,
}

/// A suite together with the world presets its tasks name.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSuite {
    pub suite: TaskSuite,
    /// Built-in presets, overridden or extended by the file's `[presets.*]`.
    pub presets: BTreeMap<String, WorldConfig>,
}

pub fn parse_suite(text: &str) -> Result<LoadedSuite, Error> {
    let file: SuiteFile = toml::from_str(text)?;
    let mut presets = default_presets();
    for (name, cfg) in file.presets {
        cfg.validate()?;
        presets.insert(name, cfg);
    }
    let mut tasks = Vec::with_capacity(file.tasks.len());
    for t in file.tasks {
        if t.planning_steps == 0 {
            return Err(Error::Invalid(format!("task `{}`: planning_steps must be positive", t.target)));
        }
        if !presets.contains_key(&t.world) {
            return Err(Error::Invalid(format!("task `{}`: unknown world `{}`", t.target, t.world)));
        }
        let initial = Condition::from_pairs(t.initial.iter().map(|(k, &v)| (k.as_str(), v)));
        tasks.push(SuiteTask {
            set: t.set,
            task: Task {
                max_env_steps: t.max_steps,
                world: t.world,
                ..Task::new(&t.target, initial)
            },
            planning_steps: t.planning_steps,
        });
    }
    Ok(LoadedSuite {
        suite: TaskSuite {
            tasks,
            execute_steps: file.execute_steps,
        },
        presets,
    })
}

pub fn load_suite(path: &Path) -> Result<LoadedSuite, Error> {
    parse_suite(&crate::read(path)?)
}

/// A world configuration; fields left out take the plains preset's values.
pub fn parse_world_config(text: &str) -> Result<WorldConfig, Error> {
    let cfg: WorldConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}
