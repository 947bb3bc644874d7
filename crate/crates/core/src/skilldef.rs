//! Skill definition records, the skill file format and reference validation.
//!
//! A skill file lists one block per skill:
//!
//! ```text
//! stone_pickaxe:
//!   consume:
//!     cobblestone: 3
//!     stick: 2
//!   require:
//!     crafting_table_nearby: 1
//!   equip: []
//!   obtain:
//!     stone_pickaxe: 1
//! ```
//!
//! The lenient reader also accepts flat, unindented blocks with quoted item
//! names, which is how chat models tend to answer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub type ItemId = String;
pub type Counts = BTreeMap<ItemId, u32>;

pub const NEARBY_SUFFIX: &str = "_nearby";

pub fn is_nearby(item: &str) -> bool {
    item.ends_with(NEARBY_SUFFIX)
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SkillKind {
    Finding,
    Manipulation,
    Crafting,
}

impl SkillKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillKind::Finding => "Finding",
            SkillKind::Manipulation => "Manipulation",
            SkillKind::Crafting => "Crafting",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Finding" => Some(SkillKind::Finding),
            "Manipulation" => Some(SkillKind::Manipulation),
            "Crafting" => Some(SkillKind::Crafting),
            _ => None,
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDefinition {
    pub name: ItemId,
    pub kind: SkillKind,
    pub consume: Counts,
    pub require: Counts,
    pub equip: Vec<ItemId>,
    pub obtain: Counts,
}

/// Classify a skill from its record alone.
///
/// A parentless `_nearby` skill is Finding. A skill with no equipment whose only
/// `_nearby` inputs are required workstations is Crafting. Everything else is
/// Manipulation.
pub fn infer_kind(name: &str, consume: &Counts, require: &Counts, equip: &[ItemId]) -> SkillKind {
    if is_nearby(name) && consume.is_empty() && require.is_empty() {
        return SkillKind::Finding;
    }
    let workstation = |k: &str| k == "crafting_table_nearby" || k == "furnace_nearby";
    let consumes_nearby = consume.keys().any(|k| is_nearby(k));
    let requires_other_nearby = require.keys().any(|k| is_nearby(k) && !workstation(k));
    if equip.is_empty() && !consumes_nearby && !requires_other_nearby {
        SkillKind::Crafting
    } else {
        SkillKind::Manipulation
    }
}

impl SkillDefinition {
    /// Build a definition with an inferred kind and check its invariants.
    pub fn new(
        name: &str,
        consume: Counts,
        require: Counts,
        equip: Vec<ItemId>,
        obtain: Counts,
    ) -> Result<Self, SkillError> {
        let kind = infer_kind(name, &consume, &require, &equip);
        Self::with_kind(name, kind, consume, require, equip, obtain)
    }

    pub fn with_kind(
        name: &str,
        kind: SkillKind,
        consume: Counts,
        require: Counts,
        equip: Vec<ItemId>,
        obtain: Counts,
    ) -> Result<Self, SkillError> {
        let def = SkillDefinition {
            name: name.to_string(),
            kind,
            consume,
            require,
            equip,
            obtain,
        };
        def.check()?;
        Ok(def)
    }

    /// Shorthand used by tests and generators: a skill obtaining `n` of itself.
    pub fn simple(name: &str, consume: &[(&str, u32)], require: &[(&str, u32)], n: u32) -> Result<Self, SkillError> {
        let to_counts = |xs: &[(&str, u32)]| xs.iter().map(|(k, v)| (k.to_string(), *v)).collect::<Counts>();
        let mut obtain = Counts::new();
        obtain.insert(name.to_string(), n);
        Self::new(name, to_counts(consume), to_counts(require), Vec::new(), obtain)
    }

    pub fn check(&self) -> Result<(), SkillError> {
        let invalid = |reason: &str| SkillError::InvalidDefinition {
            skill: self.name.clone(),
            reason: reason.to_string(),
        };
        if !is_valid_name(&self.name) {
            return Err(invalid("name must be letters, digits or underscore"));
        }
        for (section, map) in [("consume", &self.consume), ("require", &self.require), ("obtain", &self.obtain)] {
            for (item, &n) in map {
                if !is_valid_name(item) {
                    return Err(invalid(&format!("bad item name `{item}` in {section}")));
                }
                if n == 0 {
                    return Err(SkillError::NonPositiveCount {
                        skill: self.name.clone(),
                        item: item.clone(),
                    });
                }
            }
        }
        if !self.obtain.contains_key(&self.name) {
            return Err(invalid("obtain must contain the skill's own item"));
        }
        match self.kind {
            SkillKind::Finding => {
                if !self.consume.is_empty() || !self.require.is_empty() {
                    return Err(invalid("a finding skill has no consume or require entries"));
                }
                if !is_nearby(&self.name) {
                    return Err(invalid("a finding skill must be named `*_nearby`"));
                }
            }
            SkillKind::Crafting => {
                if !self.equip.is_empty() {
                    return Err(invalid("a crafting skill equips nothing"));
                }
                if self.consume.keys().any(|k| is_nearby(k)) {
                    return Err(invalid("a crafting skill cannot consume a nearby entity"));
                }
            }
            SkillKind::Manipulation => {}
        }
        Ok(())
    }

    /// Own-item yield of one execution.
    pub fn yield_count(&self) -> u32 {
        self.obtain.get(&self.name).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SkillError {
    MalformedEntry { line: usize, reason: String },
    NonPositiveCount { skill: ItemId, item: ItemId },
    DuplicateSkill(ItemId),
    DuplicateItemInSection { skill: ItemId, section: String, item: ItemId },
    InvalidDefinition { skill: ItemId, reason: String },
}

impl fmt::Display for SkillError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkillError::MalformedEntry { line, reason } => write!(f, "line {line}: {reason}"),
            SkillError::NonPositiveCount { skill, item } => {
                write!(f, "skill `{skill}`: count for `{item}` must be at least 1")
            }
            SkillError::DuplicateSkill(name) => write!(f, "skill `{name}` is defined twice"),
            SkillError::DuplicateItemInSection { skill, section, item } => {
                write!(f, "skill `{skill}`: `{item}` listed twice in {section}")
            }
            SkillError::InvalidDefinition { skill, reason } => write!(f, "skill `{skill}`: {reason}"),
        }
    }
}

impl core::error::Error for SkillError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

/// A block of a lenient parse that could not be turned into a definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseFailure {
    pub skill: ItemId,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Consume,
    Require,
    Obtain,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Consume => "consume",
            Section::Require => "require",
            Section::Obtain => "obtain",
        }
    }
}

#[derive(Default)]
struct Block {
    name: String,
    line: usize,
    consume: Option<Counts>,
    require: Option<Counts>,
    equip: Option<Vec<ItemId>>,
    obtain: Option<Counts>,
    kind: Option<SkillKind>,
    current: Option<Section>,
}

impl Block {
    fn new(name: &str, line: usize) -> Self {
        Block {
            name: name.to_string(),
            line,
            ..Default::default()
        }
    }

    fn section_mut(&mut self, s: Section) -> &mut Option<Counts> {
        match s {
            Section::Consume => &mut self.consume,
            Section::Require => &mut self.require,
            Section::Obtain => &mut self.obtain,
        }
    }

    fn open(&mut self, s: Section, line: usize) -> Result<(), SkillError> {
        let slot = self.section_mut(s);
        if slot.is_some() {
            return Err(SkillError::MalformedEntry {
                line,
                reason: format!("section `{}` repeated", s.name()),
            });
        }
        *slot = Some(Counts::new());
        self.current = Some(s);
        Ok(())
    }

    fn add(&mut self, item: &str, count: i64, line: usize) -> Result<(), SkillError> {
        let Some(s) = self.current else {
            return Err(SkillError::MalformedEntry {
                line,
                reason: "entry outside a section".to_string(),
            });
        };
        if count <= 0 {
            return Err(SkillError::NonPositiveCount {
                skill: self.name.clone(),
                item: item.to_string(),
            });
        }
        let count = u32::try_from(count).map_err(|_| SkillError::MalformedEntry {
            line,
            reason: "count too large".to_string(),
        })?;
        let skill = self.name.clone();
        let map = self.section_mut(s).get_or_insert_with(Counts::new);
        if map.insert(item.to_string(), count).is_some() {
            return Err(SkillError::DuplicateItemInSection {
                skill,
                section: s.name().to_string(),
                item: item.to_string(),
            });
        }
        Ok(())
    }

    fn finish(self, strict: bool) -> Result<SkillDefinition, SkillError> {
        let missing = |what: &str| SkillError::MalformedEntry {
            line: self.line,
            reason: format!("skill `{}` has no `{what}` section", self.name),
        };
        if strict {
            if self.consume.is_none() {
                return Err(missing("consume"));
            }
            if self.require.is_none() {
                return Err(missing("require"));
            }
            if self.equip.is_none() {
                return Err(missing("equip"));
            }
        }
        let obtain = self.obtain.clone().ok_or_else(|| missing("obtain"))?;
        let consume = self.consume.unwrap_or_default();
        let require = self.require.unwrap_or_default();
        let equip = self.equip.unwrap_or_default();
        let kind = self
            .kind
            .unwrap_or_else(|| infer_kind(&self.name, &consume, &require, &equip));
        SkillDefinition::with_kind(&self.name, kind, consume, require, equip, obtain)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn parse_equip(value: &str, line: usize, lenient: bool) -> Result<Vec<ItemId>, SkillError> {
    let malformed = |reason: &str| SkillError::MalformedEntry {
        line,
        reason: reason.to_string(),
    };
    let v = value.trim();
    if lenient && v.is_empty() {
        return Ok(Vec::new());
    }
    let inner = v
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| malformed("equip must be a bracketed list"))?;
    let mut out = Vec::new();
    for part in inner.split(',') {
        let name = if lenient { unquote(part) } else { part.trim() };
        if name.is_empty() {
            continue;
        }
        if !is_valid_name(name) {
            return Err(malformed("bad item name in equip"));
        }
        out.push(name.to_string());
    }
    Ok(out)
}

fn parse_count(value: &str, line: usize) -> Result<i64, SkillError> {
    value.trim().parse::<i64>().map_err(|_| SkillError::MalformedEntry {
        line,
        reason: format!("`{}` is not an integer count", value.trim()),
    })
}

/// Parse a whole skill file. Lenient mode fails on the first bad block; use
/// [`parse_response`] to collect failures instead.
pub fn parse_skill_file(text: &str, mode: ParseMode) -> Result<Vec<SkillDefinition>, SkillError> {
    match mode {
        ParseMode::Strict => parse_strict(text),
        ParseMode::Lenient => {
            let (defs, failures) = parse_response(text);
            match failures.into_iter().next() {
                Some(f) => Err(SkillError::InvalidDefinition {
                    skill: f.skill,
                    reason: f.reason,
                }),
                None => Ok(defs),
            }
        }
    }
}

fn check_unique(defs: &[SkillDefinition], name: &str) -> Result<(), SkillError> {
    if defs.iter().any(|d| d.name == name) {
        return Err(SkillError::DuplicateSkill(name.to_string()));
    }
    Ok(())
}

fn parse_strict(text: &str) -> Result<Vec<SkillDefinition>, SkillError> {
    let mut defs: Vec<SkillDefinition> = Vec::new();
    let mut block: Option<Block> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| SkillError::MalformedEntry {
            line: line_no,
            reason: reason.to_string(),
        };
        let indent = line.len() - line.trim_start_matches(' ').len();
        if line[indent..].starts_with('\t') {
            return Err(malformed("tabs are not allowed for indentation"));
        }
        let body = &line[indent..];
        let (key, value) = body.split_once(':').ok_or_else(|| malformed("expected `key:`"))?;
        let key = key.trim_end();
        match indent {
            0 => {
                if !value.trim().is_empty() || !is_valid_name(key) {
                    return Err(malformed("expected a skill name followed by `:`"));
                }
                if let Some(b) = block.take() {
                    let def = b.finish(true)?;
                    check_unique(&defs, &def.name)?;
                    defs.push(def);
                }
                block = Some(Block::new(key, line_no));
            }
            2 => {
                let b = block.as_mut().ok_or_else(|| malformed("section outside a skill"))?;
                let value = value.trim();
                let section = match key {
                    "consume" => Some(Section::Consume),
                    "require" => Some(Section::Require),
                    "obtain" => Some(Section::Obtain),
                    "equip" => {
                        if b.equip.is_some() {
                            return Err(malformed("section `equip` repeated"));
                        }
                        b.equip = Some(parse_equip(value, line_no, false)?);
                        b.current = None;
                        None
                    }
                    "kind" => {
                        b.kind = Some(SkillKind::parse(value).ok_or_else(|| malformed("unknown kind"))?);
                        b.current = None;
                        None
                    }
                    _ => return Err(malformed(&format!("unknown section `{key}`"))),
                };
                if let Some(s) = section {
                    if !(value.is_empty() || value == "{}") {
                        return Err(malformed("map entries go on their own indented lines"));
                    }
                    b.open(s, line_no)?;
                }
            }
            4 => {
                let b = block.as_mut().ok_or_else(|| malformed("entry outside a skill"))?;
                if !is_valid_name(key) {
                    return Err(malformed(&format!("bad item name `{key}`")));
                }
                let n = parse_count(value, line_no)?;
                b.add(key, n, line_no)?;
            }
            _ => return Err(malformed("indentation must be 0, 2 or 4 spaces")),
        }
    }
    if let Some(b) = block.take() {
        let def = b.finish(true)?;
        check_unique(&defs, &def.name)?;
        defs.push(def);
    }
    Ok(defs)
}

/// Lenient parse of a chat response. Prose outside skill blocks is ignored;
/// blocks that do not parse are reported and skipped.
pub fn parse_response(text: &str) -> (Vec<SkillDefinition>, Vec<ParseFailure>) {
    let mut defs: Vec<SkillDefinition> = Vec::new();
    let mut failures = Vec::new();
    let mut block: Option<Block> = None;
    let mut broken: Option<String> = None;

    let mut close = |block: &mut Option<Block>, broken: &mut Option<String>, defs: &mut Vec<SkillDefinition>| {
        if let Some(b) = block.take() {
            let name = b.name.clone();
            let result = match broken.take() {
                Some(reason) => Err(reason),
                None => b
                    .finish(false)
                    .and_then(|d| check_unique(defs, &d.name).map(|_| d))
                    .map_err(|e| e.to_string()),
            };
            match result {
                Ok(d) => defs.push(d),
                Err(reason) => failures.push(ParseFailure { skill: name, reason }),
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            let started = block
                .as_ref()
                .is_some_and(|b| b.consume.is_some() || b.require.is_some() || b.obtain.is_some() || b.equip.is_some());
            if started {
                close(&mut block, &mut broken, &mut defs);
            }
            continue;
        }
        let split = line.split_once(':');
        let key = split.map(|(k, _)| unquote(k));
        let value = split.map(|(_, v)| v.trim()).unwrap_or("");
        let is_section = matches!(key, Some("consume" | "require" | "obtain" | "equip" | "kind"));
        if let Some(k) = key {
            if !is_section && value.is_empty() && is_valid_name(k) && !line.starts_with('\'') && !line.starts_with('"') {
                close(&mut block, &mut broken, &mut defs);
                block = Some(Block::new(k, line_no));
                continue;
            }
        }
        let Some(b) = block.as_mut() else {
            continue;
        };
        if broken.is_some() {
            continue;
        }
        let step = (|| -> Result<(), SkillError> {
            let malformed = |reason: &str| SkillError::MalformedEntry {
                line: line_no,
                reason: reason.to_string(),
            };
            let k = key.ok_or_else(|| malformed("expected `key: value`"))?;
            match k {
                "consume" => b.open(Section::Consume, line_no),
                "require" => b.open(Section::Require, line_no),
                "obtain" => b.open(Section::Obtain, line_no),
                "equip" => {
                    b.equip = Some(parse_equip(value, line_no, true)?);
                    b.current = None;
                    Ok(())
                }
                "kind" => {
                    b.kind = Some(SkillKind::parse(unquote(value)).ok_or_else(|| malformed("unknown kind"))?);
                    b.current = None;
                    Ok(())
                }
                item => {
                    if !is_valid_name(item) {
                        return Err(malformed(&format!("bad item name `{item}`")));
                    }
                    let n = parse_count(value, line_no)?;
                    b.add(item, n, line_no)
                }
            }
        })();
        if let Err(e) = step {
            broken = Some(e.to_string());
        }
    }
    close(&mut block, &mut broken, &mut defs);
    (defs, failures)
}

/// Write definitions in the strict format. `kind:` is emitted only when the
/// stored kind differs from the inferred one.
pub fn serialize_skill_file(defs: &[SkillDefinition]) -> String {
    let mut out = String::new();
    for (i, d) in defs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&d.name);
        out.push_str(":\n");
        if infer_kind(&d.name, &d.consume, &d.require, &d.equip) != d.kind {
            out.push_str(&format!("  kind: {}\n", d.kind));
        }
        for (section, map) in [("consume", &d.consume), ("require", &d.require)] {
            out.push_str(&format!("  {section}:\n"));
            for (k, v) in map {
                out.push_str(&format!("    {k}: {v}\n"));
            }
        }
        out.push_str(&format!("  equip: [{}]\n", d.equip.join(", ")));
        out.push_str("  obtain:\n");
        for (k, v) in &d.obtain {
            out.push_str(&format!("    {k}: {v}\n"));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    Consume,
    Require,
    Equip,
    Obtain,
    Missing,
    Extra,
}

impl Field {
    pub fn as_str(self) -> &'static str {
        match self {
            Field::Consume => "consume",
            Field::Require => "require",
            Field::Equip => "equip",
            Field::Obtain => "obtain",
            Field::Missing => "missing",
            Field::Extra => "extra",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub item: ItemId,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub skill: ItemId,
    pub field: Field,
    pub expected: Option<Entry>,
    pub found: Option<Entry>,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |e: &Option<Entry>| match e {
            Some(e) => format!("{}: {}", e.item, e.count),
            None => "-".to_string(),
        };
        write!(
            f,
            "{} [{}] expected {} found {}",
            self.skill,
            self.field.as_str(),
            show(&self.expected),
            show(&self.found)
        )
    }
}

fn diff_counts(skill: &str, field: Field, expected: &Counts, found: &Counts, out: &mut Vec<Discrepancy>) {
    let mut keys: Vec<&ItemId> = expected.keys().chain(found.keys()).collect();
    keys.sort();
    keys.dedup();
    for k in keys {
        let e = expected.get(k).copied();
        let f = found.get(k).copied();
        if e != f {
            out.push(Discrepancy {
                skill: skill.to_string(),
                field,
                expected: e.map(|count| Entry { item: k.clone(), count }),
                found: f.map(|count| Entry { item: k.clone(), count }),
            });
        }
    }
}

/// Field-level comparison of a candidate set against a reference set.
///
/// Swapping the arguments swaps `expected` with `found` and `Missing` with `Extra`.
pub fn validate_against_db(candidate: &[SkillDefinition], reference: &[SkillDefinition]) -> Vec<Discrepancy> {
    let cand: BTreeMap<&str, &SkillDefinition> = candidate.iter().map(|d| (d.name.as_str(), d)).collect();
    let refs: BTreeMap<&str, &SkillDefinition> = reference.iter().map(|d| (d.name.as_str(), d)).collect();
    let mut names: Vec<&str> = cand.keys().chain(refs.keys()).copied().collect();
    names.sort_unstable();
    names.dedup();
    let mut out = Vec::new();
    for name in names {
        match (refs.get(name), cand.get(name)) {
            (Some(r), Some(c)) => {
                diff_counts(name, Field::Consume, &r.consume, &c.consume, &mut out);
                diff_counts(name, Field::Require, &r.require, &c.require, &mut out);
                let as_counts = |xs: &[ItemId]| {
                    let mut m = Counts::new();
                    for x in xs {
                        *m.entry(x.clone()).or_insert(0) += 1;
                    }
                    m
                };
                diff_counts(name, Field::Equip, &as_counts(&r.equip), &as_counts(&c.equip), &mut out);
                diff_counts(name, Field::Obtain, &r.obtain, &c.obtain, &mut out);
            }
            (Some(r), None) => out.push(Discrepancy {
                skill: name.to_string(),
                field: Field::Missing,
                expected: Some(Entry {
                    item: name.to_string(),
                    count: r.yield_count(),
                }),
                found: None,
            }),
            (None, Some(c)) => out.push(Discrepancy {
                skill: name.to_string(),
                field: Field::Extra,
                expected: None,
                found: Some(Entry {
                    item: name.to_string(),
                    count: c.yield_count(),
                }),
            }),
            (None, None) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const STONE_PICKAXE: &str = "\
stone_pickaxe:
  consume:
    cobblestone: 3
    stick: 2
  require:
    crafting_table_nearby: 1
  equip: []
  obtain:
    stone_pickaxe: 1
";

    const FURNACE_NEARBY: &str = "\
furnace_nearby:
  consume:
    'furnace': 1
  require:
  equip: ['furnace']
  obtain:
    'furnace_nearby': 1
";

    fn counts(xs: &[(&str, u32)]) -> Counts {
        xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_stone_pickaxe() {
        let defs = parse_skill_file(STONE_PICKAXE, ParseMode::Strict).unwrap();
        assert_eq!(defs.len(), 1);
        let d = &defs[0];
        assert_eq!(d.name, "stone_pickaxe");
        assert_eq!(d.kind, SkillKind::Crafting);
        assert_eq!(d.consume, counts(&[("cobblestone", 3), ("stick", 2)]));
        assert_eq!(d.require, counts(&[("crafting_table_nearby", 1)]));
        assert!(d.equip.is_empty());
        assert_eq!(d.obtain, counts(&[("stone_pickaxe", 1)]));
    }

    #[test]
    fn parses_quoted_furnace_nearby() {
        let defs = parse_skill_file(FURNACE_NEARBY, ParseMode::Lenient).unwrap();
        let d = &defs[0];
        assert_eq!(d.kind, SkillKind::Manipulation);
        assert_eq!(d.consume, counts(&[("furnace", 1)]));
        assert!(d.require.is_empty());
        assert_eq!(d.equip, vec!["furnace".to_string()]);
        assert_eq!(d.obtain, counts(&[("furnace_nearby", 1)]));
    }

    #[test]
    fn strict_rejects_quotes() {
        assert!(parse_skill_file(FURNACE_NEARBY, ParseMode::Strict).is_err());
    }

    #[test]
    fn zero_count_is_rejected() {
        let text = "a:\n  consume:\n    b: 0\n  require:\n  equip: []\n  obtain:\n    a: 1\n";
        assert_eq!(
            parse_skill_file(text, ParseMode::Strict),
            Err(SkillError::NonPositiveCount {
                skill: "a".into(),
                item: "b".into()
            })
        );
        let flat = "a:\nconsume:\n'b': 0\nobtain:\n'a': 1\n";
        assert!(matches!(
            parse_skill_file(flat, ParseMode::Lenient),
            Err(SkillError::InvalidDefinition { .. })
        ));
    }

    #[test]
    fn duplicate_skill_and_item() {
        let one = "a:\n  consume:\n  require:\n  equip: []\n  obtain:\n    a: 1\n";
        let twice = alloc::format!("{one}{one}");
        assert_eq!(
            parse_skill_file(&twice, ParseMode::Strict),
            Err(SkillError::DuplicateSkill("a".into()))
        );
        let dup = "a:\n  consume:\n    b: 1\n    b: 2\n  require:\n  equip: []\n  obtain:\n    a: 1\n";
        assert!(matches!(
            parse_skill_file(dup, ParseMode::Strict),
            Err(SkillError::DuplicateItemInSection { .. })
        ));
    }

    #[test]
    fn bad_indentation_reports_line() {
        let text = "a:\n   consume:\n";
        assert!(matches!(
            parse_skill_file(text, ParseMode::Strict),
            Err(SkillError::MalformedEntry { line: 2, .. })
        ));
    }

    #[test]
    fn missing_section_in_strict_mode() {
        let text = "a:\n  consume:\n  equip: []\n  obtain:\n    a: 1\n";
        assert!(matches!(
            parse_skill_file(text, ParseMode::Strict),
            Err(SkillError::MalformedEntry { .. })
        ));
    }

    #[test]
    fn explicit_kind_overrides_inference() {
        let text = "iron_ore_nearby:\n  kind: Manipulation\n  consume:\n  require:\n    stone_pickaxe: 1\n  equip: []\n  obtain:\n    iron_ore_nearby: 1\n";
        let defs = parse_skill_file(text, ParseMode::Strict).unwrap();
        assert_eq!(defs[0].kind, SkillKind::Manipulation);
        assert_eq!(serialize_skill_file(&defs), text);
    }

    #[test]
    fn kind_inference() {
        let e = Counts::new();
        assert_eq!(infer_kind("log_nearby", &e, &e, &[]), SkillKind::Finding);
        assert_eq!(
            infer_kind("log", &counts(&[("log_nearby", 1)]), &e, &[]),
            SkillKind::Manipulation
        );
        assert_eq!(
            infer_kind("milk_bucket", &counts(&[("bucket", 1)]), &counts(&[("cow_nearby", 1)]), &[]),
            SkillKind::Manipulation
        );
        assert_eq!(
            infer_kind("coal", &counts(&[("log", 1)]), &counts(&[("furnace_nearby", 1)]), &[]),
            SkillKind::Crafting
        );
        assert_eq!(
            infer_kind("crafting_table_nearby", &counts(&[("crafting_table", 1)]), &e, &["crafting_table".into()]),
            SkillKind::Manipulation
        );
    }

    #[test]
    fn invariants_enforced() {
        let e = Counts::new();
        let bad = SkillDefinition::with_kind("x_nearby", SkillKind::Finding, counts(&[("a", 1)]), e.clone(), vec![], counts(&[("x_nearby", 1)]));
        assert!(bad.is_err());
        let no_self = SkillDefinition::new("a", e.clone(), e.clone(), vec![], counts(&[("b", 1)]));
        assert!(no_self.is_err());
        let crafting_equips = SkillDefinition::with_kind("a", SkillKind::Crafting, e.clone(), e, vec!["t".into()], counts(&[("a", 1)]));
        assert!(crafting_equips.is_err());
    }

    #[test]
    fn serialize_empty_and_finding() {
        assert_eq!(serialize_skill_file(&[]), "");
        let d = SkillDefinition::simple("log_nearby", &[], &[], 1).unwrap();
        let text = serialize_skill_file(core::slice::from_ref(&d));
        assert_eq!(text, "log_nearby:\n  consume:\n  require:\n  equip: []\n  obtain:\n    log_nearby: 1\n");
        assert_eq!(parse_skill_file(&text, ParseMode::Strict).unwrap(), vec![d]);
    }

    #[test]
    fn single_injected_difference() {
        let reference = parse_skill_file(STONE_PICKAXE, ParseMode::Strict).unwrap();
        let mut cand = reference.clone();
        cand[0].consume.insert("cobblestone".into(), 2);
        let ds = validate_against_db(&cand, &reference);
        assert_eq!(
            ds,
            vec![Discrepancy {
                skill: "stone_pickaxe".into(),
                field: Field::Consume,
                expected: Some(Entry { item: "cobblestone".into(), count: 3 }),
                found: Some(Entry { item: "cobblestone".into(), count: 2 }),
            }]
        );
        assert!(validate_against_db(&reference, &reference).is_empty());
    }

    #[test]
    fn missing_and_extra_swap() {
        let a = SkillDefinition::simple("a", &[], &[], 1).unwrap();
        let b = SkillDefinition::simple("b", &[], &[], 2).unwrap();
        let ds = validate_against_db(core::slice::from_ref(&a), &[a.clone(), b.clone()]);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].field, Field::Missing);
        let rev = validate_against_db(&[a.clone(), b], &[a]);
        assert_eq!(rev[0].field, Field::Extra);
        assert_eq!(rev[0].found, ds[0].expected);
    }

    #[test]
    fn lenient_collects_failures_and_skips_prose() {
        let text = "Sure, here you go:\n\nstick:\nconsume:\n'planks': 2\nrequire:\nequip: []\nobtain:\n'stick': 4\n\nchest:\nconsume:\n'planks': lots\nobtain:\n'chest': 1\n\nThanks!\n";
        let (defs, failures) = parse_response(text);
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].obtain, counts(&[("stick", 4)]));
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].skill, "chest");
    }
}
