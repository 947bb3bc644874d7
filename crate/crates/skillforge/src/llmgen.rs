//! Candidate skill definitions from a chat-completion endpoint, and an
//! LLM-driven proposer for the interactive planning baseline.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skillforge_core::harness::{ExecutorFactory, Feedback, HarnessError, SkillProposer};
use skillforge_core::skilldef::ParseFailure;
use skillforge_core::{parse_response, Condition, ItemId, SkillDefinition, Task};

use crate::Error;

pub const PLACEHOLDER: &str = "{skills}";

const CRAFTING: &str = include_str!("../../../data/prompts/crafting.txt");
const MANIPULATION: &str = include_str!("../../../data/prompts/manipulation.txt");
const INTERACTIVE: &str = include_str!("../../../data/prompts/interactive.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Manipulation,
    Crafting,
}

/// Prompt text holding exactly one `{skills}` placeholder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    body: String,
    family: Family,
}

impl PromptTemplate {
    pub fn new(body: impl Into<String>, family: Family) -> Result<Self, Error> {
        let body = body.into();
        let n = body.matches(PLACEHOLDER).count();
        if n != 1 {
            return Err(Error::Invalid(format!("template needs exactly one {PLACEHOLDER}, found {n}")));
        }
        Ok(PromptTemplate { body, family })
    }

    pub fn builtin(family: Family) -> Self {
        let body = match family {
            Family::Crafting => CRAFTING,
            Family::Manipulation => MANIPULATION,
        };
        PromptTemplate::new(body.trim_end(), family).expect("built-in template")
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn family(&self) -> Family {
        self.family
    }
}

/// Substitute the comma-joined skill names for the placeholder.
pub fn build_prompt(template: &PromptTemplate, skills: &[ItemId]) -> Result<String, Error> {
    if skills.is_empty() {
        return Err(Error::EmptySkillList);
    }
    Ok(template.body.replacen(PLACEHOLDER, &skills.join(", "), 1))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChatEndpointConfig {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// When set, responses come from this file and nothing touches the network.
    pub offline_fixture: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        ChatEndpointConfig {
            url: "http://127.0.0.1:8080/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            token_env: "SKILLFORGE_LLM_TOKEN".into(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            offline_fixture: None,
            cache_dir: None,
        }
    }
}

impl ChatEndpointConfig {
    /// Defaults overridden by `SKILLFORGE_LLM_URL` and `SKILLFORGE_LLM_MODEL`.
    pub fn from_env() -> Self {
        let mut cfg = ChatEndpointConfig::default();
        if let Ok(url) = std::env::var("SKILLFORGE_LLM_URL") {
            cfg.url = url;
        }
        if let Ok(model) = std::env::var("SKILLFORGE_LLM_MODEL") {
            cfg.model = model;
        }
        cfg
    }

    pub fn client(&self) -> Result<Box<dyn ChatClient>, Error> {
        match &self.offline_fixture {
            Some(path) => Ok(Box::new(FixtureChat::from_file(path)?)),
            None => Ok(Box::new(HttpChat::new(self.clone()))),
        }
    }
}

pub trait ChatClient {
    /// One user message in, the first choice's text out.
    fn complete(&mut self, prompt: &str) -> Result<String, Error>;
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

pub struct HttpChat {
    cfg: ChatEndpointConfig,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(cfg: ChatEndpointConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(cfg.timeout).build();
        HttpChat { cfg, agent }
    }

    fn attempt(&self, prompt: &str) -> Result<String, Error> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: [Message {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(&self.cfg.url);
        if let Ok(token) = std::env::var(&self.cfg.token_env) {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let resp = match req.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(Error::Endpoint(code)),
            Err(e) => return Err(Error::Transport(e.to_string())),
        };
        let parsed: ChatResponse = resp.into_json()?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Transport("response has no choices".into()))
    }
}

impl ChatClient for HttpChat {
    /// Retries transport errors, 429 and 5xx with doubling backoff.
    fn complete(&mut self, prompt: &str) -> Result<String, Error> {
        let mut wait = Duration::from_millis(500);
        let mut tries = 0;
        loop {
            match self.attempt(prompt) {
                Err(Error::Endpoint(code)) if (code == 429 || code >= 500) && tries < self.cfg.max_retries => {}
                Err(Error::Transport(_)) if tries < self.cfg.max_retries => {}
                other => return other,
            }
            tries += 1;
            std::thread::sleep(wait);
            wait *= 2;
        }
    }
}

/// Canned responses, served in order. The last one repeats once the rest
/// are used up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureChat {
    responses: Vec<String>,
    next: usize,
    pub prompts: Vec<String>,
}

/// Separates responses inside one fixture file.
pub const FIXTURE_SEPARATOR: &str = "\n---\n";

impl FixtureChat {
    pub fn new(responses: Vec<String>) -> Self {
        assert!(!responses.is_empty(), "fixture needs at least one response");
        FixtureChat {
            responses,
            next: 0,
            prompts: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Self {
        FixtureChat::new(text.split(FIXTURE_SEPARATOR).map(str::to_string).collect())
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        Ok(FixtureChat::parse(&crate::read(path)?))
    }
}

impl ChatClient for FixtureChat {
    fn complete(&mut self, prompt: &str) -> Result<String, Error> {
        self.prompts.push(prompt.to_string());
        let i = self.next.min(self.responses.len() - 1);
        self.next += 1;
        Ok(self.responses[i].clone())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Generation {
    pub defs: Vec<SkillDefinition>,
    pub failures: Vec<ParseFailure>,
    /// Requested skills with no definition in the response.
    pub missing: Vec<ItemId>,
    pub cached: bool,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache file name for one (template, skill list) request.
pub fn cache_key(template: &PromptTemplate, skills: &[ItemId]) -> String {
    let t = sha_hex(template.body.as_bytes());
    let s = sha_hex(skills.join("\n").as_bytes());
    format!("{}-{}.txt", &t[..16], &s[..16])
}

/// Ask for `skills` in one request and parse the reply leniently. Blocks
/// that fail to parse are reported, not fatal. With a `cache_dir`, replies
/// are stored and reused.
pub fn generate_skills(
    client: &mut dyn ChatClient,
    template: &PromptTemplate,
    skills: &[ItemId],
    cache_dir: Option<&Path>,
) -> Result<Generation, Error> {
    let prompt = build_prompt(template, skills)?;
    let cache = cache_dir.map(|d| d.join(cache_key(template, skills)));
    let (text, cached) = match cache.as_deref().filter(|p| p.is_file()) {
        Some(p) => (crate::read(p)?, true),
        None => {
            let text = client.complete(&prompt)?;
            if let Some(p) = &cache {
                crate::write_atomic(p, text.as_bytes())?;
            }
            (text, false)
        }
    };
    let (defs, failures) = parse_response(&text);
    let seen: BTreeSet<&str> = defs
        .iter()
        .map(|d| d.name.as_str())
        .chain(failures.iter().map(|f| f.skill.as_str()))
        .collect();
    let missing = skills.iter().filter(|s| !seen.contains(s.as_str())).cloned().collect();
    Ok(Generation {
        defs,
        failures,
        missing,
        cached,
    })
}

fn feedback_line(feedback: Option<Feedback>, last: Option<&ItemId>) -> String {
    let last = last.map_or("", String::as_str);
    match feedback {
        None => "This is the first turn.".into(),
        Some(Feedback::InvalidName) => format!("`{last}` is not one of the available skills. Pick a name from the list."),
        Some(Feedback::AlreadyDone) => {
            format!("`{last}` was skipped: its result is already in the inventory. Choose a different skill.")
        }
        Some(Feedback::Success) => format!("`{last}` worked."),
        Some(Feedback::Failure) => format!("`{last}` did not work. It may be missing something, or can be tried again."),
    }
}

/// Prompt for one interactive turn.
pub fn interactive_prompt(
    skills: &[ItemId],
    task: &Task,
    condition: &Condition,
    feedback: Option<Feedback>,
    history: &[ItemId],
) -> String {
    let inventory = if condition.is_empty() {
        "empty".to_string()
    } else {
        condition.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join(", ")
    };
    let feedback = feedback_line(feedback, history.last());
    let history = if history.is_empty() { "none".to_string() } else { history.join(", ") };
    INTERACTIVE
        .replace("{skills}", &skills.join(", "))
        .replace("{goal}", &task.goal)
        .replace("{inventory}", &inventory)
        .replace("{history}", &history)
        .replace("{feedback}", &feedback)
}

/// The skill name in a free-form reply: its first non-empty line, after any
/// label such as "Next skill:", without quotes or a trailing period.
pub fn extract_skill_name(reply: &str) -> Option<ItemId> {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty())?;
    let tail = line.rsplit(':').next().unwrap_or(line);
    let name = tail.trim().trim_matches(|c: char| matches!(c, '`' | '\'' | '"' | '.' | '*')).trim();
    (!name.is_empty()).then(|| name.to_string())
}

/// Ask the model for the next skill.
pub fn llm_plan_step(
    client: &mut dyn ChatClient,
    skills: &[ItemId],
    task: &Task,
    condition: &Condition,
    feedback: Option<Feedback>,
    history: &[ItemId],
) -> Result<ItemId, Error> {
    let prompt = interactive_prompt(skills, task, condition, feedback, history);
    let reply = client.complete(&prompt)?;
    extract_skill_name(&reply).ok_or_else(|| Error::Invalid(format!("no skill name in reply {reply:?}")))
}

/// [`SkillProposer`] backed by a chat client.
pub struct LlmProposer {
    pub client: Box<dyn ChatClient>,
    pub skills: Vec<ItemId>,
    /// Feedback received on each call, for inspection.
    pub seen: Vec<Option<Feedback>>,
}

impl LlmProposer {
    pub fn new(client: Box<dyn ChatClient>, skills: Vec<ItemId>) -> Self {
        LlmProposer {
            client,
            skills,
            seen: Vec::new(),
        }
    }
}

impl SkillProposer for LlmProposer {
    fn propose(
        &mut self,
        task: &Task,
        condition: &Condition,
        feedback: Option<Feedback>,
        history: &[ItemId],
    ) -> Result<ItemId, String> {
        self.seen.push(feedback);
        llm_plan_step(self.client.as_mut(), &self.skills, task, condition, feedback, history).map_err(|e| e.to_string())
    }
}

/// Wraps an executor factory and hands out a fresh [`LlmProposer`] per
/// episode.
pub struct ProposingFactory<F> {
    pub inner: F,
    pub endpoint: ChatEndpointConfig,
    pub skills: Vec<ItemId>,
}

impl<F: ExecutorFactory> ExecutorFactory for ProposingFactory<F> {
    type Exec = F::Exec;

    fn make(&self, task: &Task, seed: u64) -> Result<F::Exec, HarnessError> {
        self.inner.make(task, seed)
    }

    fn proposer(&self, _task: &Task, _seed: u64) -> Option<Box<dyn SkillProposer + '_>> {
        let client = self.endpoint.client().ok()?;
        Some(Box::new(LlmProposer::new(client, self.skills.clone())))
    }
}
