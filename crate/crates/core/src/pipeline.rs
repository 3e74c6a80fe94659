//! The single-pass agent: an optional manager call that picks skills, a coder
//! call that writes the firmware, and the deterministic assembler.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembler::{assemble, AssembleError, ExtractedSource, ProjectBundle};
use crate::peripheral::PeripheralRegistry;
use crate::provider::{ChatProvider, GenerationParams, ModelSettings, ProviderError, TokenUsage};
use crate::skills::{normalize_name, render_header_index, Skill, SkillError, SkillLibrary};
use crate::tasks::{render_task_prompt_with, TaskError, TaskSpec};

pub const PLANNER_SYSTEM_PROMPT: &str =
    "You are a project planner for embedded firmware projects. \
You are given the headers of all available skill documents and the requirements of one task. \
Choose the skills whose guidance applies to this task on its target platform. \
Output only skill names, one per line, exactly as they appear in the headers. \
Do not explain your choice. If no skill applies, output nothing.";

pub const CODER_PERSONA: &str = "You are an expert embedded engineer. \
Write complete, compilable firmware that fulfils the task for the stated board and framework. \
Use exactly the pin assignments given in the task. \
Reply with the full program in a single fenced code block and no other text.";

const STANDARDS_HEADING: &str = "## Applicable standards";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkillsMode {
    None,
    LlmGenerated,
    HumanExpert,
}

impl SkillsMode {
    pub const ALL: [SkillsMode; 3] = [
        SkillsMode::None,
        SkillsMode::LlmGenerated,
        SkillsMode::HumanExpert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillsMode::None => "none",
            SkillsMode::LlmGenerated => "llm-generated",
            SkillsMode::HumanExpert => "human-expert",
        }
    }

    /// Row label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            SkillsMode::None => "No-Skills",
            SkillsMode::LlmGenerated => "LLM",
            SkillsMode::HumanExpert => "Human-Expert",
        }
    }
}

impl fmt::Display for SkillsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SkillsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" | "no-skills" => Ok(SkillsMode::None),
            "llm-generated" | "llm" => Ok(SkillsMode::LlmGenerated),
            "human-expert" | "expert" => Ok(SkillsMode::HumanExpert),
            other => Err(format!(
                "unknown skills mode {other:?} (expected none, llm-generated or human-expert)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Node {
    Manager,
    Coder,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Node::Manager => "manager",
            Node::Coder => "coder",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{node} call failed: {source}")]
    Provider {
        node: Node,
        #[source]
        source: ProviderError,
    },
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error("skills mode {0} needs a skill library")]
    MissingLibrary(SkillsMode),
    #[error("skill library for mode {0} is empty")]
    EmptyLibrary(SkillsMode),
}

impl PipelineError {
    /// Errors that say nothing about the firmware: the run can be retried.
    pub fn is_infrastructure(&self) -> bool {
        matches!(self, PipelineError::Provider { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManagerRecord {
    pub system: String,
    pub prompt: String,
    pub response: String,
    pub selected: Vec<String>,
    /// Response lines that named no known skill.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoderRecord {
    pub system: String,
    pub prompt: String,
    pub response: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub task_id: String,
    pub platform: crate::platform::PlatformId,
    pub mode: SkillsMode,
    pub manager: Option<ManagerRecord>,
    pub coder: CoderRecord,
    pub provider: String,
    pub model: String,
    pub params: GenerationParams,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl RunRecord {
    pub fn manager_usage(&self) -> TokenUsage {
        self.manager.as_ref().map(|m| m.usage).unwrap_or_default()
    }

    pub fn total_usage(&self) -> TokenUsage {
        self.manager_usage() + self.coder.usage
    }
}

/// Result of a full run. `assembly` is an error when the coder reply held no
/// usable code; the record is still complete.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub record: RunRecord,
    pub assembly: Result<(ProjectBundle, ExtractedSource), AssembleError>,
}

/// Matches manager output against library names. Each line is normalized
/// and scanned for skill names bounded by hyphens (so "I would use: Zephyr
/// GPIO" selects `zephyr-gpio`); longer names win over names they contain.
/// Returns the selection in response order plus the lines that matched
/// nothing.
pub fn parse_selection(response: &str, library: &SkillLibrary) -> (Vec<String>, Vec<String>) {
    let mut names: Vec<(String, String)> = library
        .skills()
        .iter()
        .map(|s| (normalize_name(&s.header.name), s.header.name.clone()))
        .filter(|(n, _)| !n.is_empty())
        .collect();
    names.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(&b.0)));
    let mut selected: Vec<String> = Vec::new();
    let mut dropped = Vec::new();
    for line in response.lines() {
        let norm = normalize_name(line);
        if norm.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = norm.split('-').collect();
        let mut taken = vec![false; tokens.len()];
        let mut hits: Vec<(usize, String)> = Vec::new();
        for (key, name) in &names {
            let width = key.split('-').count();
            if width > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - width {
                let span = start..start + width;
                if taken[span.clone()].iter().any(|t| *t) {
                    continue;
                }
                if tokens[span.clone()].join("-") == *key {
                    taken[span].iter_mut().for_each(|t| *t = true);
                    hits.push((start, name.clone()));
                }
            }
        }
        if hits.is_empty() {
            dropped.push(line.trim().to_string());
            continue;
        }
        hits.sort();
        for (_, name) in hits {
            if !selected.contains(&name) {
                selected.push(name);
            }
        }
    }
    if !dropped.is_empty() {
        log::debug!("manager lines matching no skill: {dropped:?}");
    }
    (selected, dropped)
}

pub fn manager_prompt(header_index: &str, task_prompt: &str) -> String {
    format!("Available skills:\n{header_index}\nTask:\n{task_prompt}")
}

/// Coder system prompt: the persona, then each skill body under the
/// standards heading in the given order.
pub fn coder_system_prompt(skills: &[Skill]) -> String {
    let mut out = CODER_PERSONA.to_string();
    if skills.is_empty() {
        return out;
    }
    out.push_str("\n\n");
    out.push_str(STANDARDS_HEADING);
    out.push_str("\n\nFollow these standards wherever they apply to the task.\n");
    for skill in skills {
        out.push_str(&format!("\n### {}\n\n", skill.header.name));
        out.push_str(skill.body.trim_end());
        out.push('\n');
    }
    out
}

pub fn run_manager(
    task_prompt: &str,
    library: &SkillLibrary,
    provider: &dyn ChatProvider,
    settings: &ModelSettings,
) -> Result<ManagerRecord, ProviderError> {
    let index = render_header_index(&library.headers());
    let prompt = manager_prompt(&index, task_prompt);
    let request = settings.request(PLANNER_SYSTEM_PROMPT.to_string(), vec![prompt.clone()]);
    let response = settings.retry.call(provider, &request)?;
    let (selected, dropped) = parse_selection(&response.text, library);
    Ok(ManagerRecord {
        system: request.system,
        prompt,
        response: response.text,
        selected,
        dropped,
        usage: response.usage,
    })
}

pub fn run_coder(
    task_prompt: &str,
    skills: &[Skill],
    provider: &dyn ChatProvider,
    settings: &ModelSettings,
) -> Result<CoderRecord, ProviderError> {
    let request = settings.request(coder_system_prompt(skills), vec![task_prompt.to_string()]);
    let response = settings.retry.call(provider, &request)?;
    Ok(CoderRecord {
        system: request.system,
        prompt: task_prompt.to_string(),
        response: response.text,
        usage: response.usage,
    })
}

/// Everything a run needs besides the task.
pub struct Pipeline<'a> {
    pub provider: &'a dyn ChatProvider,
    pub settings: &'a ModelSettings,
    pub registry: &'a PeripheralRegistry,
}

impl Pipeline<'_> {
    /// Runs manager (unless `mode` is none), coder and assembler.
    pub fn run(
        &self,
        run_id: &str,
        task: &TaskSpec,
        mode: SkillsMode,
        library: Option<&SkillLibrary>,
    ) -> Result<PipelineRun, PipelineError> {
        let started_at = Utc::now();
        let task_prompt = render_task_prompt_with(task, &task.target.profile(), self.registry)?;
        let (manager, skills) = match mode {
            SkillsMode::None => (None, Vec::new()),
            _ => {
                let library = library.ok_or(PipelineError::MissingLibrary(mode))?;
                if library.is_empty() {
                    return Err(PipelineError::EmptyLibrary(mode));
                }
                let record = run_manager(&task_prompt, library, self.provider, self.settings)
                    .map_err(|source| PipelineError::Provider {
                        node: Node::Manager,
                        source,
                    })?;
                let skills = library.load_bodies(&record.selected)?;
                (Some(record), skills)
            }
        };
        let coder =
            run_coder(&task_prompt, &skills, self.provider, self.settings).map_err(|source| {
                PipelineError::Provider {
                    node: Node::Coder,
                    source,
                }
            })?;
        let assembly = assemble(task, &coder.response, self.registry);
        let record = RunRecord {
            run_id: run_id.to_string(),
            task_id: task.id.clone(),
            platform: task.target,
            mode,
            manager,
            coder,
            provider: self.provider.id(),
            model: self.settings.model.clone(),
            params: self.settings.params.clone(),
            started_at,
            finished_at: Utc::now(),
        };
        Ok(PipelineRun { record, assembly })
    }
}
