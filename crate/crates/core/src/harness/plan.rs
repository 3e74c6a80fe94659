//! Campaign plan files.
//!
//! ```toml
//! corpus = "tasks"                 # paths are relative to the plan file
//! platforms = ["atmega2560+arduino"]
//! modes = ["none", "human-expert"]
//! tasks = ["sos", "button-debounce"]   # optional subset
//! attempts = 5
//! journal = "runs/campaign.jsonl"
//! provider = "provider.toml"
//! toolchain = "toolchain.toml"
//! workers = 4
//!
//! [skills]
//! human-expert = "skills/expert"
//!
//! [verdicts]
//! source = "scripted"              # scripted | interactive | api
//! default = "pass"
//! [verdicts.entries]
//! "sos:none:atmega2560+arduino:3" = { verdict = "fail", notes = "watchdog reset" }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{InstanceKey, VerdictValue};
use crate::pipeline::SkillsMode;
use crate::platform::PlatformId;
use crate::tasks::Corpus;

pub const DEFAULT_ATTEMPTS: u32 = 5;
pub const DEFAULT_WORKERS: usize = 4;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("task {0:?} is not in the corpus")]
    UnknownTask(String),
    #[error("task {task:?} has no variant for {platform}")]
    MissingVariant { task: String, platform: PlatformId },
    #[error("the journal was started with a different plan ({0}); use a new journal path")]
    PlanChanged(String),
}

/// One grid cell as recorded in the journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedInstance {
    pub task: String,
    pub mode: SkillsMode,
    pub platform: PlatformId,
    pub level: u8,
}

impl PlannedInstance {
    pub fn key(&self) -> InstanceKey {
        InstanceKey::new(&self.task, self.mode, self.platform)
    }
}

/// The grid, frozen into the first journal record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSnapshot {
    pub attempts: u32,
    pub instances: Vec<PlannedInstance>,
}

impl PlanSnapshot {
    /// Enumerates task x mode x platform over `corpus`, restricted to
    /// `tasks` when given.
    pub fn enumerate(
        corpus: &Corpus,
        tasks: Option<&[String]>,
        modes: &[SkillsMode],
        platforms: &[PlatformId],
        attempts: u32,
    ) -> Result<Self, PlanError> {
        let ids: Vec<String> = match tasks {
            Some(subset) => {
                for t in subset {
                    if corpus.any_variant(t).is_none() {
                        return Err(PlanError::UnknownTask(t.clone()));
                    }
                }
                let mut v = subset.to_vec();
                v.sort();
                v.dedup();
                v
            }
            None => corpus.ids().into_iter().map(str::to_string).collect(),
        };
        let mut modes = modes.to_vec();
        modes.sort();
        modes.dedup();
        let mut platforms = platforms.to_vec();
        platforms.sort();
        platforms.dedup();
        let mut instances = Vec::new();
        for id in &ids {
            for mode in &modes {
                for platform in &platforms {
                    let task =
                        corpus
                            .get(id, *platform)
                            .ok_or_else(|| PlanError::MissingVariant {
                                task: id.clone(),
                                platform: *platform,
                            })?;
                    instances.push(PlannedInstance {
                        task: id.clone(),
                        mode: *mode,
                        platform: *platform,
                        level: task.level,
                    });
                }
            }
        }
        Ok(Self {
            attempts,
            instances,
        })
    }

    pub fn attempt_slots(&self) -> usize {
        self.instances.len() * self.attempts as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    #[default]
    Interactive,
    Scripted,
    Api,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEntry {
    pub verdict: VerdictValue,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictConfig {
    #[serde(default)]
    pub source: VerdictKind,
    /// Judge serial-pattern tasks automatically from the transcript.
    #[serde(default = "yes")]
    pub serial_matcher: bool,
    /// Scripted verdict for attempts without an entry.
    #[serde(default)]
    pub default: Option<VerdictValue>,
    /// Scripted verdicts by attempt id.
    #[serde(default)]
    pub entries: BTreeMap<String, ScriptedEntry>,
    /// Port for the control API when `source = "api"`.
    #[serde(default)]
    pub port: Option<u16>,
}

fn yes() -> bool {
    true
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            source: VerdictKind::default(),
            serial_matcher: true,
            default: None,
            entries: BTreeMap::new(),
            port: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    corpus: PathBuf,
    platforms: Vec<PlatformId>,
    modes: Vec<SkillsMode>,
    tasks: Option<Vec<String>>,
    attempts: Option<u32>,
    journal: PathBuf,
    workspace: Option<PathBuf>,
    provider: PathBuf,
    toolchain: PathBuf,
    workers: Option<usize>,
    #[serde(default)]
    skills: BTreeMap<SkillsMode, PathBuf>,
    #[serde(default)]
    verdicts: VerdictConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignPlan {
    pub corpus: PathBuf,
    pub platforms: Vec<PlatformId>,
    pub modes: Vec<SkillsMode>,
    pub tasks: Option<Vec<String>>,
    pub attempts: u32,
    pub journal: PathBuf,
    /// Root for attempt workspaces; defaults to the journal path without
    /// its extension.
    pub workspace: PathBuf,
    pub provider: PathBuf,
    pub toolchain: PathBuf,
    pub workers: usize,
    pub skills: BTreeMap<SkillsMode, PathBuf>,
    pub verdicts: VerdictConfig,
}

impl CampaignPlan {
    pub fn parse(text: &str, base: &Path, origin: &Path) -> Result<Self, PlanError> {
        let invalid = |message: String| PlanError::Invalid {
            path: origin.to_path_buf(),
            message,
        };
        let raw: RawPlan = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        let resolve = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        let attempts = raw.attempts.unwrap_or(DEFAULT_ATTEMPTS);
        if attempts == 0 {
            return Err(invalid("attempts must be at least 1".into()));
        }
        if raw.platforms.is_empty() || raw.modes.is_empty() {
            return Err(invalid("platforms and modes must not be empty".into()));
        }
        for mode in &raw.modes {
            if *mode != SkillsMode::None && !raw.skills.contains_key(mode) {
                return Err(invalid(format!("mode {mode} needs a [skills] entry")));
            }
        }
        if raw.skills.contains_key(&SkillsMode::None) {
            return Err(invalid("the none mode takes no skill library".into()));
        }
        for id in raw.verdicts.entries.keys() {
            super::parse_attempt_id(id).map_err(invalid)?;
        }
        let journal = resolve(raw.journal);
        let workspace = match raw.workspace {
            Some(w) => resolve(w),
            None => journal.with_extension(""),
        };
        if workspace == journal {
            return Err(invalid(
                "workspace must differ from the journal path".into(),
            ));
        }
        Ok(Self {
            corpus: resolve(raw.corpus),
            platforms: raw.platforms,
            modes: raw.modes,
            tasks: raw.tasks,
            attempts,
            journal,
            workspace,
            provider: resolve(raw.provider),
            toolchain: resolve(raw.toolchain),
            workers: raw.workers.unwrap_or(DEFAULT_WORKERS).max(1),
            skills: raw
                .skills
                .into_iter()
                .map(|(m, p)| (m, resolve(p)))
                .collect(),
            verdicts: raw.verdicts,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        Self::parse(&text, base, path)
    }

    pub fn snapshot(&self, corpus: &Corpus) -> Result<PlanSnapshot, PlanError> {
        PlanSnapshot::enumerate(
            corpus,
            self.tasks.as_deref(),
            &self.modes,
            &self.platforms,
            self.attempts,
        )
    }

    /// Directory for one attempt's project files.
    pub fn attempt_dir(&self, key: &InstanceKey, index: u32) -> PathBuf {
        self.workspace.join(key.dir_name()).join(index.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
corpus = "tasks"
platforms = ["atmega2560+arduino"]
modes = ["none", "human-expert"]
journal = "runs/c.jsonl"
provider = "provider.toml"
toolchain = "/opt/toolchain.toml"

[skills]
human-expert = "skills/expert"

[verdicts]
source = "scripted"
default = "pass"
[verdicts.entries]
"sos:none:atmega2560+arduino:3" = { verdict = "fail", notes = "watchdog reset" }
"#;

    #[test]
    fn parses_with_defaults_and_relative_paths() {
        let plan = CampaignPlan::parse(PLAN, Path::new("/p"), Path::new("/p/plan.toml")).unwrap();
        assert_eq!(plan.attempts, 5);
        assert_eq!(plan.corpus, Path::new("/p/tasks"));
        assert_eq!(plan.toolchain, Path::new("/opt/toolchain.toml"));
        assert_eq!(plan.workspace, Path::new("/p/runs/c"));
        assert_eq!(plan.verdicts.source, VerdictKind::Scripted);
        assert!(plan.verdicts.serial_matcher);
        assert_eq!(
            plan.verdicts.entries["sos:none:atmega2560+arduino:3"].verdict,
            VerdictValue::Fail
        );
        let key = InstanceKey::new("sos", SkillsMode::None, PlatformId::Arduino);
        assert_eq!(
            plan.attempt_dir(&key, 2),
            Path::new("/p/runs/c/sos.none.atmega2560-arduino/2")
        );
    }

    #[test]
    fn rejects_bad_plans() {
        let bad = [
            PLAN.replace("journal", "attempts = 0\njournal"),
            PLAN.replace("human-expert = \"skills/expert\"", ""),
            PLAN.replace("\"sos:none:atmega2560+arduino:3\"", "\"sos\""),
            PLAN.replace("modes", "colour = 1\nmodes"),
        ];
        for text in bad {
            assert!(CampaignPlan::parse(&text, Path::new("/p"), Path::new("plan.toml")).is_err());
        }
    }
}
