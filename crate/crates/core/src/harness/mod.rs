//! Resumable evaluation campaigns over the task x skills-mode x platform x
//! attempt grid.
//!
//! Every state transition is appended to a JSONL journal; the campaign state
//! is whatever replaying the journal produces. Generation (model calls) runs
//! on a worker pool, while build/flash/verdict runs one attempt at a time
//! because a board and an evaluator can only handle one thing at once.

pub mod api;
pub mod journal;
pub mod plan;
pub mod runner;
pub mod state;
pub mod store;
pub mod verdict;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Outcome;
use crate::pipeline::SkillsMode;
use crate::platform::PlatformId;
use crate::toolchain::{BuildResult, BuildStatus, FlashResult, FlashStatus};

pub use journal::{Event, JournalError, JournalRecord};
pub use plan::{CampaignPlan, PlanError, PlannedInstance};
pub use runner::{run_campaign, CampaignSummary, RunnerError};
pub use state::{AttemptRecord, AttemptState, CampaignState, Phase, SettledAttempt};
pub use store::{Store, VerdictRejection};
pub use verdict::{
    InteractiveVerdicts, Judgement, ScriptedVerdicts, SerialMatcher, StoreVerdicts, VerdictError,
    VerdictRequest, VerdictSource,
};

/// One (task, skills mode, platform) combination.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceKey {
    pub task: String,
    pub mode: SkillsMode,
    pub platform: PlatformId,
}

impl InstanceKey {
    pub fn new(task: &str, mode: SkillsMode, platform: PlatformId) -> Self {
        Self {
            task: task.to_string(),
            mode,
            platform,
        }
    }

    /// Identifier of attempt `index` (1-based): `task:mode:platform:index`.
    pub fn attempt_id(&self, index: u32) -> String {
        format!("{self}:{index}")
    }

    /// Directory name used below the workspace root.
    pub fn dir_name(&self) -> String {
        format!(
            "{}.{}.{}",
            self.task,
            self.mode,
            self.platform.as_str().replace('+', "-")
        )
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.task, self.mode, self.platform)
    }
}

impl FromStr for InstanceKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [task, mode, platform] = parts[..] else {
            return Err(format!("{s:?}: expected task:mode:platform"));
        };
        Ok(Self {
            task: task.to_string(),
            mode: mode.parse()?,
            platform: platform.parse().map_err(|e| format!("{e}"))?,
        })
    }
}

/// Splits an attempt id into its instance and 1-based index.
pub fn parse_attempt_id(id: &str) -> Result<(InstanceKey, u32), String> {
    let (instance, index) = id
        .rsplit_once(':')
        .ok_or_else(|| format!("{id:?}: expected task:mode:platform:index"))?;
    let index: u32 = index
        .parse()
        .map_err(|_| format!("{id:?}: attempt index is not a number"))?;
    if index == 0 {
        return Err(format!("{id:?}: attempt indices start at 1"));
    }
    Ok((instance.parse()?, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Pass,
    Fail,
}

impl FromStr for VerdictValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pass" | "p" => Ok(VerdictValue::Pass),
            "fail" | "f" => Ok(VerdictValue::Fail),
            other => Err(format!("expected pass or fail, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictOrigin {
    Interactive,
    Scripted,
    SerialMatcher,
    Api,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    #[serde(default)]
    pub notes: String,
    pub source: VerdictOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluator: Option<String>,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InconsistentInputs {
    #[error("a verdict was supplied for an attempt that failed to build or flash")]
    VerdictOnCompileFailure,
    #[error("the attempt built and flashed but has no verdict")]
    MissingVerdict,
    #[error("the build succeeded but there is no flash result")]
    MissingFlash,
}

/// CF if the build or flash failed; otherwise BF or BC by verdict. A watchdog
/// reset or hang is a failing verdict like any other.
pub fn classify_outcome(
    build: &BuildResult,
    flash: Option<&FlashResult>,
    verdict: Option<VerdictValue>,
) -> Result<Outcome, InconsistentInputs> {
    let flashed = match (build.status, flash) {
        (BuildStatus::CompileFailure, _) => false,
        (BuildStatus::Ok, None) => return Err(InconsistentInputs::MissingFlash),
        (BuildStatus::Ok, Some(f)) => f.status == FlashStatus::Ok,
    };
    match (flashed, verdict) {
        (false, None) => Ok(Outcome::CF),
        (false, Some(_)) => Err(InconsistentInputs::VerdictOnCompileFailure),
        (true, None) => Err(InconsistentInputs::MissingVerdict),
        (true, Some(VerdictValue::Fail)) => Ok(Outcome::BF),
        (true, Some(VerdictValue::Pass)) => Ok(Outcome::BC),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build(ok: bool) -> BuildResult {
        BuildResult {
            status: if ok {
                BuildStatus::Ok
            } else {
                BuildStatus::CompileFailure
            },
            log: String::new(),
            duration_ms: 0,
            exit_code: Some(if ok { 0 } else { 1 }),
            timed_out: false,
        }
    }

    fn flash(ok: bool) -> FlashResult {
        FlashResult {
            status: if ok {
                FlashStatus::Ok
            } else {
                FlashStatus::FlashFailure
            },
            log: String::new(),
            duration_ms: 0,
            exit_code: Some(if ok { 0 } else { 2 }),
            timed_out: false,
        }
    }

    #[test]
    fn classification() {
        assert_eq!(classify_outcome(&build(false), None, None), Ok(Outcome::CF));
        assert_eq!(
            classify_outcome(&build(true), Some(&flash(false)), None),
            Ok(Outcome::CF)
        );
        assert_eq!(
            classify_outcome(&build(true), Some(&flash(true)), Some(VerdictValue::Fail)),
            Ok(Outcome::BF)
        );
        assert_eq!(
            classify_outcome(&build(true), Some(&flash(true)), Some(VerdictValue::Pass)),
            Ok(Outcome::BC)
        );
        assert_eq!(
            classify_outcome(&build(false), None, Some(VerdictValue::Pass)),
            Err(InconsistentInputs::VerdictOnCompileFailure)
        );
        assert_eq!(
            classify_outcome(&build(true), Some(&flash(true)), None),
            Err(InconsistentInputs::MissingVerdict)
        );
    }

    #[test]
    fn ids_round_trip() {
        let key = InstanceKey::new("sos", SkillsMode::HumanExpert, PlatformId::Zephyr);
        let id = key.attempt_id(3);
        assert_eq!(id, "sos:human-expert:nrf52840+zephyr:3");
        assert_eq!(parse_attempt_id(&id).unwrap(), (key, 3));
        assert!(parse_attempt_id("sos:none:nrf52840+zephyr:0").is_err());
        assert!(parse_attempt_id("sos").is_err());
    }
}
