//! Campaign state as reconstructed from journal events.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::journal::{Event, JournalRecord};
use super::plan::PlanSnapshot;
use super::{classify_outcome, parse_attempt_id, InstanceKey, Verdict, VerdictValue};
use crate::assembler::ExtractionNote;
use crate::metrics::{InstanceResult, NodeUsage, Outcome};
use crate::pipeline::RunRecord;
use crate::toolchain::{BuildResult, BuildStatus, FlashResult, FlashStatus, SerialTranscript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptState {
    Pending,
    Generated,
    Built,
    AwaitingVerdict,
    Complete,
    Incomplete,
}

impl AttemptState {
    pub const ALL: [AttemptState; 6] = [
        AttemptState::Pending,
        AttemptState::Generated,
        AttemptState::Built,
        AttemptState::AwaitingVerdict,
        AttemptState::Complete,
        AttemptState::Incomplete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttemptState::Pending => "pending",
            AttemptState::Generated => "generated",
            AttemptState::Built => "built",
            AttemptState::AwaitingVerdict => "awaiting-verdict",
            AttemptState::Complete => "complete",
            AttemptState::Incomplete => "incomplete",
        }
    }
}

impl std::str::FromStr for AttemptState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown attempt state {s:?}"))
    }
}

/// Where an interrupted attempt resumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Generation,
    Build,
    Flash,
    Capture,
    Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub id: String,
    pub instance: InstanceKey,
    pub index: u32,
    pub level: u8,
    pub state: AttemptState,
    pub run: Option<RunRecord>,
    pub code: Option<String>,
    pub extraction: Option<ExtractionNote>,
    pub build: Option<BuildResult>,
    pub flash: Option<FlashResult>,
    pub transcript: Option<SerialTranscript>,
    pub verdict: Option<Verdict>,
    pub outcome: Option<Outcome>,
    /// Last infrastructure failure, if the attempt is incomplete.
    pub incomplete: Option<(Phase, String)>,
}

impl AttemptRecord {
    fn new(instance: InstanceKey, index: u32, level: u8) -> Self {
        Self {
            id: instance.attempt_id(index),
            instance,
            index,
            level,
            state: AttemptState::Pending,
            run: None,
            code: None,
            extraction: None,
            build: None,
            flash: None,
            transcript: None,
            verdict: None,
            outcome: None,
            incomplete: None,
        }
    }

    /// Whether the attempt still needs a model call.
    pub fn needs_generation(&self) -> bool {
        self.run.is_none()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("the journal has already been started")]
    AlreadyStarted,
    #[error("the journal has not been started")]
    NotStarted,
    #[error("unknown attempt {0}")]
    UnknownAttempt(String),
    #[error("attempt {attempt}: {event} is not allowed in state {state}")]
    Illegal {
        attempt: String,
        event: &'static str,
        state: &'static str,
    },
    #[error("attempt {attempt}: {message}")]
    Inconsistent { attempt: String, message: String },
}

/// Everything the journal says, keyed by attempt id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignState {
    pub plan: Option<PlanSnapshot>,
    pub attempts: BTreeMap<String, AttemptRecord>,
    pub last_seq: u64,
}

fn event_name(event: &Event) -> &'static str {
    match event {
        Event::Started { .. } => "started",
        Event::Generated { .. } => "generated",
        Event::Built { .. } => "built",
        Event::AwaitingVerdict { .. } => "awaiting-verdict",
        Event::Completed { .. } => "completed",
        Event::Incomplete { .. } => "incomplete",
    }
}

impl CampaignState {
    pub fn replay<'a>(
        records: impl IntoIterator<Item = &'a JournalRecord>,
    ) -> Result<Self, (u64, TransitionError)> {
        let mut state = Self::default();
        for r in records {
            state.apply(&r.event).map_err(|e| (r.seq, e))?;
            state.last_seq = r.seq;
        }
        Ok(state)
    }

    /// Checks that `event` is a legal transition without applying it.
    pub fn check(&self, event: &Event) -> Result<(), TransitionError> {
        self.clone().apply(event)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), TransitionError> {
        if let Event::Started { plan } = event {
            if self.plan.is_some() {
                return Err(TransitionError::AlreadyStarted);
            }
            for inst in &plan.instances {
                for index in 1..=plan.attempts {
                    let rec = AttemptRecord::new(inst.key(), index, inst.level);
                    self.attempts.insert(rec.id.clone(), rec);
                }
            }
            self.plan = Some(plan.clone());
            return Ok(());
        }
        if self.plan.is_none() {
            return Err(TransitionError::NotStarted);
        }
        let id = event.attempt().expect("non-start events name an attempt");
        let rec = self
            .attempts
            .get_mut(id)
            .ok_or_else(|| TransitionError::UnknownAttempt(id.to_string()))?;
        let illegal = |rec: &AttemptRecord| TransitionError::Illegal {
            attempt: rec.id.clone(),
            event: event_name(event),
            state: rec.state.as_str(),
        };
        let inconsistent = |message: String| TransitionError::Inconsistent {
            attempt: id.to_string(),
            message,
        };
        use AttemptState::*;
        match event {
            Event::Started { .. } => unreachable!(),
            Event::Generated {
                run,
                code,
                extraction,
                ..
            } => {
                let retry_generation = rec.state == Incomplete && rec.run.is_none();
                if rec.state != Pending && !retry_generation {
                    return Err(illegal(rec));
                }
                if run.task_id != rec.instance.task
                    || run.mode != rec.instance.mode
                    || run.platform != rec.instance.platform
                {
                    return Err(inconsistent(
                        "run record belongs to another instance".into(),
                    ));
                }
                rec.run = Some((**run).clone());
                rec.code = code.clone();
                rec.extraction = extraction.clone();
                rec.state = Generated;
                rec.incomplete = None;
            }
            Event::Built { build, flash, .. } => {
                let ok = matches!(rec.state, Generated | Built)
                    || (rec.state == Incomplete && rec.run.is_some());
                if !ok {
                    return Err(illegal(rec));
                }
                if build.status == BuildStatus::Ok && flash.is_none() {
                    return Err(inconsistent(
                        "successful build without a flash result".into(),
                    ));
                }
                if build.status == BuildStatus::CompileFailure && flash.is_some() {
                    return Err(inconsistent("flash result after a failed build".into()));
                }
                rec.build = Some(build.clone());
                rec.flash = flash.clone();
                rec.transcript = None;
                rec.state = Built;
                rec.incomplete = None;
            }
            Event::AwaitingVerdict { transcript, .. } => {
                let flashed = rec
                    .flash
                    .as_ref()
                    .is_some_and(|f| f.status == FlashStatus::Ok);
                let from_incomplete = rec.state == Incomplete && flashed;
                if !(rec.state == Built && flashed) && !from_incomplete {
                    return Err(illegal(rec));
                }
                rec.transcript = transcript.clone();
                rec.state = AwaitingVerdict;
                rec.incomplete = None;
            }
            Event::Completed {
                outcome, verdict, ..
            } => {
                if !matches!(rec.state, Built | AwaitingVerdict) {
                    return Err(illegal(rec));
                }
                let build = rec
                    .build
                    .as_ref()
                    .ok_or_else(|| inconsistent("completed without a build".into()))?;
                let derived =
                    classify_outcome(build, rec.flash.as_ref(), verdict.as_ref().map(|v| v.value))
                        .map_err(|e| inconsistent(e.to_string()))?;
                if derived != *outcome {
                    return Err(inconsistent(format!(
                        "recorded outcome {outcome} but inputs classify as {derived}"
                    )));
                }
                if rec.state == Built && verdict.is_some() {
                    return Err(illegal(rec));
                }
                rec.verdict = verdict.clone();
                rec.outcome = Some(*outcome);
                rec.state = Complete;
            }
            Event::Incomplete { phase, reason, .. } => {
                if rec.state == Complete {
                    return Err(illegal(rec));
                }
                rec.incomplete = Some((*phase, reason.clone()));
                rec.state = Incomplete;
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&AttemptRecord> {
        self.attempts.get(id)
    }

    /// Attempts in plan order (instance order, then index).
    pub fn ordered(&self) -> Vec<&AttemptRecord> {
        let Some(plan) = &self.plan else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(plan.attempt_slots());
        for inst in &plan.instances {
            let key = inst.key();
            for index in 1..=plan.attempts {
                if let Some(rec) = self.attempts.get(&key.attempt_id(index)) {
                    out.push(rec);
                }
            }
        }
        out
    }

    pub fn counts(&self) -> BTreeMap<AttemptState, usize> {
        let mut out: BTreeMap<AttemptState, usize> =
            AttemptState::ALL.iter().map(|s| (*s, 0)).collect();
        for rec in self.attempts.values() {
            *out.entry(rec.state).or_default() += 1;
        }
        out
    }

    pub fn is_finished(&self) -> bool {
        self.plan.is_some()
            && self
                .attempts
                .values()
                .all(|a| a.state == AttemptState::Complete)
    }

    /// Per-instance outcome and usage vectors for the metrics.
    pub fn instance_results(&self) -> Vec<InstanceResult> {
        let Some(plan) = &self.plan else {
            return Vec::new();
        };
        plan.instances
            .iter()
            .map(|inst| {
                let key = inst.key();
                let recs: Vec<Option<&AttemptRecord>> = (1..=plan.attempts)
                    .map(|i| self.attempts.get(&key.attempt_id(i)))
                    .collect();
                InstanceResult {
                    level: inst.level,
                    outcomes: recs.iter().map(|r| r.and_then(|r| r.outcome)).collect(),
                    usage: recs
                        .iter()
                        .map(|r| {
                            r.and_then(|r| r.run.as_ref()).map(|run| NodeUsage {
                                manager: run.manager_usage(),
                                coder: run.coder.usage,
                            })
                        })
                        .collect(),
                    key,
                }
            })
            .collect()
    }

    /// Timestamp- and duration-free view used to compare campaigns.
    pub fn settled_view(&self) -> BTreeMap<String, SettledAttempt> {
        self.attempts
            .iter()
            .map(|(id, r)| {
                (
                    id.clone(),
                    SettledAttempt {
                        state: r.state,
                        outcome: r.outcome,
                        verdict: r.verdict.as_ref().map(|v| (v.value, v.notes.clone())),
                        selected_skills: r
                            .run
                            .as_ref()
                            .and_then(|run| run.manager.as_ref())
                            .map(|m| m.selected.clone()),
                        coder_response: r.run.as_ref().map(|run| run.coder.response.clone()),
                        code: r.code.clone(),
                        build: r
                            .build
                            .as_ref()
                            .map(|b| (b.status, b.exit_code, b.log.clone())),
                        flash: r
                            .flash
                            .as_ref()
                            .map(|f| (f.status, f.exit_code, f.log.clone())),
                        transcript: r.transcript.as_ref().map(SerialTranscript::text),
                    },
                )
            })
            .collect()
    }
}

/// The parts of an attempt that must not depend on when or how often the
/// campaign was interrupted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettledAttempt {
    pub state: AttemptState,
    pub outcome: Option<Outcome>,
    pub verdict: Option<(VerdictValue, String)>,
    pub selected_skills: Option<Vec<String>>,
    pub coder_response: Option<String>,
    pub code: Option<String>,
    pub build: Option<(BuildStatus, Option<i32>, String)>,
    pub flash: Option<(FlashStatus, Option<i32>, String)>,
    pub transcript: Option<String>,
}

/// Validates an attempt id against the plan's shape (used by the API).
pub fn known_attempt(state: &CampaignState, id: &str) -> bool {
    parse_attempt_id(id).is_ok() && state.attempts.contains_key(id)
}
