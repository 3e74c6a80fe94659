//! Where behavioral verdicts come from: a person at the terminal, a
//! scripted map, the serial transcript, or the control API.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use regex::Regex;
use thiserror::Error;

use super::plan::ScriptedEntry;
use super::state::{AttemptRecord, AttemptState};
use super::store::Store;
use super::{VerdictOrigin, VerdictValue};
use crate::tasks::{CheckMode, TaskSpec};
use crate::toolchain::SerialTranscript;

#[derive(Debug, Error)]
pub enum VerdictError {
    #[error("no scripted verdict for attempt {0}")]
    MissingEntry(String),
    #[error("task {0} has an empty checklist")]
    EmptyChecklist(String),
    #[error("invalid serial pattern {pattern:?}: {message}")]
    BadPattern { pattern: String, message: String },
    #[error("verdict input closed")]
    Closed,
    #[error("verdict i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub struct VerdictRequest<'a> {
    pub attempt: &'a AttemptRecord,
    pub task: &'a TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Judgement {
    Decided {
        value: VerdictValue,
        notes: String,
        source: VerdictOrigin,
        evaluator: Option<String>,
    },
    /// The verdict was already written to the journal by someone else
    /// (the control API).
    Recorded,
}

pub trait VerdictSource: Send {
    fn judge(&mut self, request: &VerdictRequest<'_>) -> Result<Judgement, VerdictError>;
}

/// Verdicts looked up by attempt id.
#[derive(Debug, Clone, Default)]
pub struct ScriptedVerdicts {
    pub entries: BTreeMap<String, ScriptedEntry>,
    pub default: Option<VerdictValue>,
}

impl ScriptedVerdicts {
    pub fn new(entries: BTreeMap<String, ScriptedEntry>, default: Option<VerdictValue>) -> Self {
        Self { entries, default }
    }

    /// Every attempt gets `value`.
    pub fn always(value: VerdictValue) -> Self {
        Self::new(BTreeMap::new(), Some(value))
    }
}

impl VerdictSource for ScriptedVerdicts {
    fn judge(&mut self, request: &VerdictRequest<'_>) -> Result<Judgement, VerdictError> {
        let id = &request.attempt.id;
        let (value, notes) = match self.entries.get(id) {
            Some(e) => (e.verdict, e.notes.clone()),
            None => (
                self.default
                    .ok_or_else(|| VerdictError::MissingEntry(id.clone()))?,
                String::new(),
            ),
        };
        Ok(Judgement::Decided {
            value,
            notes,
            source: VerdictOrigin::Scripted,
            evaluator: None,
        })
    }
}

/// Whether `pattern` (a regular expression) matches any transcript line.
pub fn transcript_matches(
    pattern: &str,
    transcript: &SerialTranscript,
) -> Result<bool, VerdictError> {
    let re = Regex::new(pattern).map_err(|e| VerdictError::BadPattern {
        pattern: pattern.to_string(),
        message: e.to_string(),
    })?;
    Ok(transcript.lines.iter().any(|l| re.is_match(&l.text)))
}

/// Judges serial-pattern tasks from the captured transcript and hands every
/// other task to `fallback`.
pub struct SerialMatcher {
    pub fallback: Box<dyn VerdictSource>,
}

impl SerialMatcher {
    pub fn new(fallback: Box<dyn VerdictSource>) -> Self {
        Self { fallback }
    }
}

impl VerdictSource for SerialMatcher {
    fn judge(&mut self, request: &VerdictRequest<'_>) -> Result<Judgement, VerdictError> {
        let check = &request.task.check;
        let (CheckMode::SerialPattern, Some(pattern)) = (check.mode, check.pattern.as_deref())
        else {
            return self.fallback.judge(request);
        };
        let empty = SerialTranscript::default();
        let transcript = request.attempt.transcript.as_ref().unwrap_or(&empty);
        let matched = transcript_matches(pattern, transcript)?;
        let window = check.capture_window().as_secs();
        Ok(Judgement::Decided {
            value: if matched {
                VerdictValue::Pass
            } else {
                VerdictValue::Fail
            },
            notes: if matched {
                format!("serial output matched /{pattern}/")
            } else {
                format!("/{pattern}/ not seen within {window} s of serial output")
            },
            source: VerdictOrigin::SerialMatcher,
            evaluator: None,
        })
    }
}

/// Asks a person: shows the checklist and transcript, reads pass/fail and
/// notes.
pub struct InteractiveVerdicts<R, W> {
    input: R,
    output: W,
    evaluator: Option<String>,
}

impl<R: BufRead + Send, W: Write + Send> InteractiveVerdicts<R, W> {
    pub fn new(input: R, output: W, evaluator: Option<String>) -> Self {
        Self {
            input,
            output,
            evaluator,
        }
    }

    fn read_line(&mut self) -> Result<String, VerdictError> {
        let mut line = String::new();
        if self.input.read_line(&mut line)? == 0 {
            return Err(VerdictError::Closed);
        }
        Ok(line.trim().to_string())
    }
}

impl<R: BufRead + Send, W: Write + Send> VerdictSource for InteractiveVerdicts<R, W> {
    fn judge(&mut self, request: &VerdictRequest<'_>) -> Result<Judgement, VerdictError> {
        let task = request.task;
        if task.check.checklist.is_empty() {
            return Err(VerdictError::EmptyChecklist(task.id.clone()));
        }
        let out = &mut self.output;
        writeln!(
            out,
            "\n== {} — {} ({})",
            request.attempt.id,
            task.title,
            task.target.label()
        )?;
        writeln!(out, "Check on the hardware:")?;
        for item in &task.check.checklist {
            writeln!(out, "  [ ] {item}")?;
        }
        if let Some(t) = &request.attempt.transcript {
            writeln!(out, "Serial transcript ({} lines):", t.lines.len())?;
            for l in &t.lines {
                writeln!(out, "  [{:>6} ms] {}", l.t_ms, l.text)?;
            }
        }
        let value = loop {
            write!(self.output, "verdict [pass/fail]: ")?;
            self.output.flush()?;
            let answer = self.read_line()?;
            match answer.parse::<VerdictValue>() {
                Ok(v) => break v,
                Err(e) => writeln!(self.output, "{e}")?,
            }
        };
        write!(self.output, "notes (optional): ")?;
        self.output.flush()?;
        let notes = self.read_line()?;
        Ok(Judgement::Decided {
            value,
            notes,
            source: VerdictOrigin::Interactive,
            evaluator: self.evaluator.clone(),
        })
    }
}

/// Waits for a verdict to arrive through the control API.
pub struct StoreVerdicts {
    store: Arc<Store>,
    shutdown: Arc<AtomicBool>,
}

impl StoreVerdicts {
    pub fn new(store: Arc<Store>, shutdown: Arc<AtomicBool>) -> Self {
        Self { store, shutdown }
    }
}

impl VerdictSource for StoreVerdicts {
    fn judge(&mut self, request: &VerdictRequest<'_>) -> Result<Judgement, VerdictError> {
        let id = request.attempt.id.clone();
        log::info!("attempt {id} is awaiting a verdict through the control API");
        loop {
            let done = self
                .store
                .wait_until(Some(Duration::from_millis(200)), |s| {
                    s.get(&id)
                        .filter(|a| a.state != AttemptState::AwaitingVerdict)
                        .map(|_| ())
                });
            if done.is_some() {
                return Ok(Judgement::Recorded);
            }
            if self.shutdown.load(Ordering::SeqCst) {
                return Err(VerdictError::Closed);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::InstanceKey;
    use crate::pipeline::SkillsMode;
    use crate::platform::PlatformId;
    use crate::tasks::BehaviorCheck;
    use crate::toolchain::SerialLine;

    fn task(mode: CheckMode, checklist: &[&str]) -> TaskSpec {
        TaskSpec {
            id: "button".into(),
            level: 1,
            title: "Button".into(),
            description: "d".into(),
            target: PlatformId::Arduino,
            pins: vec![],
            check: BehaviorCheck {
                mode,
                pattern: (mode == CheckMode::SerialPattern).then(|| "Button Pressed!".to_string()),
                checklist: checklist.iter().map(|s| s.to_string()).collect(),
                capture_secs: None,
            },
        }
    }

    fn attempt(index: u32, transcript: &[&str]) -> AttemptRecord {
        let key = InstanceKey::new("button", SkillsMode::None, PlatformId::Arduino);
        let mut rec: AttemptRecord = serde_json::from_value(serde_json::json!({
            "id": key.attempt_id(index), "instance": key, "index": index, "level": 1,
            "state": "awaiting-verdict", "run": null, "code": null, "extraction": null,
            "build": null, "flash": null, "transcript": null, "verdict": null,
            "outcome": null, "incomplete": null
        }))
        .unwrap();
        rec.transcript = Some(SerialTranscript {
            lines: transcript
                .iter()
                .map(|t| SerialLine {
                    t_ms: 1,
                    text: t.to_string(),
                })
                .collect(),
        });
        rec
    }

    fn value(j: Judgement) -> VerdictValue {
        match j {
            Judgement::Decided { value, .. } => value,
            Judgement::Recorded => panic!("expected a decision"),
        }
    }

    #[test]
    fn serial_matcher() {
        let t = task(CheckMode::SerialPattern, &["x"]);
        let mut m = SerialMatcher::new(Box::new(ScriptedVerdicts::default()));
        let a = attempt(1, &["boot", "Button Pressed!"]);
        assert_eq!(
            value(
                m.judge(&VerdictRequest {
                    attempt: &a,
                    task: &t
                })
                .unwrap()
            ),
            VerdictValue::Pass
        );
        let a = attempt(1, &["boot"]);
        assert_eq!(
            value(
                m.judge(&VerdictRequest {
                    attempt: &a,
                    task: &t
                })
                .unwrap()
            ),
            VerdictValue::Fail
        );
        // Human-checked tasks go to the fallback, which has no entries.
        let h = task(CheckMode::Human, &["x"]);
        assert!(matches!(
            m.judge(&VerdictRequest {
                attempt: &a,
                task: &h
            }),
            Err(VerdictError::MissingEntry(_))
        ));
    }

    #[test]
    fn scripted_map() {
        let t = task(CheckMode::Human, &["x"]);
        let mut entries = BTreeMap::new();
        entries.insert(
            "button:none:atmega2560+arduino:3".to_string(),
            ScriptedEntry {
                verdict: VerdictValue::Fail,
                notes: "watchdog reset".into(),
            },
        );
        let mut s = ScriptedVerdicts::new(entries, Some(VerdictValue::Pass));
        let a3 = attempt(3, &[]);
        let a1 = attempt(1, &[]);
        assert_eq!(
            value(
                s.judge(&VerdictRequest {
                    attempt: &a3,
                    task: &t
                })
                .unwrap()
            ),
            VerdictValue::Fail
        );
        assert_eq!(
            value(
                s.judge(&VerdictRequest {
                    attempt: &a1,
                    task: &t
                })
                .unwrap()
            ),
            VerdictValue::Pass
        );
    }

    #[test]
    fn interactive() {
        let t = task(CheckMode::Human, &["LED blinks SOS"]);
        let a = attempt(1, &["hi"]);
        let mut out = Vec::new();
        let mut src = InteractiveVerdicts::new(
            &b"maybe\nfail\nwatchdog reset\n"[..],
            &mut out,
            Some("eva".into()),
        );
        let j = src
            .judge(&VerdictRequest {
                attempt: &a,
                task: &t,
            })
            .unwrap();
        assert_eq!(
            j,
            Judgement::Decided {
                value: VerdictValue::Fail,
                notes: "watchdog reset".into(),
                source: VerdictOrigin::Interactive,
                evaluator: Some("eva".into())
            }
        );
        drop(src);
        let shown = String::from_utf8(out).unwrap();
        assert!(shown.contains("[ ] LED blinks SOS"));
        assert!(shown.contains("expected pass or fail"));

        let mut src = InteractiveVerdicts::new(&b""[..], Vec::new(), None);
        assert!(matches!(
            src.judge(&VerdictRequest {
                attempt: &a,
                task: &t
            }),
            Err(VerdictError::Closed)
        ));
        let empty = task(CheckMode::Human, &[]);
        assert!(matches!(
            src.judge(&VerdictRequest {
                attempt: &a,
                task: &empty
            }),
            Err(VerdictError::EmptyChecklist(_))
        ));
    }
}
