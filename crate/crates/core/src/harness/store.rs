//! Shared campaign state with a single journal writer.
//!
//! Every mutation goes through [`Store::append`], which validates the
//! transition, writes it to the journal and only then applies it. Readers
//! take snapshots; waiters block on a condition variable that fires after
//! each append.

use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use chrono::Utc;
use thiserror::Error;

use super::journal::{read_journal, Event, JournalError, JournalRecord, JournalWriter};
use super::state::{AttemptState, CampaignState, TransitionError};
use super::{classify_outcome, Verdict, VerdictOrigin, VerdictValue};
use crate::metrics::Outcome;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("journal {path} record {seq}: {source}")]
    Replay {
        path: PathBuf,
        seq: u64,
        #[source]
        source: TransitionError,
    },
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("the store is read-only")]
    ReadOnly,
}

/// Why a submitted verdict was refused.
#[derive(Debug, Error)]
pub enum VerdictRejection {
    #[error("no attempt {0}")]
    NotFound(String),
    #[error("attempt {id} is {state}, not awaiting a verdict")]
    Conflict { id: String, state: &'static str },
    #[error(transparent)]
    Store(#[from] StoreError),
}

struct Inner {
    state: CampaignState,
    writer: Option<JournalWriter>,
}

pub struct Store {
    path: PathBuf,
    writable: bool,
    inner: Mutex<Inner>,
    changed: Condvar,
}

impl Store {
    fn replay(path: &Path) -> Result<(CampaignState, super::journal::JournalContents), StoreError> {
        let contents = read_journal(path)?;
        let state = CampaignState::replay(&contents.records).map_err(|(seq, source)| {
            StoreError::Replay {
                path: path.to_path_buf(),
                seq,
                source,
            }
        })?;
        Ok((state, contents))
    }

    /// Opens a journal for reading and writing, creating it if missing.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let (state, contents) = Self::replay(path)?;
        let writer = JournalWriter::open(path, &contents)?;
        Ok(Self {
            path: path.to_path_buf(),
            writable: true,
            inner: Mutex::new(Inner {
                state,
                writer: Some(writer),
            }),
            changed: Condvar::new(),
        })
    }

    /// Opens a journal without taking the writer lock.
    pub fn open_read_only(path: &Path) -> Result<Self, StoreError> {
        let (state, _) = Self::replay(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            writable: false,
            inner: Mutex::new(Inner {
                state,
                writer: None,
            }),
            changed: Condvar::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Fixed at open time; safe to call from inside [`Store::read`].
    pub fn is_writable(&self) -> bool {
        self.writable
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn append_locked(inner: &mut Inner, event: Event) -> Result<JournalRecord, StoreError> {
        inner.state.check(&event)?;
        let writer = inner.writer.as_mut().ok_or(StoreError::ReadOnly)?;
        let record = writer.append(event)?;
        inner
            .state
            .apply(&record.event)
            .expect("transition was checked before writing");
        inner.state.last_seq = record.seq;
        Ok(record)
    }

    pub fn append(&self, event: Event) -> Result<JournalRecord, StoreError> {
        let record = Self::append_locked(&mut self.lock(), event)?;
        self.changed.notify_all();
        Ok(record)
    }

    pub fn snapshot(&self) -> CampaignState {
        self.lock().state.clone()
    }

    pub fn read<T>(&self, f: impl FnOnce(&CampaignState) -> T) -> T {
        f(&self.lock().state)
    }

    /// Blocks until `done` holds or `timeout` elapses (if given). Returns the
    /// value produced by `done`.
    pub fn wait_until<T>(
        &self,
        timeout: Option<Duration>,
        mut done: impl FnMut(&CampaignState) -> Option<T>,
    ) -> Option<T> {
        let deadline = timeout.map(|t| std::time::Instant::now() + t);
        let mut guard = self.lock();
        loop {
            if let Some(v) = done(&guard.state) {
                return Some(v);
            }
            match deadline {
                None => {
                    guard = self.changed.wait(guard).unwrap_or_else(|e| e.into_inner());
                }
                Some(d) => {
                    let now = std::time::Instant::now();
                    if now >= d {
                        return None;
                    }
                    guard = self
                        .changed
                        .wait_timeout(guard, d - now)
                        .unwrap_or_else(|e| e.into_inner())
                        .0;
                }
            }
        }
    }

    /// Wakes every waiter (e.g. on shutdown).
    pub fn notify(&self) {
        self.changed.notify_all();
    }

    /// Records a human verdict for an attempt that is awaiting one.
    pub fn submit_verdict(
        &self,
        id: &str,
        value: VerdictValue,
        notes: String,
        source: VerdictOrigin,
        evaluator: Option<String>,
    ) -> Result<Outcome, VerdictRejection> {
        let mut inner = self.lock();
        let rec = inner
            .state
            .get(id)
            .ok_or_else(|| VerdictRejection::NotFound(id.to_string()))?;
        if rec.state != AttemptState::AwaitingVerdict {
            return Err(VerdictRejection::Conflict {
                id: id.to_string(),
                state: rec.state.as_str(),
            });
        }
        let build = rec.build.as_ref().expect("awaiting attempts were built");
        let outcome = classify_outcome(build, rec.flash.as_ref(), Some(value)).map_err(|_| {
            VerdictRejection::Conflict {
                id: id.to_string(),
                state: rec.state.as_str(),
            }
        })?;
        let event = Event::Completed {
            attempt: id.to_string(),
            outcome,
            verdict: Some(Verdict {
                value,
                notes,
                source,
                evaluator,
                at: Utc::now(),
            }),
        };
        Self::append_locked(&mut inner, event)?;
        drop(inner);
        self.changed.notify_all();
        Ok(outcome)
    }
}
