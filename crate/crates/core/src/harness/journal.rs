//! Append-only JSONL journal: one `{seq, ts, event}` record per line.
//!
//! A process killed mid-write leaves an unterminated last line; readers drop
//! it and the writer truncates it away before appending. Anything else that
//! fails to parse, or a break in the sequence numbers, is corruption.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::os::unix::io::AsRawFd;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::plan::PlanSnapshot;
use super::state::Phase;
use super::Verdict;
use crate::assembler::ExtractionNote;
use crate::metrics::Outcome;
use crate::pipeline::RunRecord;
use crate::toolchain::{BuildResult, FlashResult, SerialTranscript};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    /// First record of every journal: the grid being evaluated.
    Started { plan: PlanSnapshot },
    /// The pipeline ran. `code` is absent when the reply held no code.
    Generated {
        attempt: String,
        run: Box<RunRecord>,
        code: Option<String>,
        extraction: Option<ExtractionNote>,
    },
    /// Compile (and, if it succeeded, flash) finished.
    Built {
        attempt: String,
        build: BuildResult,
        flash: Option<FlashResult>,
    },
    /// Flashed and waiting for a behavioral verdict.
    AwaitingVerdict {
        attempt: String,
        transcript: Option<SerialTranscript>,
    },
    Completed {
        attempt: String,
        outcome: Outcome,
        verdict: Option<Verdict>,
    },
    /// Infrastructure trouble; the attempt will be retried from `phase`.
    Incomplete {
        attempt: String,
        phase: Phase,
        reason: String,
    },
}

impl Event {
    pub fn attempt(&self) -> Option<&str> {
        match self {
            Event::Started { .. } => None,
            Event::Generated { attempt, .. }
            | Event::Built { attempt, .. }
            | Event::AwaitingVerdict { attempt, .. }
            | Event::Completed { attempt, .. }
            | Event::Incomplete { attempt, .. } => Some(attempt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("journal {path} is corrupt at line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("journal {0} is in use by another process")]
    Locked(PathBuf),
}

/// Parsed journal contents.
#[derive(Debug, Clone, Default)]
pub struct JournalContents {
    pub records: Vec<JournalRecord>,
    /// Byte length of the intact prefix.
    pub valid_len: u64,
    /// Whether an unterminated trailing line was dropped.
    pub torn: bool,
}

pub fn parse_journal(path: &Path, bytes: &[u8]) -> Result<JournalContents, JournalError> {
    let mut contents = JournalContents::default();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let Some(end) = bytes[offset..].iter().position(|b| *b == b'\n') else {
            contents.torn = true;
            break;
        };
        let line = &bytes[offset..offset + end];
        offset += end + 1;
        contents.valid_len = offset as u64;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let corrupt = |message: String| JournalError::Corrupt {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let record: JournalRecord =
            serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
        let expected = contents.records.last().map_or(1, |r| r.seq + 1);
        if record.seq != expected {
            return Err(corrupt(format!(
                "sequence number {} where {expected} was expected",
                record.seq
            )));
        }
        contents.records.push(record);
    }
    Ok(contents)
}

pub fn read_journal(path: &Path) -> Result<JournalContents, JournalError> {
    match std::fs::read(path) {
        Ok(bytes) => parse_journal(path, &bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(JournalContents::default()),
        Err(source) => Err(JournalError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// The only component that writes a journal. Holds an exclusive advisory
/// lock on the file for its lifetime.
#[derive(Debug)]
pub struct JournalWriter {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl JournalWriter {
    /// Opens (creating if needed) for appending after `contents`, dropping a
    /// torn tail.
    pub fn open(path: &Path, contents: &JournalContents) -> Result<Self, JournalError> {
        let io = |source| JournalError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(path)
            .map_err(io)?;
        // SAFETY: flock on a descriptor we own.
        if unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) } != 0 {
            return Err(JournalError::Locked(path.to_path_buf()));
        }
        let len = file.metadata().map_err(io)?.len();
        if len != contents.valid_len {
            if contents.torn {
                log::warn!(
                    "journal {}: dropping {} bytes of an interrupted write",
                    path.display(),
                    len - contents.valid_len
                );
            }
            file.set_len(contents.valid_len).map_err(io)?;
        }
        let mut writer = Self {
            path: path.to_path_buf(),
            file,
            next_seq: contents.records.last().map_or(1, |r| r.seq + 1),
        };
        writer.seek_end().map_err(io)?;
        Ok(writer)
    }

    fn seek_end(&mut self) -> std::io::Result<()> {
        use std::io::Seek;
        self.file.seek(std::io::SeekFrom::End(0)).map(|_| ())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record and syncs it to disk.
    pub fn append(&mut self, event: Event) -> Result<JournalRecord, JournalError> {
        let record = JournalRecord {
            seq: self.next_seq,
            ts: Utc::now(),
            event,
        };
        let mut line = serde_json::to_string(&record).expect("journal records serialize");
        line.push('\n');
        let io = |source| JournalError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.next_seq += 1;
        Ok(record)
    }
}
