//! Writes `fixtures/paper.jsonl`: a complete five-attempt journal over the
//! published 42-task x 3-platform x 3-mode grid whose pass@1 and pass@5
//! breakdowns are the published results.
//!
//! Only the outcome counts per (mode, platform, level) are known, so each
//! group's instances are synthesized: the pass@1 and pass@5 outcome lists are
//! sorted and paired by position, attempts 1-4 carry the pass@1 outcome and
//! attempt 5 the pass@5 outcome. Prompts, replies and logs are placeholders,
//! and token usage is a fixed per-mode figure.
//!
//! ```text
//! cargo run --example paper_fixture [out.jsonl]
//! ```

use std::io::Write;
use std::path::PathBuf;

use chrono::{DateTime, Duration, TimeZone, Utc};
use skillbench::harness::plan::PlanSnapshot;
use skillbench::harness::{
    Event, InstanceKey, JournalRecord, PlannedInstance, Verdict, VerdictOrigin, VerdictValue,
};
use skillbench::metrics::Outcome;
use skillbench::pipeline::{CoderRecord, ManagerRecord, RunRecord, SkillsMode};
use skillbench::platform::PlatformId;
use skillbench::provider::{GenerationParams, TokenUsage};
use skillbench::toolchain::{BuildResult, BuildStatus, FlashResult, FlashStatus};

const ATTEMPTS: u32 = 5;
const LEVEL_SIZES: [usize; 3] = [12, 16, 14];

/// (cf, bf, bc) per level, for one (mode, platform) row.
type Row = [[usize; 3]; 3];

/// Rows in mode-major order: none, llm-generated, human-expert; each with
/// Arduino, ESP-IDF, Zephyr.
const PASS_AT_1: [Row; 9] = [
    [[0, 0, 12], [1, 1, 14], [2, 1, 11]],
    [[0, 0, 12], [4, 3, 9], [1, 8, 5]],
    [[0, 2, 10], [1, 5, 10], [2, 8, 4]],
    [[0, 0, 12], [1, 0, 15], [1, 1, 12]],
    [[0, 0, 12], [1, 4, 11], [0, 11, 3]],
    [[0, 2, 10], [4, 8, 4], [0, 9, 5]],
    [[0, 0, 12], [0, 0, 16], [0, 1, 13]],
    [[0, 0, 12], [0, 1, 15], [0, 1, 13]],
    [[0, 0, 12], [0, 2, 14], [0, 1, 13]],
];

const PASS_AT_5: [Row; 9] = [
    [[0, 0, 12], [0, 0, 16], [0, 0, 14]],
    [[0, 0, 12], [2, 2, 12], [1, 6, 7]],
    [[0, 1, 11], [0, 5, 11], [0, 8, 6]],
    [[0, 0, 12], [0, 0, 16], [1, 0, 13]],
    [[0, 0, 12], [1, 4, 11], [0, 10, 4]],
    [[0, 2, 10], [1, 6, 9], [0, 6, 8]],
    [[0, 0, 12], [0, 0, 16], [0, 0, 14]],
    [[0, 0, 12], [0, 0, 16], [0, 1, 13]],
    [[0, 0, 12], [0, 1, 15], [0, 0, 14]],
];

/// (manager in, manager out, coder in, coder out) per attempt.
fn usage(mode: SkillsMode) -> (Option<TokenUsage>, TokenUsage) {
    match mode {
        SkillsMode::None => (None, TokenUsage::new(300, 1200)),
        SkillsMode::LlmGenerated => (Some(TokenUsage::new(1000, 50)), TokenUsage::new(8000, 1700)),
        SkillsMode::HumanExpert => (Some(TokenUsage::new(600, 30)), TokenUsage::new(1200, 2500)),
    }
}

fn expand([cf, bf, bc]: [usize; 3]) -> Vec<Outcome> {
    let mut v = vec![Outcome::CF; cf];
    v.extend(vec![Outcome::BF; bf]);
    v.extend(vec![Outcome::BC; bc]);
    v
}

fn task_id(level: usize, n: usize) -> String {
    format!("l{}-{:02}", level + 1, n + 1)
}

struct Writer {
    records: Vec<JournalRecord>,
    start: DateTime<Utc>,
}

impl Writer {
    fn push(&mut self, event: Event) {
        let seq = self.records.len() as u64 + 1;
        self.records.push(JournalRecord {
            seq,
            ts: self.start + Duration::seconds(seq as i64),
            event,
        });
    }
}

fn run_record(key: &InstanceKey, index: u32, at: DateTime<Utc>) -> RunRecord {
    let (manager, coder) = usage(key.mode);
    RunRecord {
        run_id: key.attempt_id(index),
        task_id: key.task.clone(),
        platform: key.platform,
        mode: key.mode,
        manager: manager.map(|usage| ManagerRecord {
            system: String::new(),
            prompt: String::new(),
            response: String::new(),
            selected: Vec::new(),
            dropped: Vec::new(),
            usage,
        }),
        coder: CoderRecord {
            system: String::new(),
            prompt: String::new(),
            response: String::new(),
            usage: coder,
        },
        provider: "fixture".into(),
        model: "fixture".into(),
        params: GenerationParams::default(),
        started_at: at,
        finished_at: at,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/paper.jsonl"));

    // Outcome vectors per instance, keyed like the plan.
    let mut grid: Vec<(PlannedInstance, Vec<Outcome>)> = Vec::new();
    for (row, mode) in SkillsMode::ALL.into_iter().enumerate() {
        for (col, platform) in PlatformId::ALL.into_iter().enumerate() {
            let r = row * 3 + col;
            for level in 0..3 {
                let mut at1 = expand(PASS_AT_1[r][level]);
                let mut at5 = expand(PASS_AT_5[r][level]);
                assert_eq!(at1.len(), LEVEL_SIZES[level]);
                assert_eq!(at5.len(), LEVEL_SIZES[level]);
                at1.sort();
                at5.sort();
                for (n, (first, last)) in at1.into_iter().zip(at5).enumerate() {
                    assert!(first <= last, "pass@5 must dominate pass@1");
                    let mut outcomes = vec![first; ATTEMPTS as usize - 1];
                    outcomes.push(last);
                    grid.push((
                        PlannedInstance {
                            task: task_id(level, n),
                            mode,
                            platform,
                            level: level as u8 + 1,
                        },
                        outcomes,
                    ));
                }
            }
        }
    }
    grid.sort_by(|a, b| {
        (&a.0.task, a.0.mode, a.0.platform).cmp(&(&b.0.task, b.0.mode, b.0.platform))
    });

    let start = Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
    let mut w = Writer {
        records: Vec::new(),
        start,
    };
    w.push(Event::Started {
        plan: PlanSnapshot {
            attempts: ATTEMPTS,
            instances: grid.iter().map(|(i, _)| i.clone()).collect(),
        },
    });
    for (inst, outcomes) in &grid {
        let key = inst.key();
        for (i, outcome) in outcomes.iter().enumerate() {
            let index = i as u32 + 1;
            let attempt = key.attempt_id(index);
            w.push(Event::Generated {
                attempt: attempt.clone(),
                run: Box::new(run_record(&key, index, start)),
                code: Some("int main(void) { return 0; }\n".into()),
                extraction: None,
            });
            let built = *outcome != Outcome::CF;
            w.push(Event::Built {
                attempt: attempt.clone(),
                build: BuildResult {
                    status: if built {
                        BuildStatus::Ok
                    } else {
                        BuildStatus::CompileFailure
                    },
                    log: String::new(),
                    duration_ms: 0,
                    exit_code: Some(if built { 0 } else { 1 }),
                    timed_out: false,
                },
                flash: built.then(|| FlashResult {
                    status: FlashStatus::Ok,
                    log: String::new(),
                    duration_ms: 0,
                    exit_code: Some(0),
                    timed_out: false,
                }),
            });
            let verdict = built.then(|| Verdict {
                value: if *outcome == Outcome::BC {
                    VerdictValue::Pass
                } else {
                    VerdictValue::Fail
                },
                notes: String::new(),
                source: VerdictOrigin::Scripted,
                evaluator: None,
                at: start,
            });
            if built {
                w.push(Event::AwaitingVerdict {
                    attempt: attempt.clone(),
                    transcript: None,
                });
            }
            w.push(Event::Completed {
                attempt,
                outcome: *outcome,
                verdict,
            });
        }
    }

    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    for rec in &w.records {
        serde_json::to_writer(&mut file, rec)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    println!(
        "wrote {} records for {} instances to {}",
        w.records.len(),
        grid.len(),
        out.display()
    );
    Ok(())
}
