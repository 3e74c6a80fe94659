//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without the libtest harness so the lines are always printed.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{
    context, corpus, fixtures, library, plan, replay_provider, replay_settings, UsageTap,
};
use skillbench::assembler::render_prj_conf;
use skillbench::harness::journal::parse_journal;
use skillbench::harness::plan::PlanSnapshot;
use skillbench::harness::runner::verdict_source_for;
use skillbench::harness::{
    run_campaign, AttemptState, CampaignState, Event, InstanceKey, JournalRecord, PlannedInstance,
    Store, Verdict, VerdictOrigin, VerdictValue,
};
use skillbench::metrics::{outcome_at_k, pass_at_k, Outcome, Report};
use skillbench::peripheral::{Interface, PeripheralRegistry};
use skillbench::pipeline::{Pipeline, RunRecord, SkillsMode};
use skillbench::platform::PlatformId;
use skillbench::provider::{ChatProvider, CountingProvider, TokenUsage};
use skillbench::tasks::{BehaviorCheck, CheckMode, PinAssignment, TaskSpec};
use skillbench::toolchain::{BuildResult, BuildStatus, FlashResult, FlashStatus};

type Check = Result<String, String>;
/// Name, check, wall-clock budget.
type Criterion = (&'static str, fn() -> Check, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const HEADER: &str =
    "| Skills | Platform | L1 (12) | L2 (16) | L3 (14) | Total (42) |\n|---|---|---|---|---|---|\n";

const TABLE_K1: &str = "\
| No-Skills | Arduino | 0/0/12 | 1/1/14 | 2/1/11 | 3/2/37 |
| No-Skills | ESP-IDF | 0/0/12 | 4/3/9 | 1/8/5 | 5/11/26 |
| No-Skills | Zephyr | 0/2/10 | 1/5/10 | 2/8/4 | 3/15/24 |
| LLM | Arduino | 0/0/12 | 1/0/15 | 1/1/12 | 2/1/39 |
| LLM | ESP-IDF | 0/0/12 | 1/4/11 | 0/11/3 | 1/15/26 |
| LLM | Zephyr | 0/2/10 | 4/8/4 | 0/9/5 | 4/19/19 |
| Human-Expert | Arduino | 0/0/12 | 0/0/16 | 0/1/13 | 0/1/41 |
| Human-Expert | ESP-IDF | 0/0/12 | 0/1/15 | 0/1/13 | 0/2/40 |
| Human-Expert | Zephyr | 0/0/12 | 0/2/14 | 0/1/13 | 0/3/39 |
";

const TABLE_K5: &str = "\
| No-Skills | Arduino | 0/0/12 | 0/0/16 | 0/0/14 | 0/0/42 |
| No-Skills | ESP-IDF | 0/0/12 | 2/2/12 | 1/6/7 | 3/8/31 |
| No-Skills | Zephyr | 0/1/11 | 0/5/11 | 0/8/6 | 0/14/28 |
| LLM | Arduino | 0/0/12 | 0/0/16 | 1/0/13 | 1/0/41 |
| LLM | ESP-IDF | 0/0/12 | 1/4/11 | 0/10/4 | 1/14/27 |
| LLM | Zephyr | 0/2/10 | 1/6/9 | 0/6/8 | 1/14/27 |
| Human-Expert | Arduino | 0/0/12 | 0/0/16 | 0/0/14 | 0/0/42 |
| Human-Expert | ESP-IDF | 0/0/12 | 0/0/16 | 0/1/13 | 0/1/41 |
| Human-Expert | Zephyr | 0/0/12 | 0/1/15 | 0/0/14 | 0/1/41 |
";

const TABLE_BUDGET: Duration = Duration::from_secs(5);

fn published_tables() -> Check {
    let start = Instant::now();
    let store =
        Store::open_read_only(&fixtures().join("paper.jsonl")).map_err(|e| e.to_string())?;
    let results = store.read(|s| s.instance_results());
    for (k, body) in [(1, TABLE_K1), (5, TABLE_K5)] {
        let md = Report::build(&results, k)
            .map_err(|e| e.to_string())?
            .to_markdown();
        let expected = format!("{HEADER}{body}");
        ensure!(md == expected, "k={k} table differs:\n{md}");
    }
    let elapsed = start.elapsed();
    ensure!(
        elapsed < TABLE_BUDGET,
        "took {elapsed:?}, budget {TABLE_BUDGET:?}"
    );
    Ok(format!(
        "k=1 and k=5 byte-exact in {:.2}s (budget 5s)",
        elapsed.as_secs_f64()
    ))
}

fn no_skills_pass_at_5() -> Check {
    let store =
        Store::open_read_only(&fixtures().join("paper.jsonl")).map_err(|e| e.to_string())?;
    let results = store.read(|s| s.instance_results());
    let mut seen = Vec::new();
    for (platform, num) in [
        (PlatformId::Arduino, 42),
        (PlatformId::EspIdf, 31),
        (PlatformId::Zephyr, 28),
    ] {
        let r =
            pass_at_k(&results, 5, SkillsMode::None, platform, None).map_err(|e| e.to_string())?;
        ensure!(
            r.num == num && r.den == 42,
            "{platform}: {r}, want {num}/42"
        );
        seen.push(r.to_string());
    }
    Ok(format!("exact rationals {}", seen.join(", ")))
}

fn reference_best(v: &[Outcome]) -> Outcome {
    if v.contains(&Outcome::BC) {
        Outcome::BC
    } else if v.contains(&Outcome::BF) {
        Outcome::BF
    } else {
        Outcome::CF
    }
}

fn ordering_oracle() -> Check {
    let all = [Outcome::CF, Outcome::BF, Outcome::BC];
    let mut checked = 0;
    for n in 0..3usize.pow(5) {
        let v: Vec<Outcome> = (0..5).map(|i| all[n / 3usize.pow(i) % 3]).collect();
        for k in 1..=5 {
            let got = outcome_at_k(&v, k).map_err(|e| e.to_string())?;
            let want = reference_best(&v[..k]);
            ensure!(got == want, "{v:?} at k={k}: {got:?}, oracle {want:?}");
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (vector, k) cases agree with the brute-force oracle"
    ))
}

fn random_journal(rng: &mut StdRng) -> Vec<u8> {
    let attempts = 5;
    let mut instances = Vec::new();
    for t in 0..rng.gen_range(1..6) {
        for mode in SkillsMode::ALL {
            if rng.gen_bool(0.3) {
                continue;
            }
            for platform in PlatformId::ALL {
                if rng.gen_bool(0.3) {
                    continue;
                }
                instances.push(PlannedInstance {
                    task: format!("t{t}"),
                    mode,
                    platform,
                    level: (t % 3) as u8 + 1,
                });
            }
        }
    }
    let at = chrono::DateTime::from_timestamp(1_700_000_000, 0).unwrap();
    let mut events = vec![Event::Started {
        plan: PlanSnapshot {
            attempts,
            instances: instances.clone(),
        },
    }];
    let template = run_record(
        &InstanceKey::new("t0", SkillsMode::None, PlatformId::Arduino),
        1,
        at,
    );
    for inst in &instances {
        let key = inst.key();
        for index in 1..=attempts {
            let attempt = key.attempt_id(index);
            let outcome = [Outcome::CF, Outcome::BF, Outcome::BC][rng.gen_range(0..3)];
            events.push(Event::Generated {
                attempt: attempt.clone(),
                run: Box::new(RunRecord {
                    run_id: attempt.clone(),
                    task_id: key.task.clone(),
                    platform: key.platform,
                    mode: key.mode,
                    ..template.clone()
                }),
                code: Some(String::new()),
                extraction: None,
            });
            let built = outcome != Outcome::CF;
            events.push(Event::Built {
                attempt: attempt.clone(),
                build: BuildResult {
                    status: if built {
                        BuildStatus::Ok
                    } else {
                        BuildStatus::CompileFailure
                    },
                    log: String::new(),
                    duration_ms: 0,
                    exit_code: Some(i32::from(!built)),
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
            if built {
                events.push(Event::AwaitingVerdict {
                    attempt: attempt.clone(),
                    transcript: None,
                });
            }
            events.push(Event::Completed {
                attempt,
                outcome,
                verdict: built.then(|| Verdict {
                    value: if outcome == Outcome::BC {
                        VerdictValue::Pass
                    } else {
                        VerdictValue::Fail
                    },
                    notes: String::new(),
                    source: VerdictOrigin::Scripted,
                    evaluator: None,
                    at,
                }),
            });
        }
    }
    let mut bytes = Vec::new();
    for (i, event) in events.into_iter().enumerate() {
        let rec = JournalRecord {
            seq: i as u64 + 1,
            ts: at,
            event,
        };
        bytes.extend(serde_json::to_vec(&rec).unwrap());
        bytes.push(b'\n');
    }
    bytes
}

fn run_record(key: &InstanceKey, index: u32, at: chrono::DateTime<chrono::Utc>) -> RunRecord {
    serde_json::from_value(serde_json::json!({
        "run_id": key.attempt_id(index),
        "task_id": key.task,
        "platform": key.platform,
        "mode": key.mode,
        "manager": null,
        "coder": {"system": "", "prompt": "", "response": "", "usage": {"input_tokens": 1, "output_tokens": 1}},
        "provider": "test",
        "model": "test",
        "params": {"temperature": 0.0, "max_output_tokens": 1},
        "started_at": at,
        "finished_at": at,
    }))
    .expect("run record shape")
}

fn random_journals() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut cells = 0;
    for round in 0..1000 {
        let bytes = random_journal(&mut rng);
        let contents =
            parse_journal(Path::new("random.jsonl"), &bytes).map_err(|e| e.to_string())?;
        let state = CampaignState::replay(&contents.records)
            .map_err(|(seq, e)| format!("journal {round}: seq {seq}: {e}"))?;
        let results = state.instance_results();
        let reports: Vec<Report> = (1..=5)
            .map(|k| Report::build(&results, k).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        for (k, pair) in reports.windows(2).enumerate() {
            for (a, b) in pair[0].cells.iter().zip(&pair[1].cells) {
                ensure!(
                    a.instances == a.cf + a.bf + a.bc,
                    "journal {round}: conservation broken"
                );
                ensure!(
                    b.bc >= a.bc && b.cf <= a.cf && b.cf + b.bf <= a.cf + a.bf,
                    "journal {round}: k={} -> k={} not monotone",
                    k + 1,
                    k + 2
                );
                cells += 1;
            }
        }
        let groups: BTreeMap<(SkillsMode, PlatformId), ()> = results
            .iter()
            .map(|r| ((r.key.mode, r.key.platform), ()))
            .collect();
        for (mode, platform) in groups.keys() {
            let p1 = pass_at_k(&results, 1, *mode, *platform, None).map_err(|e| e.to_string())?;
            let p5 = pass_at_k(&results, 5, *mode, *platform, None).map_err(|e| e.to_string())?;
            if p1 > p5 {
                return Err(format!("journal {round}: pass@1 {p1} > pass@5 {p5}"));
            }
        }
    }
    Ok(format!(
        "1000 journals, {cells} cell transitions monotone and conserved"
    ))
}

fn pipeline_invariants() -> Check {
    let corpus = corpus();
    let registry = PeripheralRegistry::default();
    let settings = replay_settings();
    let libraries: Vec<_> = [SkillsMode::LlmGenerated, SkillsMode::HumanExpert]
        .into_iter()
        .filter_map(library)
        .collect();
    // Distinctive lines of every skill body; none may leak into a no-skills
    // coder prompt.
    let needles: Vec<String> = libraries
        .iter()
        .flat_map(|l| l.skills().to_vec())
        .flat_map(|s| {
            s.body
                .lines()
                .map(str::trim)
                .map(str::to_string)
                .collect::<Vec<_>>()
        })
        .filter(|l| l.len() >= 24)
        .collect();
    ensure!(!needles.is_empty(), "no skill body lines to check");
    let ids: Vec<String> = corpus.ids().into_iter().map(str::to_string).collect();
    ensure!(
        ids.len() == 9,
        "expected 9 fixture tasks, found {}",
        ids.len()
    );
    let mut runs = 0;
    for platform in PlatformId::ALL {
        for id in &ids {
            let task = corpus
                .get(id, platform)
                .ok_or(format!("{id} missing for {platform}"))?;
            for mode in SkillsMode::ALL {
                let tap = UsageTap::new(replay_provider());
                let pipeline = Pipeline {
                    provider: &tap as &dyn ChatProvider,
                    settings: &settings,
                    registry: &registry,
                };
                let lib = library(mode);
                let run = pipeline
                    .run("acceptance", task, mode, lib.as_ref())
                    .map_err(|e| format!("{id}/{mode}/{platform}: {e}"))?;
                let want_calls = if mode == SkillsMode::None { 1 } else { 2 };
                let seen = tap.take();
                ensure!(
                    seen.len() == want_calls,
                    "{id}/{mode}/{platform}: {} calls",
                    seen.len()
                );
                let observed = seen.into_iter().fold(TokenUsage::default(), |a, b| a + b);
                let rec = &run.record;
                ensure!(
                    rec.total_usage() == observed
                        && rec.total_usage() == rec.manager_usage() + rec.coder.usage,
                    "{id}/{mode}/{platform}: token totals disagree"
                );
                if mode == SkillsMode::None {
                    ensure!(
                        rec.manager.is_none(),
                        "{id}/{platform}: no-skills run has a planner"
                    );
                    let prompt = format!("{}\n{}", rec.coder.system, rec.coder.prompt);
                    if let Some(n) = needles.iter().find(|n| prompt.contains(n.as_str())) {
                        return Err(format!("{id}/{platform}: no-skills prompt contains {n:?}"));
                    }
                }
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} replayed runs: call counts, token sums, prompt isolation hold"
    ))
}

fn task_with(pins: Vec<PinAssignment>) -> TaskSpec {
    TaskSpec {
        id: "probe".into(),
        level: 1,
        title: "Probe".into(),
        description: "probe".into(),
        target: PlatformId::Zephyr,
        pins,
        check: BehaviorCheck {
            mode: CheckMode::Human,
            pattern: None,
            checklist: vec!["works".into()],
            capture_secs: None,
        },
    }
}

/// Pins that drive `id` through `interface`, named the way a task would.
fn pins_for(id: &str, interface: Interface, n: usize) -> Vec<PinAssignment> {
    let alias = format!("{id}{n}");
    match interface {
        Interface::I2c => vec![
            PinAssignment::new(id, "sda", &format!("{alias}@i2c0")),
            PinAssignment::new(id, "scl", &format!("{alias}@i2c0")),
        ],
        Interface::Spi => vec![
            PinAssignment::new(id, "sck", &format!("{alias}@spi2")),
            PinAssignment::new(id, "mosi", &format!("{alias}@spi2")),
            PinAssignment::new(id, "miso", &format!("{alias}@spi2")),
        ],
        Interface::Adc => vec![PinAssignment::new(id, "out", &format!("{alias}@adc.{n}"))],
        Interface::Pwm => vec![PinAssignment::new(id, "pwm", &format!("{alias}@pwm0.{n}"))],
        _ => vec![PinAssignment::new(
            id,
            "io",
            &format!("{alias}@gpio0.{}", n + 2),
        )],
    }
}

fn goldens_and_bus_config() -> Check {
    let n = common::check_goldens(false)?;
    ensure!(n == 27, "expected 27 bundles, got {n}");
    let registry = PeripheralRegistry::default();
    let options: Vec<(String, Interface)> = registry
        .iter()
        .flat_map(|p| {
            p.interfaces
                .iter()
                .map(|i| (p.id.clone(), *i))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut cases = 0;
    for (a, (id_a, if_a)) in options.iter().enumerate() {
        for (id_b, if_b) in options.iter().skip(a) {
            let mut pins = pins_for(id_a, *if_a, 0);
            if id_b != id_a {
                pins.extend(pins_for(id_b, *if_b, 1));
            }
            let task = task_with(pins);
            let used: Vec<Interface> = if id_b == id_a {
                vec![*if_a]
            } else {
                vec![*if_a, *if_b]
            };
            let conf = render_prj_conf(&task, &registry);
            let has = |line: &str| conf.lines().any(|l| l == line);
            ensure!(
                has("CONFIG_I2C=y") == used.contains(&Interface::I2c),
                "{id_a}/{id_b}: CONFIG_I2C mismatch"
            );
            ensure!(
                has("CONFIG_SPI=y") == used.contains(&Interface::Spi),
                "{id_a}/{id_b}: CONFIG_SPI mismatch"
            );
            cases += 1;
        }
    }
    Ok(format!(
        "{n} golden bundles byte-exact; bus Kconfig right in {cases} peripheral pairings"
    ))
}

const RESUME_VERDICTS: &str = r#"[verdicts]
source = "scripted"
default = "pass"

[verdicts.entries."mpu6050:llm-generated:nrf52840+zephyr:2"]
verdict = "fail"
"#;

struct Finished {
    view: BTreeMap<String, skillbench::harness::SettledAttempt>,
    calls: usize,
    journal: Vec<u8>,
}

fn run_mini(root: &Path, journal_bytes: Option<&[u8]>) -> Result<Finished, String> {
    let _ = std::fs::remove_dir_all(root);
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let journal = root.join("mini.jsonl");
    if let Some(bytes) = journal_bytes {
        std::fs::write(&journal, bytes).map_err(|e| e.to_string())?;
    }
    let plan = plan(
        &journal,
        &["mpu6050", "safe-box"],
        &["llm-generated"],
        2,
        RESUME_VERDICTS,
    );
    let counting = Arc::new(CountingProvider::new(replay_provider()));
    let ctx = context(&plan, counting.clone());
    let snapshot = plan.snapshot(&ctx.corpus).map_err(|e| e.to_string())?;
    let store = Arc::new(Store::open(&journal).map_err(|e| e.to_string())?);
    let mut verdicts = verdict_source_for(&plan, &store, &ctx.stop);
    run_campaign(&ctx, &snapshot, &store, verdicts.as_mut()).map_err(|e| e.to_string())?;
    let view = store.read(|s| s.settled_view());
    drop(store);
    Ok(Finished {
        view,
        calls: counting.calls(),
        journal: std::fs::read(&journal).map_err(|e| e.to_string())?,
    })
}

fn generated_count(bytes: &[u8]) -> Result<usize, String> {
    let contents = parse_journal(Path::new("mini.jsonl"), bytes).map_err(|e| e.to_string())?;
    Ok(contents
        .records
        .iter()
        .filter(|r| matches!(r.event, Event::Generated { .. }))
        .count())
}

fn resumability() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path().join("campaign");
    let reference = run_mini(&root, None)?;
    ensure!(
        reference
            .view
            .values()
            .all(|a| a.state == AttemptState::Complete),
        "reference run did not finish"
    );
    ensure!(reference.view.len() == 4, "expected 4 attempts");
    let len = reference.journal.len();
    let boundaries: Vec<usize> = reference
        .journal
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == b'\n')
        .map(|(i, _)| i + 1)
        .collect();
    let mut rng = StdRng::seed_from_u64(20);
    let mut offsets: Vec<usize> = (0..10).map(|_| rng.gen_range(0..len)).collect();
    offsets.extend((0..10).map(|_| boundaries[rng.gen_range(0..boundaries.len())]));
    for offset in &offsets {
        let cut = &reference.journal[..*offset];
        // Whole records that survived the cut carry these model calls.
        let kept = match cut.iter().rposition(|b| *b == b'\n') {
            Some(end) => generated_count(&cut[..=end])?,
            None => 0,
        };
        let resumed = run_mini(&root, Some(cut))?;
        ensure!(
            resumed.view == reference.view,
            "offset {offset}: final state differs"
        );
        ensure!(
            resumed.calls + 2 * kept == reference.calls,
            "offset {offset}: {} calls after resume with {kept} generations kept, reference {}",
            resumed.calls,
            reference.calls
        );
        ensure!(
            generated_count(&resumed.journal)? == 4,
            "offset {offset}: an attempt was generated twice"
        );
    }
    Ok(format!(
        "{} kill offsets resume to the uninterrupted state, no repeated model calls",
        offsets.len()
    ))
}

fn dry_run() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let journal = tmp.path().join("e2e.jsonl");
    let mut plan = skillbench::harness::CampaignPlan::load(&fixtures().join("plans/dry-run.toml"))
        .map_err(|e| e.to_string())?;
    plan.workspace = journal.with_extension("");
    plan.journal = journal.clone();
    let ctx =
        skillbench::harness::runner::CampaignContext::load(&plan).map_err(|e| e.to_string())?;
    let snapshot = plan.snapshot(&ctx.corpus).map_err(|e| e.to_string())?;
    ensure!(
        snapshot.instances.len() == 27 && snapshot.attempts == 2,
        "unexpected grid"
    );
    let store = Arc::new(Store::open(&journal).map_err(|e| e.to_string())?);
    let mut verdicts = verdict_source_for(&plan, &store, &ctx.stop);
    run_campaign(&ctx, &snapshot, &store, verdicts.as_mut()).map_err(|e| e.to_string())?;
    let (classified, total) = store.read(|s| {
        (
            s.attempts
                .values()
                .filter(|a| a.state == AttemptState::Complete && a.outcome.is_some())
                .count(),
            s.attempts.len(),
        )
    });
    ensure!(
        total == 54 && classified == 54,
        "{classified}/{total} attempts classified"
    );
    let results = store.read(|s| s.instance_results());
    let md = Report::build(&results, 2)
        .map_err(|e| e.to_string())?
        .to_markdown();
    ensure!(
        md.lines().count() == 5,
        "report has {} lines",
        md.lines().count()
    );
    Ok(format!(
        "{classified}/{total} attempts classified, report emitted"
    ))
}

fn secs(n: u64) -> Duration {
    Duration::from_secs(n)
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("published tables reproduce", published_tables, secs(5)),
        ("no-skills pass@5 totals", no_skills_pass_at_5, secs(5)),
        ("best-of-k ordering oracle", ordering_oracle, secs(1)),
        ("random journal invariants", random_journals, secs(10)),
        ("pipeline invariants", pipeline_invariants, secs(30)),
        (
            "golden bundles and bus config",
            goldens_and_bus_config,
            secs(5),
        ),
        ("kill and resume", resumability, secs(60)),
        ("end-to-end dry run", dry_run, secs(60)),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > budget => Err(format!("over budget: {elapsed:?}")),
            other => other,
        };
        let timing = format!(
            "[{:.2}s, budget {}s]",
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        match result {
            Ok(detail) => println!("PASS  {name:<32} {detail} {timing}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<32} {why} {timing}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
