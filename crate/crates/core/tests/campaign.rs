//! Campaign runner, journal and store behavior against the fixture corpus,
//! replayed model replies and the stub toolchain.

mod common;

use std::path::Path;
use std::sync::Arc;

use skillbench::harness::journal::{parse_journal, read_journal};
use skillbench::harness::runner::{verdict_source_for, CampaignContext};
use skillbench::harness::store::StoreError;
use skillbench::harness::{
    run_campaign, AttemptState, CampaignPlan, Event, JournalError, Phase, PlanError, RunnerError,
    ScriptedVerdicts, Store, VerdictOrigin, VerdictValue,
};
use skillbench::metrics::Outcome;
use skillbench::platform::PlatformId;
use skillbench::provider::{ChatProvider, CountingProvider, ReplayProvider};
use skillbench::toolchain::{BuildStatus, ToolchainProfile, ToolchainProfiles};

fn counting() -> Arc<CountingProvider<ReplayProvider>> {
    Arc::new(CountingProvider::new(common::replay_provider()))
}

fn run(plan: &CampaignPlan, ctx: &CampaignContext) -> Result<Arc<Store>, RunnerError> {
    let snapshot = plan.snapshot(&ctx.corpus)?;
    let store = Arc::new(Store::open(&plan.journal)?);
    let mut verdicts = verdict_source_for(plan, &store, &ctx.stop);
    run_campaign(ctx, &snapshot, &store, verdicts.as_mut())?;
    Ok(store)
}

fn events_for(journal: &Path, attempt: &str) -> Vec<&'static str> {
    read_journal(journal)
        .unwrap()
        .records
        .iter()
        .filter(|r| r.event.attempt() == Some(attempt))
        .map(|r| match r.event {
            Event::Started { .. } => "started",
            Event::Generated { .. } => "generated",
            Event::Built { .. } => "built",
            Event::AwaitingVerdict { .. } => "awaiting-verdict",
            Event::Completed { .. } => "completed",
            Event::Incomplete { .. } => "incomplete",
        })
        .collect()
}

#[test]
fn outcomes_follow_build_flash_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let extra = r#"[verdicts]
source = "scripted"
default = "pass"

[verdicts.entries."sos:human-expert:nrf52840+zephyr:1"]
verdict = "fail"
notes = "letters run together"
"#;
    let plan = common::plan(
        &dir.path().join("j.jsonl"),
        &["sos", "button-debounce", "mpu6050"],
        &["none", "human-expert"],
        1,
        extra,
    );
    let ctx = common::context(&plan, counting());
    let store = run(&plan, &ctx).unwrap();
    let state = store.snapshot();
    assert!(state.is_finished());
    let get = |id: &str| state.get(id).unwrap().clone();

    // No-skills Zephyr level-2 replies carry a compile failure marker.
    let cf = get("mpu6050:none:nrf52840+zephyr:1");
    assert_eq!(cf.outcome, Some(Outcome::CF));
    assert_eq!(
        cf.build.as_ref().unwrap().status,
        BuildStatus::CompileFailure
    );
    assert!(cf.build.unwrap().log.contains("stub compile failure"));
    assert!(cf.verdict.is_none());

    let bf = get("sos:human-expert:nrf52840+zephyr:1");
    assert_eq!(bf.outcome, Some(Outcome::BF));
    assert_eq!(bf.verdict.as_ref().unwrap().notes, "letters run together");

    // Serial-pattern tasks are judged from the captured transcript.
    let serial = get("button-debounce:none:nrf52840+zephyr:1");
    assert_eq!(serial.outcome, Some(Outcome::BC));
    assert_eq!(serial.verdict.unwrap().source, VerdictOrigin::SerialMatcher);
    assert!(serial
        .transcript
        .unwrap()
        .text()
        .contains("Button Pressed!"));

    // Attempt directories hold the assembled project.
    let attempt_dir = plan
        .workspace
        .join("sos.human-expert.nrf52840-zephyr")
        .join("1");
    assert!(attempt_dir.join("app.overlay").is_file());
    assert!(attempt_dir.join("src/main.c").is_file());
}

#[test]
fn reply_without_code_is_a_compile_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = common::plan(
        &dir.path().join("j.jsonl"),
        &["lcd-auto-brightness"],
        &["none"],
        1,
        "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n",
    );
    plan.platforms = vec![PlatformId::EspIdf];
    let ctx = common::context(&plan, counting());
    let store = run(&plan, &ctx).unwrap();
    let rec = store
        .read(|s| s.get("lcd-auto-brightness:none:esp32s3+espidf:1").cloned())
        .unwrap();
    assert_eq!(rec.outcome, Some(Outcome::CF));
    assert!(rec.code.is_none());
    let build = rec.build.unwrap();
    assert_eq!(build.log, "no source code found in the model reply\n");
    assert_eq!(build.exit_code, None);
    assert!(rec.flash.is_none());
}

#[test]
fn resume_after_verdict_wait_asks_only_for_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let journal = common::awaiting_journal(dir.path(), "sos");
    let id = "sos:none:nrf52840+zephyr:1";
    let generated_before = read_journal(&journal)
        .unwrap()
        .records
        .iter()
        .filter(|r| matches!(r.event, Event::Generated { .. }))
        .count();

    let plan = common::plan(
        &journal,
        &["sos"],
        &["none"],
        2,
        "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n",
    );
    let provider = counting();
    let ctx = common::context(&plan, provider.clone());
    let store = run(&plan, &ctx).unwrap();
    assert!(store.read(|s| s.is_finished()));
    assert_eq!(provider.calls(), 2 - generated_before);
    assert_eq!(
        events_for(&journal, id),
        ["generated", "built", "awaiting-verdict", "completed"]
    );
}

#[test]
fn infrastructure_failures_are_retried_without_regenerating() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let plan = common::plan(
        &journal,
        &["sos"],
        &["none"],
        1,
        "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n",
    );
    let id = "sos:none:nrf52840+zephyr:1";

    let mut broken = ToolchainProfile::stub(PlatformId::Zephyr, Path::new("/dev/null"));
    broken.compile = vec!["/nonexistent/compiler".into()];
    let mut ctx = common::context(&plan, counting());
    ctx.toolchains = ToolchainProfiles::new([broken]);
    let store = run(&plan, &ctx).unwrap();
    let rec = store.read(|s| s.get(id).cloned()).unwrap();
    assert_eq!(rec.state, AttemptState::Incomplete);
    assert_eq!(rec.incomplete.as_ref().unwrap().0, Phase::Build);
    assert!(store.read(|s| !s.is_finished()));
    drop(store);

    let provider = counting();
    let ctx = common::context(&plan, provider.clone());
    let store = run(&plan, &ctx).unwrap();
    assert_eq!(provider.calls(), 0, "the recorded reply is reused");
    assert_eq!(
        store.read(|s| s.get(id).unwrap().outcome),
        Some(Outcome::BC)
    );
    assert_eq!(
        events_for(&journal, id),
        [
            "generated",
            "incomplete",
            "built",
            "awaiting-verdict",
            "completed"
        ]
    );
}

#[test]
fn changed_plan_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let verdicts = "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n";
    let plan = common::plan(&journal, &["sos"], &["none"], 1, verdicts);
    let ctx = common::context(&plan, counting());
    drop(run(&plan, &ctx).unwrap());

    let bigger = common::plan(&journal, &["sos"], &["none"], 2, verdicts);
    let ctx = common::context(&bigger, counting());
    match run(&bigger, &ctx) {
        Err(RunnerError::Plan(PlanError::PlanChanged(_))) => {}
        other => panic!("expected a plan change error, got {:?}", other.err()),
    }
}

#[test]
fn finished_campaign_rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let plan = common::plan(
        &journal,
        &["sos"],
        &["human-expert"],
        1,
        "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n",
    );
    let ctx = common::context(&plan, counting());
    drop(run(&plan, &ctx).unwrap());
    let before = std::fs::read(&journal).unwrap();
    let provider = counting();
    let ctx = common::context(&plan, provider.clone());
    drop(run(&plan, &ctx).unwrap());
    assert_eq!(provider.calls(), 0);
    assert_eq!(std::fs::read(&journal).unwrap(), before);
}

#[test]
fn missing_scripted_verdict_leaves_attempt_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("j.jsonl");
    let plan = common::plan(&journal, &["sos"], &["none"], 1, "");
    let ctx = common::context(&plan, counting());
    let snapshot = plan.snapshot(&ctx.corpus).unwrap();
    let store = Arc::new(Store::open(&journal).unwrap());
    let mut verdicts = ScriptedVerdicts::new(Default::default(), None);
    run_campaign(&ctx, &snapshot, &store, &mut verdicts).unwrap();
    let rec = store
        .read(|s| s.get("sos:none:nrf52840+zephyr:1").cloned())
        .unwrap();
    assert_eq!(rec.state, AttemptState::Incomplete);
    assert_eq!(rec.incomplete.unwrap().0, Phase::Verdict);

    // A later verdict completes it without another build.
    let mut verdicts = ScriptedVerdicts::always(VerdictValue::Pass);
    run_campaign(&ctx, &snapshot, &store, &mut verdicts).unwrap();
    assert_eq!(
        store.read(|s| s.get("sos:none:nrf52840+zephyr:1").unwrap().outcome),
        Some(Outcome::BC)
    );
}

#[test]
fn journal_damage_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let journal = common::awaiting_journal(dir.path(), "sos");
    let bytes = std::fs::read(&journal).unwrap();
    let lines: Vec<&[u8]> = bytes.split_inclusive(|b| *b == b'\n').collect();
    assert!(lines.len() >= 4);

    // A torn final line is dropped.
    let torn = [&bytes[..], b"{\"seq\":99,\"ts\""].concat();
    let parsed = parse_journal(&journal, &torn).unwrap();
    assert_eq!(parsed.records.len(), lines.len());

    // A missing record in the middle is a sequence gap.
    let gap: Vec<u8> = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 1)
        .flat_map(|(_, l)| l.to_vec())
        .collect();
    assert!(matches!(
        parse_journal(&journal, &gap),
        Err(JournalError::Corrupt { .. })
    ));

    // Garbage in a complete line is corruption.
    let mut garbled = bytes.clone();
    garbled[lines[0].len() + 2] = b'#';
    assert!(matches!(
        parse_journal(&journal, &garbled),
        Err(JournalError::Corrupt { .. })
    ));
}

#[test]
fn one_writer_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let journal = common::awaiting_journal(dir.path(), "sos");
    let writer = Store::open(&journal).unwrap();
    assert!(matches!(
        Store::open(&journal),
        Err(StoreError::Journal(JournalError::Locked(_)))
    ));
    let reader = Store::open_read_only(&journal).unwrap();
    assert!(!reader.is_writable());
    assert_eq!(reader.read(|s| s.last_seq), writer.read(|s| s.last_seq));
    drop(writer);
    assert!(Store::open(&journal).is_ok());
}

#[test]
fn provider_is_shared_across_workers() {
    // Two workers generating in parallel still make exactly one call per
    // node per attempt.
    let dir = tempfile::tempdir().unwrap();
    let plan = common::plan(
        &dir.path().join("j.jsonl"),
        &[],
        &["llm-generated"],
        2,
        "[verdicts]\nsource = \"scripted\"\ndefault = \"pass\"\n",
    );
    let provider = counting();
    let ctx = common::context(&plan, provider.clone() as Arc<dyn ChatProvider>);
    let store = run(&plan, &ctx).unwrap();
    assert!(store.read(|s| s.is_finished()));
    assert_eq!(provider.calls(), 9 * 2 * 2);
}
