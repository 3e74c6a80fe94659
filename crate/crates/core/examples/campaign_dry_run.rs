//! Runs the fixture campaign (9 tasks x 3 skills modes x Zephyr x 2
//! attempts) with replayed model replies, the stub toolchain and scripted
//! verdicts, then prints the outcome tables. The journal goes to a temporary
//! directory unless a path is given.
//!
//! ```text
//! cargo run --example campaign_dry_run [journal.jsonl]
//! ```

use std::path::PathBuf;
use std::sync::Arc;

use skillbench::harness::runner::{verdict_source_for, CampaignContext};
use skillbench::harness::{run_campaign, CampaignPlan, Store};
use skillbench::metrics::Report;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let tmp = tempfile::tempdir()?;
    let journal = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| tmp.path().join("dry-run.jsonl"));

    let mut plan = CampaignPlan::load(&fixtures.join("plans/dry-run.toml"))?;
    plan.workspace = journal.with_extension("");
    plan.journal = journal;
    let ctx = CampaignContext::load(&plan)?;
    let snapshot = plan.snapshot(&ctx.corpus)?;
    let store = Arc::new(Store::open(&plan.journal)?);
    let mut verdicts = verdict_source_for(&plan, &store, &ctx.stop);
    let summary = run_campaign(&ctx, &snapshot, &store, verdicts.as_mut())?;
    println!(
        "{} attempts generated this run, journal {}",
        summary.generated,
        plan.journal.display()
    );

    let results = store.read(|s| s.instance_results());
    for k in 1..=snapshot.attempts as usize {
        println!("\npass@{k}");
        print!("{}", Report::build(&results, k)?.to_markdown());
    }
    Ok(())
}
