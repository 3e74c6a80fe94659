//! Aggregates a campaign journal into the CF/BF/BC breakdown tables and
//! pass@k rates. Defaults to the bundled five-attempt journal over the full
//! published grid.
//!
//! ```text
//! cargo run --example metrics_report [journal.jsonl]
//! ```

use std::path::PathBuf;

use skillbench::harness::Store;
use skillbench::metrics::{pass_at_k, Report};
use skillbench::pipeline::SkillsMode;
use skillbench::platform::PlatformId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let journal = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/paper.jsonl"));
    let store = Store::open_read_only(&journal)?;
    let (results, attempts) = store.read(|s| {
        (
            s.instance_results(),
            s.plan.as_ref().map_or(0, |p| p.attempts),
        )
    });

    for k in [1, attempts as usize] {
        println!("pass@{k} (cells are CF/BF/BC)");
        print!("{}", Report::build(&results, k)?.to_markdown());
        println!();
    }
    println!("pass@k over all levels");
    for mode in SkillsMode::ALL {
        for platform in PlatformId::ALL {
            let first = pass_at_k(&results, 1, mode, platform, None)?;
            let last = pass_at_k(&results, attempts as usize, mode, platform, None)?;
            println!(
                "{:<14} {:<20} @1 {first} ({:.1}%)  @{attempts} {last} ({:.1}%)",
                mode.to_string(),
                platform.to_string(),
                first.as_f64() * 100.0,
                last.as_f64() * 100.0
            );
        }
    }
    Ok(())
}
