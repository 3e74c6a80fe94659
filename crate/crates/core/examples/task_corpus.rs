//! Loads the fixture task corpus, checks its shape and prints the coder-facing
//! prompt for one task on every platform.
//!
//! ```text
//! cargo run --example task_corpus [corpus-dir] [task-id]
//! ```

use std::path::PathBuf;

use skillbench::peripheral::PeripheralRegistry;
use skillbench::platform::PlatformId;
use skillbench::tasks::{
    full_benchmark_shape, load_corpus, render_task_prompt_with, validate_corpus_shape,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tasks"));
    let task_id = args.next().unwrap_or_else(|| "sos".to_string());

    let registry = PeripheralRegistry::default();
    let corpus = load_corpus(&dir, &registry)?;
    println!(
        "{} task variants, {} distinct tasks",
        corpus.tasks().len(),
        corpus.ids().len()
    );
    for (level, count) in corpus.level_counts() {
        println!("  level {level}: {count} tasks");
    }
    for diag in validate_corpus_shape(&corpus, &full_benchmark_shape()) {
        println!("  against the full benchmark: {diag}");
    }

    for platform in PlatformId::ALL {
        let Some(task) = corpus.get(&task_id, platform) else {
            println!("\n{task_id} has no {platform} variant");
            continue;
        };
        let prompt = render_task_prompt_with(task, &platform.profile(), &registry)?;
        println!("\n=== {task_id} on {platform} ===\n{prompt}");
    }
    Ok(())
}
