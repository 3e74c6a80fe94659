//! Turns a model reply into a buildable project for each platform: extracts
//! the code block, lays out the platform's project files and, for Zephyr,
//! derives the devicetree overlay and Kconfig from the task's pin table.
//!
//! ```text
//! cargo run --example project_assembler [task]
//! ```

use std::path::PathBuf;

use skillbench::assembler::assemble;
use skillbench::peripheral::PeripheralRegistry;
use skillbench::platform::PlatformId;
use skillbench::tasks::load_corpus;

const REPLY: &str = "Here you go:\n\n```c\n// generated program\nint main(void)\n{\n    return 0;\n}\n```\n\nFlash it and watch the console.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let task_id = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "bme280-spi".into());
    let registry = PeripheralRegistry::default();
    let corpus = load_corpus(&fixtures.join("tasks"), &registry)?;
    for platform in PlatformId::ALL {
        let Some(task) = corpus.get(&task_id, platform) else {
            continue;
        };
        let (bundle, extracted) = assemble(task, REPLY, &registry)?;
        println!(
            "== {platform} (entry {}, {:?})",
            bundle.entry, extracted.note
        );
        for (path, contents) in &bundle.files {
            if path == &bundle.entry {
                println!("-- {path} ({} bytes)", contents.len());
            } else {
                println!("-- {path}\n{contents}");
            }
        }
    }
    Ok(())
}
