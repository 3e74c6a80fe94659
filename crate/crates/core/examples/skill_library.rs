//! Loads the bundled skill libraries, validates them against the peripheral
//! registry and shows what the planner sees (the header index) versus what a
//! coder prompt would carry if every skill body were included.
//!
//! ```text
//! cargo run --example skill_library [skills-dir]
//! ```

use std::path::PathBuf;

use skillbench::peripheral::PeripheralRegistry;
use skillbench::skills::{estimate_tokens, render_header_index, validate_library, SkillLibrary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/skills");
    let dirs: Vec<PathBuf> = match std::env::args().nth(1) {
        Some(dir) => vec![PathBuf::from(dir)],
        None => vec![
            fixtures.join("human-expert"),
            fixtures.join("llm-generated"),
        ],
    };
    let registry = PeripheralRegistry::default();
    for dir in dirs {
        let (library, skipped) = SkillLibrary::load(&dir)?;
        println!("== {} ({} skills)", dir.display(), library.len());
        for d in &skipped {
            println!("  skipped: {d}");
        }
        for d in validate_library(&library, &registry) {
            println!("  problem: {d}");
        }
        let index = render_header_index(&library.headers());
        let bodies: usize = library
            .skills()
            .iter()
            .map(|s| estimate_tokens(&s.to_document()))
            .sum();
        print!("{index}");
        println!(
            "  index ~{} tokens, all bodies ~{bodies} tokens",
            estimate_tokens(&index)
        );
        if let Some(first) = library.skills().first() {
            let loaded = library.load_bodies(&[first.name()])?;
            println!(
                "  first body ({}) has {} lines",
                first.name(),
                loaded[0].to_document().lines().count()
            );
        }
        println!();
    }
    Ok(())
}
