//! Runs the two-node pipeline (skill planner, then coder) for one task in all
//! three skills modes against the recorded cassettes, printing the selected
//! skills, token usage per node and the extracted program.
//!
//! ```text
//! cargo run --example pipeline_replay [task] [platform]
//! ```

use std::path::PathBuf;

use skillbench::peripheral::PeripheralRegistry;
use skillbench::pipeline::{Pipeline, SkillsMode};
use skillbench::platform::PlatformId;
use skillbench::provider::ProviderConfig;
use skillbench::skills::SkillLibrary;
use skillbench::tasks::load_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut args = std::env::args().skip(1);
    let task_id = args.next().unwrap_or_else(|| "mpu6050".into());
    let platform: PlatformId = args
        .next()
        .as_deref()
        .unwrap_or("nrf52840+zephyr")
        .parse()?;

    let registry = PeripheralRegistry::default();
    let corpus = load_corpus(&fixtures.join("tasks"), &registry)?;
    let task = corpus
        .get(&task_id, platform)
        .ok_or_else(|| format!("no task {task_id} for {platform}"))?;
    let config = ProviderConfig::load(&fixtures.join("provider/replay.toml"))?;
    let provider = config.build()?;
    let settings = config.settings();
    let pipeline = Pipeline {
        provider: provider.as_ref(),
        settings: &settings,
        registry: &registry,
    };

    for mode in SkillsMode::ALL {
        let library = match mode {
            SkillsMode::None => None,
            SkillsMode::LlmGenerated => Some(SkillLibrary::load_strict(
                &fixtures.join("skills/llm-generated"),
            )?),
            SkillsMode::HumanExpert => Some(SkillLibrary::load_strict(
                &fixtures.join("skills/human-expert"),
            )?),
        };
        let run = pipeline.run("example", task, mode, library.as_ref())?;
        println!("== {mode}");
        if let Some(m) = &run.record.manager {
            println!(
                "planner picked [{}] ({} in / {} out)",
                m.selected.join(", "),
                m.usage.input_tokens,
                m.usage.output_tokens
            );
        }
        let c = run.record.coder.usage;
        println!("coder {} in / {} out", c.input_tokens, c.output_tokens);
        match &run.assembly {
            Ok((bundle, _)) => println!("{}", bundle.entry_source()),
            Err(e) => println!("no project: {e}\n"),
        }
    }
    Ok(())
}
