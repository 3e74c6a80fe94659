//! Records the replay cassettes used by the hermetic tests and the fixture
//! campaign plans.
//!
//! The "model" here is a deterministic stand-in: the planner picks skills
//! whose platform and peripheral tags fit the task, and the coder writes a
//! small program for the requested platform. A few replies are deliberately
//! broken (stub compile-failure markers, or prose with no code) so campaigns
//! over the fixtures produce a mix of outcomes.
//!
//! ```text
//! cargo run --example record_cassettes [out-dir]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use skillbench::peripheral::PeripheralRegistry;
use skillbench::pipeline::{Pipeline, SkillsMode, PLANNER_SYSTEM_PROMPT};
use skillbench::platform::PlatformId;
use skillbench::provider::{
    request_hash, ChatProvider, ProviderConfig, ProviderError, ProviderRequest, RecordingProvider,
    ScriptedProvider,
};
use skillbench::skills::SkillLibrary;
use skillbench::tasks::{load_corpus, CheckMode, Corpus, TaskSpec};

const MODEL: &str = "fixture-model";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// How the stand-in coder should misbehave for one (task, mode).
enum Flaw {
    None,
    CompileFailure,
    NoCode,
}

fn flaw(task: &TaskSpec, mode: SkillsMode) -> Flaw {
    use PlatformId::*;
    match (mode, task.target, task.level, task.id.as_str()) {
        (SkillsMode::None, Zephyr, 2 | 3, _) => Flaw::CompileFailure,
        (SkillsMode::None, EspIdf, 3, "lcd-auto-brightness") => Flaw::NoCode,
        (SkillsMode::None, EspIdf, 3, "safe-box") => Flaw::CompileFailure,
        (SkillsMode::LlmGenerated, Zephyr, 3, _) => Flaw::CompileFailure,
        (SkillsMode::LlmGenerated, EspIdf, _, "bme280-spi") => Flaw::CompileFailure,
        _ => Flaw::None,
    }
}

fn ident(signal: &str) -> String {
    signal.replace('-', "_").to_uppercase()
}

fn is_input(registry: &PeripheralRegistry, task: &TaskSpec, peripheral: &str) -> bool {
    use skillbench::peripheral::Interface::*;
    matches!(
        task.peripheral_interface(registry, peripheral),
        Some(GpioIn | Adc)
    )
}

fn serial_lines(task: &TaskSpec) -> Vec<&'static str> {
    match (task.check.mode, task.id.as_str()) {
        (CheckMode::SerialPattern, "button-debounce") => vec!["Button Pressed!"],
        (CheckMode::SerialPattern, "tmp36") => vec!["Temperature: 23.4 C", "Temperature: 23.5 C"],
        _ => Vec::new(),
    }
}

fn arduino(task: &TaskSpec, registry: &PeripheralRegistry) -> String {
    let mut out = format!("// {}\n", task.title);
    for pin in &task.pins {
        out.push_str(&format!(
            "const int PIN_{} = {};\n",
            ident(&pin.signal),
            pin.descriptor
        ));
    }
    out.push_str("\nvoid setup() {\n  Serial.begin(115200);\n");
    for pin in &task.pins {
        let mode = if is_input(registry, task, &pin.peripheral) {
            "INPUT"
        } else {
            "OUTPUT"
        };
        out.push_str(&format!("  pinMode(PIN_{}, {mode});\n", ident(&pin.signal)));
    }
    out.push_str("}\n\nvoid loop() {\n");
    for line in serial_lines(task) {
        out.push_str(&format!(
            "  Serial.println(\"{line}\"); // STUB:SERIAL {line}\n"
        ));
    }
    out.push_str("  delay(500);\n}\n");
    out
}

fn esp_idf(task: &TaskSpec, registry: &PeripheralRegistry) -> String {
    let mut out = format!(
        "// {}\n#include <stdio.h>\n#include \"freertos/FreeRTOS.h\"\n#include \"freertos/task.h\"\n#include \"driver/gpio.h\"\n\n",
        task.title
    );
    for pin in &task.pins {
        out.push_str(&format!(
            "#define PIN_{} {}\n",
            ident(&pin.signal),
            pin.descriptor
        ));
    }
    out.push_str("\nvoid app_main(void)\n{\n");
    for pin in &task.pins {
        let dir = if is_input(registry, task, &pin.peripheral) {
            "GPIO_MODE_INPUT"
        } else {
            "GPIO_MODE_OUTPUT"
        };
        out.push_str(&format!(
            "    gpio_reset_pin(PIN_{0});\n    gpio_set_direction(PIN_{0}, {dir});\n",
            ident(&pin.signal)
        ));
    }
    out.push_str("    while (1) {\n");
    for line in serial_lines(task) {
        out.push_str(&format!(
            "        printf(\"{line}\\n\"); // STUB:SERIAL {line}\n"
        ));
    }
    out.push_str("        vTaskDelay(pdMS_TO_TICKS(500));\n    }\n}\n");
    out
}

fn zephyr(task: &TaskSpec) -> String {
    let mut out = format!(
        "// {}\n#include <zephyr/kernel.h>\n#include <zephyr/drivers/gpio.h>\n\n",
        task.title
    );
    let mut seen = BTreeSet::new();
    for pin in &task.pins {
        let alias = pin.descriptor.split('@').next().unwrap_or(&pin.descriptor);
        if !seen.insert(alias.to_string()) {
            continue;
        }
        if pin.descriptor.contains("@gpio") || !pin.descriptor.contains('@') {
            out.push_str(&format!(
                "static const struct gpio_dt_spec {} = GPIO_DT_SPEC_GET(DT_ALIAS({}), gpios);\n",
                alias.replace('-', "_"),
                alias.replace('-', "_")
            ));
        }
    }
    out.push_str("\nint main(void)\n{\n");
    for line in serial_lines(task) {
        out.push_str(&format!(
            "    printk(\"{line}\\n\"); // STUB:SERIAL {line}\n"
        ));
    }
    out.push_str("    while (1) {\n        k_msleep(500);\n    }\n    return 0;\n}\n");
    out
}

fn coder_reply(
    corpus: &Corpus,
    registry: &PeripheralRegistry,
    mode: SkillsMode,
    request: &ProviderRequest,
) -> Result<String, ProviderError> {
    let prompt = &request.messages[0];
    let task = corpus
        .tasks()
        .iter()
        .find(|t| {
            prompt.starts_with(&format!("Task: {} (level", t.title))
                && prompt.contains(&format!("({})", t.target))
        })
        .ok_or_else(|| ProviderError::InvalidRequest("unknown task".into()))?;
    let (lang, mut code) = match task.target {
        PlatformId::Arduino => ("cpp", arduino(task, registry)),
        PlatformId::EspIdf => ("c", esp_idf(task, registry)),
        PlatformId::Zephyr => ("c", zephyr(task)),
    };
    match flaw(task, mode) {
        Flaw::None => {}
        Flaw::CompileFailure => code.insert_str(0, "// STUB:COMPILE_FAIL\n"),
        Flaw::NoCode => {
            return Ok(
                "The requested behaviour needs more information about the display \
                       wiring before a program can be written."
                    .to_string(),
            )
        }
    }
    Ok(match mode {
        SkillsMode::LlmGenerated => format!(
            "Here is the complete program:\n\n```{lang}\n{code}```\n\nIt follows the pin assignments from the task."
        ),
        _ => format!("```{lang}\n{code}```\n"),
    })
}

fn manager_reply(registry: &PeripheralRegistry, request: &ProviderRequest) -> String {
    let prompt = &request.messages[0];
    let (index, task) = prompt.split_once("\nTask:\n").unwrap_or((prompt, ""));
    let platform = PlatformId::ALL
        .into_iter()
        .find(|p| task.contains(&format!("({})", p.as_str())));
    let mut picks = Vec::new();
    for line in index.lines().skip(1) {
        let Some((name, rest)) = line.split_once(" — ") else {
            continue;
        };
        let tags: Vec<&str> = rest.rsplitn(3, " [").take(2).collect();
        let parse = |s: &str| -> Vec<String> {
            s.trim_end_matches(']')
                .split(", ")
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect()
        };
        let peripherals = parse(tags[0]);
        let platforms = parse(tags[1]);
        let platform_ok = platforms.is_empty()
            || platform.is_some_and(|p| platforms.iter().any(|x| x == p.as_str()));
        let peripheral_ok = peripherals.is_empty()
            || peripherals.iter().any(|id| {
                registry
                    .get(id)
                    .is_some_and(|p| task.contains(&format!("- {}", p.name)))
            });
        if platform_ok && peripheral_ok {
            picks.push(name.to_string());
        }
    }
    format!("I would use:\n{}\n", picks.join("\n"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures().join("cassettes"));
    if out.is_dir() {
        for entry in std::fs::read_dir(&out)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                std::fs::remove_file(path)?;
            }
        }
    }
    let registry = PeripheralRegistry::default();
    let corpus = Arc::new(load_corpus(&fixtures().join("tasks"), &registry)?);
    let settings = ProviderConfig::replay(MODEL, &out).settings();

    // Two modes producing the same request must agree on the reply, or one
    // cassette would silently overwrite the other.
    let replies: Arc<Mutex<BTreeMap<String, String>>> = Arc::default();
    let mut recorded = 0;
    for mode in SkillsMode::ALL {
        let library = match mode {
            SkillsMode::None => None,
            SkillsMode::LlmGenerated => Some(SkillLibrary::load_strict(
                &fixtures().join("skills/llm-generated"),
            )?),
            SkillsMode::HumanExpert => Some(SkillLibrary::load_strict(
                &fixtures().join("skills/human-expert"),
            )?),
        };
        let corpus_for_model = corpus.clone();
        let replies = replies.clone();
        let model = ScriptedProvider::new(MODEL, move |request: &ProviderRequest| {
            let registry = PeripheralRegistry::default();
            let text = if request.system == PLANNER_SYSTEM_PROMPT {
                manager_reply(&registry, request)
            } else {
                coder_reply(&corpus_for_model, &registry, mode, request)?
            };
            let mut replies = replies.lock().expect("reply map");
            match replies.insert(request_hash(request), text.clone()) {
                Some(previous) if previous != text => Err(ProviderError::InvalidRequest(
                    "two different replies for one request".into(),
                )),
                _ => Ok(text),
            }
        });
        let provider = RecordingProvider::new(model, &out);
        let pipeline = Pipeline {
            provider: &provider as &dyn ChatProvider,
            settings: &settings,
            registry: &registry,
        };
        for task in corpus.tasks() {
            let run = pipeline.run("record", task, mode, library.as_ref())?;
            let selected = run
                .record
                .manager
                .as_ref()
                .map(|m| m.selected.join(", "))
                .unwrap_or_default();
            let outcome = match &run.assembly {
                Ok(_) => "assembled".to_string(),
                Err(e) => e.to_string(),
            };
            println!(
                "{:<24} {:<20} {:<14} {outcome} [{selected}]",
                task.id, task.target, mode
            );
            recorded += 1;
        }
    }
    println!("recorded {recorded} runs into {}", out.display());
    Ok(())
}
