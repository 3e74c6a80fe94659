//! Compiles, flashes and captures serial output for a bundle through the stub
//! toolchain, which mimics a real one using markers in the source
//! (`STUB:COMPILE_FAIL`, `STUB:FLASH_FAIL`, `STUB:SERIAL <line>`).
//!
//! ```text
//! cargo run --example toolchain_stub
//! ```

use std::path::PathBuf;
use std::time::Duration;

use skillbench::assembler::assemble_source;
use skillbench::peripheral::PeripheralRegistry;
use skillbench::platform::PlatformId;
use skillbench::tasks::load_corpus;
use skillbench::toolchain::{capture_serial, compile, flash, BuildStatus, ToolchainProfiles};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let registry = PeripheralRegistry::default();
    let corpus = load_corpus(&fixtures.join("tasks"), &registry)?;
    let profiles = ToolchainProfiles::load(&fixtures.join("toolchain/stub.toml"))?;
    let task = corpus
        .get("button-debounce", PlatformId::EspIdf)
        .ok_or("missing task")?;
    let profile = profiles.get(task.target)?;

    let sources = [
        (
            "clean",
            "void app_main(void) {} // STUB:SERIAL Button Pressed!\n",
        ),
        ("broken", "// STUB:COMPILE_FAIL\nvoid app_main(void) {}\n"),
    ];
    let workspace = tempfile::tempdir()?;
    for (name, code) in sources {
        let bundle = assemble_source(task, code, &registry)?;
        let dir = workspace.path().join(name);
        let build = compile(&bundle, profile, &dir)?;
        println!(
            "== {name}: build {:?} (exit {:?})",
            build.status, build.exit_code
        );
        print!("{}", build.log);
        if build.status != BuildStatus::Ok {
            continue;
        }
        let flashed = flash(&bundle, profile, &dir)?;
        println!("flash {:?}", flashed.status);
        let transcript = capture_serial(profile, &bundle, &dir, Duration::from_secs(5))?;
        print!("serial:\n{}", transcript.text());
    }
    Ok(())
}
