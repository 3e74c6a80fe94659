//! Serves the control API for a journal on an ephemeral port, queries a few
//! endpoints and shuts down. Pass `--wait` to keep serving (e.g. for the
//! dashboard) until the process is interrupted.
//!
//! ```text
//! cargo run --example control_api [journal.jsonl] [--wait]
//! ```

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use skillbench::harness::api::{serve, ApiState};
use skillbench::harness::Store;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let wait = args.iter().any(|a| a == "--wait");
    let journal = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/paper.jsonl"));

    let state = ApiState {
        store: Arc::new(Store::open_read_only(&journal)?),
        corpus: None,
    };
    let handle = serve(state, SocketAddr::from(([127, 0, 0, 1], 0)), None)?;
    let base = format!("http://{}", handle.addr);
    println!("serving {} at {base}/api", journal.display());

    let client = reqwest::blocking::Client::new();
    let status: serde_json::Value = client.get(format!("{base}/api/status")).send()?.json()?;
    println!("status: {}", serde_json::to_string_pretty(&status)?);
    let table = client
        .get(format!("{base}/api/report?format=md&k=1"))
        .send()?
        .text()?;
    print!("report:\n{table}");
    let rejected = client
        .post(format!(
            "{base}/api/attempts/l1-01:none:nrf52840+zephyr:1/verdict"
        ))
        .json(&serde_json::json!({"verdict": "pass"}))
        .send()?;
    println!(
        "verdict on a read-only journal -> HTTP {}",
        rejected.status().as_u16()
    );

    if wait {
        handle.join()?;
    } else {
        handle.shutdown()?;
    }
    Ok(())
}
