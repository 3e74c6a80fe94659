//! Compiling, flashing and serial capture through configurable toolchain
//! commands.
//!
//! Commands are argv vectors (never shell strings). `{workspace}` expands to
//! the project root of the bundle and must appear exactly once per command;
//! `{profile_dir}` expands at load time to the directory holding the profile
//! file. A profile may instead name a `stub` script, which is then invoked as
//! `sh <stub> compile|flash <project-root>`; that is how the test suite runs
//! without hardware.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembler::ProjectBundle;
use crate::platform::PlatformId;

pub const WORKSPACE_PLACEHOLDER: &str = "{workspace}";
pub const PROFILE_DIR_PLACEHOLDER: &str = "{profile_dir}";
pub const DEFAULT_COMPILE_TIMEOUT_SECS: u64 = 600;
pub const DEFAULT_FLASH_TIMEOUT_SECS: u64 = 120;
pub const STUB_TRANSCRIPT: &str = "{workspace}/serial.txt";

#[derive(Debug, Error)]
pub enum ToolchainError {
    #[error("bundle targets {found} but the profile is for {expected}")]
    ProfileMismatch {
        expected: PlatformId,
        found: PlatformId,
    },
    #[error("no toolchain profile for {0}")]
    MissingProfile(PlatformId),
    #[error("toolchain profile {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("workspace {path}: {source}")]
    Workspace {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("could not start {program}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serial port unavailable: {0}")]
    PortUnavailable(String),
}

/// Where serial output comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SerialSource {
    /// A transcript file written by a stub (path may use `{workspace}`).
    Transcript { transcript: String },
    /// A real device.
    Port {
        port: String,
        #[serde(default = "default_baud")]
        baud: u32,
    },
}

fn default_baud() -> u32 {
    115_200
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolchainProfile {
    pub platform: PlatformId,
    pub compile: Vec<String>,
    pub flash: Vec<String>,
    /// Expected tool versions; informational, mismatches only warn.
    pub versions: BTreeMap<String, String>,
    /// Command whose output should mention every pinned version.
    pub version_command: Option<Vec<String>>,
    pub compile_timeout: Duration,
    pub flash_timeout: Duration,
    /// Environment variables passed through to the tools.
    pub env: Vec<String>,
    pub serial: Option<SerialSource>,
    pub stub: Option<PathBuf>,
}

/// Version pins the benchmark was run with.
pub fn default_version_pins(platform: PlatformId) -> BTreeMap<String, String> {
    let pins: &[(&str, &str)] = match platform {
        PlatformId::Arduino => &[("arduino-cli", "1.4.1"), ("arduino:avr", "1.8.7")],
        PlatformId::EspIdf => &[("esp-idf", "5.1.2")],
        PlatformId::Zephyr => &[("nrf-connect-sdk", "2.7.0")],
    };
    pins.iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn default_env() -> Vec<String> {
    vec!["PATH".into(), "HOME".into()]
}

impl ToolchainProfile {
    /// A profile that drives `script` for both steps and reads the serial
    /// transcript the script leaves in the project root.
    pub fn stub(platform: PlatformId, script: &Path) -> Self {
        let cmd = |step: &str| {
            vec![
                "sh".to_string(),
                script.display().to_string(),
                step.to_string(),
                WORKSPACE_PLACEHOLDER.to_string(),
            ]
        };
        Self {
            platform,
            compile: cmd("compile"),
            flash: cmd("flash"),
            versions: default_version_pins(platform),
            version_command: None,
            compile_timeout: Duration::from_secs(DEFAULT_COMPILE_TIMEOUT_SECS),
            flash_timeout: Duration::from_secs(DEFAULT_FLASH_TIMEOUT_SECS),
            env: default_env(),
            serial: Some(SerialSource::Transcript {
                transcript: STUB_TRANSCRIPT.to_string(),
            }),
            stub: Some(script.to_path_buf()),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, cmd) in [("compile", &self.compile), ("flash", &self.flash)] {
            if cmd.is_empty() {
                return Err(format!("{name} command is empty"));
            }
            let n: usize = cmd
                .iter()
                .map(|a| a.matches(WORKSPACE_PLACEHOLDER).count())
                .sum();
            if n != 1 {
                return Err(format!(
                    "{name} command must contain {WORKSPACE_PLACEHOLDER} exactly once (found {n})"
                ));
            }
        }
        Ok(())
    }

    /// Runs the version command, if any, and warns about pins its output
    /// does not mention. Returns the warnings.
    pub fn check_versions(&self) -> Vec<String> {
        let Some(cmd) = &self.version_command else {
            return Vec::new();
        };
        let output = match Command::new(&cmd[0]).args(&cmd[1..]).output() {
            Ok(o) => format!(
                "{}{}",
                String::from_utf8_lossy(&o.stdout),
                String::from_utf8_lossy(&o.stderr)
            ),
            Err(err) => {
                let w = format!("{}: version probe failed: {err}", self.platform);
                log::warn!("{w}");
                return vec![w];
            }
        };
        let mut warnings = Vec::new();
        for (tool, version) in &self.versions {
            if !output.contains(version.as_str()) {
                let w = format!(
                    "{}: expected {tool} {version}; results may not be comparable",
                    self.platform
                );
                log::warn!("{w}");
                warnings.push(w);
            }
        }
        warnings
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileSpec {
    compile: Option<Vec<String>>,
    flash: Option<Vec<String>>,
    stub: Option<String>,
    #[serde(default)]
    versions: Option<BTreeMap<String, String>>,
    version_command: Option<Vec<String>>,
    compile_timeout_secs: Option<u64>,
    flash_timeout_secs: Option<u64>,
    env: Option<Vec<String>>,
    serial: Option<SerialSource>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    #[serde(default)]
    profiles: BTreeMap<String, ProfileSpec>,
}

/// Profiles keyed by platform.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolchainProfiles {
    profiles: BTreeMap<PlatformId, ToolchainProfile>,
}

impl ToolchainProfiles {
    pub fn new(profiles: impl IntoIterator<Item = ToolchainProfile>) -> Self {
        Self {
            profiles: profiles.into_iter().map(|p| (p.platform, p)).collect(),
        }
    }

    /// Stub profiles for every platform using one script.
    pub fn stub_all(script: &Path) -> Self {
        Self::new(
            PlatformId::ALL
                .iter()
                .map(|p| ToolchainProfile::stub(*p, script)),
        )
    }

    pub fn get(&self, platform: PlatformId) -> Result<&ToolchainProfile, ToolchainError> {
        self.profiles
            .get(&platform)
            .ok_or(ToolchainError::MissingProfile(platform))
    }

    pub fn load(path: &Path) -> Result<Self, ToolchainError> {
        let config = |message: String| ToolchainError::Config {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| config(e.to_string()))?;
        let file: ProfileFile = toml::from_str(&text).map_err(|e| config(e.to_string()))?;
        // Commands run inside the project directory, so profile-relative
        // paths must be made absolute here.
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let dir = std::path::absolute(dir).map_err(|e| config(e.to_string()))?;
        let dir = dir.as_path();
        let dir_str = dir.display().to_string();
        let expand = |args: Vec<String>| -> Vec<String> {
            args.into_iter()
                .map(|a| a.replace(PROFILE_DIR_PLACEHOLDER, &dir_str))
                .collect()
        };
        let mut profiles = BTreeMap::new();
        for (key, spec) in file.profiles {
            let platform: PlatformId = key.parse().map_err(|e| config(format!("{e}")))?;
            let mut profile = match &spec.stub {
                Some(stub) => {
                    let stub = stub.replace(PROFILE_DIR_PLACEHOLDER, &dir_str);
                    let stub = if Path::new(&stub).is_absolute() {
                        PathBuf::from(stub)
                    } else {
                        dir.join(stub)
                    };
                    ToolchainProfile::stub(platform, &stub)
                }
                None => ToolchainProfile {
                    platform,
                    compile: Vec::new(),
                    flash: Vec::new(),
                    versions: default_version_pins(platform),
                    version_command: None,
                    compile_timeout: Duration::from_secs(DEFAULT_COMPILE_TIMEOUT_SECS),
                    flash_timeout: Duration::from_secs(DEFAULT_FLASH_TIMEOUT_SECS),
                    env: default_env(),
                    serial: None,
                    stub: None,
                },
            };
            if let Some(c) = spec.compile {
                profile.compile = expand(c);
            }
            if let Some(f) = spec.flash {
                profile.flash = expand(f);
            }
            if let Some(v) = spec.versions {
                profile.versions = v;
            }
            profile.version_command = spec.version_command.map(expand);
            if let Some(s) = spec.compile_timeout_secs {
                profile.compile_timeout = Duration::from_secs(s);
            }
            if let Some(s) = spec.flash_timeout_secs {
                profile.flash_timeout = Duration::from_secs(s);
            }
            if let Some(env) = spec.env {
                profile.env = env;
            }
            if let Some(serial) = spec.serial {
                profile.serial = Some(serial);
            }
            profile
                .validate()
                .map_err(|m| config(format!("{platform}: {m}")))?;
            profiles.insert(platform, profile);
        }
        Ok(Self { profiles })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildStatus {
    Ok,
    CompileFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlashStatus {
    Ok,
    FlashFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildResult {
    pub status: BuildStatus,
    pub log: String,
    pub duration_ms: u64,
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlashResult {
    pub status: FlashStatus,
    pub log: String,
    pub duration_ms: u64,
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub timed_out: bool,
}

struct CommandRun {
    log: String,
    duration: Duration,
    exit_code: Option<i32>,
    timed_out: bool,
}

impl CommandRun {
    fn succeeded(&self) -> bool {
        !self.timed_out && self.exit_code == Some(0)
    }
}

fn expand_workspace(cmd: &[String], root: &Path) -> Vec<String> {
    let root = root.display().to_string();
    cmd.iter()
        .map(|a| a.replace(WORKSPACE_PLACEHOLDER, &root))
        .collect()
}

fn pump<R: Read + Send + 'static>(mut src: R, sink: Arc<Mutex<Vec<u8>>>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let mut buf = [0u8; 4096];
        loop {
            match src.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => sink.lock().expect("log sink").extend_from_slice(&buf[..n]),
            }
        }
    })
}

/// Runs `argv` in `cwd` with a cleared environment (plus `env`
/// passthrough), capturing stdout and stderr into one log. On timeout the
/// whole process group is killed.
fn run_command(
    argv: &[String],
    cwd: &Path,
    env: &[String],
    timeout: Duration,
) -> Result<CommandRun, ToolchainError> {
    let start = Instant::now();
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(cwd)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    for key in env {
        if let Some(value) = std::env::var_os(key) {
            cmd.env(key, value);
        }
    }
    let mut child = cmd.spawn().map_err(|source| ToolchainError::Spawn {
        program: argv[0].clone(),
        source,
    })?;
    let sink = Arc::new(Mutex::new(Vec::new()));
    let readers = [
        pump(child.stdout.take().expect("piped"), sink.clone()),
        pump(child.stderr.take().expect("piped"), sink.clone()),
    ];
    let mut timed_out = false;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= timeout => {
                timed_out = true;
                // SAFETY: kill(2) on the child's own process group.
                unsafe {
                    libc::kill(-(child.id() as i32), libc::SIGKILL);
                }
                break child.wait().ok();
            }
            Ok(None) => thread::sleep(Duration::from_millis(10)),
            Err(_) => break None,
        }
    };
    for r in readers {
        let _ = r.join();
    }
    let mut log = String::from_utf8_lossy(&sink.lock().expect("log sink")).into_owned();
    if timed_out {
        log.push_str(&format!(
            "\n[skillbench] timed out after {}s\n",
            timeout.as_secs_f64()
        ));
    }
    Ok(CommandRun {
        log,
        duration: start.elapsed(),
        exit_code: if timed_out {
            None
        } else {
            status.and_then(|s| s.code())
        },
        timed_out,
    })
}

fn check_platform(
    bundle: &ProjectBundle,
    profile: &ToolchainProfile,
) -> Result<(), ToolchainError> {
    if bundle.platform != profile.platform {
        return Err(ToolchainError::ProfileMismatch {
            expected: profile.platform,
            found: bundle.platform,
        });
    }
    Ok(())
}

/// Writes `bundle` into `workspace` and runs the compile command against the
/// project root.
pub fn compile(
    bundle: &ProjectBundle,
    profile: &ToolchainProfile,
    workspace: &Path,
) -> Result<BuildResult, ToolchainError> {
    check_platform(bundle, profile)?;
    bundle
        .write_to(workspace)
        .map_err(|source| ToolchainError::Workspace {
            path: workspace.to_path_buf(),
            source,
        })?;
    let root = bundle.root_in(workspace);
    let run = run_command(
        &expand_workspace(&profile.compile, &root),
        &root,
        &profile.env,
        profile.compile_timeout,
    )?;
    Ok(BuildResult {
        status: if run.succeeded() {
            BuildStatus::Ok
        } else {
            BuildStatus::CompileFailure
        },
        duration_ms: run.duration.as_millis() as u64,
        exit_code: run.exit_code,
        timed_out: run.timed_out,
        log: run.log,
    })
}

/// Runs the flash command for an already compiled bundle.
pub fn flash(
    bundle: &ProjectBundle,
    profile: &ToolchainProfile,
    workspace: &Path,
) -> Result<FlashResult, ToolchainError> {
    check_platform(bundle, profile)?;
    let root = bundle.root_in(workspace);
    let run = run_command(
        &expand_workspace(&profile.flash, &root),
        &root,
        &profile.env,
        profile.flash_timeout,
    )?;
    Ok(FlashResult {
        status: if run.succeeded() {
            FlashStatus::Ok
        } else {
            FlashStatus::FlashFailure
        },
        duration_ms: run.duration.as_millis() as u64,
        exit_code: run.exit_code,
        timed_out: run.timed_out,
        log: run.log,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerialLine {
    /// Milliseconds since capture start.
    pub t_ms: u64,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerialTranscript {
    pub lines: Vec<SerialLine>,
}

impl SerialTranscript {
    pub fn text(&self) -> String {
        self.lines.iter().map(|l| format!("{}\n", l.text)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Parses transcript text. Lines may carry a `[ms]` prefix; unstamped
    /// lines count as arriving at time zero. Lines at or after `window`
    /// are dropped.
    pub fn parse(text: &str, window: Duration) -> Self {
        let stamp = Regex::new(r"^\[(\d+)\] ?(.*)$").expect("static");
        let limit = window.as_millis() as u64;
        let lines = text
            .lines()
            .map(|line| match stamp.captures(line) {
                Some(c) => SerialLine {
                    t_ms: c[1].parse().unwrap_or(u64::MAX),
                    text: c[2].to_string(),
                },
                None => SerialLine {
                    t_ms: 0,
                    text: line.to_string(),
                },
            })
            .filter(|l| l.t_ms < limit)
            .collect();
        Self { lines }
    }
}

/// Captures serial output for `duration` after flashing.
pub fn capture_serial(
    profile: &ToolchainProfile,
    bundle: &ProjectBundle,
    workspace: &Path,
    duration: Duration,
) -> Result<SerialTranscript, ToolchainError> {
    let source = profile.serial.as_ref().ok_or_else(|| {
        ToolchainError::PortUnavailable(format!(
            "no serial source configured for {}",
            profile.platform
        ))
    })?;
    if duration.is_zero() {
        return Ok(SerialTranscript::default());
    }
    match source {
        SerialSource::Transcript { transcript } => {
            let root = bundle.root_in(workspace);
            let path = transcript.replace(WORKSPACE_PLACEHOLDER, &root.display().to_string());
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(SerialTranscript::parse(&text, duration)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    Ok(SerialTranscript::default())
                }
                Err(e) => Err(ToolchainError::PortUnavailable(format!("{path}: {e}"))),
            }
        }
        SerialSource::Port { port, baud } => read_port(port, *baud, duration),
    }
}

fn read_port(
    port: &str,
    baud: u32,
    duration: Duration,
) -> Result<SerialTranscript, ToolchainError> {
    let device = serialport::new(port, baud)
        .timeout(Duration::from_millis(100))
        .open()
        .map_err(|e| ToolchainError::PortUnavailable(format!("{port}: {e}")))?;
    let start = Instant::now();
    let mut reader = BufReader::new(device);
    let mut lines = Vec::new();
    let mut pending = Vec::new();
    while start.elapsed() < duration {
        match reader.read_until(b'\n', &mut pending) {
            Ok(0) => {}
            Ok(_) if pending.ends_with(b"\n") => {
                let text = String::from_utf8_lossy(&pending).trim_end().to_string();
                lines.push(SerialLine {
                    t_ms: start.elapsed().as_millis() as u64,
                    text,
                });
                pending.clear();
            }
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::TimedOut => {}
            Err(e) => return Err(ToolchainError::PortUnavailable(format!("{port}: {e}"))),
        }
    }
    Ok(SerialTranscript { lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    const SCRIPT: &str = r#"step=$1; dir=$2
if [ "$step" = compile ]; then
  if grep -rq FAIL "$dir"; then echo "undefined reference to foo" >&2; exit 1; fi
  if grep -rq SLEEP "$dir"; then sleep 30; fi
  echo compiled
else
  if grep -rq NODEV "$dir"; then echo "no device found"; exit 2; fi
  printf '[5] hello\n[20000] late\n' > "$dir/serial.txt"
fi
"#;

    fn bundle(code: &str) -> ProjectBundle {
        ProjectBundle {
            platform: PlatformId::EspIdf,
            root: String::new(),
            entry: "main/main.c".into(),
            files: BTreeMap::from([("main/main.c".to_string(), code.to_string())]),
        }
    }

    fn profile(dir: &Path) -> ToolchainProfile {
        let script = dir.join("stub.sh");
        std::fs::write(&script, SCRIPT).unwrap();
        ToolchainProfile::stub(PlatformId::EspIdf, &script)
    }

    #[test]
    fn compile_flash_capture() {
        let tmp = tempfile::tempdir().unwrap();
        let p = profile(tmp.path());
        let ws = tmp.path().join("ws");
        let b = bundle("ok");
        let build = compile(&b, &p, &ws).unwrap();
        assert_eq!(build.status, BuildStatus::Ok, "{}", build.log);
        assert!(build.log.contains("compiled"));
        let fl = flash(&b, &p, &ws).unwrap();
        assert_eq!(fl.status, FlashStatus::Ok);
        let t = capture_serial(&p, &b, &ws, Duration::from_secs(10)).unwrap();
        assert_eq!(t.text(), "hello\n");
        assert!(capture_serial(&p, &b, &ws, Duration::ZERO)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn failures_are_classified() {
        let tmp = tempfile::tempdir().unwrap();
        let p = profile(tmp.path());
        let build = compile(&bundle("FAIL"), &p, &tmp.path().join("a")).unwrap();
        assert_eq!(build.status, BuildStatus::CompileFailure);
        assert_eq!(build.exit_code, Some(1));
        assert!(build.log.contains("undefined reference"));

        let ws = tmp.path().join("b");
        let b = bundle("NODEV");
        assert_eq!(compile(&b, &p, &ws).unwrap().status, BuildStatus::Ok);
        let fl = flash(&b, &p, &ws).unwrap();
        assert_eq!(fl.status, FlashStatus::FlashFailure);
        assert_eq!(fl.exit_code, Some(2));
        assert!(fl.log.contains("no device found"));
    }

    #[test]
    fn timeout_kills_the_group() {
        let tmp = tempfile::tempdir().unwrap();
        let mut p = profile(tmp.path());
        p.compile_timeout = Duration::from_millis(300);
        let start = Instant::now();
        let build = compile(&bundle("SLEEP"), &p, &tmp.path().join("ws")).unwrap();
        assert!(start.elapsed() < Duration::from_secs(10));
        assert_eq!(build.status, BuildStatus::CompileFailure);
        assert!(build.timed_out);
        assert!(build.log.contains("timed out"));
    }

    #[test]
    fn mismatch_and_missing_port() {
        let tmp = tempfile::tempdir().unwrap();
        let p = ToolchainProfile::stub(PlatformId::Zephyr, &tmp.path().join("x.sh"));
        assert!(matches!(
            compile(&bundle("x"), &p, tmp.path()),
            Err(ToolchainError::ProfileMismatch { .. })
        ));
        let mut p = profile(tmp.path());
        p.serial = Some(SerialSource::Port {
            port: "/dev/does-not-exist".into(),
            baud: 115_200,
        });
        assert!(matches!(
            capture_serial(&p, &bundle("x"), tmp.path(), Duration::from_secs(1)),
            Err(ToolchainError::PortUnavailable(_))
        ));
    }

    #[test]
    fn bundle_contents_are_not_shell_interpreted() {
        let tmp = tempfile::tempdir().unwrap();
        let p = profile(tmp.path());
        let ws = tmp.path().join("dir with $(touch pwned) spaces");
        let build = compile(&bundle("ok"), &p, &ws).unwrap();
        assert_eq!(build.status, BuildStatus::Ok, "{}", build.log);
        assert!(!tmp.path().join("pwned").exists());
    }

    #[test]
    fn profile_file_loading() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("profiles.toml");
        std::fs::write(
            &path,
            r#"
[profiles."esp32s3+espidf"]
stub = "stub.sh"
flash_timeout_secs = 5

[profiles."atmega2560+arduino"]
compile = ["arduino-cli", "compile", "--fqbn", "arduino:avr:mega", "{workspace}"]
flash = ["arduino-cli", "upload", "-p", "/dev/ttyACM0", "--fqbn", "arduino:avr:mega", "{workspace}"]
serial = { port = "/dev/ttyACM0" }
"#,
        )
        .unwrap();
        let profiles = ToolchainProfiles::load(&path).unwrap();
        let esp = profiles.get(PlatformId::EspIdf).unwrap();
        assert_eq!(esp.flash_timeout, Duration::from_secs(5));
        assert_eq!(
            esp.compile[1],
            tmp.path().join("stub.sh").display().to_string()
        );
        let ard = profiles.get(PlatformId::Arduino).unwrap();
        assert_eq!(
            ard.serial,
            Some(SerialSource::Port {
                port: "/dev/ttyACM0".into(),
                baud: 115_200
            })
        );
        assert_eq!(ard.versions["arduino-cli"], "1.4.1");
        assert!(profiles.get(PlatformId::Zephyr).is_err());

        std::fs::write(
            &path,
            "[profiles.\"nrf52840+zephyr\"]\ncompile = [\"west\", \"build\"]\nflash = [\"west\", \"flash\", \"{workspace}\"]\n",
        )
        .unwrap();
        assert!(matches!(
            ToolchainProfiles::load(&path),
            Err(ToolchainError::Config { .. })
        ));
    }

    #[test]
    fn transcript_parsing() {
        let t = SerialTranscript::parse("[0] a\nb\n[999] c\n[1000] d\n", Duration::from_secs(1));
        let texts: Vec<_> = t.lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["a", "b", "c"]);
    }
}
