//! Benchmark tasks: loading, validation and prompt rendering.
//!
//! A task file (`*.task.md`) describes one task on one platform:
//!
//! ```text
//! ---
//! id: sos
//! level: 1
//! title: SOS Morse Code
//! target: atmega2560+arduino
//! pins: [led/led=13]
//! check: human
//! checklist:
//!   - LED blinks three short, three long, three short pulses
//! ---
//! Blink the LED to spell out "SOS" in Morse code.
//! ```
//!
//! The same task id normally appears once per platform, each variant with
//! pins in that platform's convention.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontmatter::{self, FrontValue};
use crate::peripheral::{Interface, PeripheralRegistry};
use crate::platform::{PinConvention, PlatformId, PlatformProfile};

pub const TASK_FILE_SUFFIX: &str = ".task.md";

/// Tasks per level in the full 42-task benchmark.
pub const FULL_BENCHMARK_SHAPE: [(u8, usize); 3] = [(1, 12), (2, 16), (3, 14)];

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("{file}: field '{field}': {message}")]
    Schema {
        file: PathBuf,
        field: String,
        message: String,
    },
    #[error("{file}: unknown peripheral {peripheral:?}")]
    UnknownPeripheral { file: PathBuf, peripheral: String },
    #[error("{file}: pin {pin} does not follow the {platform} pin convention")]
    PinConventionMismatch {
        file: PathBuf,
        pin: String,
        platform: PlatformId,
    },
    #[error("task {task} targets {target}, not {requested}")]
    PlatformMismatch {
        task: String,
        target: PlatformId,
        requested: PlatformId,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PinAssignment {
    pub peripheral: String,
    pub signal: String,
    pub descriptor: String,
}

impl PinAssignment {
    pub fn new(peripheral: &str, signal: &str, descriptor: &str) -> Self {
        Self {
            peripheral: peripheral.into(),
            signal: signal.into(),
            descriptor: descriptor.into(),
        }
    }
}

impl fmt::Display for PinAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}={}", self.peripheral, self.signal, self.descriptor)
    }
}

impl FromStr for PinAssignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, descriptor) = s
            .split_once('=')
            .ok_or_else(|| format!("{s:?}: expected peripheral/signal=descriptor"))?;
        let (peripheral, signal) = lhs
            .split_once('/')
            .ok_or_else(|| format!("{s:?}: expected peripheral/signal=descriptor"))?;
        let (peripheral, signal, descriptor) =
            (peripheral.trim(), signal.trim(), descriptor.trim());
        if peripheral.is_empty() || signal.is_empty() || descriptor.is_empty() {
            return Err(format!("{s:?}: empty component"));
        }
        if !signal
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            return Err(format!("{s:?}: signal must be lowercase alphanumeric"));
        }
        Ok(Self::new(peripheral, signal, descriptor))
    }
}

/// Whether `descriptor` is written in the platform's pin convention.
pub fn descriptor_matches(convention: PinConvention, descriptor: &str) -> bool {
    fn re(pattern: &str) -> Regex {
        Regex::new(pattern).expect("static pattern")
    }
    match convention {
        PinConvention::NumericGpio => re(r"^[0-9]+$").is_match(descriptor),
        PinConvention::DevicetreeAlias => {
            re(r"^[a-z][a-z0-9-]*(@[a-z0-9_.]+)?$").is_match(descriptor)
        }
        PinConvention::BoardLabel => {
            re(r"^([AD]?[0-9]+|LED_BUILTIN|SDA|SCL|MOSI|MISO|SCK|SS)$").is_match(descriptor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    Human,
    SerialPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorCheck {
    pub mode: CheckMode,
    pub pattern: Option<String>,
    pub checklist: Vec<String>,
    /// Serial capture window for pattern checks.
    pub capture_secs: Option<u64>,
}

impl BehaviorCheck {
    pub const DEFAULT_CAPTURE_SECS: u64 = 10;

    pub fn capture_window(&self) -> std::time::Duration {
        std::time::Duration::from_secs(self.capture_secs.unwrap_or(Self::DEFAULT_CAPTURE_SECS))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub id: String,
    pub level: u8,
    pub title: String,
    pub description: String,
    pub target: PlatformId,
    pub pins: Vec<PinAssignment>,
    pub check: BehaviorCheck,
}

impl TaskSpec {
    /// Interfaces the task's peripherals are driven through. A peripheral
    /// with several interfaces resolves through its pins: SPI signal names or
    /// an `@spiN` devicetree target select SPI, I2C ones select I2C.
    pub fn interfaces(&self, registry: &PeripheralRegistry) -> BTreeSet<Interface> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for pin in &self.pins {
            if seen.insert(pin.peripheral.as_str()) {
                if let Some(i) = self.peripheral_interface(registry, &pin.peripheral) {
                    out.insert(i);
                }
            }
        }
        out
    }

    pub fn peripheral_interface(
        &self,
        registry: &PeripheralRegistry,
        peripheral: &str,
    ) -> Option<Interface> {
        let p = registry.get(peripheral)?;
        if p.interfaces.len() <= 1 {
            return p.interfaces.first().copied();
        }
        let pins: Vec<_> = self
            .pins
            .iter()
            .filter(|pin| pin.peripheral == peripheral)
            .collect();
        let uses = |signals: &[&str], target: &str| {
            pins.iter().any(|pin| {
                signals.contains(&pin.signal.as_str())
                    || pin
                        .descriptor
                        .split_once('@')
                        .is_some_and(|(_, t)| t.starts_with(target))
            })
        };
        if p.has_interface(Interface::Spi)
            && uses(&["sck", "sclk", "mosi", "miso", "cs", "ss"], "spi")
        {
            Some(Interface::Spi)
        } else if p.has_interface(Interface::I2c) && uses(&["sda", "scl"], "i2c") {
            Some(Interface::I2c)
        } else {
            p.interfaces.first().copied()
        }
    }

    pub fn to_document(&self) -> String {
        let mut fm = frontmatter::Frontmatter::new();
        fm.set_scalar("id", self.id.clone());
        fm.set_scalar("level", self.level.to_string());
        fm.set_scalar("title", self.title.clone());
        fm.set_scalar("target", self.target.as_str());
        fm.set_list("pins", self.pins.iter().map(|p| p.to_string()));
        fm.set_scalar(
            "check",
            match self.check.mode {
                CheckMode::Human => "human",
                CheckMode::SerialPattern => "serial-pattern",
            },
        );
        if let Some(p) = &self.check.pattern {
            fm.set_scalar("pattern", p.clone());
        }
        if !self.check.checklist.is_empty() {
            fm.set_list("checklist", self.check.checklist.iter().cloned());
        }
        if let Some(secs) = self.check.capture_secs {
            fm.set_scalar("capture_secs", secs.to_string());
        }
        let mut out = fm.render();
        out.push_str(&self.description);
        if !self.description.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

/// Parses and validates one task document. `file` is used for error context.
pub fn parse_task(
    text: &str,
    file: &Path,
    registry: &PeripheralRegistry,
) -> Result<TaskSpec, TaskError> {
    let schema = |field: &str, message: String| TaskError::Schema {
        file: file.to_path_buf(),
        field: field.to_string(),
        message,
    };
    let (fm, body) =
        frontmatter::split_document(text).map_err(|e| schema("frontmatter", e.to_string()))?;
    let get_scalar = |key: &str| -> Result<Option<String>, TaskError> {
        match fm.get(key) {
            None => Ok(None),
            Some(FrontValue::Scalar(s)) if s.is_empty() => Ok(None),
            Some(FrontValue::Scalar(s)) => Ok(Some(s.clone())),
            Some(FrontValue::List(_)) => Err(schema(key, "expected a scalar".into())),
        }
    };
    let get_list = |key: &str| -> Vec<String> {
        match fm.get(key) {
            None => Vec::new(),
            Some(FrontValue::Scalar(s)) if s.is_empty() => Vec::new(),
            Some(FrontValue::Scalar(s)) => vec![s.clone()],
            Some(FrontValue::List(items)) => items.clone(),
        }
    };
    let required = |key: &str| -> Result<String, TaskError> {
        get_scalar(key)?.ok_or_else(|| schema(key, "missing".into()))
    };

    let id = required("id")?;
    if !id
        .chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
    {
        return Err(schema("id", format!("{id:?} must be lowercase [a-z0-9_-]")));
    }
    let level: u8 = required("level")?
        .parse()
        .map_err(|e| schema("level", format!("{e}")))?;
    if !(1..=3).contains(&level) {
        return Err(schema("level", format!("{level} is not in 1..=3")));
    }
    let title = required("title")?;
    let target: PlatformId = required("target")?
        .parse()
        .map_err(|e: crate::platform::UnknownPlatform| schema("target", e.to_string()))?;
    let description = body.trim().to_string();
    if description.is_empty() {
        return Err(schema("description", "task body is empty".into()));
    }

    let convention = target.profile().pin_convention;
    let mut pins = Vec::new();
    let mut signals = BTreeSet::new();
    for raw in get_list("pins") {
        let pin: PinAssignment = raw.parse().map_err(|e| schema("pins", e))?;
        if !registry.contains(&pin.peripheral) {
            return Err(TaskError::UnknownPeripheral {
                file: file.to_path_buf(),
                peripheral: pin.peripheral,
            });
        }
        if !descriptor_matches(convention, &pin.descriptor) {
            return Err(TaskError::PinConventionMismatch {
                file: file.to_path_buf(),
                pin: pin.to_string(),
                platform: target,
            });
        }
        if !signals.insert(pin.signal.clone()) {
            return Err(schema("pins", format!("duplicate signal {:?}", pin.signal)));
        }
        pins.push(pin);
    }

    let mode = match get_scalar("check")?.as_deref() {
        None | Some("human") => CheckMode::Human,
        Some("serial-pattern") => CheckMode::SerialPattern,
        Some(other) => return Err(schema("check", format!("unknown mode {other:?}"))),
    };
    let pattern = get_scalar("pattern")?;
    if let Some(p) = &pattern {
        Regex::new(p).map_err(|e| schema("pattern", e.to_string()))?;
    }
    let checklist = get_list("checklist");
    match mode {
        CheckMode::SerialPattern if pattern.is_none() => {
            return Err(schema(
                "pattern",
                "required for serial-pattern checks".into(),
            ))
        }
        CheckMode::Human if checklist.is_empty() => {
            return Err(schema("checklist", "required for human checks".into()))
        }
        _ => {}
    }
    let capture_secs = get_scalar("capture_secs")?
        .map(|s| {
            s.parse()
                .map_err(|e| schema("capture_secs", format!("{e}")))
        })
        .transpose()?;

    Ok(TaskSpec {
        id,
        level,
        title,
        description,
        target,
        pins,
        check: BehaviorCheck {
            mode,
            pattern,
            checklist,
            capture_secs,
        },
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    tasks: Vec<TaskSpec>,
}

impl Corpus {
    /// Sorts by (id, platform) and rejects duplicate variants.
    pub fn from_tasks(mut tasks: Vec<TaskSpec>) -> Result<Self, TaskError> {
        tasks.sort_by(|a, b| (&a.id, a.target).cmp(&(&b.id, b.target)));
        for pair in tasks.windows(2) {
            if pair[0].id == pair[1].id && pair[0].target == pair[1].target {
                return Err(TaskError::Schema {
                    file: PathBuf::new(),
                    field: "id".into(),
                    message: format!("duplicate task {} for {}", pair[0].id, pair[0].target),
                });
            }
        }
        Ok(Self { tasks })
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn get(&self, id: &str, platform: PlatformId) -> Option<&TaskSpec> {
        self.tasks
            .iter()
            .find(|t| t.id == id && t.target == platform)
    }

    /// Any variant of `id`.
    pub fn any_variant(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Distinct task ids, sorted.
    pub fn ids(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.tasks.iter().map(|t| t.id.as_str()).collect();
        set.into_iter().collect()
    }

    /// Distinct task ids per level.
    pub fn level_counts(&self) -> BTreeMap<u8, usize> {
        let mut ids: BTreeMap<u8, BTreeSet<&str>> = BTreeMap::new();
        for t in &self.tasks {
            ids.entry(t.level).or_default().insert(&t.id);
        }
        ids.into_iter().map(|(l, s)| (l, s.len())).collect()
    }
}

/// Loads a corpus from a directory of `*.task.md` files (recursively) or from
/// a single task file. Blank files are skipped.
pub fn load_corpus(path: &Path, registry: &PeripheralRegistry) -> Result<Corpus, TaskError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| TaskError::Io { path, source }
    };
    let mut files = Vec::new();
    if path.is_dir() {
        fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
            for entry in fs::read_dir(dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    walk(&p, out)?;
                } else if p
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(TASK_FILE_SUFFIX))
                {
                    out.push(p);
                }
            }
            Ok(())
        }
        walk(path, &mut files).map_err(io(path))?;
    } else {
        files.push(path.to_path_buf());
    }
    let mut tasks = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(io(&file))?;
        if text.trim().is_empty() {
            continue;
        }
        tasks.push(parse_task(&text, &file, registry)?);
    }
    Corpus::from_tasks(tasks)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeDiagnostic {
    CountMismatch {
        level: u8,
        expected: usize,
        got: usize,
    },
}

impl fmt::Display for ShapeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeDiagnostic::CountMismatch {
                level,
                expected,
                got,
            } => write!(f, "level {level}: expected {expected} tasks, found {got}"),
        }
    }
}

/// Compares distinct task ids per level against `expected`.
pub fn validate_corpus_shape(
    corpus: &Corpus,
    expected: &BTreeMap<u8, usize>,
) -> Vec<ShapeDiagnostic> {
    let counts = corpus.level_counts();
    let levels: BTreeSet<u8> = counts.keys().chain(expected.keys()).copied().collect();
    levels
        .into_iter()
        .filter_map(|level| {
            let got = counts.get(&level).copied().unwrap_or(0);
            let want = expected.get(&level).copied().unwrap_or(0);
            (got != want).then_some(ShapeDiagnostic::CountMismatch {
                level,
                expected: want,
                got,
            })
        })
        .collect()
}

pub fn full_benchmark_shape() -> BTreeMap<u8, usize> {
    FULL_BENCHMARK_SHAPE.into_iter().collect()
}

/// Devicetree node label generated for a signal.
pub fn node_label(signal: &str) -> String {
    format!("bench_{}", signal.replace('-', "_"))
}

fn pin_line(
    pin: &PinAssignment,
    registry: &PeripheralRegistry,
    convention: PinConvention,
) -> String {
    let name = registry
        .get(&pin.peripheral)
        .map(|p| p.name.as_str())
        .unwrap_or(pin.peripheral.as_str());
    let role = if pin.signal == pin.peripheral || pin.signal == "signal" {
        String::new()
    } else {
        format!(" {}", pin.signal)
    };
    let location = match convention {
        PinConvention::BoardLabel => format!("pin {}", pin.descriptor),
        PinConvention::NumericGpio => format!("GPIO {}", pin.descriptor),
        PinConvention::DevicetreeAlias => {
            let alias = pin.descriptor.split('@').next().unwrap_or(&pin.descriptor);
            format!(
                "devicetree alias {alias} (node label {})",
                node_label(&pin.signal)
            )
        }
    };
    format!("- {name}{role}: {location}")
}

pub fn render_task_prompt(task: &TaskSpec, profile: &PlatformProfile) -> Result<String, TaskError> {
    render_task_prompt_with(task, profile, &PeripheralRegistry::default())
}

/// Renders the coder-facing task text. Contains no skill content.
pub fn render_task_prompt_with(
    task: &TaskSpec,
    profile: &PlatformProfile,
    registry: &PeripheralRegistry,
) -> Result<String, TaskError> {
    if task.target != profile.id {
        return Err(TaskError::PlatformMismatch {
            task: task.id.clone(),
            target: task.target,
            requested: profile.id,
        });
    }
    let mut out = String::new();
    out.push_str(&format!("Task: {} (level {})\n", task.title, task.level));
    out.push_str(&format!(
        "Target platform: {} ({})\n\n",
        profile.display_name(),
        profile.id
    ));
    out.push_str("Requirements:\n");
    out.push_str(task.description.trim_end());
    out.push_str("\n\n");
    let heading = match profile.pin_convention {
        PinConvention::BoardLabel => "Pin assignments (board pin labels):",
        PinConvention::NumericGpio => "Pin assignments (GPIO numbers):",
        PinConvention::DevicetreeAlias => {
            "Pin assignments (devicetree aliases, declared in app.overlay; reference them with DT_ALIAS):"
        }
    };
    out.push_str(heading);
    out.push('\n');
    if task.pins.is_empty() {
        out.push_str("(none)\n");
    }
    for pin in &task.pins {
        out.push_str(&pin_line(pin, registry, profile.pin_convention));
        out.push('\n');
    }
    Ok(out)
}
