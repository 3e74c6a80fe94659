//! Skill documents: a frontmatter header plus a markdown body.
//!
//! Headers are cheap to scan and are what the planner sees; bodies are loaded
//! only for the skills it selects.

mod generate;

pub use generate::{
    generate_skills, generation_prompt, parse_generated, GenerateError, GenerationOutput,
    GENERATED_DIR_NAME,
};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontmatter::{self, FrontValue, Frontmatter, FrontmatterError};
use crate::peripheral::PeripheralRegistry;
use crate::platform::PlatformId;

/// Descriptions longer than this are flagged by [`validate_library`].
pub const MAX_DESCRIPTION_CHARS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkillOrigin {
    HumanExpert,
    LlmGenerated,
}

impl SkillOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            SkillOrigin::HumanExpert => "human-expert",
            SkillOrigin::LlmGenerated => "llm-generated",
        }
    }
}

impl FromStr for SkillOrigin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "human-expert" => Ok(SkillOrigin::HumanExpert),
            "llm-generated" => Ok(SkillOrigin::LlmGenerated),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("missing frontmatter: the first line must be '---'")]
    MissingFrontmatter,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("missing required header field '{0}'")]
    MissingRequiredField(&'static str),
    #[error("skill body is empty")]
    EmptyBody,
    #[error("unknown skill name {0:?}")]
    UnknownSkillName(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<SkillError>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<FrontmatterError> for SkillError {
    fn from(err: FrontmatterError) -> Self {
        match err {
            FrontmatterError::Missing => SkillError::MissingFrontmatter,
            other => SkillError::MalformedHeader(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillHeader {
    pub name: String,
    pub description: String,
    pub platforms: Vec<String>,
    pub peripherals: Vec<String>,
    pub origin: Option<SkillOrigin>,
    /// Header keys this crate does not interpret, in file order.
    pub extra: Vec<(String, FrontValue)>,
}

impl SkillHeader {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            platforms: Vec::new(),
            peripherals: Vec::new(),
            origin: None,
            extra: Vec::new(),
        }
    }

    fn from_frontmatter(fm: Frontmatter) -> Result<Self, SkillError> {
        let mut header = SkillHeader::new(String::new(), String::new());
        let mut have_name = false;
        let mut have_description = false;
        for (key, value) in fm.into_entries() {
            match key.as_str() {
                "name" => {
                    header.name = scalar(&key, value)?;
                    have_name = !header.name.is_empty();
                }
                "description" => {
                    header.description = scalar(&key, value)?;
                    have_description = !header.description.is_empty();
                }
                "platforms" => header.platforms = list(value),
                "peripherals" => header.peripherals = list(value),
                "origin" => {
                    let raw = scalar(&key, value)?;
                    header.origin = Some(raw.parse().map_err(SkillError::MalformedHeader)?);
                }
                _ => header.extra.push((key, value)),
            }
        }
        if !have_name {
            return Err(SkillError::MissingRequiredField("name"));
        }
        if !have_description {
            return Err(SkillError::MissingRequiredField("description"));
        }
        if header.name.contains(['\n', '\r']) {
            return Err(SkillError::MalformedHeader(
                "name must not contain a newline".into(),
            ));
        }
        Ok(header)
    }

    fn to_frontmatter(&self) -> Frontmatter {
        let mut fm = Frontmatter::new();
        fm.set_scalar("name", self.name.clone());
        fm.set_scalar("description", self.description.clone());
        if !self.platforms.is_empty() {
            fm.set_list("platforms", self.platforms.iter().cloned());
        }
        if !self.peripherals.is_empty() {
            fm.set_list("peripherals", self.peripherals.iter().cloned());
        }
        if let Some(origin) = self.origin {
            fm.set_scalar("origin", origin.as_str());
        }
        for (key, value) in &self.extra {
            fm.set(key.clone(), value.clone());
        }
        fm
    }

    /// One line of the planner's header index.
    pub fn index_line(&self) -> String {
        format!(
            "{} — {} [{}] [{}]",
            self.name,
            self.description,
            self.platforms.join(", "),
            self.peripherals.join(", ")
        )
    }
}

fn scalar(key: &str, value: FrontValue) -> Result<String, SkillError> {
    match value {
        FrontValue::Scalar(s) => Ok(s),
        FrontValue::List(_) => Err(SkillError::MalformedHeader(format!(
            "'{key}' must be a scalar"
        ))),
    }
}

fn list(value: FrontValue) -> Vec<String> {
    match value {
        FrontValue::Scalar(s) if s.is_empty() => Vec::new(),
        FrontValue::Scalar(s) => vec![s],
        FrontValue::List(items) => items,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skill {
    pub header: SkillHeader,
    pub body: String,
}

impl Skill {
    pub fn name(&self) -> &str {
        &self.header.name
    }

    /// Serializes to the on-disk document format.
    pub fn to_document(&self) -> String {
        let mut out = self.header.to_frontmatter().render();
        out.push_str(&self.body);
        out
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_document())
    }
}

pub fn parse_skill(text: &str) -> Result<Skill, SkillError> {
    let (fm, body) = frontmatter::split_document(text)?;
    let header = SkillHeader::from_frontmatter(fm)?;
    if body.trim().is_empty() {
        return Err(SkillError::EmptyBody);
    }
    Ok(Skill {
        header,
        body: body.to_string(),
    })
}

/// Parses only the header, reading no further than the closing delimiter.
pub fn parse_header<R: std::io::BufRead>(reader: R) -> Result<SkillHeader, SkillError> {
    let fm = frontmatter::read_header(reader)?;
    SkillHeader::from_frontmatter(fm)
}

/// Lowercases and collapses every run of non-alphanumerics into one hyphen.
pub fn normalize_name(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut pending_hyphen = false;
    for c in name.chars() {
        if c.is_alphanumeric() {
            if pending_hyphen && !out.is_empty() {
                out.push('-');
            }
            pending_hyphen = false;
            out.extend(c.to_lowercase());
        } else {
            pending_hyphen = true;
        }
    }
    out
}

/// `ceil(chars / 4)`. Display and sanity checks only; reported token counts
/// always come from provider metadata.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// A per-file problem found while scanning a directory.
#[derive(Debug)]
pub struct FileDiagnostic {
    pub path: PathBuf,
    pub error: SkillError,
}

impl fmt::Display for FileDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.error)
    }
}

#[derive(Debug, Default)]
pub struct HeaderScan {
    pub headers: Vec<SkillHeader>,
    pub diagnostics: Vec<FileDiagnostic>,
}

/// Markdown files under `dir`, recursively, in path order.
fn skill_files(dir: &Path) -> Result<Vec<PathBuf>, SkillError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e == "md") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, &mut files).map_err(|source| SkillError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    files.sort();
    Ok(files)
}

pub fn scan_headers(dir: &Path) -> Result<HeaderScan, SkillError> {
    let mut scan = HeaderScan::default();
    for path in skill_files(dir)? {
        let result = fs::File::open(&path)
            .map_err(|source| SkillError::Io {
                path: path.clone(),
                source,
            })
            .and_then(|f| parse_header(BufReader::new(f)));
        match result {
            Ok(header) => scan.headers.push(header),
            Err(error) => scan.diagnostics.push(FileDiagnostic { path, error }),
        }
    }
    Ok(scan)
}

/// Sorted by name, one `name — description [platforms] [peripherals]` line
/// per header.
pub fn render_header_index(headers: &[SkillHeader]) -> String {
    let mut lines: Vec<(&str, String)> = headers
        .iter()
        .map(|h| (h.name.as_str(), h.index_line()))
        .collect();
    lines.sort();
    let mut out = String::new();
    for (_, line) in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SkillLibrary {
    skills: Vec<Skill>,
    source: Option<PathBuf>,
}

impl SkillLibrary {
    pub fn from_skills(skills: Vec<Skill>) -> Self {
        Self {
            skills,
            source: None,
        }
    }

    /// Loads every parseable skill under `dir`. Unparseable files are
    /// returned as diagnostics rather than failing the load.
    pub fn load(dir: &Path) -> Result<(Self, Vec<FileDiagnostic>), SkillError> {
        let mut skills = Vec::new();
        let mut diagnostics = Vec::new();
        for path in skill_files(dir)? {
            let parsed = fs::read_to_string(&path)
                .map_err(|source| SkillError::Io {
                    path: path.clone(),
                    source,
                })
                .and_then(|text| parse_skill(&text));
            match parsed {
                Ok(skill) => skills.push(skill),
                Err(error) => diagnostics.push(FileDiagnostic { path, error }),
            }
        }
        Ok((
            Self {
                skills,
                source: Some(dir.to_path_buf()),
            },
            diagnostics,
        ))
    }

    /// Like [`SkillLibrary::load`] but any file diagnostic is an error.
    pub fn load_strict(dir: &Path) -> Result<Self, SkillError> {
        let (lib, mut diagnostics) = Self::load(dir)?;
        if diagnostics.is_empty() {
            return Ok(lib);
        }
        let first = diagnostics.remove(0);
        Err(SkillError::File {
            path: first.path,
            source: Box::new(first.error),
        })
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn headers(&self) -> Vec<SkillHeader> {
        self.skills.iter().map(|s| s.header.clone()).collect()
    }

    /// Finds a skill by normalized name.
    pub fn get(&self, name: &str) -> Option<&Skill> {
        let wanted = normalize_name(name);
        self.skills
            .iter()
            .find(|s| normalize_name(&s.header.name) == wanted)
    }

    /// Full skills for `names`, in request order.
    pub fn load_bodies<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<Skill>, SkillError> {
        names
            .iter()
            .map(|n| {
                self.get(n.as_ref())
                    .cloned()
                    .ok_or_else(|| SkillError::UnknownSkillName(n.as_ref().to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LibraryDiagnostic {
    DuplicateName {
        name: String,
    },
    UnknownPlatform {
        skill: String,
        platform: String,
    },
    UnknownPeripheral {
        skill: String,
        peripheral: String,
    },
    EmptyBody {
        skill: String,
    },
    OversizedHeader {
        skill: String,
        description_chars: usize,
    },
}

impl fmt::Display for LibraryDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LibraryDiagnostic::DuplicateName { name } => {
                write!(f, "duplicate skill name {name:?}")
            }
            LibraryDiagnostic::UnknownPlatform { skill, platform } => {
                write!(f, "{skill}: unknown platform {platform:?}")
            }
            LibraryDiagnostic::UnknownPeripheral { skill, peripheral } => {
                write!(f, "{skill}: unknown peripheral {peripheral:?}")
            }
            LibraryDiagnostic::EmptyBody { skill } => write!(f, "{skill}: empty body"),
            LibraryDiagnostic::OversizedHeader {
                skill,
                description_chars,
            } => write!(
                f,
                "{skill}: description is {description_chars} characters (limit {MAX_DESCRIPTION_CHARS})"
            ),
        }
    }
}

pub fn validate_library(
    library: &SkillLibrary,
    peripherals: &PeripheralRegistry,
) -> Vec<LibraryDiagnostic> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for skill in library.skills() {
        *seen.entry(normalize_name(skill.name())).or_default() += 1;
    }
    for (name, count) in &seen {
        if *count > 1 {
            out.push(LibraryDiagnostic::DuplicateName { name: name.clone() });
        }
    }
    for skill in library.skills() {
        let name = skill.name().to_string();
        for platform in &skill.header.platforms {
            if platform.parse::<PlatformId>().is_err() {
                out.push(LibraryDiagnostic::UnknownPlatform {
                    skill: name.clone(),
                    platform: platform.clone(),
                });
            }
        }
        for peripheral in &skill.header.peripherals {
            if !peripherals.contains(peripheral) {
                out.push(LibraryDiagnostic::UnknownPeripheral {
                    skill: name.clone(),
                    peripheral: peripheral.clone(),
                });
            }
        }
        if skill.body.trim().is_empty() {
            out.push(LibraryDiagnostic::EmptyBody {
                skill: name.clone(),
            });
        }
        let description_chars = skill.header.description.chars().count();
        if description_chars > MAX_DESCRIPTION_CHARS {
            out.push(LibraryDiagnostic::OversizedHeader {
                skill: name,
                description_chars,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::{BufRead, Read};

    const MINIMAL: &str = "---\nname: zephyr-gpio\ndescription: GPIO best practices\nplatforms: [nrf52840+zephyr]\n---\nUse logical levels.";

    #[test]
    fn parses_minimal_document() {
        let skill = parse_skill(MINIMAL).unwrap();
        assert_eq!(skill.name(), "zephyr-gpio");
        assert_eq!(skill.body, "Use logical levels.");
        assert_eq!(skill.header.platforms, ["nrf52840+zephyr"]);
        assert_eq!(skill.header.origin, None);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_skill("no frontmatter here"),
            Err(SkillError::MissingFrontmatter)
        ));
        assert!(matches!(
            parse_skill("---\ndescription: d\n---\nbody"),
            Err(SkillError::MissingRequiredField("name"))
        ));
        assert!(matches!(
            parse_skill("---\nname: n\n---\nbody"),
            Err(SkillError::MissingRequiredField("description"))
        ));
        assert!(matches!(
            parse_skill("---\nname: n\ndescription: d\n---\n  \n"),
            Err(SkillError::EmptyBody)
        ));
        assert!(matches!(
            parse_skill("---\nname n\n---\nbody"),
            Err(SkillError::MalformedHeader(_))
        ));
        assert!(matches!(
            parse_skill("---\nname: n\ndescription: d\norigin: robot\n---\nbody"),
            Err(SkillError::MalformedHeader(_))
        ));
    }

    #[test]
    fn unknown_keys_survive() {
        let text = "---\nname: a\ndescription: b\nversion: 2\ntags: [x, y]\n---\nbody\n";
        let skill = parse_skill(text).unwrap();
        assert_eq!(skill.header.extra.len(), 2);
        assert_eq!(skill.to_document(), text);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("Zephyr GPIO"), "zephyr-gpio");
        assert_eq!(normalize_name("  --ESP_IDF::i2c!! "), "esp-idf-i2c");
        assert_eq!(normalize_name("zephyr-gpio"), "zephyr-gpio");
        assert_eq!(normalize_name("***"), "");
    }

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens(&"x".repeat(400)), 100);
        assert_eq!(estimate_tokens("abcde"), 2);
    }

    fn lib() -> SkillLibrary {
        let a = parse_skill(MINIMAL).unwrap();
        let b =
            parse_skill("---\nname: zephyr-buttons\ndescription: Buttons\n---\nDebounce.").unwrap();
        SkillLibrary::from_skills(vec![a, b])
    }

    #[test]
    fn bodies_by_name() {
        let lib = lib();
        let got = lib.load_bodies(&["zephyr-buttons", "Zephyr GPIO"]).unwrap();
        assert_eq!(got[0].name(), "zephyr-buttons");
        assert_eq!(got[1].name(), "zephyr-gpio");
        assert!(matches!(
            lib.load_bodies(&["nonexistent"]),
            Err(SkillError::UnknownSkillName(n)) if n == "nonexistent"
        ));
    }

    #[test]
    fn header_index_is_sorted() {
        assert_eq!(render_header_index(&[]), "");
        let lib = lib();
        let index = render_header_index(&lib.headers());
        assert_eq!(
            index,
            "zephyr-buttons — Buttons [] []\nzephyr-gpio — GPIO best practices [nrf52840+zephyr] []\n"
        );
    }

    #[test]
    fn validation_findings() {
        let reg = PeripheralRegistry::default();
        assert!(validate_library(&lib(), &reg).is_empty());

        let mut skills = lib().skills().to_vec();
        skills.push(skills[0].clone());
        let mut odd = skills[1].clone();
        odd.header.name = "odd".into();
        odd.header.platforms = vec!["stm32".into()];
        odd.header.peripherals = vec!["flux-capacitor".into()];
        odd.header.description = "d".repeat(MAX_DESCRIPTION_CHARS + 1);
        odd.body = " ".into();
        skills.push(odd);
        let found = validate_library(&SkillLibrary::from_skills(skills), &reg);
        assert!(found.contains(&LibraryDiagnostic::DuplicateName {
            name: "zephyr-gpio".into()
        }));
        assert!(found.contains(&LibraryDiagnostic::UnknownPlatform {
            skill: "odd".into(),
            platform: "stm32".into()
        }));
        assert!(found.contains(&LibraryDiagnostic::UnknownPeripheral {
            skill: "odd".into(),
            peripheral: "flux-capacitor".into()
        }));
        assert!(found.contains(&LibraryDiagnostic::EmptyBody {
            skill: "odd".into()
        }));
        assert!(found.contains(&LibraryDiagnostic::OversizedHeader {
            skill: "odd".into(),
            description_chars: MAX_DESCRIPTION_CHARS + 1
        }));
    }

    /// Serves its data one line per `fill_buf` and records how far it got.
    struct LineReader {
        data: Vec<u8>,
        pos: usize,
        served_to: usize,
    }

    impl Read for LineReader {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            let avail = self.fill_buf()?;
            let n = avail.len().min(buf.len());
            buf[..n].copy_from_slice(&avail[..n]);
            self.consume(n);
            Ok(n)
        }
    }

    impl BufRead for LineReader {
        fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
            let rest = &self.data[self.pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .map_or(rest.len(), |i| i + 1);
            self.served_to = self.served_to.max(self.pos + end);
            Ok(&self.data[self.pos..self.pos + end])
        }

        fn consume(&mut self, amt: usize) {
            self.pos += amt;
        }
    }

    #[test]
    fn header_scan_stops_at_closing_delimiter() {
        let doc = format!("{MINIMAL}\n{}", "more body\n".repeat(100));
        let header_end = doc.find("\n---\n").unwrap() + 5;
        let mut reader = LineReader {
            data: doc.into_bytes(),
            pos: 0,
            served_to: 0,
        };
        let header = parse_header(&mut reader).unwrap();
        assert_eq!(header.name, "zephyr-gpio");
        assert_eq!(reader.served_to, header_end);
    }

    #[test]
    fn scan_directory_with_failures() {
        let dir = tempfile::tempdir().unwrap();
        assert!(scan_headers(dir.path()).unwrap().headers.is_empty());
        for (i, name) in ["a", "b", "c"].iter().enumerate() {
            let body = if i == 2 { "broken" } else { "body" };
            let text = if i == 2 {
                body.to_string()
            } else {
                format!("---\nname: {name}\ndescription: d\n---\n{body}")
            };
            fs::write(dir.path().join(format!("{name}.md")), text).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let scan = scan_headers(dir.path()).unwrap();
        assert_eq!(scan.headers.len(), 2);
        assert_eq!(scan.diagnostics.len(), 1);
        assert!(scan.diagnostics[0].path.ends_with("c.md"));
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9-]{0,20}"
    }

    fn text() -> impl Strategy<Value = String> {
        "[ -~]{1,60}"
    }

    fn arb_skill() -> impl Strategy<Value = Skill> {
        (
            ident(),
            text().prop_filter("non-blank", |s| !s.trim().is_empty()),
            proptest::collection::vec(text(), 0..3),
            proptest::collection::vec(ident(), 0..3),
            proptest::option::of(prop_oneof![
                Just(SkillOrigin::HumanExpert),
                Just(SkillOrigin::LlmGenerated)
            ]),
            proptest::collection::vec((ident(), text()), 0..2),
            "[ -~\n]{0,200}".prop_map(|b| format!("x{b}")),
        )
            .prop_map(
                |(name, description, platforms, peripherals, origin, extra, body)| {
                    let mut header = SkillHeader::new(name, description);
                    header.platforms = platforms;
                    header.peripherals = peripherals;
                    header.origin = origin;
                    for (k, v) in extra {
                        let key = format!("x-{k}");
                        if !header.extra.iter().any(|(e, _)| *e == key) {
                            header.extra.push((key, FrontValue::Scalar(v)));
                        }
                    }
                    Skill { header, body }
                },
            )
    }

    proptest! {
        #[test]
        fn round_trip(skill in arb_skill()) {
            let text = skill.to_document();
            prop_assert_eq!(parse_skill(&text).unwrap(), skill);
        }

        #[test]
        fn estimate_is_monotone(a in ".{0,100}", b in ".{0,100}") {
            let joined = format!("{a}{b}");
            prop_assert!(estimate_tokens(&joined) >= estimate_tokens(&a).max(estimate_tokens(&b)));
        }

        #[test]
        fn index_is_cheaper_than_bodies(
            skills in proptest::collection::vec(
                (ident(), "[ -~]{1,80}", "[ -~]{200,400}"), 1..12)
        ) {
            let lib = SkillLibrary::from_skills(skills.into_iter().map(|(n, d, b)| Skill {
                header: SkillHeader::new(n, d),
                body: b,
            }).collect());
            let index = render_header_index(&lib.headers());
            let bodies: usize = lib.skills().iter().map(|s| estimate_tokens(&s.body)).sum();
            prop_assert!(estimate_tokens(&index) < bodies);
        }

        #[test]
        fn index_ignores_input_order(mut headers in proptest::collection::vec(
            (ident(), text()).prop_map(|(n, d)| SkillHeader::new(n, d)), 0..8)
        ) {
            let before = render_header_index(&headers);
            headers.reverse();
            prop_assert_eq!(render_header_index(&headers), before);
        }
    }
}
