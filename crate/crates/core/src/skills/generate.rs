//! Model-authored skill libraries.
//!
//! One request per task level. The model cannot write files, so the reply is
//! split into skill documents: fenced markdown blocks first, then bare
//! frontmatter documents. Documents without a header get a synthesized one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{normalize_name, parse_skill, Skill, SkillHeader, SkillOrigin};
use crate::provider::{ChatProvider, ModelSettings, ProviderError, TokenUsage};
use crate::tasks::TaskSpec;

pub const GENERATED_DIR_NAME: &str = "skills-llm-generated";

const PROMPT_TEMPLATE: &str = include_str!("generation_prompt.txt");

const SYSTEM_PROMPT: &str =
    "You are an embedded systems engineer writing reusable skill documents for a code-generating agent.";

const OUTPUT_FORMAT: &str = "You cannot write files directly. Return every skill document as its own ```markdown fenced block, \
and put the file name (for example skills-llm-generated/esp-idf-gpio.md) on the line just before the block.";

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("no tasks to generate skills for")]
    NoTasks,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no skill documents found in the level {level} response (raw text saved to {raw})")]
    UnparseableGeneration { level: u8, raw: PathBuf },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default)]
pub struct GenerationOutput {
    pub files: Vec<PathBuf>,
    pub skills: Vec<Skill>,
    pub usage: TokenUsage,
}

/// The skill-generation prompt for one level, followed by the task file it
/// refers to.
pub fn generation_prompt(level: u8, tasks: &[&TaskSpec]) -> Vec<String> {
    let prompt = PROMPT_TEMPLATE.replace("{level}", &level.to_string());
    let mut listing = format!("tasks/level{level}.txt:\n\n");
    for task in tasks {
        listing.push_str(&format!(
            "Task: {}\n{}\n\n",
            task.title,
            task.description.trim()
        ));
    }
    vec![
        prompt.trim_end().to_string(),
        listing.trim_end().to_string(),
        OUTPUT_FORMAT.to_string(),
    ]
}

/// One document candidate: its text plus the file name hint, if any.
struct RawDoc {
    file_hint: Option<String>,
    text: String,
}

fn fence_open(line: &str) -> Option<(char, usize, &str)> {
    let trimmed = line.trim_start();
    let ch = trimmed.chars().next()?;
    if ch != '`' && ch != '~' {
        return None;
    }
    let n = trimmed.chars().take_while(|&c| c == ch).count();
    (n >= 3).then(|| (ch, n, trimmed[n..].trim()))
}

fn file_hint(line: &str) -> Option<String> {
    let cleaned = line
        .trim()
        .trim_matches(|c: char| c == '#' || c == '*' || c == '`' || c == ':' || c.is_whitespace());
    let candidate = cleaned.rsplit(|c: char| c.is_whitespace()).next()?;
    let candidate = candidate.trim_matches('`');
    let stem = candidate.strip_suffix(".md")?;
    let stem = stem.rsplit('/').next()?;
    (!stem.is_empty()).then(|| stem.to_string())
}

/// Fenced blocks tagged markdown/md, or untagged blocks that start with
/// frontmatter. Inner code fences (```c ... ```) are kept inside the block.
fn markdown_blocks(text: &str) -> Vec<RawDoc> {
    let lines: Vec<&str> = text.lines().collect();
    let mut docs = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some((ch, n, info)) = fence_open(lines[i]) else {
            i += 1;
            continue;
        };
        let lang = info
            .split_whitespace()
            .next()
            .unwrap_or("")
            .to_ascii_lowercase();
        let is_md = lang == "markdown" || lang == "md";
        let starts_frontmatter =
            lang.is_empty() && lines.get(i + 1).is_some_and(|l| l.trim() == "---");
        let hint = lines[..i]
            .iter()
            .rev()
            .find(|l| !l.trim().is_empty())
            .and_then(|l| file_hint(l));
        let mut body = Vec::new();
        let mut inner_open = false;
        let mut j = i + 1;
        let mut closed = false;
        while j < lines.len() {
            let line = lines[j];
            if let Some((c2, n2, info2)) = fence_open(line) {
                if is_md && c2 == ch && !inner_open && !info2.is_empty() {
                    inner_open = true;
                } else if is_md && inner_open && c2 == ch && info2.is_empty() {
                    inner_open = false;
                } else if c2 == ch && n2 >= n && info2.is_empty() {
                    closed = true;
                    break;
                }
            }
            body.push(line);
            j += 1;
        }
        if (is_md || starts_frontmatter) && closed {
            docs.push(RawDoc {
                file_hint: hint,
                text: body.join("\n") + "\n",
            });
        }
        i = j + 1;
    }
    docs
}

/// Bare `---` / `name:` documents laid end to end.
fn frontmatter_documents(text: &str) -> Vec<RawDoc> {
    let lines: Vec<&str> = text.lines().collect();
    let starts: Vec<usize> = (0..lines.len())
        .filter(|&i| {
            lines[i].trim_end() == "---"
                && lines
                    .get(i + 1)
                    .is_some_and(|l| l.starts_with("name:") || l.starts_with("description:"))
        })
        .collect();
    starts
        .iter()
        .enumerate()
        .map(|(k, &start)| {
            let end = starts.get(k + 1).copied().unwrap_or(lines.len());
            RawDoc {
                file_hint: None,
                text: lines[start..end].join("\n") + "\n",
            }
        })
        .collect()
}

fn synthesize(doc: &RawDoc, ordinal: usize) -> Option<Skill> {
    if doc.text.trim().is_empty() {
        return None;
    }
    let heading = doc
        .text
        .lines()
        .find(|l| l.trim_start().starts_with('#'))
        .map(|l| l.trim_start().trim_start_matches('#').trim().to_string());
    let first_line = doc
        .text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or_default()
        .to_string();
    let name = doc
        .file_hint
        .as_deref()
        .or(heading.as_deref())
        .map(normalize_name)
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| format!("generated-skill-{ordinal}"));
    let description: String = heading
        .filter(|h| !h.is_empty())
        .unwrap_or(first_line)
        .chars()
        .take(200)
        .collect();
    let mut header = SkillHeader::new(name, description);
    header.origin = Some(SkillOrigin::LlmGenerated);
    Some(Skill {
        header,
        body: doc.text.clone(),
    })
}

/// Extracts skill documents from a model reply. Every returned skill is
/// marked `origin: llm-generated`.
pub fn parse_generated(response: &str) -> Vec<Skill> {
    let mut docs = markdown_blocks(response);
    if docs.is_empty() {
        docs = frontmatter_documents(response);
    }
    let mut used = BTreeSet::new();
    let mut skills = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        let parsed = if doc.text.starts_with("---") {
            parse_skill(&doc.text).ok()
        } else {
            None
        };
        let Some(mut skill) = parsed.or_else(|| synthesize(doc, i + 1)) else {
            continue;
        };
        skill.header.origin = Some(SkillOrigin::LlmGenerated);
        let base = normalize_name(&skill.header.name);
        let mut name = base.clone();
        let mut n = 2;
        while !used.insert(name.clone()) {
            name = format!("{base}-{n}");
            n += 1;
        }
        skill.header.name = name;
        skills.push(skill);
    }
    skills
}

/// Asks the provider for skills covering `tasks`, one request per level, and
/// writes each document to `out_dir/<name>.md`.
pub fn generate_skills(
    tasks: &[TaskSpec],
    provider: &dyn ChatProvider,
    settings: &ModelSettings,
    out_dir: &Path,
) -> Result<GenerationOutput, GenerateError> {
    if tasks.is_empty() {
        return Err(GenerateError::NoTasks);
    }
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GenerateError::Io { path, source }
    };
    let mut by_level: BTreeMap<u8, BTreeMap<&str, &TaskSpec>> = BTreeMap::new();
    for task in tasks {
        by_level
            .entry(task.level)
            .or_default()
            .entry(task.id.as_str())
            .or_insert(task);
    }
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut output = GenerationOutput::default();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    for (level, tasks) in by_level {
        let tasks: Vec<&TaskSpec> = tasks.into_values().collect();
        let request = settings.request(SYSTEM_PROMPT.to_string(), generation_prompt(level, &tasks));
        let response = settings.retry.call(provider, &request)?;
        output.usage += response.usage;
        let skills = parse_generated(&response.text);
        if skills.is_empty() {
            let raw_dir = out_dir.join("_raw");
            fs::create_dir_all(&raw_dir).map_err(io(&raw_dir))?;
            let raw = raw_dir.join(format!("level{level}.txt"));
            fs::write(&raw, &response.text).map_err(io(&raw))?;
            return Err(GenerateError::UnparseableGeneration { level, raw });
        }
        for mut skill in skills {
            let base = skill.header.name.clone();
            let mut n = 2;
            while !taken.insert(skill.header.name.clone()) {
                skill.header.name = format!("{base}-{n}");
                n += 1;
            }
            let path = out_dir.join(format!("{}.md", skill.header.name));
            fs::write(&path, skill.to_document()).map_err(io(&path))?;
            output.files.push(path);
            output.skills.push(skill);
        }
    }
    Ok(output)
}
