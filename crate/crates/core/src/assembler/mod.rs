//! Turns a model reply into a buildable project tree for the task's platform.

mod extract;
mod overlay;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::peripheral::{Interface, PeripheralRegistry};
use crate::platform::PlatformId;
use crate::tasks::TaskSpec;

pub use extract::{extract_code, ExtractedSource, ExtractionNote};
pub use overlay::generate_overlay;

const ESP_IDF_PROJECT: &str = include_str!("templates/esp_idf_project.cmake");
const ESP_IDF_MAIN: &str = include_str!("templates/esp_idf_main.cmake");
const ZEPHYR_PROJECT: &str = include_str!("templates/zephyr_project.cmake");
const ZEPHYR_PRJ_CONF: &str = include_str!("templates/prj.conf");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssembleError {
    #[error("no source code found in the model reply")]
    NoCodeFound,
    #[error("invalid pin descriptor {pin}: {reason}")]
    InvalidDescriptor { pin: String, reason: String },
}

/// A complete project: relative path -> file contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectBundle {
    pub platform: PlatformId,
    /// Directory (relative to the workspace) the toolchain should be pointed
    /// at. Empty when the project lives at the workspace root.
    pub root: String,
    /// Path of the file holding the generated source.
    pub entry: String,
    pub files: BTreeMap<String, String>,
}

impl ProjectBundle {
    /// Writes every file below `dir`, creating directories as needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        Ok(())
    }

    /// Absolute project root given the workspace it was written to.
    pub fn root_in(&self, workspace: &Path) -> PathBuf {
        if self.root.is_empty() {
            workspace.to_path_buf()
        } else {
            workspace.join(&self.root)
        }
    }

    pub fn entry_source(&self) -> &str {
        self.files
            .get(&self.entry)
            .map(String::as_str)
            .unwrap_or("")
    }
}

/// Project name used by CMake-based layouts.
pub fn project_name(task_id: &str) -> String {
    task_id.replace('-', "_")
}

fn render_template(template: &str, task: &TaskSpec) -> String {
    template
        .replace("{task_id}", &task.id)
        .replace("{platform}", task.target.as_str())
        .replace("{project_name}", &project_name(&task.id))
}

/// Renders `prj.conf`: a fixed baseline plus bus drivers the task needs.
pub fn render_prj_conf(task: &TaskSpec, registry: &PeripheralRegistry) -> String {
    let mut out = render_template(ZEPHYR_PRJ_CONF, task);
    let interfaces = task.interfaces(registry);
    if interfaces.contains(&Interface::I2c) {
        out.push_str("CONFIG_I2C=y\n");
    }
    if interfaces.contains(&Interface::Spi) {
        out.push_str("CONFIG_SPI=y\n");
    }
    out
}

fn with_newline(code: &str) -> String {
    let mut s = code.to_string();
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Builds the project tree around already-extracted source code.
pub fn assemble_source(
    task: &TaskSpec,
    code: &str,
    registry: &PeripheralRegistry,
) -> Result<ProjectBundle, AssembleError> {
    let code = with_newline(code);
    let mut files = BTreeMap::new();
    let (root, entry) = match task.target {
        PlatformId::Arduino => {
            let entry = format!("{0}/{0}.ino", task.id);
            files.insert(entry.clone(), code);
            (task.id.clone(), entry)
        }
        PlatformId::EspIdf => {
            files.insert(
                "CMakeLists.txt".into(),
                render_template(ESP_IDF_PROJECT, task),
            );
            files.insert(
                "main/CMakeLists.txt".into(),
                render_template(ESP_IDF_MAIN, task),
            );
            files.insert("main/main.c".into(), code);
            (String::new(), "main/main.c".to_string())
        }
        PlatformId::Zephyr => {
            files.insert(
                "CMakeLists.txt".into(),
                render_template(ZEPHYR_PROJECT, task),
            );
            files.insert("prj.conf".into(), render_prj_conf(task, registry));
            files.insert("app.overlay".into(), generate_overlay(task, registry)?);
            files.insert("src/main.c".into(), code);
            (String::new(), "src/main.c".to_string())
        }
    };
    Ok(ProjectBundle {
        platform: task.target,
        root,
        entry,
        files,
    })
}

/// Extracts code from a raw model reply and assembles the project.
pub fn assemble(
    task: &TaskSpec,
    raw_reply: &str,
    registry: &PeripheralRegistry,
) -> Result<(ProjectBundle, ExtractedSource), AssembleError> {
    let extracted = extract_code(raw_reply)?;
    let bundle = assemble_source(task, &extracted.code, registry)?;
    Ok((bundle, extracted))
}
