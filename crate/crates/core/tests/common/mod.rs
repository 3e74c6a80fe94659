//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use skillbench::assembler::{assemble_source, ProjectBundle};
use skillbench::harness::runner::CampaignContext;
use skillbench::harness::CampaignPlan;
use skillbench::peripheral::PeripheralRegistry;
use skillbench::pipeline::SkillsMode;
use skillbench::provider::{
    ChatProvider, ModelSettings, ProviderConfig, ProviderError, ProviderRequest, ProviderResponse,
    ReplayProvider, TokenUsage,
};
use skillbench::skills::SkillLibrary;
use skillbench::tasks::{load_corpus, Corpus};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn corpus() -> Corpus {
    load_corpus(&fixtures().join("tasks"), &PeripheralRegistry::default()).expect("fixture corpus")
}

pub fn library(mode: SkillsMode) -> Option<SkillLibrary> {
    let dir = match mode {
        SkillsMode::None => return None,
        SkillsMode::LlmGenerated => "llm-generated",
        SkillsMode::HumanExpert => "human-expert",
    };
    Some(SkillLibrary::load_strict(&fixtures().join("skills").join(dir)).expect("fixture skills"))
}

pub fn replay_provider() -> ReplayProvider {
    ReplayProvider::new(fixtures().join("cassettes"))
}

pub fn replay_settings() -> ModelSettings {
    ProviderConfig::load(&fixtures().join("provider/replay.toml"))
        .expect("replay config")
        .settings()
}

/// Records every response's usage, independently of the pipeline's own
/// bookkeeping.
pub struct UsageTap<P> {
    pub inner: P,
    pub seen: Mutex<Vec<TokenUsage>>,
}

impl<P: ChatProvider> UsageTap<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<TokenUsage> {
        std::mem::take(&mut *self.seen.lock().unwrap())
    }
}

impl<P: ChatProvider> ChatProvider for UsageTap<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let response = self.inner.complete(request)?;
        self.seen.lock().unwrap().push(response.usage);
        Ok(response)
    }
}

/// A plan over the fixture corpus with stub toolchain and replay provider.
/// `extra` is appended verbatim (e.g. verdict entries).
pub fn plan(
    journal: &Path,
    tasks: &[&str],
    modes: &[&str],
    attempts: u32,
    extra: &str,
) -> CampaignPlan {
    let list = |items: &[&str]| {
        items
            .iter()
            .map(|s| format!("{s:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let tasks_line = if tasks.is_empty() {
        String::new()
    } else {
        format!("tasks = [{}]\n", list(tasks))
    };
    let text = format!(
        r#"corpus = "tasks"
platforms = ["nrf52840+zephyr"]
modes = [{modes}]
{tasks_line}attempts = {attempts}
journal = {journal:?}
provider = "provider/replay.toml"
toolchain = "toolchain/stub.toml"
workers = 2

[skills]
llm-generated = "skills/llm-generated"
human-expert = "skills/human-expert"

{extra}
"#,
        modes = list(modes),
        journal = journal.display().to_string(),
    );
    CampaignPlan::parse(&text, &fixtures(), Path::new("test-plan.toml")).expect("test plan")
}

/// Loads the context for `plan` and swaps in `provider`.
pub fn context(plan: &CampaignPlan, provider: Arc<dyn ChatProvider>) -> CampaignContext {
    let mut ctx = CampaignContext::load(plan).expect("campaign context");
    ctx.provider = provider;
    ctx
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden")
}

/// One bundle per corpus variant, assembled around a fixed program.
pub fn golden_bundles() -> Vec<(String, ProjectBundle)> {
    let registry = PeripheralRegistry::default();
    corpus()
        .tasks()
        .iter()
        .map(|task| {
            let code = format!(
                "/* {} for {} */\nint main(void)\n{{\n    return 0;\n}}\n",
                task.id, task.target
            );
            let bundle = assemble_source(task, &code, &registry).expect("fixture tasks assemble");
            let name = format!("{}.{}", task.id, task.target.as_str().replace('+', "-"));
            (name, bundle)
        })
        .collect()
}

fn files_below(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Compares every bundle with its golden directory; with `bless` the golden
/// tree is rewritten instead. Returns the number of bundles compared.
pub fn check_goldens(bless: bool) -> Result<usize, String> {
    let bundles = golden_bundles();
    if bless {
        let _ = std::fs::remove_dir_all(golden_dir());
        for (name, bundle) in &bundles {
            bundle
                .write_to(&golden_dir().join(name))
                .map_err(|e| e.to_string())?;
        }
    }
    let mut mismatches = Vec::new();
    for (name, bundle) in &bundles {
        let expected = files_below(&golden_dir().join(name));
        let actual: BTreeMap<String, Vec<u8>> = bundle
            .files
            .iter()
            .map(|(k, v)| (k.clone(), v.clone().into_bytes()))
            .collect();
        if expected != actual {
            mismatches.push(name.clone());
        }
    }
    if mismatches.is_empty() {
        Ok(bundles.len())
    } else {
        Err(format!("golden mismatch: {}", mismatches.join(", ")))
    }
}

/// Declines every verdict request, as if the evaluator walked away; the
/// runner stops and leaves the attempt awaiting a verdict.
pub struct Walkaway;

impl skillbench::harness::VerdictSource for Walkaway {
    fn judge(
        &mut self,
        _: &skillbench::harness::VerdictRequest<'_>,
    ) -> Result<skillbench::harness::Judgement, skillbench::harness::VerdictError> {
        Err(skillbench::harness::VerdictError::Closed)
    }
}

/// Runs a one-task campaign until the first attempt needs a human verdict.
/// Returns the journal path; the attempt `<task>:none:nrf52840+zephyr:1`
/// is awaiting a verdict.
pub fn awaiting_journal(dir: &Path, task: &str) -> PathBuf {
    let journal = dir.join("awaiting.jsonl");
    let plan = plan(&journal, &[task], &["none"], 2, "");
    let ctx = context(&plan, Arc::new(replay_provider()));
    let snapshot = plan.snapshot(&ctx.corpus).unwrap();
    let store = Arc::new(skillbench::harness::Store::open(&journal).unwrap());
    let summary =
        skillbench::harness::run_campaign(&ctx, &snapshot, &store, &mut Walkaway).unwrap();
    assert!(summary.interrupted);
    journal
}
