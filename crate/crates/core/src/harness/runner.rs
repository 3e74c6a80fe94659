//! Executes a campaign: model calls on a worker pool, then build, flash,
//! capture and verdict one attempt at a time, journaling every step.
//!
//! Running against an existing journal resumes it. Attempts whose generation
//! is journaled are never sent to the provider again; everything after
//! generation is cheap and deterministic to redo, so an attempt interrupted
//! between generation and its verdict is rebuilt from its recorded code.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use thiserror::Error;

use super::journal::Event;
use super::plan::{CampaignPlan, PlanError, PlanSnapshot, VerdictKind};
use super::state::{AttemptRecord, AttemptState, Phase};
use super::store::{Store, StoreError, VerdictRejection};
use super::verdict::{
    InteractiveVerdicts, Judgement, ScriptedVerdicts, SerialMatcher, StoreVerdicts, VerdictError,
    VerdictRequest, VerdictSource,
};
use crate::assembler::assemble_source;
use crate::metrics::Outcome;
use crate::peripheral::PeripheralRegistry;
use crate::pipeline::{Pipeline, SkillsMode};
use crate::provider::{ChatProvider, ModelSettings, ProviderConfig};
use crate::skills::SkillLibrary;
use crate::tasks::{load_corpus, CheckMode, Corpus};
use crate::toolchain::{
    capture_serial, compile, flash, BuildResult, BuildStatus, FlashStatus, ToolchainProfiles,
};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Setup(String),
}

/// Everything a campaign needs, already loaded.
pub struct CampaignContext {
    pub corpus: Corpus,
    pub registry: PeripheralRegistry,
    pub libraries: BTreeMap<SkillsMode, SkillLibrary>,
    pub provider: Arc<dyn ChatProvider>,
    pub settings: ModelSettings,
    pub toolchains: ToolchainProfiles,
    /// Root of the per-attempt project directories.
    pub workspace: PathBuf,
    pub workers: usize,
    /// Set to stop after the current step.
    pub stop: Arc<AtomicBool>,
}

impl CampaignContext {
    /// Loads corpus, skill libraries, provider and toolchain profiles named by
    /// `plan`.
    pub fn load(plan: &CampaignPlan) -> Result<Self, RunnerError> {
        let registry = PeripheralRegistry::default();
        let corpus = load_corpus(&plan.corpus, &registry)
            .map_err(|e| RunnerError::Setup(format!("corpus: {e}")))?;
        let mut libraries = BTreeMap::new();
        for (mode, dir) in &plan.skills {
            if !plan.modes.contains(mode) {
                continue;
            }
            let lib = SkillLibrary::load_strict(dir)
                .map_err(|e| RunnerError::Setup(format!("{mode} skills: {e}")))?;
            libraries.insert(*mode, lib);
        }
        let provider_cfg = ProviderConfig::load(&plan.provider)
            .map_err(|e| RunnerError::Setup(format!("provider: {e}")))?;
        let provider = provider_cfg
            .build()
            .map_err(|e| RunnerError::Setup(format!("provider: {e}")))?;
        let toolchains = ToolchainProfiles::load(&plan.toolchain)
            .map_err(|e| RunnerError::Setup(e.to_string()))?;
        for platform in &plan.platforms {
            let profile = toolchains
                .get(*platform)
                .map_err(|e| RunnerError::Setup(e.to_string()))?;
            profile.check_versions();
        }
        Ok(Self {
            corpus,
            registry,
            libraries,
            provider,
            settings: provider_cfg.settings(),
            toolchains,
            // Toolchains run inside the attempt directory, so relative
            // workspace paths would not resolve there.
            workspace: std::path::absolute(&plan.workspace)
                .map_err(|e| RunnerError::Setup(format!("{}: {e}", plan.workspace.display())))?,
            workers: plan.workers,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignSummary {
    pub counts: BTreeMap<AttemptState, usize>,
    /// Pipeline runs executed in this session.
    pub generated: usize,
    /// The verdict source closed or a stop was requested before the end.
    pub interrupted: bool,
}

impl CampaignSummary {
    pub fn count(&self, state: AttemptState) -> usize {
        self.counts.get(&state).copied().unwrap_or(0)
    }
}

/// Builds the verdict source a plan asks for.
pub fn verdict_source_for(
    plan: &CampaignPlan,
    store: &Arc<Store>,
    stop: &Arc<AtomicBool>,
) -> Box<dyn VerdictSource> {
    let base: Box<dyn VerdictSource> = match plan.verdicts.source {
        VerdictKind::Scripted => Box::new(ScriptedVerdicts::new(
            plan.verdicts.entries.clone(),
            plan.verdicts.default,
        )),
        VerdictKind::Interactive => Box::new(InteractiveVerdicts::new(
            std::io::BufReader::new(std::io::stdin()),
            std::io::stderr(),
            std::env::var("USER").ok(),
        )),
        VerdictKind::Api => Box::new(StoreVerdicts::new(store.clone(), stop.clone())),
    };
    if plan.verdicts.serial_matcher {
        Box::new(SerialMatcher::new(base))
    } else {
        base
    }
}

/// Starts or resumes the journal in `store` for `snapshot` and runs it to
/// completion (or until interrupted).
pub fn run_campaign(
    ctx: &CampaignContext,
    snapshot: &PlanSnapshot,
    store: &Arc<Store>,
    verdicts: &mut dyn VerdictSource,
) -> Result<CampaignSummary, RunnerError> {
    match store.read(|s| s.plan.clone()) {
        None => {
            store.append(Event::Started {
                plan: snapshot.clone(),
            })?;
        }
        Some(existing) if existing != *snapshot => {
            return Err(PlanError::PlanChanged(format!(
                "journal has {} instances x {} attempts, plan has {} x {}",
                existing.instances.len(),
                existing.attempts,
                snapshot.instances.len(),
                snapshot.attempts
            ))
            .into());
        }
        Some(_) => log::info!("resuming journal {}", store.path().display()),
    }

    let order: Vec<String> = store.read(|s| s.ordered().iter().map(|a| a.id.clone()).collect());
    let to_generate: Vec<String> = store.read(|s| {
        s.ordered()
            .iter()
            .filter(|a| a.needs_generation())
            .map(|a| a.id.clone())
            .collect()
    });
    let next = AtomicUsize::new(0);
    let generated = AtomicUsize::new(0);
    let finished: Mutex<BTreeSet<String>> = Mutex::new(BTreeSet::new());
    let failure: Mutex<Option<StoreError>> = Mutex::new(None);
    let abort = AtomicBool::new(false);

    let interrupted = std::thread::scope(|scope| {
        for _ in 0..ctx.workers.max(1).min(to_generate.len().max(1)) {
            scope.spawn(|| loop {
                if abort.load(Ordering::SeqCst) || ctx.stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(id) = to_generate.get(i) else { break };
                let result = generate(ctx, store, id);
                generated.fetch_add(1, Ordering::SeqCst);
                finished.lock().expect("finished set").insert(id.clone());
                store.notify();
                if let Err(e) = result {
                    *failure.lock().expect("failure slot") = Some(e);
                    abort.store(true, Ordering::SeqCst);
                    store.notify();
                    break;
                }
            });
        }

        let mut interrupted = false;
        for id in &order {
            // Wait until generation for this attempt is settled.
            let ready = loop {
                let ready = store.wait_until(Some(POLL), |s| {
                    let rec = s.get(id)?;
                    let done = !rec.needs_generation()
                        || finished.lock().expect("finished set").contains(id)
                        || abort.load(Ordering::SeqCst)
                        || ctx.stop.load(Ordering::SeqCst);
                    done.then(|| rec.clone())
                });
                if ready.is_some() {
                    break ready;
                }
            };
            if abort.load(Ordering::SeqCst) {
                break;
            }
            if ctx.stop.load(Ordering::SeqCst) {
                interrupted = true;
                break;
            }
            let rec = ready.expect("loop exits with a record");
            match hil(ctx, store, &rec, verdicts) {
                Ok(true) => {}
                Ok(false) => {
                    interrupted = true;
                    abort.store(true, Ordering::SeqCst);
                    break;
                }
                Err(e) => {
                    *failure.lock().expect("failure slot") = Some(e);
                    abort.store(true, Ordering::SeqCst);
                    break;
                }
            }
        }
        interrupted
    });

    if let Some(err) = failure.into_inner().expect("failure slot") {
        return Err(err.into());
    }
    Ok(CampaignSummary {
        counts: store.read(|s| s.counts()),
        generated: generated.into_inner(),
        interrupted,
    })
}

fn generate(ctx: &CampaignContext, store: &Store, id: &str) -> Result<(), StoreError> {
    let Some(rec) = store.read(|s| s.get(id).cloned()) else {
        return Ok(());
    };
    let key = &rec.instance;
    let fail = |phase: Phase, reason: String| {
        log::warn!("attempt {id}: {reason}");
        store
            .append(Event::Incomplete {
                attempt: id.to_string(),
                phase,
                reason,
            })
            .map(|_| ())
    };
    let Some(task) = ctx.corpus.get(&key.task, key.platform) else {
        return fail(
            Phase::Generation,
            format!("task {} missing from corpus", key.task),
        );
    };
    let pipeline = Pipeline {
        provider: ctx.provider.as_ref(),
        settings: &ctx.settings,
        registry: &ctx.registry,
    };
    match pipeline.run(id, task, key.mode, ctx.libraries.get(&key.mode)) {
        Ok(run) => {
            let (code, extraction) = match run.assembly {
                Ok((_, extracted)) => (Some(extracted.code), Some(extracted.note)),
                Err(e) => {
                    log::info!("attempt {id}: {e}");
                    (None, None)
                }
            };
            store
                .append(Event::Generated {
                    attempt: id.to_string(),
                    run: Box::new(run.record),
                    code,
                    extraction,
                })
                .map(|_| ())
        }
        Err(e) => fail(Phase::Generation, e.to_string()),
    }
}

const NO_CODE_LOG: &str = "no source code found in the model reply\n";

/// Runs the hardware half of one attempt. Returns `Ok(false)` when the
/// verdict source closed.
fn hil(
    ctx: &CampaignContext,
    store: &Store,
    rec: &AttemptRecord,
    verdicts: &mut dyn VerdictSource,
) -> Result<bool, StoreError> {
    let id = rec.id.as_str();
    let incomplete = |phase: Phase, reason: String| {
        log::warn!("attempt {id}: {reason}");
        store
            .append(Event::Incomplete {
                attempt: id.to_string(),
                phase,
                reason,
            })
            .map(|_| true)
    };
    match rec.state {
        AttemptState::Complete | AttemptState::Pending => return Ok(true),
        AttemptState::Incomplete if rec.run.is_none() => return Ok(true),
        AttemptState::AwaitingVerdict => return verdict(ctx, store, id, verdicts),
        _ => {}
    }
    let key = &rec.instance;
    let Some(task) = ctx.corpus.get(&key.task, key.platform) else {
        return incomplete(
            Phase::Build,
            format!("task {} missing from corpus", key.task),
        );
    };
    let Some(code) = &rec.code else {
        let build = BuildResult {
            status: BuildStatus::CompileFailure,
            log: NO_CODE_LOG.to_string(),
            duration_ms: 0,
            exit_code: None,
            timed_out: false,
        };
        store.append(Event::Built {
            attempt: id.to_string(),
            build,
            flash: None,
        })?;
        store.append(Event::Completed {
            attempt: id.to_string(),
            outcome: Outcome::CF,
            verdict: None,
        })?;
        return Ok(true);
    };
    let bundle = match assemble_source(task, code, &ctx.registry) {
        Ok(b) => b,
        Err(e) => return incomplete(Phase::Build, e.to_string()),
    };
    let profile = match ctx.toolchains.get(key.platform) {
        Ok(p) => p,
        Err(e) => return incomplete(Phase::Build, e.to_string()),
    };
    let dir = ctx
        .workspace
        .join(key.dir_name())
        .join(rec.index.to_string());
    if dir.exists() {
        if let Err(e) = std::fs::remove_dir_all(&dir) {
            return incomplete(Phase::Build, format!("cleaning {}: {e}", dir.display()));
        }
    }
    let build = match compile(&bundle, profile, &dir) {
        Ok(b) => b,
        Err(e) => return incomplete(Phase::Build, e.to_string()),
    };
    if build.status != BuildStatus::Ok {
        store.append(Event::Built {
            attempt: id.to_string(),
            build,
            flash: None,
        })?;
        store.append(Event::Completed {
            attempt: id.to_string(),
            outcome: Outcome::CF,
            verdict: None,
        })?;
        return Ok(true);
    }
    let flashed = match flash(&bundle, profile, &dir) {
        Ok(f) => f,
        Err(e) => return incomplete(Phase::Flash, e.to_string()),
    };
    let flash_ok = flashed.status == FlashStatus::Ok;
    store.append(Event::Built {
        attempt: id.to_string(),
        build,
        flash: Some(flashed),
    })?;
    if !flash_ok {
        store.append(Event::Completed {
            attempt: id.to_string(),
            outcome: Outcome::CF,
            verdict: None,
        })?;
        return Ok(true);
    }
    let window = task.check.capture_window();
    let transcript = match capture_serial(profile, &bundle, &dir, window) {
        Ok(t) => Some(t),
        Err(e) if task.check.mode == CheckMode::SerialPattern => {
            return incomplete(Phase::Capture, e.to_string());
        }
        Err(e) => {
            log::debug!("attempt {id}: no serial transcript: {e}");
            None
        }
    };
    store.append(Event::AwaitingVerdict {
        attempt: id.to_string(),
        transcript,
    })?;
    verdict(ctx, store, id, verdicts)
}

fn verdict(
    ctx: &CampaignContext,
    store: &Store,
    id: &str,
    verdicts: &mut dyn VerdictSource,
) -> Result<bool, StoreError> {
    let Some(rec) = store.read(|s| s.get(id).cloned()) else {
        return Ok(true);
    };
    let Some(task) = ctx.corpus.get(&rec.instance.task, rec.instance.platform) else {
        return Ok(true);
    };
    let judged = verdicts.judge(&VerdictRequest {
        attempt: &rec,
        task,
    });
    match judged {
        Ok(Judgement::Recorded) => Ok(true),
        Ok(Judgement::Decided {
            value,
            notes,
            source,
            evaluator,
        }) => match store.submit_verdict(id, value, notes, source, evaluator) {
            Ok(_) => Ok(true),
            // Someone else (the API) judged it first.
            Err(VerdictRejection::Conflict { .. }) => Ok(true),
            Err(VerdictRejection::NotFound(_)) => Ok(true),
            Err(VerdictRejection::Store(e)) => Err(e),
        },
        Err(VerdictError::Closed) => Ok(false),
        Err(e) => {
            log::warn!("attempt {id}: {e}");
            store.append(Event::Incomplete {
                attempt: id.to_string(),
                phase: Phase::Verdict,
                reason: e.to_string(),
            })?;
            Ok(true)
        }
    }
}

/// Polling interval used when waiting on other threads.
pub const POLL: Duration = Duration::from_millis(200);
