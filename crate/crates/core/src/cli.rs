//! Command-line entry point.
//!
//! Data goes to standard output, diagnostics and logs to standard error.
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ColorChoice, Parser, Subcommand, ValueEnum};

use crate::harness::api::{self, ApiState, DEFAULT_PORT};
use crate::harness::plan::VerdictKind;
use crate::harness::runner::{verdict_source_for, CampaignContext};
use crate::harness::{run_campaign, AttemptState, CampaignPlan, Store};
use crate::metrics::{Report, ReportFormat};
use crate::peripheral::PeripheralRegistry;
use crate::pipeline::{Pipeline, SkillsMode};
use crate::platform::PlatformId;
use crate::provider::ProviderConfig;
use crate::skills::{generate_skills, render_header_index, validate_library, SkillLibrary};
use crate::tasks::load_corpus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "skillbench",
    version,
    about = "Skills-based firmware generation and hardware-in-the-loop benchmarking"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Paths shared by several commands. Each is checked when a command needs it.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Task corpus directory or file.
    #[arg(
        long,
        global = true,
        env = "SKILLBENCH_CORPUS",
        default_value = "tasks"
    )]
    pub corpus: PathBuf,
    /// Provider configuration file.
    #[arg(
        long,
        global = true,
        env = "SKILLBENCH_PROVIDER",
        default_value = "provider.toml"
    )]
    pub provider: PathBuf,
    /// Skill library for a mode, as MODE=DIR (repeatable).
    #[arg(long = "skills-dir", global = true, value_parser = parse_skills_dir)]
    pub skills_dirs: Vec<(SkillsMode, PathBuf)>,
    /// More log output (repeat for trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,
}

fn parse_skills_dir(s: &str) -> Result<(SkillsMode, PathBuf), String> {
    let (mode, dir) = s
        .split_once('=')
        .ok_or_else(|| format!("{s:?}: expected MODE=DIR"))?;
    let mode: SkillsMode = mode.parse()?;
    if mode == SkillsMode::None {
        return Err("the none mode takes no skill library".into());
    }
    Ok((mode, PathBuf::from(dir)))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect, validate or generate skill libraries.
    #[command(subcommand)]
    Skills(SkillsCommand),
    /// Run the pipeline once for one task and write the project.
    Gen(GenArgs),
    /// Run or resume a campaign described by a plan file.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Serve the control API (and optional dashboard assets) for a journal.
    Serve(ServeArgs),
    /// Outcome tables from a journal.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum SkillsCommand {
    /// Check every skill file and the library as a whole.
    Validate {
        /// Skill library directory.
        dir: PathBuf,
    },
    /// Print the header index the planner sees.
    List {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ListFormat::Text)]
        format: ListFormat,
    },
    /// Ask the provider to write skills for the corpus tasks.
    Generate {
        /// Output directory for the generated skill files.
        #[arg(long)]
        out: PathBuf,
        /// Only these levels (default: all).
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u8>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ListFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub platform: PlatformId,
    /// none, llm-generated or human-expert.
    #[arg(long)]
    pub skills: SkillsMode,
    /// Directory the project is written to.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the run record (prompts, replies, token usage) as JSON.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    /// Start a campaign, or continue it if its journal already exists.
    Run(CampaignArgs),
    /// Continue an existing campaign journal.
    Resume(CampaignArgs),
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Campaign plan (TOML).
    #[arg(long)]
    pub plan: PathBuf,
    /// Use this journal instead of the plan's; the workspace moves with it.
    #[arg(long)]
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub journal: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Static files (e.g. the dashboard build) served next to the API.
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub journal: PathBuf,
    /// Attempts per instance taken into account.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub k: u32,
    /// md, csv or json.
    #[arg(long, default_value = "md")]
    pub format: String,
    /// Count unfinished instances as pending instead of failing.
    #[arg(long)]
    pub partial: bool,
    /// Print mean token usage per task instead of outcomes (markdown).
    #[arg(long)]
    pub tokens: bool,
}

/// A failed command: the message goes to standard error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn existing(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{what} {} does not exist",
            path.display()
        )))
    }
}

fn no_color() -> bool {
    std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty())
}

fn init_logging(global: &GlobalArgs) {
    let level = if global.quiet {
        log::LevelFilter::Error
    } else {
        match global.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    let mut builder = env_logger::Builder::new();
    builder
        .filter_level(level)
        .parse_env("SKILLBENCH_LOG")
        .target(env_logger::Target::Stderr)
        .format_timestamp(None);
    if no_color() {
        builder.write_style(env_logger::WriteStyle::Never);
    }
    let _ = builder.try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let color = if no_color() {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = <Cli as clap::CommandFactory>::command()
        .color(color)
        .try_get_matches_from(args);
    let cli = match matches.and_then(|m| <Cli as clap::FromArgMatches>::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(&cli.global);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(code) => code,
        Err(err) => {
            let (kind, message) = match &err {
                CliError::Usage(m) => ("usage error", m),
                CliError::Domain(m) => ("error", m),
            };
            eprintln!("skillbench: {kind}: {message}");
            if let CliError::Usage(_) = err {
                let usage = <Cli as clap::CommandFactory>::command().render_usage();
                eprintln!("{usage}\nRun 'skillbench --help' for details.");
            }
            err.exit_code()
        }
    }
}

/// Runs a parsed command, writing data to `out`. Returns the exit code for
/// commands that finish with a non-error status other than success.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Skills(cmd) => skills(&cli.global, cmd, out),
        Command::Gen(args) => gen(&cli.global, args, out),
        Command::Campaign(CampaignCommand::Run(args)) => campaign(args, false, out),
        Command::Campaign(CampaignCommand::Resume(args)) => campaign(args, true, out),
        Command::Serve(args) => serve(&cli.global, args),
        Command::Report(args) => report(args, out),
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(domain)
}

fn skills(global: &GlobalArgs, cmd: &SkillsCommand, out: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        SkillsCommand::Validate { dir } => {
            existing(dir, "skill directory")?;
            let (library, files) = SkillLibrary::load(dir).map_err(domain)?;
            let registry = PeripheralRegistry::default();
            let diagnostics = validate_library(&library, &registry);
            for d in &files {
                eprintln!("{d}");
            }
            for d in &diagnostics {
                eprintln!("{d}");
            }
            let problems = files.len() + diagnostics.len();
            write_out(
                out,
                &format!("{} skills, {problems} problem(s)\n", library.len()),
            )?;
            Ok(if problems == 0 { EXIT_OK } else { EXIT_DOMAIN })
        }
        SkillsCommand::List { dir, format } => {
            existing(dir, "skill directory")?;
            let (library, files) = SkillLibrary::load(dir).map_err(domain)?;
            for d in &files {
                log::warn!("skipped {d}");
            }
            let headers = library.headers();
            let text = match format {
                ListFormat::Text => render_header_index(&headers),
                ListFormat::Json => {
                    let items: Vec<_> = headers
                        .iter()
                        .map(|h| {
                            serde_json::json!({
                                "name": h.name,
                                "description": h.description,
                                "platforms": h.platforms,
                                "peripherals": h.peripherals,
                                "origin": h.origin.map(|o| o.as_str()),
                            })
                        })
                        .collect();
                    serde_json::to_string_pretty(&items).expect("json") + "\n"
                }
            };
            write_out(out, &text)?;
            Ok(EXIT_OK)
        }
        SkillsCommand::Generate { out: dir, levels } => {
            existing(&global.corpus, "corpus")?;
            existing(&global.provider, "provider config")?;
            let registry = PeripheralRegistry::default();
            let corpus = load_corpus(&global.corpus, &registry).map_err(domain)?;
            let tasks: Vec<_> = corpus
                .tasks()
                .iter()
                .filter(|t| levels.is_empty() || levels.contains(&t.level))
                .cloned()
                .collect();
            let config = ProviderConfig::load(&global.provider).map_err(domain)?;
            let provider = config.build().map_err(domain)?;
            let generated = generate_skills(&tasks, provider.as_ref(), &config.settings(), dir)
                .map_err(domain)?;
            log::info!(
                "generated {} skills using {} input / {} output tokens",
                generated.skills.len(),
                generated.usage.input_tokens,
                generated.usage.output_tokens
            );
            let mut text = String::new();
            for f in &generated.files {
                text.push_str(&format!("{}\n", f.display()));
            }
            write_out(out, &text)?;
            Ok(EXIT_OK)
        }
    }
}

fn gen(global: &GlobalArgs, args: &GenArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    existing(&global.corpus, "corpus")?;
    existing(&global.provider, "provider config")?;
    let skills_dirs: BTreeMap<SkillsMode, &PathBuf> =
        global.skills_dirs.iter().map(|(m, p)| (*m, p)).collect();
    let library = match args.skills {
        SkillsMode::None => None,
        mode => {
            let dir = skills_dirs.get(&mode).ok_or_else(|| {
                CliError::Usage(format!("--skills {mode} needs --skills-dir {mode}=DIR"))
            })?;
            existing(dir, "skill directory")?;
            Some(SkillLibrary::load_strict(dir).map_err(domain)?)
        }
    };
    let registry = PeripheralRegistry::default();
    let corpus = load_corpus(&global.corpus, &registry).map_err(domain)?;
    let task = corpus.get(&args.task, args.platform).ok_or_else(|| {
        CliError::Domain(format!(
            "no task {} for {} in the corpus",
            args.task, args.platform
        ))
    })?;
    let config = ProviderConfig::load(&global.provider).map_err(domain)?;
    let provider = config.build().map_err(domain)?;
    let settings = config.settings();
    let pipeline = Pipeline {
        provider: provider.as_ref(),
        settings: &settings,
        registry: &registry,
    };
    let run_id = format!("{}:{}:{}", task.id, args.skills, task.target);
    let run = pipeline
        .run(&run_id, task, args.skills, library.as_ref())
        .map_err(domain)?;
    if let Some(path) = &args.record {
        let json = serde_json::to_string_pretty(&run.record).expect("run records serialize");
        std::fs::write(path, json + "\n")
            .map_err(|e| domain(format!("{}: {e}", path.display())))?;
    }
    if let Some(m) = &run.record.manager {
        log::info!("selected skills: [{}]", m.selected.join(", "));
    }
    let usage = run.record.total_usage();
    log::info!(
        "tokens: {} input / {} output",
        usage.input_tokens,
        usage.output_tokens
    );
    let (bundle, extracted) = run.assembly.map_err(domain)?;
    if extracted.discarded_blocks() > 0 {
        log::warn!(
            "reply held {} extra code block(s); kept the largest",
            extracted.discarded_blocks()
        );
    }
    bundle
        .write_to(&args.out)
        .map_err(|e| domain(format!("{}: {e}", args.out.display())))?;
    let mut text = String::new();
    for name in bundle.files.keys() {
        text.push_str(&format!("{}\n", args.out.join(name).display()));
    }
    write_out(out, &text)?;
    Ok(EXIT_OK)
}

fn campaign(args: &CampaignArgs, resume: bool, out: &mut dyn Write) -> Result<i32, CliError> {
    existing(&args.plan, "plan")?;
    let mut plan = CampaignPlan::load(&args.plan).map_err(domain)?;
    if let Some(journal) = &args.journal {
        plan.workspace = journal.with_extension("");
        plan.journal = journal.clone();
    }
    if resume
        && std::fs::metadata(&plan.journal)
            .map(|m| m.len() == 0)
            .unwrap_or(true)
    {
        return Err(CliError::Domain(format!(
            "nothing to resume: {} does not exist",
            plan.journal.display()
        )));
    }
    let ctx = CampaignContext::load(&plan).map_err(domain)?;
    let snapshot = plan.snapshot(&ctx.corpus).map_err(domain)?;
    let store = Arc::new(Store::open(&plan.journal).map_err(domain)?);
    log::info!(
        "{} instances x {} attempts, journal {}",
        snapshot.instances.len(),
        snapshot.attempts,
        plan.journal.display()
    );
    let server = if plan.verdicts.source == VerdictKind::Api {
        let addr = SocketAddr::from(([127, 0, 0, 1], plan.verdicts.port.unwrap_or(DEFAULT_PORT)));
        let state = ApiState {
            store: store.clone(),
            corpus: Some(Arc::new(ctx.corpus.clone())),
        };
        let handle = api::serve(state, addr, None).map_err(domain)?;
        log::info!("awaiting verdicts through http://{}/api", handle.addr);
        Some(handle)
    } else {
        None
    };
    let mut verdicts = verdict_source_for(&plan, &store, &ctx.stop);
    let result = run_campaign(&ctx, &snapshot, &store, verdicts.as_mut());
    if let Some(handle) = server {
        let _ = handle.shutdown();
    }
    let summary = result.map_err(domain)?;
    let mut text = String::new();
    for state in AttemptState::ALL {
        text.push_str(&format!(
            "{:<17} {}\n",
            state.as_str(),
            summary.count(state)
        ));
    }
    text.push_str(&format!("{:<17} {}\n", "generated-now", summary.generated));
    write_out(out, &text)?;
    let finished = store.read(|s| s.is_finished());
    if finished {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "skillbench: campaign not finished{}; continue with 'campaign resume --plan {}'",
            if summary.interrupted {
                " (interrupted)"
            } else {
                ""
            },
            args.plan.display()
        );
        Ok(EXIT_DOMAIN)
    }
}

fn serve(global: &GlobalArgs, args: &ServeArgs) -> Result<i32, CliError> {
    existing(&args.journal, "journal")?;
    if let Some(dir) = &args.assets {
        existing(dir, "asset directory")?;
    }
    let store = match Store::open(&args.journal) {
        Ok(store) => store,
        Err(crate::harness::store::StoreError::Journal(crate::harness::JournalError::Locked(
            _,
        ))) => {
            log::warn!(
                "{} is being written by another process; serving a read-only snapshot",
                args.journal.display()
            );
            Store::open_read_only(&args.journal).map_err(domain)?
        }
        Err(e) => return Err(domain(e)),
    };
    let corpus = if global.corpus.exists() {
        Some(Arc::new(
            load_corpus(&global.corpus, &PeripheralRegistry::default()).map_err(domain)?,
        ))
    } else {
        None
    };
    let state = ApiState {
        store: Arc::new(store),
        corpus,
    };
    let handle = api::serve(
        state,
        SocketAddr::new(args.host, args.port),
        args.assets.clone(),
    )
    .map_err(domain)?;
    eprintln!(
        "skillbench: serving http://{}/api (Ctrl-C to stop)",
        handle.addr
    );
    handle.join().map_err(domain)?;
    Ok(EXIT_OK)
}

fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let format: ReportFormat = args
        .format
        .parse()
        .map_err(|e: crate::metrics::MetricsError| CliError::Usage(e.to_string()))?;
    existing(&args.journal, "journal")?;
    let store = Store::open_read_only(&args.journal).map_err(domain)?;
    let (results, attempts) = store.read(|s| {
        (
            s.instance_results(),
            s.plan.as_ref().map_or(0, |p| p.attempts),
        )
    });
    let k = args.k as usize;
    if attempts > 0 && k > attempts as usize {
        return Err(CliError::Usage(format!(
            "--k {k} exceeds the {attempts} attempts per instance in this journal"
        )));
    }
    let report = if args.partial {
        Report::partial(&results, k)
    } else {
        Report::build(&results, k).map_err(domain)?
    };
    let text = if args.tokens {
        report.to_token_markdown()
    } else {
        report.emit(format)
    };
    write_out(out, &text)?;
    Ok(EXIT_OK)
}
