//! `wd`: the rewriting pipeline from the command line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wd_core::anchors::{calibrate, AxisCache, CalibrationReport};
use wd_core::config::ServiceConfig;
use wd_core::domain::{DimensionRegistry, Draft, Granularity, IntentionProfile};
use wd_core::explainer::NuanceReport;
use wd_core::pipeline::{Pipeline, RewriteOutcome, TargetSpec};
use wd_core::rewriter::{Adjustment, Diversity};
use wd_core::session::{Clock, EventPayload, IdSource, RandomIds, Session, SessionError, SystemClock};
use wd_core::{Error, ErrorClass};

const SESSION_FILE: &str = ".wd-session";

#[derive(Parser)]
#[command(name = "wd", version, about = "Rewrite drafts toward the tone you intend")]
struct Cli {
    /// Config file; falls back to $WD_CONFIG, then built-in defaults.
    #[arg(long, global = true, env = "WD_CONFIG")]
    config: Option<PathBuf>,
    /// Print canonical JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect and score the intentions a draft conveys.
    Analyze {
        file: PathBuf,
        #[arg(long)]
        granularity: Option<Granularity>,
    },
    /// Analyze a draft, then rewrite it toward adjusted targets.
    Rewrite(RewriteArgs),
    /// Nuance report for the suggestions of the last rewrite here.
    Explain,
    /// Build every axis from the anchors file and self-test the poles.
    Calibrate,
    /// Run the HTTP service.
    Serve,
}

#[derive(Args)]
struct RewriteArgs {
    file: PathBuf,
    /// `dimension=score` or `dimension=+delta`; repeatable.
    #[arg(long = "set", value_name = "DIM=VALUE", conflicts_with = "native")]
    set: Vec<Adjustment>,
    /// The same message in your native language; targets are inferred from it.
    #[arg(long, value_name = "FILE", requires = "lang")]
    native: Option<PathBuf>,
    /// Language tag of the native text, e.g. `zh`.
    #[arg(long, requires = "native")]
    lang: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    granularity: Option<Granularity>,
    #[arg(long)]
    diversity: Option<Diversity>,
}

enum Failure {
    Core(Error),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Core(e) => match e.class() {
                ErrorClass::Validation | ErrorClass::NotFound | ErrorClass::Conflict => 4,
                ErrorClass::Provider | ErrorClass::ModelOutput | ErrorClass::Rejected => 3,
                ErrorClass::Internal => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(msg) => f.write_str(msg),
        }
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Core(e.into())
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            if let Failure::Core(e) = &f {
                for r in e.rejections().unwrap_or_default() {
                    eprintln!("  rejected: {}", serde_json::to_string(&r.reason).unwrap_or_default());
                }
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let cfg = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig::from_env()?,
    };
    match cli.command {
        Command::Analyze { file, granularity } => analyze(&cfg, &file, granularity, cli.json),
        Command::Rewrite(args) => rewrite(&cfg, args, cli.json),
        Command::Explain => explain(&cfg, cli.json),
        Command::Calibrate => run_calibration(&cfg, cli.json),
        Command::Serve => serve(cfg),
    }
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_draft(path: &Path, granularity: Option<Granularity>) -> Outcome<Draft> {
    Ok(Draft::new(read_text(path)?, granularity.unwrap_or_default())?)
}

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn session_path() -> PathBuf {
    PathBuf::from(SESSION_FILE)
}

fn save_session(session: &Session) -> Outcome<()> {
    let path = session_path();
    let tmp = path.with_extension("tmp");
    let text = serde_json::to_string_pretty(session).map_err(|e| Failure::Io(e.to_string()))?;
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, &path))
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_session() -> Outcome<Session> {
    let path = session_path();
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(SessionError::NoPriorRewrite.into()),
        Err(e) => return Err(Failure::Io(format!("{}: {e}", path.display()))),
    };
    serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn new_session(draft: Draft, profile: IntentionProfile) -> Outcome<Session> {
    let clock = SystemClock;
    let mut session = Session::new(RandomIds.next_id(), clock.now());
    session.append(EventPayload::Analyze { draft, profile }, clock.now())?;
    Ok(session)
}

fn print_profile(profile: &IntentionProfile, registry: &DimensionRegistry) {
    for e in profile.entries() {
        let dim = registry.get(&e.dimension_id);
        let scale = dim.map(|d| format!("  (1 = {}, 7 = {})", d.negative_pole(), d.positive_pole())).unwrap_or_default();
        println!("{:<26}{:.1}{scale}", e.dimension_id, e.score.display_value());
    }
}

fn analyze(cfg: &ServiceConfig, file: &Path, granularity: Option<Granularity>, json: bool) -> Outcome<()> {
    let draft = read_draft(file, granularity)?;
    let pipeline = Pipeline::from_config(cfg)?;
    let profile = pipeline.analyze(&draft, None, None)?;
    save_session(&new_session(draft, profile.clone())?)?;
    if json {
        return print_json(&profile);
    }
    print_profile(&profile, pipeline.registry());
    Ok(())
}

fn rewrite(cfg: &ServiceConfig, args: RewriteArgs, json: bool) -> Outcome<()> {
    let mut draft = read_draft(&args.file, args.granularity)?;
    let spec = match (&args.native, &args.lang) {
        (Some(path), Some(lang)) => {
            draft = draft.with_native(read_text(path)?, lang.as_str())?;
            TargetSpec::Native
        }
        _ => TargetSpec::Adjust(args.set),
    };
    let pipeline = Pipeline::from_config(cfg)?;
    let baseline = pipeline.analyze(&draft, None, None)?;
    let mut session = new_session(draft.clone(), baseline.clone())?;
    let targets = pipeline.targets(&draft, &baseline, &spec, None)?;
    let clock = SystemClock;
    session.append(EventPayload::Adjust { targets: targets.clone() }, clock.now())?;

    let k = args.k.unwrap_or(pipeline.settings().k_default);
    let diversity = args.diversity.unwrap_or_default();
    let outcome = pipeline.rewrite(&draft, &baseline, targets, None, Some(k), diversity, None)?;
    session.append(
        EventPayload::Rewrite {
            granularity: draft.granularity(),
            k,
            diversity,
            targets: outcome.targets.clone(),
            suggestions: outcome.suggestions.clone(),
            rejected: outcome.rejected.clone(),
        },
        clock.now(),
    )?;
    save_session(&session)?;
    if json {
        return print_json(&outcome);
    }
    print_outcome(&outcome, pipeline.registry());
    Ok(())
}

fn print_outcome(outcome: &RewriteOutcome, registry: &DimensionRegistry) {
    println!("targets:");
    for t in outcome.targets.entries() {
        let lock = if t.locked { " (kept)" } else { "" };
        println!("  {:<26}{:.1}{lock}", t.dimension_id, t.target.display_value());
    }
    for s in &outcome.suggestions {
        println!();
        println!("#{}  alignment error {:.3}  content {:.3}", s.rank, s.alignment_error, s.content_preservation);
        for e in s.measured_profile.entries() {
            let pole = registry.get(&e.dimension_id).map_or("", |d| d.pole_toward(e.score.value() - 4.0));
            println!("  {:<26}{:.1}  {pole}", e.dimension_id, e.score.display_value());
        }
        println!();
        for line in s.text.lines() {
            println!("    {line}");
        }
    }
    if !outcome.rejected.is_empty() {
        println!();
        println!("{} candidate(s) rejected", outcome.rejected.len());
    }
}

fn explain(cfg: &ServiceConfig, json: bool) -> Outcome<()> {
    let mut session = load_session()?;
    let (_, baseline) = session.analysis().ok_or(SessionError::NoPriorAnalyze)?;
    let suggestions = session.latest_suggestions().ok_or(SessionError::NoPriorRewrite)?;
    let pipeline = Pipeline::from_config(cfg)?;
    let report = pipeline.explain(suggestions, baseline, None)?;
    session.append(EventPayload::Explain { report: report.clone() }, SystemClock.now())?;
    save_session(&session)?;
    if json {
        return print_json(&report);
    }
    print_report(&report);
    Ok(())
}

fn print_report(report: &NuanceReport) {
    for n in &report.per_suggestion {
        println!("#{}  {}", n.rank, n.note);
    }
    if let Some((a, b)) = report.divergent_pair {
        println!();
        println!("most different in style: #{a} and #{b}");
    }
    for p in &report.pairs {
        let mut flags = Vec::new();
        if p.same_content {
            flags.push("same content");
        }
        if p.different_style {
            flags.push("different style");
        }
        println!(
            "  #{} vs #{}  style {:.3}  content {:.3}  {}",
            p.ranks.0,
            p.ranks.1,
            p.style_distance,
            p.content_distance,
            flags.join(", ")
        );
    }
}

fn run_calibration(cfg: &ServiceConfig, json: bool) -> Outcome<()> {
    let registry = cfg.registry()?;
    let anchors = cfg.anchors()?;
    let style = cfg.style_provider();
    let (axes, report): (_, CalibrationReport) = calibrate(&anchors, &registry, &style, cfg.min_anchors)?;
    if let Some(path) = &cfg.axis_cache_path {
        AxisCache { model_id: report.model_id.clone(), axes }.save(path)?;
    }
    if json {
        return print_json(&report);
    }
    println!("style model: {}", report.model_id);
    for c in &report.dimensions {
        println!(
            "{:<26}radius {:.6}  positive {:.1}  negative {:.1}  midpoint {:.1}",
            c.dimension_id, c.radius, c.positive_mean_score, c.negative_mean_score, c.midpoint_score
        );
    }
    Ok(())
}

fn serve(cfg: ServiceConfig) -> Outcome<()> {
    tracing_subscriber::fmt().with_writer(io::stderr).with_ansi(false).init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    let result = runtime.block_on(wd_service::serve(&cfg));
    io::stdout().flush().ok();
    result.map_err(|e| Failure::Io(e.to_string()))
}
