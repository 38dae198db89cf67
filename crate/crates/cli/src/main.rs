use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use forcex::syntax::decode_source;
use forcex::{
    analyze_document, ActiveXMode, Budgets, EngineConfig, PolicyConfig, Report, Severity,
    SwitchSequence, DEFAULT_SEED,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "forcex",
    version,
    about = "Forced-execution analysis of JavaScript and HTML samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore every path of each sample and apply the detection policies.
    Analyze(AnalyzeArgs),
    /// Print the recovery log of one natural run of a script.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActiveX {
    Fake,
    Throw,
}

#[derive(Args)]
struct EngineArgs {
    /// RNG seed; overrides FORCEX_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Per-sample exploration limit in seconds.
    #[arg(long, default_value_t = 300.0)]
    sample_timeout: f64,
    /// Per-loop wall-clock budget in milliseconds.
    #[arg(long, default_value_t = 2000)]
    loop_budget: u64,
    #[arg(long, default_value_t = 512)]
    recursion_cap: usize,
    #[arg(long, value_enum, default_value = "throw")]
    activex: ActiveX,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write one report per sample plus index.json here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Samples analyzed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// TOML file with policy thresholds.
    #[arg(long)]
    policy_config: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    path: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

impl EngineArgs {
    fn config(&self) -> Result<EngineConfig> {
        let seed = match (self.seed, std::env::var("FORCEX_SEED")) {
            (Some(s), _) => s,
            (None, Ok(s)) => {
                parse_seed(&s).with_context(|| format!("FORCEX_SEED={s:?} is not a number"))?
            }
            (None, Err(_)) => DEFAULT_SEED,
        };
        if !(self.sample_timeout.is_finite() && self.sample_timeout > 0.0) {
            bail!("--sample-timeout must be a positive number of seconds");
        }
        let budgets = Budgets {
            sample_timeout: Duration::from_secs_f64(self.sample_timeout),
            loop_budget: Duration::from_millis(self.loop_budget),
            recursion_cap: self.recursion_cap,
            ..Budgets::default()
        };
        let activex = match self.activex {
            ActiveX::Fake => ActiveXMode::Fake,
            ActiveX::Throw => ActiveXMode::Throw,
        };
        Ok(EngineConfig {
            seed,
            budgets,
            activex,
            ..EngineConfig::default()
        })
    }
}

fn parse_seed(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(&hex.replace('_', ""), 16).ok(),
        None => s.replace('_', "").parse().ok(),
    }
}

fn is_html(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("html" | "htm")
    )
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn analyze_path(path: &Path, engine: &EngineConfig, policies: &PolicyConfig) -> Report {
    let sample = path.display().to_string();
    match std::fs::read(path) {
        Ok(bytes) => {
            let text = decode_source(&bytes);
            analyze_document(
                &sample,
                &file_name(path),
                &text,
                is_html(path),
                engine,
                policies,
            )
        }
        Err(e) => Report::failed(
            &sample,
            format!("cannot read {sample}: {e}"),
            engine,
            policies,
        ),
    }
}

fn analyze_all(
    paths: &[PathBuf],
    jobs: usize,
    engine: &EngineConfig,
    policies: &PolicyConfig,
) -> Vec<Report> {
    let slots: Vec<Mutex<Option<Report>>> = paths.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, paths.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = paths.get(i) else { break };
                let report = analyze_path(path, engine, policies);
                *slots[i].lock().expect("report slot") = Some(report);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("report slot").expect("analyzed"))
        .collect()
}

fn exit_code(reports: &[Report]) -> u8 {
    if reports.iter().any(|r| r.verdict == Severity::Malicious) {
        2
    } else if reports.iter().any(|r| r.error.is_some()) {
        1
    } else {
        0
    }
}

fn severity_label(s: Severity) -> &'static str {
    match s {
        Severity::Info => "info",
        Severity::Suspicious => "suspicious",
        Severity::Malicious => "malicious",
    }
}

fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} ({} runs, {} units, coverage {:.1}%, {} ms{})",
        r.sample,
        severity_label(r.verdict).to_uppercase(),
        r.stats.runs,
        r.stats.units,
        r.stats.coverage_percent,
        r.stats.wall_time_ms,
        if r.stats.exhausted || r.error.is_some() {
            ""
        } else {
            ", timed out"
        }
    );
    if let Some(e) = &r.error {
        let _ = writeln!(out, "  error: {e}");
    }
    for f in &r.findings {
        let at = f
            .anchor
            .as_ref()
            .map(|a| a.to_string())
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "  [{}] {} at {} (run {}): {}",
            severity_label(f.severity),
            f.policy,
            at,
            f.run_index,
            f.evidence
        );
    }
    for src in &r.external_scripts {
        let _ = writeln!(out, "  external script: {src}");
    }
    out
}

fn render(r: &Report, format: Format, pretty: bool) -> Result<String> {
    Ok(match format {
        Format::Json if pretty => serde_json::to_string_pretty(r)? + "\n",
        Format::Json => serde_json::to_string(r)? + "\n",
        Format::Text => render_text(r),
    })
}

#[derive(Serialize)]
struct IndexEntry<'a> {
    sample: &'a str,
    report: String,
    verdict: Severity,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct Index<'a> {
    exit_code: u8,
    reports: Vec<IndexEntry<'a>>,
}

fn report_file_name(i: usize, sample: &str, format: Format) -> String {
    let stem: String = Path::new(sample)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let ext = match format {
        Format::Json => "json",
        Format::Text => "txt",
    };
    format!("{i:04}-{stem}.{ext}")
}

fn analyze(args: AnalyzeArgs) -> Result<u8> {
    let engine = args.engine.config()?;
    let policies = match &args.policy_config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PolicyConfig::default(),
    };
    let reports = analyze_all(&args.paths, args.jobs, &engine, &policies);
    let code = exit_code(&reports);
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut entries = Vec::new();
            for (i, r) in reports.iter().enumerate() {
                let name = report_file_name(i, &r.sample, args.format);
                std::fs::write(dir.join(&name), render(r, args.format, true)?)
                    .with_context(|| format!("writing {name}"))?;
                entries.push(IndexEntry {
                    sample: &r.sample,
                    report: name,
                    verdict: r.verdict,
                    error: r.error.as_deref(),
                });
            }
            let index = Index {
                exit_code: code,
                reports: entries,
            };
            std::fs::write(
                dir.join("index.json"),
                serde_json::to_string_pretty(&index)? + "\n",
            )
            .context("writing index.json")?;
        }
        None => {
            for r in &reports {
                print!("{}", render(r, args.format, false)?);
                if let Some(e) = &r.error {
                    eprintln!("forcex: {e}");
                }
            }
        }
    }
    Ok(code)
}

fn trace(args: TraceArgs) -> Result<u8> {
    let engine = args.engine.config()?;
    let bytes =
        std::fs::read(&args.path).with_context(|| format!("reading {}", args.path.display()))?;
    let text = decode_source(&bytes);
    let program = forcex::syntax::parse(&text, &file_name(&args.path))?;
    let outcome = forcex::execute(&program, &SwitchSequence::empty(), &engine);
    for a in &outcome.recoveries {
        let becomes = a.becomes.map(|t| format!("{t:?}")).unwrap_or_default();
        let mut line = format!(
            "{:<8} {:<24} {:<16} {}",
            a.anchor.offset,
            a.subject,
            a.rule.as_str(),
            becomes
        );
        if let Some(n) = a.array_length {
            let _ = write!(line, " len {n}");
        }
        if let Some(d) = &a.detail {
            let _ = write!(line, " ({d})");
        }
        println!("{}", line.trim_end());
    }
    for p in &outcome.preds {
        println!("branch   {:<24} {}", p.anchor.to_string(), p.taken);
    }
    println!("terminated_by {}", outcome.terminated_by.as_str());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Trace(t) => trace(t),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("forcex: {e:#}");
            ExitCode::from(1)
        }
    }
}
