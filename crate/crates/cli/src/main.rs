use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tactokit::analysis::{exclude_outliers, parse_log, report, report_csv, Aggregation};
use tactokit::device::{play, PlayOptions, SerialSink, Sink};
use tactokit::experiment::{balanced_latin_square, SessionConfig};
use tactokit::perception::{exact_confusion, monte_carlo_confusion, ConfusionKernel};
use tactokit::synth::{compile_schedule, export_wav, render_pattern, RenderParams};
use tactokit::{
    assign_cues, enumerate_three_point_strokes, load_pattern_set, AxisConfig, Corner, GridGeometry, Method,
    PatternSet, ReferenceFrame, TimingParams,
};
use tactokit_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "tactokit", version, about = "Spatiotemporal tactile patterns on a 2x2 wrist array")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Inspect and check pattern sets.
    #[command(subcommand)]
    Patterns(PatternsCmd),
    /// Show per-tactor cue assignments.
    #[command(subcommand)]
    Cues(CuesCmd),
    /// Render a pattern to a WAV file and/or a device schedule.
    Render(RenderArgs),
    /// Send a pattern to the device.
    Play(PlayArgs),
    /// Predict a confusion matrix.
    Simulate(SimulateArgs),
    /// Summarize a trial log.
    Analyze(AnalyzeArgs),
    /// Print a balanced Latin square (1-based conditions).
    Counterbalance {
        #[arg(long)]
        n: usize,
    },
    /// Run the local experiment service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum PatternsCmd {
    /// List built-in sets, or the patterns of one set.
    List {
        #[arg(long)]
        set: Option<String>,
    },
    /// Parse a pattern-set file and report problems.
    Validate { path: PathBuf },
    /// Print all 24 three-point strokes in pattern-set format.
    EnumerateTps {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CuesCmd {
    Show {
        #[arg(long)]
        method: Method,
    },
}

#[derive(Args)]
struct PatternArgs {
    /// Pattern label.
    #[arg(long)]
    pattern: String,
    /// Built-in set name or pattern-set file.
    #[arg(long, default_value = "edgewrite_alnum")]
    set: String,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value = "RF1")]
    rf: ReferenceFrame,
    #[arg(long, default_value_t = 0.5)]
    burst: f64,
    /// Gap between bursts in seconds.
    #[arg(long, default_value_t = 0.0)]
    isi: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Wav,
    Schedule,
    Both,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    p: PatternArgs,
    /// Output path; with `--emit both` the schedule goes next to it as `.jsonl`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "wav")]
    emit: Emit,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    p: PatternArgs,
    /// Serial device path, or `virtual` to print frames instead.
    #[arg(long)]
    port: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "tps24")]
    set: String,
    #[arg(long)]
    method: Method,
    /// Kernel TOML; defaults to the built-in illustrative kernel.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long, conflicts_with = "mc")]
    exact: bool,
    /// Monte Carlo trials per stimulus.
    #[arg(long)]
    mc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    log: PathBuf,
    /// Comma-separated grouping fields.
    #[arg(long, default_value = "method", value_delimiter = ',')]
    by: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    confusion_dir: Option<PathBuf>,
    /// Only records from this phase; `all` keeps everything.
    #[arg(long, default_value = "testing")]
    phase: String,
    /// Metrics on pooled matrices instead of per-participant means.
    #[arg(long)]
    pooled: bool,
    /// Drop participants whose accuracy is this many SDs from a group mean.
    #[arg(long)]
    exclude_sigma: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    /// Session config used when a client starts a session without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 7341)]
    port: u16,
    #[arg(long, default_value = "trials.jsonl")]
    log: PathBuf,
    /// Serial device; without it frames go to an in-memory sink.
    #[arg(long)]
    serial: Option<String>,
}

fn resolve_set(name: &str) -> Result<PatternSet> {
    PatternSet::resolve(name).with_context(|| format!("loading pattern set `{name}`"))
}

fn corners_str(cs: &[Corner]) -> String {
    cs.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" ")
}

fn patterns(cmd: PatternsCmd) -> Result<()> {
    match cmd {
        PatternsCmd::List { set: None } => {
            for name in tactokit::pattern::BUILTIN_SETS {
                let s = PatternSet::builtin(name)?;
                println!("{name:<16} {:>3} patterns  v{}", s.len(), s.version());
            }
        }
        PatternsCmd::List { set: Some(name) } => {
            let s = resolve_set(&name)?;
            for p in s.iter() {
                let tags: Vec<&str> = p.tags().iter().map(String::as_str).collect();
                println!("{:<8} {:<20} {}", p.label(), corners_str(p.corners()), tags.join(","));
            }
        }
        PatternsCmd::Validate { path } => {
            let s = load_pattern_set(&path).with_context(|| path.display().to_string())?;
            println!("{}: ok, set `{}` v{} with {} patterns", path.display(), s.name(), s.version(), s.len());
        }
        PatternsCmd::EnumerateTps { out } => {
            let text = enumerate_three_point_strokes().to_text();
            match out {
                Some(p) => fs::write(&p, text).with_context(|| p.display().to_string())?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn cues(cmd: CuesCmd) -> Result<()> {
    let CuesCmd::Show { method } = cmd;
    let map = assign_cues(method, AxisConfig::default());
    println!("method {method}: {} distinct cue(s)", map.distinct_count());
    for (corner, cue) in map.iter() {
        println!("{:<3} {cue}", corner.as_str());
    }
    Ok(())
}

struct Prepared {
    set: PatternSet,
    timing: TimingParams,
}

fn prepare(p: &PatternArgs) -> Result<Prepared> {
    let set = resolve_set(&p.set)?;
    if set.get(&p.pattern).is_none() {
        bail!("no pattern `{}` in set `{}`", p.pattern, set.name());
    }
    let timing = TimingParams::new(p.burst, p.isi)?;
    Ok(Prepared { set, timing })
}

fn render(a: RenderArgs) -> Result<()> {
    let Prepared { set, timing } = prepare(&a.p)?;
    let pattern = set.get(&a.p.pattern).unwrap();
    let cues = assign_cues(a.p.method, AxisConfig::default());
    let geom = GridGeometry::default();
    let write_schedule = |path: &PathBuf| -> Result<()> {
        let sched = compile_schedule(pattern, &cues, a.p.rf, &timing, &geom);
        let mut f = fs::File::create(path).with_context(|| path.display().to_string())?;
        sched.write_jsonl(&mut f)?;
        println!("wrote {} ({} events)", path.display(), sched.len());
        Ok(())
    };
    if matches!(a.emit, Emit::Wav | Emit::Both) {
        let rp = RenderParams { sample_rate_hz: a.sample_rate, ..RenderParams::default() };
        let buf = render_pattern(pattern, &cues, a.p.rf, &timing, &rp, &geom)?;
        export_wav(&buf, &a.out)?;
        println!("wrote {} ({:.3} s, 4 channels)", a.out.display(), buf.duration_s());
    }
    match a.emit {
        Emit::Schedule => write_schedule(&a.out)?,
        Emit::Both => write_schedule(&a.out.with_extension("jsonl"))?,
        Emit::Wav => {}
    }
    Ok(())
}

fn play_cmd(a: PlayArgs) -> Result<()> {
    let Prepared { set, timing } = prepare(&a.p)?;
    let pattern = set.get(&a.p.pattern).unwrap();
    let cues = assign_cues(a.p.method, AxisConfig::default());
    let sched = compile_schedule(pattern, &cues, a.p.rf, &timing, &GridGeometry::default());
    let mut sink = if a.port == "virtual" {
        Sink::virtual_sink()
    } else {
        Sink::Serial(SerialSink::open(&a.port).with_context(|| format!("opening {}", a.port))?)
    };
    let report = play(&sched, &mut sink, PlayOptions::default())?;
    if let Some(v) = sink.as_virtual() {
        for r in v.records() {
            let bytes = tactokit::device::encode_frame(&r.frame);
            let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
            println!("{:>7.1} ms  {}", (r.at - report.started).as_secs_f64() * 1000.0, hex.join(" "));
        }
    }
    println!(
        "played `{}`: {} events, max lateness {:.2} ms, {} overrun(s)",
        pattern.label(),
        report.events.len(),
        report.max_lateness().as_secs_f64() * 1000.0,
        report.overruns.len()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let set = resolve_set(&a.set)?;
    let kernel = match &a.kernel {
        Some(p) => ConfusionKernel::from_toml(&fs::read_to_string(p).with_context(|| p.display().to_string())?)?,
        None => ConfusionKernel::default(),
    };
    let cues = assign_cues(a.method, AxisConfig::default());
    let pc = match a.mc {
        Some(n) => monte_carlo_confusion(&set, &cues, &kernel, n, a.seed)?,
        None => exact_confusion(&set, &cues, &kernel)?,
    };
    if let Some(out) = &a.out {
        fs::write(out, pc.to_csv()).with_context(|| out.display().to_string())?;
    }
    let mode = a.mc.map_or("exact".to_string(), |n| format!("monte carlo, {n} trials/stimulus"));
    println!("{} / {} ({mode}): predicted accuracy {:.1} %", set.name(), a.method, pc.accuracy * 100.0);
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let file = fs::File::open(&a.log).with_context(|| a.log.display().to_string())?;
    let mut records = parse_log(BufReader::new(file))?;
    if a.phase != "all" {
        records.retain(|r| r.phase.to_string() == a.phase);
    }
    if records.is_empty() {
        bail!("no records in phase `{}`", a.phase);
    }
    let by: Vec<&str> = a.by.iter().map(String::as_str).collect();
    if let Some(sigma) = a.exclude_sigma {
        let mut acc: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        let mut per: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
        for r in &records {
            let key = by.iter().map(|f| r.field(f)).collect::<Result<Vec<_>, _>>()?.join("_");
            let e = per.entry((r.participant.clone(), key)).or_default();
            e.0 += r.correct as usize;
            e.1 += 1;
        }
        for ((p, k), (c, n)) in per {
            acc.entry(p).or_default().insert(k, c as f64 / n as f64);
        }
        let screen = exclude_outliers(&acc, sigma)?;
        for p in &screen.excluded {
            eprintln!("excluding participant {p}");
        }
        records.retain(|r| screen.included.contains(&r.participant));
    }
    let agg = if a.pooled { Aggregation::Pooled } else { Aggregation::PerParticipant };
    let rows = report(&records, &by, agg)?;
    let csv = report_csv(&rows, &by);
    match &a.out {
        Some(p) => fs::write(p, &csv).with_context(|| p.display().to_string())?,
        None => print!("{csv}"),
    }
    if let Some(dir) = &a.confusion_dir {
        fs::create_dir_all(dir)?;
        for r in &rows {
            let name = if r.key.is_empty() { "all".to_string() } else { r.key_string() };
            fs::write(dir.join(format!("{name}.csv")), r.confusion.to_csv())?;
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServiceConfig::new(&a.log);
    if let Some(p) = &a.config {
        let session = SessionConfig::load(p).with_context(|| p.display().to_string())?;
        session.resolve()?;
        cfg.default_session = Some(session);
    }
    let sink = match &a.serial {
        Some(path) => Sink::Serial(SerialSink::open(path).with_context(|| format!("opening {path}"))?),
        None => Sink::virtual_sink(),
    };
    let state = AppState::new(cfg, sink);
    let addr = SocketAddr::from(([127, 0, 0, 1], a.port));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        tactokit_service::serve_listener(listener, state).await
    })?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Patterns(c) => patterns(c),
        Cmd::Cues(c) => cues(c),
        Cmd::Render(a) => render(a),
        Cmd::Play(a) => play_cmd(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Analyze(a) => analyze(a),
        Cmd::Counterbalance { n } => {
            if n < 2 {
                bail!("need at least two conditions");
            }
            for row in balanced_latin_square(n) {
                let row: Vec<String> = row.iter().map(|c| (c + 1).to_string()).collect();
                println!("{}", row.join(" "));
            }
            Ok(())
        }
        Cmd::Serve(a) => serve(a),
    }
}
