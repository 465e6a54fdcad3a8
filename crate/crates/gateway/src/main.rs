use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing::info;
use twinflow_core::bundled;
use twinflow_core::circuit::{normalize, parse_netlist_named, validate, CircuitGraph};
use twinflow_core::diagnosis::{fingerprint, HistoryDb, HistoryRecord, Label};
use twinflow_core::link::{FaultKind, FaultSpec, PsSim, SharedLink, SimConfig, SimLink};
use twinflow_core::logic::{emit_equations, emit_table, enumerate_truth_table, Format, Step, Step3Assignment, TableMode};
use twinflow_core::runtime::{replay_history, run_scenario, AckMode, Event, Scenario, Twin, TwinConfig};
use twinflow_core::synthesize;
use twinflow_gateway::{router, AppState, Engine};

#[derive(Parser)]
#[command(name = "twinflow", version, about = "Circuit netlists as sequential Boolean equations and live digital twins")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the equations or a truth table of a circuit.
    Compile {
        /// Netlist file, or the name of a bundled circuit.
        file: String,
        #[arg(long, value_enum, default_value = "all")]
        step: StepArg,
        #[arg(long, value_enum)]
        table: Option<TableArg>,
        #[arg(long, value_enum, default_value = "text")]
        emit: EmitArg,
        /// Show branches cut by a check valve.
        #[arg(long)]
        explain: bool,
        /// In tables, assign step-3 results before step 4 runs.
        #[arg(long)]
        immediate: bool,
    },
    /// Run a scripted scenario and check its expectations.
    Simulate {
        file: String,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        auto_ack: bool,
        /// Write the event log as JSON lines.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run the twin behind the HTTP API.
    Serve {
        file: String,
        #[arg(long, env = "TWINFLOW_PORT", default_value_t = 8080)]
        port: u16,
        /// Physical side: the built-in simulator or frames posted over HTTP.
        #[arg(long, value_enum)]
        ps: Option<PsArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulator fault, `kind:target[@iteration]`, e.g. `leak:S1@10`.
        #[arg(long)]
        fault: Vec<String>,
        /// Twin configuration as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Variables with a sensor, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        sensors: Vec<String>,
        #[arg(long)]
        auto_ack: bool,
        #[arg(long, env = "TWINFLOW_HD_PATH")]
        hd: Option<PathBuf>,
        /// Append every event to this file as JSON lines.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Summarize a history file, optionally checking it against an event log.
    Diagnose {
        #[arg(long, env = "TWINFLOW_HD_PATH")]
        hd: PathBuf,
        /// Circuit the history belongs to; needed for --replay.
        #[arg(long)]
        circuit: Option<String>,
        #[arg(long, requires = "circuit")]
        replay: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    All,
}

impl StepArg {
    fn steps(self) -> Vec<Step> {
        match self {
            StepArg::One => vec![Step::One],
            StepArg::Two => vec![Step::Two],
            StepArg::Three => vec![Step::Three],
            StepArg::Four => vec![Step::Four],
            StepArg::All => vec![Step::One, Step::Two, Step::Three, Step::Four],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TableArg {
    Unidirectional,
    BackflowIv,
    BackflowInputs,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmitArg {
    Text,
    Json,
    Gates,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PsArg {
    Sim,
    External,
}

fn load_circuit(arg: &str) -> Result<CircuitGraph> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path).with_context(|| format!("reading {arg}"))?
    } else if let Some(text) = bundled::by_name(arg) {
        text.to_string()
    } else {
        bail!("no netlist file or bundled circuit named `{arg}`");
    };
    let graph = normalize(parse_netlist_named(&text, Some(arg))?)?;
    let report = validate(&graph);
    for f in &report.findings {
        eprintln!("{:?}: {}: {}", f.severity, f.subject, f.message);
    }
    if !report.is_ok() {
        bail!("{arg} has topology errors");
    }
    Ok(graph)
}

fn compile(file: &str, step: StepArg, table: Option<TableArg>, emit: EmitArg, explain: bool, immediate: bool) -> Result<()> {
    let graph = load_circuit(file)?;
    let eqs = synthesize(&graph);
    if let Some(mode) = table {
        let mode = match mode {
            TableArg::Unidirectional => TableMode::Unidirectional,
            TableArg::BackflowIv => TableMode::WithBackflowIv,
            TableArg::BackflowInputs => TableMode::WithBackflowInputs,
        };
        let assign = if immediate {
            Step3Assignment::Immediate
        } else {
            Step3Assignment::Deferred
        };
        let t = enumerate_truth_table(&graph, &eqs, mode, assign)?;
        match emit {
            EmitArg::Json => println!("{}", serde_json::to_string_pretty(&t)?),
            _ => print!("{}", emit_table(&t)),
        }
        return Ok(());
    }
    let format = match emit {
        EmitArg::Text => Format::Text,
        EmitArg::Json => Format::Json,
        EmitArg::Gates => Format::Gates,
    };
    let out = emit_equations(&graph, &eqs, &step.steps(), format, explain);
    print!("{out}");
    if !out.ends_with('\n') {
        println!();
    }
    Ok(())
}

fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn simulate(file: &str, scenario: &Path, auto_ack: bool, events: Option<&Path>) -> Result<()> {
    let graph = load_circuit(file)?;
    let eqs = synthesize(&graph);
    let text = fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let script: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", scenario.display()))?;
    let outcome = run_scenario(&graph, &eqs, &script, auto_ack)?;
    for r in &outcome.reports {
        let changes: Vec<String> = r
            .net_changes()
            .iter()
            .map(|c| format!("{}={} ({})", c.var, c.to as u8, serde_json::to_value(c.origin).unwrap_or_default().as_str().unwrap_or("")))
            .collect();
        if !changes.is_empty() {
            println!("iteration {}: {}", r.iteration, changes.join(", "));
        }
        for id in &r.raised {
            if let Some(w) = outcome.snapshot.warnings.iter().find(|w| w.id == *id) {
                println!(
                    "iteration {}: warning {} on {} from {}",
                    r.iteration,
                    w.id,
                    w.target,
                    w.source_terms.join(" + ")
                );
            }
        }
        for m in &r.mismatches {
            println!(
                "iteration {}: {} predicted {} observed {}: {}",
                r.iteration,
                m.variable,
                m.predicted as u8,
                m.observed as u8,
                serde_json::to_string(&m.hypothesis)?
            );
        }
    }
    if let Some(path) = events {
        write_events(path, &outcome.events)?;
    }
    println!(
        "{} iterations, {} expectations met, final word {}",
        outcome.reports.len(),
        script.expect.len(),
        outcome.snapshot.word
    );
    Ok(())
}

fn parse_fault(spec: &str) -> Result<FaultSpec> {
    let (kind, rest) = spec.split_once(':').context("fault must look like kind:target[@iteration]")?;
    let (target, onset) = match rest.split_once('@') {
        Some((t, n)) => (t, n.parse().with_context(|| format!("bad onset in `{spec}`"))?),
        None => (rest, 0),
    };
    let kind = match kind {
        "leak" => FaultKind::Leak,
        "blockage" => FaultKind::Blockage,
        "stuck" | "stuck_actuator" => FaultKind::StuckActuator,
        other => bail!("unknown fault kind `{other}`"),
    };
    Ok(FaultSpec {
        kind,
        target: target.to_string(),
        onset_iteration: onset,
    })
}

#[allow(clippy::too_many_arguments)]
async fn serve(
    file: &str,
    port: u16,
    ps: Option<PsArg>,
    seed: u64,
    faults: &[String],
    config: Option<&Path>,
    sensors: Vec<String>,
    auto_ack: bool,
    hd: Option<&Path>,
    events: Option<&Path>,
) -> Result<()> {
    let graph = load_circuit(file)?;
    let eqs = synthesize(&graph);
    let mut config: TwinConfig = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => TwinConfig::default(),
    };
    if !sensors.is_empty() {
        config.sensors = sensors;
    }
    if auto_ack {
        config.ack_mode = AckMode::Auto;
    }
    let mut twin = Twin::new(graph.clone(), eqs.clone(), config.clone())?;
    let history = match hd {
        Some(p) => HistoryDb::open(p, twin.variables()).with_context(|| format!("opening {}", p.display()))?,
        None => HistoryDb::new(twin.variables()),
    };
    twin.attach_history(history)?;

    let mut external = None;
    match ps {
        Some(PsArg::Sim) => {
            let mut sim = PsSim::new(
                graph.clone(),
                SimConfig {
                    seed,
                    sensors: config.sensors.clone(),
                    ..SimConfig::default()
                },
            )?;
            for f in faults {
                sim.inject(parse_fault(f)?)?;
            }
            twin.attach_link(Box::new(SimLink::new(sim)))?;
        }
        Some(PsArg::External) => {
            let link = SharedLink::new();
            twin.attach_link(Box::new(link.clone()))?;
            external = Some(link);
        }
        None if !faults.is_empty() => bail!("faults need --ps sim"),
        None => {}
    }
    let log = events
        .map(|p| OpenOptions::new().create(true).append(true).open(p))
        .transpose()
        .context("opening the event log")?;

    let engine = Engine::spawn(twin, log);
    let state = AppState {
        engine: engine.clone(),
        graph: Arc::new(graph),
        equations: Arc::new(eqs),
        external,
        heartbeat: Duration::from_secs(15),
    };
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
        .await
        .with_context(|| format!("binding port {port}"))?;
    info!("serving {file} on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    tokio::task::spawn_blocking(move || engine.shutdown()).await?;
    Ok(())
}

fn read_history(path: &Path) -> Result<BTreeMap<String, HistoryRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut records = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: HistoryRecord =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: bad record", path.display(), i + 1))?;
        records.insert(rec.word.to_string(), rec);
    }
    Ok(records)
}

fn diagnose(hd: &Path, circuit: Option<&str>, replay: Option<&Path>) -> Result<bool> {
    let records = read_history(hd)?;
    println!("{:<24} {:<10} {:>6} {:>10}  note", "word", "label", "count", "first seen");
    for r in records.values() {
        println!(
            "{:<24} {:<10} {:>6} {:>10}  {}",
            r.word.as_str(),
            r.label.as_str(),
            r.count,
            r.first_seen,
            r.note.as_deref().unwrap_or("")
        );
    }
    let by_label: Vec<String> = Label::ALL
        .iter()
        .map(|l| format!("{} {}", records.values().filter(|r| r.label == *l).count(), l))
        .collect();
    println!("{} words: {}", records.len(), by_label.join(", "));

    let Some(circuit) = circuit else {
        return Ok(true);
    };
    let graph = load_circuit(circuit)?;
    let vars = graph.variables();
    let expected = fingerprint(&vars);
    let foreign = records.values().filter(|r| r.fingerprint != expected).count();
    if foreign > 0 {
        println!("{foreign} records were written for a different circuit");
        return Ok(false);
    }
    let Some(replay) = replay else {
        return Ok(true);
    };
    let file = File::open(replay).with_context(|| format!("opening {}", replay.display()))?;
    let mut events = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str::<Event>(&line)?);
        }
    }
    let rebuilt = replay_history(&vars, &events)?;
    let mut same = rebuilt.len() == records.len();
    for r in rebuilt.records() {
        match records.get(r.word.as_str()) {
            Some(f) if f.count == r.count && f.label == r.label => {}
            Some(f) => {
                same = false;
                println!(
                    "{}: file has {} x{}, replay gives {} x{}",
                    r.word, f.label, f.count, r.label, r.count
                );
            }
            None => {
                same = false;
                println!("{}: only in the replay", r.word);
            }
        }
    }
    println!(
        "replay of {} events {}",
        events.len(),
        if same { "matches the history" } else { "differs from the history" }
    );
    Ok(same)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compile {
            file,
            step,
            table,
            emit,
            explain,
            immediate,
        } => compile(&file, step, table, emit, explain, immediate).map(|_| true),
        Cmd::Simulate {
            file,
            scenario,
            auto_ack,
            events,
        } => simulate(&file, &scenario, auto_ack, events.as_deref()).map(|_| true),
        Cmd::Serve {
            file,
            port,
            ps,
            seed,
            fault,
            config,
            sensors,
            auto_ack,
            hd,
            events,
        } => tokio::runtime::Runtime::new()
            .context("starting the runtime")
            .and_then(|rt| {
                rt.block_on(serve(
                    &file,
                    port,
                    ps,
                    seed,
                    &fault,
                    config.as_deref(),
                    sensors,
                    auto_ack,
                    hd.as_deref(),
                    events.as_deref(),
                ))
            })
            .map(|_| true),
        Cmd::Diagnose { hd, circuit, replay } => diagnose(&hd, circuit.as_deref(), replay.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
