// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use plancache::analysis::{self, LocalityTable, MarkovChain};
use plancache::cache::PlanCache;
use plancache::env::Scenario;
use plancache::planner::{CostModel, LatencyDist};
use plancache::report::{growth_table, table, to_csv, EpisodeReport, ReportFile};
use plancache::strategies::{ablation_variants, run_episodes, PlannerBackend, StrategyConfig, StrategyKind};
use plancache::trace::Trace;
use plancache::updater::UpdaterConfig;

#[derive(Parser)]
#[command(name = "plancache", version, about = "Plan cache experiments on a multi-agent transport gridworld")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run episodes and write a report.
    Run(Box<RunArgs>),
    /// Build a cache file from stored traces.
    Prefill(PrefillArgs),
    /// Bigram transition table over traces or a synthetic chain.
    Locality(LocalityArgs),
    /// Plan execution accuracy series of one trace.
    Accuracy(AccuracyArgs),
    /// Print tables from report files.
    Report(ReportArgs),
    /// Recompute a report from a trace, optionally checking it against a report file.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Scripted,
    Remote,
}

#[derive(Args)]
struct RunArgs {
    /// sync, parallel, speculative, agenticcache, or all.
    #[arg(long, default_value = "agenticcache")]
    strategy: String,
    #[arg(long)]
    scenario: PathBuf,
    /// Base seed; episode i uses seed + i. PLANCACHE_SEED overrides it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    episodes: u64,
    /// Overrides the scenario's per-tick perturbation probability.
    #[arg(long)]
    perturbation_rate: Option<f64>,
    /// Overrides the scenario's tick budget.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, value_enum, default_value = "scripted")]
    planner: Backend,
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    endpoint: String,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Oracle latency in ticks: `N` or `A..B`.
    #[arg(long, alias = "latency", default_value = "10")]
    planner_latency: LatencyDist,
    #[arg(long, default_value_t = 0.0)]
    error_rate: f64,
    /// Warm-start cache file (agenticcache only).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    no_updates: bool,
    #[arg(long)]
    no_replacement: bool,
    /// Run the four updates/replacement variants of agenticcache.
    #[arg(long)]
    ablation: bool,
    #[arg(long, default_value_t = plancache::updater::DEFAULT_QUERY_PERIOD)]
    query_period: u64,
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long, default_value_t = 0.3)]
    drafter_error_rate: f64,
    #[arg(long, default_value_t = 1)]
    drafter_latency: u32,
    #[arg(long, default_value_t = 0.00125)]
    price_in: f64,
    #[arg(long, default_value_t = 0.01)]
    price_out: f64,
    /// Skip per-tick judging against the reference policy.
    #[arg(long)]
    no_judge: bool,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for JSONL traces, one file per episode.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct PrefillArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    success_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LocalityArgs {
    traces: Vec<PathBuf>,
    /// Sample a synthetic chain with this grasp-to-put probability instead of reading traces.
    #[arg(long)]
    synthetic: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    transitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AccuracyArgs {
    trace: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    trace: PathBuf,
    /// Report file whose matching episode must equal the recomputed one.
    #[arg(long)]
    report: Option<PathBuf>,
}

type Res<T> = Result<T, String>;

fn read_trace(p: &Path) -> Res<Trace> {
    let f = fs::File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
    Trace::read_jsonl(BufReader::new(f)).map_err(|e| format!("{}: {e}", p.display()))
}

fn write(p: &Path, text: &str) -> Res<()> {
    fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))
}

fn run(a: RunArgs) -> Res<()> {
    if a.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(a.threads).build_global().map_err(|e| e.to_string())?;
    }
    let mut scenario = Scenario::load(&a.scenario).map_err(|e| format!("{}: {e}", a.scenario.display()))?;
    if let Some(r) = a.perturbation_rate {
        scenario.perturbation_rate = r;
    }
    if let Some(b) = a.budget {
        scenario.budget = b;
    }
    scenario.validate().map_err(|e| e.to_string())?;
    let kinds: Vec<StrategyKind> = if a.strategy == "all" {
        StrategyKind::ALL.to_vec()
    } else {
        vec![a.strategy.parse()?]
    };
    let cache = match &a.cache {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(PlanCache::deserialize(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
        None => None,
    };
    let backend = match a.planner {
        Backend::Scripted => PlannerBackend::Scripted,
        Backend::Remote => PlannerBackend::Remote { endpoint: a.endpoint.clone(), timeout_ms: a.timeout_ms },
    };
    let updater =
        UpdaterConfig { query_period: a.query_period, updates: !a.no_updates, replacement: !a.no_replacement };
    let base = StrategyConfig {
        kind: StrategyKind::AgenticCache,
        backend,
        latency: a.planner_latency,
        error_rate: a.error_rate,
        cost: CostModel::new(a.price_in, a.price_out)?,
        cache,
        updater,
        depth: a.depth,
        drafter_error_rate: a.drafter_error_rate,
        drafter_latency: a.drafter_latency,
        judge: !a.no_judge,
    };
    let mut runs: Vec<(String, StrategyConfig)> = Vec::new();
    for kind in kinds {
        let cfg = StrategyConfig { kind, cache: base.cache.clone().filter(|_| kind == StrategyKind::AgenticCache), ..base.clone() };
        if a.ablation && kind == StrategyKind::AgenticCache {
            for (name, u) in ablation_variants(updater) {
                runs.push((format!("{}-{name}", kind.name()), StrategyConfig { updater: u, ..cfg.clone() }));
            }
        } else {
            runs.push((kind.name().to_string(), cfg));
        }
    }
    let seeds: Vec<u64> = (0..a.episodes).map(|i| seed(a.seed) + i).collect();
    if let Some(dir) = &a.traces {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let mut reports = Vec::new();
    for (label, cfg) in &runs {
        let traces = run_episodes(&scenario, &seeds, cfg).map_err(|e| e.to_string())?;
        for mut t in traces {
            t.header.strategy = label.clone();
            if let Some(dir) = &a.traces {
                let p = dir.join(format!("{}_{}_{}.jsonl", scenario.name, label, t.header.seed));
                write(&p, &t.to_jsonl())?;
            }
            reports.push(EpisodeReport::from_trace(&t));
        }
    }
    let file = ReportFile::new(reports);
    write(&a.out, &file.to_json())?;
    if let Some(p) = &a.csv {
        write(p, &to_csv(&file.episodes))?;
    }
    print!("{}", table(&file.aggregates));
    Ok(())
}

fn prefill(a: PrefillArgs) -> Res<()> {
    let traces = a.traces.iter().map(|p| read_trace(p)).collect::<Res<Vec<_>>>()?;
    let schema = analysis::trace_schema(&traces[0]).map_err(|e| e.to_string())?;
    let tuples = analysis::extract_prefill(&traces, a.success_only).map_err(|e| e.to_string())?;
    let mut cache = PlanCache::new(schema);
    let n = tuples.len();
    cache.prefill(tuples).map_err(|e| e.to_string())?;
    write(&a.out, &cache.serialize())?;
    println!("{n} transitions, {} bytes", cache.size_bytes());
    Ok(())
}

fn locality(a: LocalityArgs) -> Res<()> {
    let t = match a.synthetic {
        Some(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("probability {p} outside [0, 1]"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed(a.seed));
            let seq = MarkovChain::transport_like(p).sample(plancache::plan::PlanKind::Explore, a.transitions, &mut rng);
            let mut t = LocalityTable::default();
            t.add_sequence(&seq);
            t
        }
        None => {
            let traces = a.traces.iter().map(|p| read_trace(p)).collect::<Res<Vec<_>>>()?;
            analysis::locality_table(&traces)
        }
    };
    let csv = t.to_csv();
    match &a.out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn accuracy(a: AccuracyArgs) -> Res<()> {
    let t = read_trace(&a.trace)?;
    let mut csv = String::from("tick,accuracy\n");
    for (i, v) in analysis::accuracy_series(&t).iter().enumerate() {
        csv.push_str(&format!("{},{v:.6}\n", i + 1));
    }
    match &a.out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn report(a: ReportArgs) -> Res<()> {
    let mut episodes = Vec::new();
    for p in &a.reports {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        episodes.extend(ReportFile::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))?.episodes);
    }
    let file = ReportFile::new(episodes);
    print!("{}", table(&file.aggregates));
    let growth = growth_table(&file.episodes);
    if growth.lines().count() > 1 {
        print!("\n{growth}");
    }
    if let Some(p) = &a.csv {
        write(p, &to_csv(&file.episodes))?;
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Res<bool> {
    let t = read_trace(&a.trace)?;
    let r = EpisodeReport::from_trace(&t);
    println!("{}", serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?);
    let Some(p) = &a.report else { return Ok(true) };
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    let file = ReportFile::from_json(&text)?;
    let found = file.episodes.iter().find(|e| e.seed == r.seed && e.strategy == r.strategy && e.scenario == r.scenario);
    match found {
        Some(e) if *e == r => {
            eprintln!("report matches");
            Ok(true)
        }
        Some(_) => {
            eprintln!("report differs");
            Ok(false)
        }
        None => Err("no matching episode in report".into()),
    }
}

/// `PLANCACHE_SEED`, when set, wins over the `--seed` flag.
fn seed(flag: u64) -> u64 {
    match std::env::var("PLANCACHE_SEED") {
        Ok(v) => v.trim().parse().unwrap_or_else(|_| {
            eprintln!("error: PLANCACHE_SEED must be an unsigned integer, got `{v}`");
            std::process::exit(2)
        }),
        Err(_) => flag,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => run(*a).map(|_| true),
        Cmd::Prefill(a) => prefill(a).map(|_| true),
        Cmd::Locality(a) => locality(a).map(|_| true),
        Cmd::Accuracy(a) => accuracy(a).map(|_| true),
        Cmd::Report(a) => report(a).map(|_| true),
        Cmd::Replay(a) => replay(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
