use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slicesim::agent::gradcheck;
use slicesim::config::{Algorithm, ConfigError, SimConfig};
use slicesim::engine::{self, RunReport, Simulation};
use slicesim::metrics;
use slicesim::{Mlp, PhysicalNetwork};

const ACTOR_CHECKPOINT: &str = "actor.ckpt";
const CRITIC_CHECKPOINT: &str = "critic.ckpt";

#[derive(Parser)]
#[command(name = "slicesim", version, about = "Network slice placement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured substrate and write it as a DOT graph.
    Topology {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "psn.dot")]
        out: PathBuf,
    },
    /// Run one simulation and write its series, snapshot and checkpoints.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory holding actor.ckpt and critic.ckpt to start from.
        #[arg(long)]
        init_from: Option<PathBuf>,
    },
    /// Run every algorithm for every seed on shared arrival sequences.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        algos: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Maximum number of runs executed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        configurations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    arrivals: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    Ok(match path {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    })
}

fn write_run_outputs(report: &RunReport, dir: &Path, snapshot: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(runtime(&format!("cannot create {}", dir.display())))?;
    report.series.export_csv(dir).map_err(runtime("cannot write series"))?;
    if snapshot {
        metrics::export_dot(&report.network, report.last_decision.as_ref(), &dir.join("psn.dot"))
            .map_err(runtime("cannot write psn.dot"))?;
    }
    if let Some(agent) = &report.agent {
        agent
            .actor()
            .save(&dir.join(ACTOR_CHECKPOINT))
            .map_err(runtime("cannot write actor checkpoint"))?;
        agent
            .critic()
            .save(&dir.join(CRITIC_CHECKPOINT))
            .map_err(runtime("cannot write critic checkpoint"))?;
    }
    Ok(())
}

fn log_report(report: &RunReport) {
    let latency = report.latency();
    log::info!(
        "{} seed {}: {}/{} accepted, mean reward {:.4}, {} departures, decision median {:.3} ms (p95 {:.3} ms), wall {:.0} ms",
        report.algorithm,
        report.seed,
        report.accepted,
        report.total,
        report.mean_reward,
        report.departures,
        latency.median_ms,
        latency.p95_ms,
        report.wall.as_secs_f64() * 1e3
    );
    if report.failed_updates > 0 {
        log::warn!("{} agent updates skipped on non-finite gradients", report.failed_updates);
    }
}

fn topology(config: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let config = load_config(config)?;
    let net = PhysicalNetwork::build_topology(&config.topology).map_err(|e| Failure::Config(e.to_string()))?;
    metrics::export_dot(&net, None, out).map_err(runtime(&format!("cannot write {}", out.display())))?;
    println!(
        "data_centers={} servers={} links={}",
        net.data_centers.len(),
        net.server_count(),
        net.links.len()
    );
    Ok(())
}

fn run(common: &Common, algo: Option<String>, seed: Option<u64>, init_from: Option<&Path>) -> Result<(), Failure> {
    let mut config = load_config(common.config.as_deref())?;
    if let Some(a) = algo {
        config.run.algorithm = Some(a);
    }
    if let Some(s) = seed {
        config.run.seed = s;
    }
    if let Some(n) = common.arrivals {
        config.run.arrivals = n;
    }
    let mut sim = Simulation::new(&config)?;
    if let Some(dir) = init_from {
        let agent = sim
            .agent_mut()
            .ok_or_else(|| Failure::Config("--init-from needs an agent algorithm".into()))?;
        let actor = Mlp::load(&dir.join(ACTOR_CHECKPOINT)).map_err(runtime("cannot load actor checkpoint"))?;
        let critic = Mlp::load(&dir.join(CRITIC_CHECKPOINT)).map_err(runtime("cannot load critic checkpoint"))?;
        agent.set_params(actor, critic).map_err(runtime("checkpoint does not fit"))?;
    }
    let report = sim.run();
    log_report(&report);
    write_run_outputs(&report, &common.out_dir, true)?;
    fs::write(common.out_dir.join("config.toml"), config.to_toml_string())
        .map_err(runtime("cannot write config.toml"))?;
    println!("accepted/total={:.6}", report.cumulative_acceptance);
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn compare(common: &Common, algos: &[String], seeds: &[u64], jobs: usize) -> Result<(), Failure> {
    let base = load_config(common.config.as_deref())?;
    let algorithms = algos
        .iter()
        .map(|a| a.parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut configs = Vec::new();
    for &seed in seeds {
        let group: Vec<SimConfig> = algorithms
            .iter()
            .map(|a| {
                let mut c = base.clone();
                c.run.seed = seed;
                c.run.algorithm = Some(a.name().to_string());
                if let Some(n) = common.arrivals {
                    c.run.arrivals = n;
                }
                c
            })
            .collect();
        for c in &group {
            c.validate()?;
        }
        engine::check_comparable(&group)?;
        configs.extend(group);
    }

    let reports = engine::run_many(&configs, jobs)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(&common.out_dir).map_err(runtime("cannot create output directory"))?;

    let mut summary = String::from("algo,seed,arrivals,cumulative_acceptance,mean_reward,wall_ms\n");
    for (chunk, &seed) in reports.chunks(algorithms.len()).zip(seeds) {
        let mut table = String::from("arrival_idx,t");
        for (i, r) in chunk.iter().enumerate() {
            log_report(r);
            let name = format!("{i}_{}", r.algorithm);
            write_run_outputs(r, &common.out_dir.join(format!("{name}_s{seed}")), false)?;
            let _ = write!(table, ",{name}");
            let _ = writeln!(
                summary,
                "{},{seed},{},{:.6},{:.6},{:.3}",
                r.algorithm,
                r.total,
                r.cumulative_acceptance,
                r.mean_reward,
                r.wall.as_secs_f64() * 1e3
            );
        }
        table.push('\n');
        for (idx, t, values) in engine::window_table(chunk) {
            let _ = write!(table, "{idx},{t:.6}");
            for v in values {
                let _ = write!(table, ",{v:.6}");
            }
            table.push('\n');
        }
        fs::write(common.out_dir.join(format!("comparison_s{seed}.csv")), table)
            .map_err(runtime("cannot write comparison table"))?;
    }

    // Aggregate rows: the seed column holds "mean" or "stddev".
    let mut seen = Vec::new();
    for a in &algorithms {
        if seen.contains(a) {
            continue;
        }
        seen.push(*a);
        let runs: Vec<&RunReport> = reports.iter().filter(|r| r.algorithm == *a).collect();
        let column = |f: &dyn Fn(&RunReport) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
        let acc = column(&|r| r.cumulative_acceptance);
        let reward = column(&|r| r.mean_reward);
        let arrivals = column(&|r| r.total as f64);
        let wall = column(&|r| r.wall.as_secs_f64() * 1e3);
        let _ = writeln!(summary, "{a},mean,{:.6},{:.6},{:.6},{:.3}", arrivals.0, acc.0, reward.0, wall.0);
        let _ = writeln!(summary, "{a},stddev,{:.6},{:.6},{:.6},{:.3}", arrivals.1, acc.1, reward.1, wall.1);
        println!(
            "{a}: cumulative acceptance mean={:.6} stddev={:.6} over {} runs",
            acc.0,
            acc.1,
            runs.len()
        );
    }
    fs::write(common.out_dir.join("summary.csv"), summary).map_err(runtime("cannot write summary.csv"))?;
    Ok(())
}

fn gradcheck(configurations: usize, seed: u64) -> Result<(), Failure> {
    let summary = gradcheck::random_suite(seed, configurations).map_err(runtime("gradient check failed"))?;
    println!(
        "max_relative_error={:.3e} actor={:.3e} critic={:.3e} configurations={}",
        summary.max_error(),
        summary.max_actor_error,
        summary.max_critic_error,
        summary.configurations
    );
    if summary.max_error() > 1e-4 {
        return Err(Failure::Runtime(format!(
            "max relative error {:.3e} exceeds 1e-4",
            summary.max_error()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLICESIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Topology { config, out } => topology(config.as_deref(), &out),
        Command::Run {
            common,
            algo,
            seed,
            init_from,
        } => run(&common, algo, seed, init_from.as_deref()),
        Command::Compare {
            common,
            algos,
            seeds,
            jobs,
        } => compare(&common, &algos, &seeds, jobs),
        Command::Gradcheck { configurations, seed } => gradcheck(configurations, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("slicesim: config error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("slicesim: error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
