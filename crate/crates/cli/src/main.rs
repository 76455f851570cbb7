use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use sagin_core::harness::{self, ExperimentConfig, Metric, Policy};
use sagin_core::netsim::Simulator;
use sagin_core::neural::checkpoint;
use sagin_core::traffic::select_active_sources;
use sagin_core::{build_reference_topology, HarnessError};

#[derive(Parser)]
#[command(name = "sagin", version, about = "Space-air-ground network routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Topology utilities.
    Topo {
        #[command(subcommand)]
        action: TopoAction,
    },
    /// Train one model per path combination offline and write checkpoints.
    Pretrain { config: PathBuf, ckpt_dir: PathBuf },
    /// Run a single simulation and print its metrics.
    Run {
        config: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        /// Checkpoint directory for the dnn policy.
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Number of active sources (default: traffic.n_sources).
        #[arg(long)]
        n: Option<usize>,
        /// Write one line per dropped packet.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Sweep the number of active sources and write a CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write throughput.svg and loss_rate.svg here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TopoAction {
    /// Write the directed link list.
    Dump { config: PathBuf, out: PathBuf },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply_env()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Topo {
            action: TopoAction::Dump { config, out },
        } => {
            let cfg = load_config(&config)?;
            let topo = build_reference_topology(&cfg.topology)?;
            let out = cfg.output_path(&out);
            std::fs::write(&out, topo.dump()).map_err(|e| HarnessError::io(&out, e))?;
            eprintln!(
                "{} nodes, {} directed links -> {}",
                topo.node_count(),
                topo.links().len(),
                out.display()
            );
        }
        Command::Pretrain { config, ckpt_dir } => {
            let cfg = load_config(&config)?;
            let topo = build_reference_topology(&cfg.topology)?;
            let start = Instant::now();
            let (models, report) = harness::pretrain(&topo, &cfg)?;
            let dir = cfg.output_path(&ckpt_dir);
            checkpoint::save_models(&dir, &models)?;
            let pos: usize = report.positives.iter().sum();
            let neg: usize = report.negatives.iter().sum();
            println!(
                "{} demand samples, {pos} choose / {neg} reject labels, {} skipped, {:.1} s",
                report.samples,
                report.skipped,
                start.elapsed().as_secs_f64()
            );
            println!("wrote {} checkpoints to {}", models.len(), dir.display());
        }
        Command::Run {
            config,
            policy,
            ckpt,
            n,
            trace,
        } => {
            let mut cfg = load_config(&config)?;
            if ckpt.is_some() {
                cfg.routing.checkpoint_dir = ckpt;
            }
            let topo = build_reference_topology(&cfg.topology)?;
            let models = match policy {
                Policy::Dnn => Some(harness::prepare_models(&topo, &cfg)?),
                Policy::Sp => None,
            };
            let n = n.unwrap_or(cfg.traffic.n_sources);
            let seed = cfg.simulation.seed;
            let flows = select_active_sources(&topo, n, cfg.traffic.seed, &cfg.traffic)?;
            let mut routing = harness::routing_policy(policy, &cfg, models.as_deref(), seed)?;
            let sim = Simulator::new(&topo, &flows, &routing, cfg.run_params(seed))?;
            let start = Instant::now();
            let (report, diag) = match trace {
                Some(path) => {
                    let path = cfg.output_path(&path);
                    let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
                    let mut w = BufWriter::new(file);
                    let res = sim.with_drop_log(&mut w).run(&mut routing)?;
                    w.flush().map_err(|e| HarnessError::io(&path, e))?;
                    res
                }
                None => sim.run(&mut routing)?,
            };
            println!("policy          {policy}");
            println!("n_sources       {n}");
            println!("seed            {seed}");
            println!("offered_bps     {:.0}", report.offered_bps());
            println!("throughput_bps  {:.0}", report.throughput_bps);
            println!("loss_rate       {:.6}", report.loss_rate);
            println!("mean_delay_s    {:.6}", report.mean_delay_s);
            println!("events          {}", diag.events);
            if !diag.decisions.is_empty() {
                let d: Vec<String> = diag.decisions.iter().map(|c| c.to_string()).collect();
                println!("combinations    {}", d.join(" "));
            }
            println!("wall_s          {:.2}", start.elapsed().as_secs_f64());
        }
        Command::Sweep { config, out, plot } => {
            let cfg = load_config(&config)?;
            let start = Instant::now();
            let result = harness::run_sweep(&cfg)?;
            let out = cfg.output_path(&out);
            harness::emit_csv(&result, &out)?;
            println!(
                "{} rows -> {} ({:.1} s)",
                result.rows().len(),
                out.display(),
                start.elapsed().as_secs_f64()
            );
            if let Some(dir) = plot {
                let dir = cfg.output_path(&dir);
                for metric in [Metric::Throughput, Metric::LossRate] {
                    let path = dir.join(format!("{}.svg", metric.file_stem()));
                    harness::emit_plot(&result, metric, &path)?;
                    println!("plot -> {}", path.display());
                }
            }
        }
    }
    Ok(())
}

/// 0 for `--help`/`--version`, 1 for usage errors.
fn usage_exit_code(e: &clap::Error) -> u8 {
    if e.use_stderr() {
        1
    } else {
        0
    }
}

/// 2 for configuration errors, 3 for runtime failures.
fn error_exit_code(e: &HarnessError) -> u8 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(usage_exit_code(&e));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}
