use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qaoa_graphsim::graphs::{brute_force_best_capped, Graph, DEFAULT_BRUTE_FORCE_CAP};
use qaoa_graphsim::harness::{distribution_cost, run_to_path, DistributionPlan, ExperimentConfig, Scheme};
use qaoa_graphsim::hamiltonians::CostMode;
use qaoa_graphsim::permutations::tail_stats;
use qaoa_graphsim::{Error, Result};

/// QAOA simulator for graph similarity by maximal edge overlap.
#[derive(Debug, Parser)]
#[command(name = "graphsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write one CSV row per trial.
    Run {
        /// TOML experiment file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Optimizer name(s), comma separated.
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<String>>,
        #[arg(long)]
        seed: Option<u64>,
        /// QAOA depths, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<usize>>,
        #[arg(long)]
        graph_size: Option<usize>,
        #[arg(long)]
        mode: Option<CostMode>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Exhaustive edge-overlap similarity of two graph files.
    Oracle {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
        cap: usize,
    },
    /// Modelled cost of each data-distribution scheme.
    Plan {
        #[arg(long)]
        qubits: u32,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        processors: Vec<usize>,
        #[arg(long, default_value_t = 1e-9)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-6)]
        latency: f64,
        #[arg(long, default_value_t = 1e9)]
        buffer: f64,
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Feasible versus infeasible basis states per graph size.
    Tail {
        #[arg(long, default_value_t = 2)]
        min_v: usize,
        #[arg(long, default_value_t = 12)]
        max_v: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            threads,
            method,
            seed,
            p,
            graph_size,
            mode,
            samples,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(t) = threads {
                cfg.run.threads = Some(t);
            }
            if let Some(m) = method {
                cfg.optimizer.methods = m;
            }
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(p) = p {
                cfg.qaoa.depths = p;
            }
            if let Some(v) = graph_size {
                cfg.graph.size = v;
            }
            if let Some(m) = mode {
                cfg.qaoa.mode = m;
            }
            if let Some(n) = samples {
                cfg.qaoa.samples = Some(n);
            }
            let out = out.unwrap_or_else(|| cfg.run.output.clone());
            let records = run_to_path(&cfg, &out)?;
            let failed = records.iter().filter(|r| r.outcome.is_err()).count();
            eprintln!("wrote {} trials to {}", records.len(), out.display());
            if failed > 0 {
                eprintln!("{failed} trials failed; see the error column");
            }
            Ok(())
        }
        Command::Oracle { first, second, cap } => {
            let g1 = Graph::read_file(first)?;
            let g2 = Graph::read_file(second)?;
            let best = brute_force_best_capped(&g1, &g2, cap)?;
            println!("similarity {:?}", best.similarity());
            println!("difference {}", best.difference);
            println!("slots {}", best.slots);
            println!("permutation {}", best.permutation);
            Ok(())
        }
        Command::Plan {
            qubits,
            processors,
            alpha,
            latency,
            buffer,
            scheme,
        } => {
            if qubits >= 63 {
                return Err(Error::InvalidArgument(format!("{qubits} qubits is too many to model")));
            }
            let n = (1u64 << qubits) as f64;
            let schemes: Vec<Scheme> = scheme.map_or(Scheme::ALL.to_vec(), |s| vec![s]);
            println!("{:<13} {:>10} {:>14} {:>14} {:>14}", "scheme", "processors", "compute", "communication", "total");
            for s in schemes {
                for &procs in &processors {
                    let cost = distribution_cost(&DistributionPlan {
                        scheme: s,
                        n,
                        processors: procs,
                        alpha,
                        latency,
                        buffer,
                    })?;
                    println!(
                        "{:<13} {:>10} {:>14.6e} {:>14.6e} {:>14.6e}",
                        s.name(),
                        procs,
                        cost.compute,
                        cost.communication,
                        cost.total()
                    );
                }
            }
            Ok(())
        }
        Command::Tail { min_v, max_v } => {
            if min_v < 2 || max_v < min_v {
                return Err(Error::InvalidArgument(format!("need 2 <= min-v <= max-v, got {min_v}..{max_v}")));
            }
            println!("{:>3} {:>20} {:>3} {:>20} {:>20} {:>10}", "V", "V!", "q", "2^q", "difference", "ratio");
            for v in min_v..=max_v {
                let t = tail_stats(v)?;
                println!(
                    "{:>3} {:>20} {:>3} {:>20} {:>20} {:>10.4}",
                    t.vertices, t.feasible, t.qubits, t.state_size, t.tail_count, t.tail_over_feasible
                );
            }
            Ok(())
        }
    }
}
