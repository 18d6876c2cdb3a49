//! Command-line front end: compile diagrams, build causal products, run
//! training experiments, solve tasks exactly, and check diagrams against
//! maps.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use causal_rm::envs::Gridworld;
use causal_rm::harness::{self, ExperimentConfig};
use causal_rm::learn::{exact_solve, Task};
use causal_rm::ltlf::{compile_tlcd, Tlcd, DEFAULT_MAX_STATES};
use causal_rm::machines::{build_causal_prm, Prm};

#[derive(Parser)]
#[command(name = "causal-rm", about = "Causal reward-machine toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a causal diagram to a minimized automaton.
    Compile(CompileArgs),
    /// Build the causal product of a reward machine and a diagram.
    Product(ProductArgs),
    /// Run a training experiment from a config file.
    Train(TrainArgs),
    /// Solve a task exactly and report optimal values.
    Eval(EvalArgs),
    /// Check a diagram against a map's attainable behavior.
    Check(CheckArgs),
}

#[derive(Args)]
struct CompileArgs {
    /// Diagram file.
    tlcd: PathBuf,
    /// Abort if progression reaches more than this many states.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Write the automaton here (text format); stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a Graphviz rendering here.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct ProductArgs {
    /// Reward machine file.
    prm: PathBuf,
    /// Diagram file.
    tlcd: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Abort if progression reaches more than this many states.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// If given, warn when the diagram fails its bounded check on this map.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Write the product machine here; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    #[arg(long)]
    gamma: Option<f64>,
    /// Comma-separated seed list overriding the config.
    #[arg(long, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,
    /// Output path prefix overriding the config.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Map file.
    map: PathBuf,
    /// Reward machine file.
    prm: PathBuf,
    /// Optional diagram: evaluate the causal product instead.
    tlcd: Option<PathBuf>,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
}

#[derive(Args)]
struct CheckArgs {
    /// Map file.
    map: PathBuf,
    /// Diagram file.
    tlcd: PathBuf,
    /// Trajectory length bound for the check.
    #[arg(long, default_value_t = 10)]
    max_len: usize,
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Compile(args) => {
            let cd = Tlcd::parse(&read(&args.tlcd)?)?;
            let dfa = compile_tlcd(&cd, args.max_states)?;
            let text = dfa.to_text();
            match &args.out {
                Some(p) => fs::write(p, &text)
                    .with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            if let Some(p) = &args.dot {
                fs::write(p, dfa.to_dot())
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            eprintln!(
                "{} states, {} accepting",
                dfa.n_states(),
                (0..dfa.n_states()).filter(|&q| dfa.is_accepting(q)).count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Product(args) => {
            let prm = Prm::from_text(&read(&args.prm)?)?;
            let cd = Tlcd::parse(&read(&args.tlcd)?)?;
            if let Some(map) = &args.map {
                let env = Gridworld::from_text(&read(map)?)?;
                if let Err(word) = env.tlcd_holds(&cd, 10)? {
                    eprintln!(
                        "warning: diagram violated by attainable word {:?}",
                        word
                    );
                }
            }
            let dfa = compile_tlcd(&cd, args.max_states)?;
            let build = build_causal_prm(&prm, &dfa, args.gamma);
            eprintln!(
                "product: {} states ({} x {}), minimal reward {}, {} states newly terminal",
                build.product.prm.n_states(),
                prm.n_states(),
                dfa.n_states(),
                build.product.minimal_reward,
                build.added_terminals.len()
            );
            for &x in &build.added_terminals {
                let (u, q) = build.product.provenance[x];
                eprintln!("  terminal: product state {x} = (machine {u}, automaton {q})");
            }
            let text = build.product.prm.to_text();
            match &args.out {
                Some(p) => fs::write(p, &text)
                    .with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train(args) => {
            let mut cfg = ExperimentConfig::load(&args.config)?;
            if let Some(g) = args.gamma {
                cfg.gamma = g;
            }
            if let Some(seeds) = args.seed_list {
                cfg.seeds = seeds;
            }
            if let Some(out) = args.out {
                cfg.out = Some(out);
            }
            cfg.validate().map_err(|msg| anyhow::anyhow!(msg))?;
            let out_prefix = match cfg.out.clone() {
                Some(p) => p,
                None => bail!("no output prefix: set `out` in the config or pass --out"),
            };
            let exp = harness::load_experiment(&cfg)?;
            eprintln!(
                "training on {} machine states x {} cells, {} seeds x {} steps",
                exp.machine.n_states(),
                exp.env.n_cells(),
                cfg.seeds.len(),
                cfg.total_steps
            );
            let output = harness::run_training(&exp, &cfg);
            for path in harness::write_outputs(&cfg, &output, &out_prefix)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval(args) => {
            let env = Gridworld::from_text(&read(&args.map)?)?;
            let prm = Prm::from_text(&read(&args.prm)?)?;
            let machine = match &args.tlcd {
                Some(p) => {
                    let cd = Tlcd::parse(&read(p)?)?;
                    let dfa = compile_tlcd(&cd, DEFAULT_MAX_STATES)?;
                    build_causal_prm(&prm, &dfa, args.gamma).product.prm
                }
                None => prm,
            };
            let task = Task::new(&env, &machine);
            let sol = exact_solve(&task, args.gamma, 1e-10);
            let v0 = sol.value(env.start(), machine.initial());
            println!("optimal value at start: {v0}");
            println!(
                "machine states: {}, cells: {}",
                machine.n_states(),
                env.n_cells()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(args) => {
            let env = Gridworld::from_text(&read(&args.map)?)?;
            let cd = Tlcd::parse(&read(&args.tlcd)?)?;
            match env.tlcd_holds(&cd, args.max_len)? {
                Ok(()) => {
                    println!(
                        "diagram holds on all attainable words up to length {}",
                        args.max_len
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Err(word) => {
                    println!("diagram violated by attainable word {word:?}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
    }
}
