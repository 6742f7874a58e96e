use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psro_core::GameTree;
use psro_harness::compare::{compare_runs, DEFAULT_INCREASE_THRESHOLD};
use psro_harness::config::{ExperimentConfig, Game, GameSpec};
use psro_harness::run::run_experiment;
use psro_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "psro", version, about = "Population-based equilibrium solvers for two-player zero-sum games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; writes one CSV per seed plus summary.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Overrides the config's budget_scale (1 selects the full budgets).
        #[arg(long)]
        budget_scale: Option<f64>,
        /// Output directory; defaults to the config's output_dir, then runs/<algorithm>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two solve output directories; prints a JSON report.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INCREASE_THRESHOLD)]
        increase_threshold: f64,
    },
    /// Inspect the game zoo.
    Games {
        #[command(subcommand)]
        command: GamesCommand,
    },
}

#[derive(Subcommand)]
enum GamesCommand {
    List,
    /// Print a game as GameTree JSON. `--game` takes a kind name or a JSON spec.
    Dump {
        #[arg(long)]
        game: String,
        /// Seed for random_nfg specs without one.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

const GAMES: &[(&str, &str)] = &[
    ("random_nfg", r#"uniform [0,1) payoffs; {"kind":"random_nfg","rows":R,"cols":C,"seed":S?}"#),
    ("bad_case", r#"DO worst case; {"kind":"bad_case","n":N,"variant":"summed"|"split"}"#),
    ("fig1", "3x3 example where DO's exploitability rises"),
    ("kuhn", "Kuhn poker, 3 cards"),
    ("leduc", "Leduc hold'em, 6 cards, two betting rounds"),
];

fn solve(config: PathBuf, seed_offset: u64, budget_scale: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let mut c = ExperimentConfig::load(&config)?;
    for s in &mut c.seeds {
        *s = s
            .checked_add(seed_offset)
            .ok_or_else(|| HarnessError::Argument("seed offset overflows a seed".into()))?;
    }
    if let Some(scale) = budget_scale {
        c.budget_scale = scale;
    }
    let out = out
        .or_else(|| c.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(c.algorithm.name()));
    c.validate().map_err(|e| match e {
        HarnessError::Config(m) => HarnessError::Argument(m),
        e => e,
    })?;
    let summary = run_experiment(&c, &out)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn compare(baseline: PathBuf, candidate: PathBuf, increase_threshold: f64) -> Result<()> {
    let report = compare_runs(&baseline, &candidate, increase_threshold)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn dump(game: &str, seed: u64) -> Result<()> {
    let tree = match GameSpec::parse(game)?.build(seed)? {
        Game::Matrix(m) => GameTree::from_matrix(&m)?,
        Game::Tree(t) => t,
    };
    println!("{}", tree.to_json()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, seed_offset, budget_scale, out } => solve(config, seed_offset, budget_scale, out),
        Command::Compare { baseline, candidate, increase_threshold } => compare(baseline, candidate, increase_threshold),
        Command::Games { command: GamesCommand::List } => {
            for (name, about) in GAMES {
                println!("{name:<12}{about}");
            }
            Ok(())
        }
        Command::Games { command: GamesCommand::Dump { game, seed } } => dump(&game, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
