//! Command-line front end: seeded multi-trial experiment runs with CSV
//! output, hindsight comparator values for a gain table, and the acceptance
//! verification suite.
//!
//! `run` accepts every parameter either as a flag or through `--config`, a
//! key=value text file whose keys mirror the flag names one-to-one
//! (`game`, `alg`, `K`, `m`, `T`, `S`, `delta`, `epsilon`, `trials`,
//! `seed`, `out`, `latency-file`, `record-marginals`). Flags given on the
//! command line override the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mabmp::environments::{parse_gain_table, GameSpec};
use mabmp::exp3msp::switching_bound_applies;
use mabmp::exp4mp::uniform_bound_applies;
use mabmp::harness::{run_experiment, AlgorithmId, ExperimentConfig};
use mabmp::oracles::{best_fixed_marm, best_s_segment, best_unconstrained};
use mabmp::verify;

#[derive(Parser)]
#[command(
    name = "mabmp",
    about = "Adversarial bandit simulator: multiple-plays exponential-weights algorithms, \
             hindsight oracles, and adversarial game generators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a seeded multi-trial experiment and write CSV trajectories.
    Run(RunArgs),
    /// Compute hindsight comparator values for a gain table file.
    Oracle(OracleArgs),
    /// Run the acceptance criteria and print one pass/fail line per criterion.
    Verify,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Key=value config file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Game family: bernoulli-shift | sudden-change | random-change |
    /// expert-game | latency.
    #[arg(long)]
    game: Option<String>,
    /// Algorithm: exp4mp | exp3msp | chance.
    #[arg(long)]
    alg: Option<String>,
    /// Number of arms (fixed to 10 for bernoulli-shift and sudden-change).
    #[arg(long = "K")]
    k: Option<usize>,
    /// Plays per round (fixed to 5 for bernoulli-shift and sudden-change).
    #[arg(long)]
    m: Option<usize>,
    /// Rounds per trial (for the latency game the table length decides).
    #[arg(long = "T")]
    t: Option<usize>,
    /// Comparator segment budget (random-change and latency games).
    #[arg(long = "S")]
    s: Option<usize>,
    /// Confidence parameter of the regret bounds (default 0.01).
    #[arg(long)]
    delta: Option<f64>,
    /// Bernoulli gap of the bernoulli-shift game (default 0.1).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of independent trials (default 1).
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed; trial seeds are derived from it (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for trial_NNN.csv and summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Latency table for the latency game (comma- or tab-separated
    /// milliseconds, empty cells count as timeouts).
    #[arg(long = "latency-file")]
    latency_file: Option<PathBuf>,
    /// Record per-arm selection probabilities in the trajectory CSVs.
    /// (As a file key, `record-marginals = true`.)
    #[arg(long = "record-marginals")]
    record_marginals: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Gain table file: one round per line, comma- or tab-separated gains
    /// in [0, 1].
    #[arg(long)]
    gains: PathBuf,
    /// Plays per round.
    #[arg(long)]
    m: usize,
    /// Segment budget; when given, the best S-segment value is also printed.
    #[arg(long = "S")]
    s: Option<usize>,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            cmd_run(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            cmd_oracle(args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => cmd_verify(),
    }
}

// ---------------------------------------------------------------------------
// Config file handling
// ---------------------------------------------------------------------------

const CONFIG_KEYS: &[&str] = &[
    "game",
    "alg",
    "K",
    "m",
    "T",
    "S",
    "delta",
    "epsilon",
    "trials",
    "seed",
    "out",
    "latency-file",
    "record-marginals",
];

/// Parsed key=value file. Lines are `key = value`; blank lines and lines
/// starting with `#` are ignored; unknown keys are rejected.
#[derive(Default)]
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: &PathBuf) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key=value", path.display(), lineno + 1))?;
            let key = key.trim();
            if !CONFIG_KEYS.contains(&key) {
                bail!(
                    "{}:{}: unknown key {key:?} (expected one of: {})",
                    path.display(),
                    lineno + 1,
                    CONFIG_KEYS.join(", ")
                );
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key {key} = {raw:?}: {e}")),
        }
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let game_name = args
        .game
        .or(file.get::<String>("game")?)
        .ok_or_else(|| anyhow!("missing --game (or `game` in the config file)"))?;
    let alg_name = args
        .alg
        .or(file.get::<String>("alg")?)
        .ok_or_else(|| anyhow!("missing --alg (or `alg` in the config file)"))?;
    let algorithm: AlgorithmId = alg_name.parse().map_err(|e: String| anyhow!(e))?;

    let k = args.k.or(file.get("K")?);
    let m = args.m.or(file.get("m")?);
    let t = args.t.or(file.get("T")?);
    let s = args.s.or(file.get("S")?);
    let epsilon = args.epsilon.or(file.get("epsilon")?);
    let latency_file = args.latency_file.or(file.get::<PathBuf>("latency-file")?);
    let delta = args.delta.or(file.get("delta")?).unwrap_or(0.01);
    let trials = args.trials.or(file.get("trials")?).unwrap_or(1);
    let seed = args.seed.or(file.get("seed")?).unwrap_or(0);
    let out = args.out.or(file.get::<PathBuf>("out")?);
    let record_marginals = args.record_marginals || file.get("record-marginals")?.unwrap_or(false);

    let game = build_game(&game_name, k, m, t, s, epsilon, latency_file)?;
    let config = ExperimentConfig {
        game,
        algorithm,
        trials,
        delta,
        seed,
        record_marginals,
    };
    warn_if_bound_inapplicable(&config);

    let (summary, records) = run_experiment(&config, out.as_deref())?;

    println!(
        "game: {game_name}, algorithm: {}, K={}, m={}, trials={trials}, rounds={}",
        algorithm.name(),
        config.game.arms(),
        config.game.plays(),
        records.first().map_or(0, |r| r.rounds()),
    );
    println!(
        "final regret: mean {:.3}, min {:.3}, q1 {:.3}, median {:.3}, q3 {:.3}, max {:.3}",
        summary.mean, summary.min, summary.q1, summary.median, summary.q3, summary.max
    );
    let violations = records
        .iter()
        .filter(|r| r.bounded_ok.iter().any(|&ok| !ok))
        .count();
    if violations > 0 {
        eprintln!(
            "warning: the update-boundedness assumption failed in {violations}/{trials} trials"
        );
    }
    if let Some(dir) = &out {
        println!(
            "wrote {} trajectory file(s) and summary.csv to {}",
            records.len(),
            dir.display()
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn build_game(
    name: &str,
    k: Option<usize>,
    m: Option<usize>,
    t: Option<usize>,
    s: Option<usize>,
    epsilon: Option<f64>,
    latency_file: Option<PathBuf>,
) -> Result<GameSpec> {
    let need_t = || t.ok_or_else(|| anyhow!("the {name} game needs --T"));
    let fixed_dims = |spec: GameSpec| -> Result<GameSpec> {
        if let Some(k) = k {
            if k != spec.arms() {
                bail!("the {name} game is fixed at K={}, got --K {k}", spec.arms());
            }
        }
        if let Some(m) = m {
            if m != spec.plays() {
                bail!(
                    "the {name} game is fixed at m={}, got --m {m}",
                    spec.plays()
                );
            }
        }
        Ok(spec)
    };
    match name {
        "bernoulli-shift" => fixed_dims(GameSpec::BernoulliShift {
            t: need_t()?,
            epsilon: epsilon.unwrap_or(0.1),
        }),
        "sudden-change" => fixed_dims(GameSpec::SuddenChange { t: need_t()? }),
        "random-change" => Ok(GameSpec::RandomChange {
            k: k.unwrap_or(10),
            m: m.unwrap_or(5),
            t: need_t()?,
            segments: s.unwrap_or(3),
        }),
        "expert-game" => Ok(GameSpec::ExpertGame {
            k: k.unwrap_or(30),
            m: m.unwrap_or(5),
            t: need_t()?,
        }),
        "latency" => Ok(GameSpec::Latency {
            path: latency_file.ok_or_else(|| anyhow!("the latency game needs --latency-file"))?,
            k: k.ok_or_else(|| anyhow!("the latency game needs --K (columns per game)"))?,
            m: m.ok_or_else(|| anyhow!("the latency game needs --m"))?,
            segments: s.unwrap_or(1),
        }),
        other => bail!(
            "unknown game {other:?} (expected bernoulli-shift, sudden-change, random-change, \
             expert-game, or latency)"
        ),
    }
}

/// The closed-form regret bounds come with horizon conditions; warn when a
/// run's parameters fall outside them so printed bound comparisons are read
/// with care. The latency game's horizon comes from the file, so it is not
/// checked here.
fn warn_if_bound_inapplicable(config: &ExperimentConfig) {
    let k = config.game.arms();
    let m = config.game.plays();
    let t = match &config.game {
        GameSpec::BernoulliShift { t, .. }
        | GameSpec::SuddenChange { t }
        | GameSpec::RandomChange { t, .. }
        | GameSpec::ExpertGame { t, .. } => *t,
        GameSpec::Latency { .. } => return,
    };
    match config.algorithm {
        AlgorithmId::Exp4Mp => {
            let n_r = match &config.game {
                GameSpec::ExpertGame { m, .. } => m + 2,
                _ => k,
            };
            if !uniform_bound_applies(k, m, t, config.delta, n_r) {
                eprintln!(
                    "warning: the horizon condition of the uniform regret bound fails for \
                     K={k}, m={m}, T={t}, delta={}; bound comparisons are not guaranteed",
                    config.delta
                );
            }
        }
        AlgorithmId::Exp3Msp => {
            let s = config.game.comparator_segments();
            if !switching_bound_applies(k, m, t, s, config.delta) {
                eprintln!(
                    "warning: the conditions of the switching regret bound fail for \
                     K={k}, m={m}, T={t}, S={s}, delta={}; bound comparisons are not guaranteed",
                    config.delta
                );
            }
        }
        AlgorithmId::Chance => {}
    }
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let text = fs::read_to_string(&args.gains)
        .with_context(|| format!("reading gain table {}", args.gains.display()))?;
    let gains = parse_gain_table(&text)?;
    println!(
        "rounds: {}, arms: {}, plays: {}",
        gains.rounds(),
        gains.arms(),
        args.m
    );

    let (arms, fixed) = best_fixed_marm(&gains, args.m)?;
    let arm_list: Vec<String> = arms.iter().map(|a| a.to_string()).collect();
    println!(
        "best fixed {}-subset: [{}], total gain {fixed}",
        args.m,
        arm_list.join(", ")
    );
    println!(
        "best unconstrained per-round choice: total gain {}",
        best_unconstrained(&gains, args.m)?
    );
    if let Some(s) = args.s {
        println!(
            "best {s}-segment strategy: total gain {}",
            best_s_segment(&gains, args.m, s)?
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify() -> Result<ExitCode> {
    let results = verify::run_all();
    let mut failures = 0usize;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("{status} - {}: {}", r.name, r.detail);
        if !r.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("all {} criteria passed", results.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{failures}/{} criteria failed", results.len());
        Ok(ExitCode::FAILURE)
    }
}
