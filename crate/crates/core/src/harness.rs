//! Experiment runner: composes a game, an algorithm (or the Chance
//! baseline), and the matching hindsight comparator into seeded multi-trial
//! experiments, and writes per-trial trajectory CSVs plus a summary.
//!
//! Feedback discipline is enforced structurally: the algorithm path reads
//! gains only through a guarded per-round view that refuses arms outside
//! the current selection. Comparator bookkeeping reads the gain matrix
//! directly, as hindsight baselines are allowed to.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::environments::{EnvError, GameSpec};
use crate::exp3msp::{params_switching, Exp3MspState};
use crate::exp4mp::{
    estimate_gains, expert_statistics, params_uniform, vanilla_params, Exp4MpState, PolicyError,
};
use crate::oracles::{best_fixed_marm, best_s_segment_trace, OracleError};
use crate::types::{derive_seed, ArmSet, DomainError, GainMatrix, RngStream, StrategyTrace};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("round {round}: read of arm {arm} outside the selected set")]
    OutOfSetRead { round: usize, arm: usize },
    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        source: Box<HarnessError>,
    },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("delta = {delta} outside (0, 1]")]
    BadDelta { delta: f64 },
}

fn at_round<E: Into<HarnessError>>(round: usize) -> impl FnOnce(E) -> HarnessError {
    move |e| HarnessError::AtRound {
        round,
        source: Box::new(e.into()),
    }
}

// ---------------------------------------------------------------------------
// Semi-bandit feedback guard
// ---------------------------------------------------------------------------

/// One round of gains as the algorithm is allowed to see them: only the
/// selected arms are readable, anything else is an error.
pub struct SemiBanditView<'a> {
    row: &'a [f64],
    selection: &'a ArmSet,
    round: usize,
}

impl<'a> SemiBanditView<'a> {
    pub fn new(row: &'a [f64], selection: &'a ArmSet, round: usize) -> Self {
        Self {
            row,
            selection,
            round,
        }
    }

    /// Gain of one selected arm; out-of-set reads fail.
    pub fn gain(&self, arm: usize) -> Result<f64, HarnessError> {
        if !self.selection.contains(arm) {
            return Err(HarnessError::OutOfSetRead {
                round: self.round,
                arm,
            });
        }
        Ok(self.row[arm])
    }

    /// Gains of the selected arms in ascending arm order.
    pub fn observed(&self) -> Vec<f64> {
        self.selection.iter().map(|arm| self.row[arm]).collect()
    }
}

// ---------------------------------------------------------------------------
// Configuration and records
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmId {
    Exp4Mp,
    Exp3Msp,
    Chance,
}

impl AlgorithmId {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmId::Exp4Mp => "exp4mp",
            AlgorithmId::Exp3Msp => "exp3msp",
            AlgorithmId::Chance => "chance",
        }
    }
}

impl std::str::FromStr for AlgorithmId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exp4mp" => Ok(AlgorithmId::Exp4Mp),
            "exp3msp" => Ok(AlgorithmId::Exp3Msp),
            "chance" => Ok(AlgorithmId::Chance),
            other => Err(format!(
                "unknown algorithm {other:?} (expected exp4mp, exp3msp, or chance)"
            )),
        }
    }
}

/// A complete experiment description. Trial seeds are derived from the
/// master seed, so identical configs reproduce identical results.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub algorithm: AlgorithmId,
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
    pub record_marginals: bool,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::NoTrials);
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(HarnessError::BadDelta { delta: self.delta });
        }
        Ok(())
    }
}

/// Per-round trajectories of one trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub alg_cum: Vec<f64>,
    pub comp_cum: Vec<f64>,
    pub marginals: Option<Vec<Vec<f64>>>,
    pub bounded_ok: Vec<bool>,
}

impl TrialRecord {
    pub fn rounds(&self) -> usize {
        self.alg_cum.len()
    }

    pub fn regret_at(&self, round: usize) -> f64 {
        self.comp_cum[round] - self.alg_cum[round]
    }

    pub fn final_regret(&self) -> f64 {
        self.regret_at(self.rounds() - 1)
    }
}

/// Final-regret distribution statistics across trials. Quartiles use linear
/// interpolation between order statistics.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub final_regrets: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ExperimentSummary {
    fn from_finals(finals: Vec<f64>) -> Self {
        let mut sorted = finals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        Self {
            mean,
            min: sorted[0],
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: *sorted.last().unwrap(),
            final_regrets: finals,
        }
    }
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// The Chance baseline: a uniformly random m-subset each round.
pub fn chance_policy(k: usize, m: usize, rng: &mut RngStream) -> ArmSet {
    let mut arms: Vec<usize> = rand::seq::index::sample(rng, k, m).into_iter().collect();
    arms.sort_unstable();
    ArmSet::new(arms).expect("sampled arms are distinct and nonempty")
}

/// Comparator trace for a game: the planted optimum when the family provides
/// one, the best fixed m-arm for a one-segment budget, and the segment
/// dynamic program otherwise.
fn comparator_trace(
    game: &GameSpec,
    gains: &GainMatrix,
    planted: Option<StrategyTrace>,
) -> Result<StrategyTrace, HarnessError> {
    if let Some(trace) = planted {
        return Ok(trace);
    }
    let m = game.plays();
    let segments = game.comparator_segments();
    if segments == 1 {
        let (arms, _) = best_fixed_marm(gains, m)?;
        return Ok(StrategyTrace::new(vec![arms; gains.rounds()])?);
    }
    Ok(best_s_segment_trace(gains, m, segments)?.0)
}

// ---------------------------------------------------------------------------
// Trial and experiment runners
// ---------------------------------------------------------------------------

/// Plays one full game: generates the trial's game, runs the configured
/// algorithm round by round under the semi-bandit guard, and tracks the
/// comparator's cumulative gain alongside.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialRecord, HarnessError> {
    config.validate()?;
    let trial_seed = derive_seed(config.seed, trial as u64);
    let mut game_rng = RngStream::seeded(derive_seed(trial_seed, 1));
    let mut alg_rng = RngStream::seeded(derive_seed(trial_seed, 2));

    let game = config.game.generate(&mut game_rng)?;
    let gains = &game.gains;
    let rounds = gains.rounds();
    let k = gains.arms();
    let m = config.game.plays();

    let comparator = comparator_trace(&config.game, gains, game.planted)?;
    let mut comp_cum = Vec::with_capacity(rounds);
    let mut running = 0.0;
    for t in 0..rounds {
        running += comparator
            .selection(t)
            .iter()
            .map(|j| gains.gain(t, j))
            .sum::<f64>();
        comp_cum.push(running);
    }

    let mut alg_cum = Vec::with_capacity(rounds);
    let mut marginals = if config.record_marginals {
        Some(Vec::with_capacity(rounds))
    } else {
        None
    };
    let mut bounded_ok = Vec::new();
    let mut alg_running = 0.0;

    match config.algorithm {
        AlgorithmId::Chance => {
            for t in 0..rounds {
                let selection = chance_policy(k, m, &mut alg_rng);
                let view = SemiBanditView::new(gains.row(t), &selection, t);
                alg_running += view.observed().iter().sum::<f64>();
                alg_cum.push(alg_running);
                if let Some(ms) = marginals.as_mut() {
                    ms.push(vec![m as f64 / k as f64; k]);
                }
            }
        }
        AlgorithmId::Exp4Mp => {
            let indicators = crate::types::AdviceMatrix::indicators(k);
            let params = match &game.advice {
                Some(stream) => params_uniform(k, m, rounds, config.delta, stream[0].experts())?,
                None => vanilla_params(k, m, rounds, config.delta)?,
            };
            let mut state = Exp4MpState::uniform_init(params);
            for t in 0..rounds {
                let advice = game
                    .advice
                    .as_ref()
                    .map_or(&indicators, |stream| &stream[t]);
                let outcome = state.select(advice, &mut alg_rng).map_err(at_round(t))?;
                let view = SemiBanditView::new(gains.row(t), &outcome.selection, t);
                let observed = view.observed();
                alg_running += observed.iter().sum::<f64>();
                alg_cum.push(alg_running);
                let x_hat = estimate_gains(&observed, &outcome).map_err(at_round(t))?;
                let (y_hat, u_hat) =
                    expert_statistics(advice, &x_hat, &outcome).map_err(at_round(t))?;
                bounded_ok.push(state.update(&y_hat, &u_hat).map_err(at_round(t))?);
                if let Some(ms) = marginals.as_mut() {
                    ms.push(outcome.marginals.probabilities().to_vec());
                }
            }
        }
        AlgorithmId::Exp3Msp => {
            let segments = config.game.comparator_segments();
            let params = params_switching(k, m, rounds, segments, config.delta)?;
            let mut state = Exp3MspState::init(params);
            for t in 0..rounds {
                let outcome = state.select(&mut alg_rng).map_err(at_round(t))?;
                let view = SemiBanditView::new(gains.row(t), &outcome.selection, t);
                let observed = view.observed();
                alg_running += observed.iter().sum::<f64>();
                alg_cum.push(alg_running);
                let x_hat = estimate_gains(&observed, &outcome).map_err(at_round(t))?;
                bounded_ok.push(state.share_update(&x_hat, &outcome).map_err(at_round(t))?);
                if let Some(ms) = marginals.as_mut() {
                    ms.push(outcome.marginals.probabilities().to_vec());
                }
            }
        }
    }

    Ok(TrialRecord {
        alg_cum,
        comp_cum,
        marginals,
        bounded_ok,
    })
}

/// Runs all trials of a config, optionally writing one trajectory CSV per
/// trial plus a summary CSV into `out_dir`. Returns the summary and the
/// per-trial records.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<(ExperimentSummary, Vec<TrialRecord>), HarnessError> {
    config.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut records = Vec::with_capacity(config.trials);
    for trial in 0..config.trials {
        let record = run_trial(config, trial)?;
        if let Some(dir) = out_dir {
            write_trajectory(&dir.join(format!("trial_{trial:03}.csv")), &record)?;
        }
        records.push(record);
    }
    let summary =
        ExperimentSummary::from_finals(records.iter().map(|r| r.final_regret()).collect());
    if let Some(dir) = out_dir {
        write_summary(&dir.join("summary.csv"), config.trials, &summary)?;
    }
    Ok((summary, records))
}

fn write_trajectory(path: &Path, record: &TrialRecord) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write!(out, "round,alg_gain_cum,comp_gain_cum,regret")?;
    if let Some(ms) = &record.marginals {
        for arm in 1..=ms[0].len() {
            write!(out, ",p_{arm}")?;
        }
    }
    writeln!(out)?;
    for t in 0..record.rounds() {
        write!(
            out,
            "{},{},{},{}",
            t + 1,
            record.alg_cum[t],
            record.comp_cum[t],
            record.regret_at(t)
        )?;
        if let Some(ms) = &record.marginals {
            for p in &ms[t] {
                write!(out, ",{p}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn write_summary(
    path: &Path,
    trials: usize,
    summary: &ExperimentSummary,
) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        "trials,mean_final_regret,min_final_regret,q1_final_regret,median_final_regret,q3_final_regret,max_final_regret"
    )?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        trials, summary.mean, summary.min, summary.q1, summary.median, summary.q3, summary.max
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::count_segments;

    #[test]
    fn chance_selects_uniformly() {
        let mut rng = RngStream::seeded(17);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws {
            for arm in chance_policy(10, 5, &mut rng).iter() {
                counts[arm] += 1;
            }
        }
        for (arm, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.5).abs() < 0.01, "arm {arm}: {freq}");
        }
        assert_eq!(chance_policy(4, 4, &mut rng).arms(), &[0, 1, 2, 3]);
    }

    #[test]
    fn guarded_view_rejects_out_of_set_reads() {
        let row = [0.3, 0.7, 0.9];
        let selection = ArmSet::new(vec![0, 2]).unwrap();
        let view = SemiBanditView::new(&row, &selection, 4);
        assert_eq!(view.gain(2).unwrap(), 0.9);
        assert_eq!(view.observed(), vec![0.3, 0.9]);
        assert!(matches!(
            view.gain(1),
            Err(HarnessError::OutOfSetRead { round: 4, arm: 1 })
        ));
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let s = ExperimentSummary::from_finals(vec![4.0, 1.0, 3.0, 2.0]);
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert!((s.q1 - 1.75).abs() < 1e-12);
        assert!((s.median - 2.5).abs() < 1e-12);
        assert!((s.q3 - 3.25).abs() < 1e-12);
        let single = ExperimentSummary::from_finals(vec![5.0]);
        assert_eq!(
            (
                single.mean,
                single.min,
                single.q1,
                single.median,
                single.q3,
                single.max
            ),
            (5.0, 5.0, 5.0, 5.0, 5.0, 5.0)
        );
    }

    fn zero_gain_config(algorithm: AlgorithmId) -> (tempfile::NamedTempFile, ExperimentConfig) {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..12 {
            writeln!(file, "1000,1000,1000").unwrap();
        }
        let config = ExperimentConfig {
            game: GameSpec::Latency {
                path: file.path().to_path_buf(),
                k: 3,
                m: 1,
                segments: 2,
            },
            algorithm,
            trials: 1,
            delta: 0.05,
            seed: 7,
            record_marginals: false,
        };
        (file, config)
    }

    #[test]
    fn zero_gain_game_gives_zero_regret() {
        for algorithm in [
            AlgorithmId::Exp4Mp,
            AlgorithmId::Exp3Msp,
            AlgorithmId::Chance,
        ] {
            let (_file, config) = zero_gain_config(algorithm);
            let record = run_trial(&config, 0).unwrap();
            assert_eq!(*record.alg_cum.last().unwrap(), 0.0);
            assert_eq!(*record.comp_cum.last().unwrap(), 0.0);
            assert_eq!(record.final_regret(), 0.0);
        }
    }

    #[test]
    fn comparator_on_sudden_change_tracks_blocks() {
        let config = ExperimentConfig {
            game: GameSpec::SuddenChange { t: 100 },
            algorithm: AlgorithmId::Chance,
            trials: 1,
            delta: 0.05,
            seed: 1,
            record_marginals: false,
        };
        let record = run_trial(&config, 0).unwrap();
        assert_eq!(*record.comp_cum.last().unwrap(), 500.0);
        let game = config.game.generate(&mut RngStream::seeded(0)).unwrap();
        let trace = comparator_trace(&config.game, &game.gains, None).unwrap();
        assert_eq!(count_segments(&trace), 3);
    }

    #[test]
    fn cumulative_gains_are_nondecreasing_and_reproducible() {
        let config = ExperimentConfig {
            game: GameSpec::RandomChange {
                k: 5,
                m: 2,
                t: 40,
                segments: 3,
            },
            algorithm: AlgorithmId::Exp3Msp,
            trials: 1,
            delta: 0.1,
            seed: 33,
            record_marginals: true,
        };
        let a = run_trial(&config, 0).unwrap();
        let b = run_trial(&config, 0).unwrap();
        assert_eq!(a.alg_cum, b.alg_cum);
        assert_eq!(a.comp_cum, b.comp_cum);
        for t in 1..a.rounds() {
            assert!(a.alg_cum[t] >= a.alg_cum[t - 1]);
            assert!(a.comp_cum[t] >= a.comp_cum[t - 1]);
        }
        assert_eq!(a.marginals.as_ref().unwrap().len(), 40);
        let c = run_trial(&config, 1).unwrap();
        assert_ne!(a.alg_cum, c.alg_cum, "different trials use different seeds");
    }

    #[test]
    fn expert_game_uses_advice_stream() {
        let config = ExperimentConfig {
            game: GameSpec::ExpertGame { k: 8, m: 3, t: 60 },
            algorithm: AlgorithmId::Exp4Mp,
            trials: 1,
            delta: 0.1,
            seed: 5,
            record_marginals: false,
        };
        let record = run_trial(&config, 0).unwrap();
        assert_eq!(record.rounds(), 60);
        assert_eq!(*record.comp_cum.last().unwrap(), 180.0);
        assert!(record.bounded_ok.iter().all(|&b| b));
    }

    #[test]
    fn experiment_writes_reproducible_csv() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            game: GameSpec::RandomChange {
                k: 4,
                m: 1,
                t: 12,
                segments: 2,
            },
            algorithm: AlgorithmId::Exp3Msp,
            trials: 2,
            delta: 0.1,
            seed: 9,
            record_marginals: true,
        };
        let (summary, records) = run_experiment(&config, Some(dir.path())).unwrap();
        assert_eq!(records.len(), 2);
        let t0 = fs::read_to_string(dir.path().join("trial_000.csv")).unwrap();
        let header = t0.lines().next().unwrap();
        assert_eq!(
            header,
            "round,alg_gain_cum,comp_gain_cum,regret,p_1,p_2,p_3,p_4"
        );
        assert_eq!(t0.lines().count(), 13);
        let s = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(s.starts_with("trials,mean_final_regret,min_final_regret"));
        assert!(s.lines().nth(1).unwrap().starts_with("2,"));

        let dir2 = tempfile::tempdir().unwrap();
        let (summary2, _) = run_experiment(&config, Some(dir2.path())).unwrap();
        assert_eq!(summary.final_regrets, summary2.final_regrets);
        let again = fs::read_to_string(dir2.path().join("trial_000.csv")).unwrap();
        assert_eq!(t0, again, "same master seed reproduces byte-identical CSV");

        let single = ExperimentConfig {
            trials: 1,
            ..config
        };
        let (s1, r1) = run_experiment(&single, None).unwrap();
        assert_eq!(s1.mean, r1[0].final_regret());
        assert_eq!(s1.min, s1.max);
    }

    #[test]
    fn config_validation_errors() {
        let base = ExperimentConfig {
            game: GameSpec::SuddenChange { t: 10 },
            algorithm: AlgorithmId::Chance,
            trials: 0,
            delta: 0.1,
            seed: 0,
            record_marginals: false,
        };
        assert!(matches!(run_trial(&base, 0), Err(HarnessError::NoTrials)));
        let bad_delta = ExperimentConfig {
            trials: 1,
            delta: 0.0,
            ..base
        };
        assert!(matches!(
            run_trial(&bad_delta, 0),
            Err(HarnessError::BadDelta { .. })
        ));
    }
}
