//! Game generators for the benchmark families: a two-phase Bernoulli shift,
//! a deterministic three-block sudden change, uniform gains with a planted
//! segment-wise optimal m-arm, a fixed game with underlying expert advice,
//! and ingestion of latency tables into gain matrices.
//!
//! All generators are pure functions of their inputs and the supplied RNG
//! stream, so a game is reproducible from its parameters and seed alone.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::types::{AdviceMatrix, ArmSet, DomainError, GainMatrix, RngStream, StrategyTrace};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("epsilon = {epsilon} outside (0, 0.125]")]
    EpsilonOutOfRange { epsilon: f64 },
    #[error("horizon must be positive and even, got {t}")]
    BadHorizon { t: usize },
    #[error("need 1 <= m < K, got m={m}, K={k}")]
    BadDimensions { k: usize, m: usize },
    #[error("need 1 <= segments <= rounds, got {segments} over {rounds}")]
    BadSegments { segments: usize, rounds: usize },
    #[error("table row {row} has {len} cells, expected {expected}")]
    InconsistentRow {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("table row {row}, column {col}: cannot parse {content:?}")]
    MalformedCell {
        row: usize,
        col: usize,
        content: String,
    },
    #[error("table has {have} columns, need at least {need}")]
    TooFewColumns { have: usize, need: usize },
    #[error("table contains no data rows")]
    EmptyTable,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Arm count shared by the shift and sudden-change families.
pub const TEN_ARM_COUNT: usize = 10;
/// Play count shared by the shift and sudden-change families.
pub const TEN_ARM_PLAYS: usize = 5;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Two-phase Bernoulli game on 10 arms: for the first half of the horizon
/// arms 0-4 pay Bernoulli(0.5+eps) and arms 5-9 pay Bernoulli(0.5-eps); in
/// the second half arms 0-4 drop to 0.5-eps while arms 5-9 jump to 0.5+4eps.
pub fn bernoulli_shift(
    t: usize,
    epsilon: f64,
    rng: &mut RngStream,
) -> Result<GainMatrix, EnvError> {
    if !(epsilon > 0.0 && epsilon <= 0.125) {
        return Err(EnvError::EpsilonOutOfRange { epsilon });
    }
    if t == 0 || !t.is_multiple_of(2) {
        return Err(EnvError::BadHorizon { t });
    }
    let half = t / 2;
    let g = GainMatrix::from_fn(t, TEN_ARM_COUNT, |round, arm| {
        let mean = if round < half {
            if arm < TEN_ARM_PLAYS {
                0.5 + epsilon
            } else {
                0.5 - epsilon
            }
        } else if arm < TEN_ARM_PLAYS {
            0.5 - epsilon
        } else {
            0.5 + 4.0 * epsilon
        };
        if rng.uniform() < mean {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(g)
}

/// Deterministic three-block game on 10 arms: arms 0-4 pay 1 in the first
/// and last blocks, arms 5-9 pay 1 in the middle block, everything else
/// pays 0. Block boundaries sit at floor(T*3333/10000) and
/// floor(T*6666/10000), reproducing rounds 3333/6666 at T = 10^4.
pub fn sudden_change(t: usize) -> Result<GainMatrix, EnvError> {
    if t == 0 {
        return Err(EnvError::BadHorizon { t });
    }
    let b1 = ((t as u128 * 3333) / 10_000) as usize;
    let b2 = ((t as u128 * 6666) / 10_000) as usize;
    let g = GainMatrix::from_fn(t, TEN_ARM_COUNT, |round, arm| {
        let first_block_arms = round < b1 || round >= b2;
        let paying = if first_block_arms {
            arm < TEN_ARM_PLAYS
        } else {
            arm >= TEN_ARM_PLAYS
        };
        if paying {
            1.0
        } else {
            0.0
        }
    })?;
    Ok(g)
}

fn sample_marm(k: usize, m: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut arms: Vec<usize> = rand::seq::index::sample(rng, k, m).into_iter().collect();
    arms.sort_unstable();
    arms
}

/// Uniform i.i.d. gains with a planted optimum: the horizon splits into
/// `segments` segments at switch instants drawn without replacement, each
/// segment picks an m-arm (distinct from its predecessor), and every round
/// swaps that m-arm's gains with the row's m largest values. Returns the
/// gains and the planted trace, which is uniformly optimal by construction.
pub fn random_change(
    k: usize,
    m: usize,
    t: usize,
    segments: usize,
    rng: &mut RngStream,
) -> Result<(GainMatrix, StrategyTrace), EnvError> {
    if m == 0 || m >= k {
        return Err(EnvError::BadDimensions { k, m });
    }
    if segments == 0 || segments > t {
        return Err(EnvError::BadSegments {
            segments,
            rounds: t,
        });
    }
    let mut rows: Vec<Vec<f64>> = (0..t)
        .map(|_| (0..k).map(|_| rng.uniform()).collect())
        .collect();

    // Segment starts: round 0 plus segments-1 distinct switch instants.
    let mut starts = vec![0usize];
    let mut instants: Vec<usize> = rand::seq::index::sample(rng, t - 1, segments - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    instants.sort_unstable();
    starts.extend(instants);

    let mut selections: Vec<ArmSet> = Vec::with_capacity(t);
    let mut previous: Option<Vec<usize>> = None;
    for (seg, &start) in starts.iter().enumerate() {
        let end = starts.get(seg + 1).copied().unwrap_or(t);
        let planted = loop {
            let candidate = sample_marm(k, m, rng);
            if previous.as_ref() != Some(&candidate) {
                break candidate;
            }
        };
        for row in rows.iter_mut().take(end).skip(start) {
            plant_optimum(row, &planted);
        }
        let set = ArmSet::new(planted.clone())?;
        selections.extend(std::iter::repeat_with(|| set.clone()).take(end - start));
        previous = Some(planted);
    }
    Ok((
        GainMatrix::from_rows(&rows)?,
        StrategyTrace::new(selections)?,
    ))
}

/// Swaps the values at `planted` with the row's m largest values, preserving
/// the row's multiset of gains. Top values are assigned to the planted arms
/// in index order; displaced values fill the vacated positions.
fn plant_optimum(row: &mut [f64], planted: &[usize]) {
    let m = planted.len();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&i, &j| row[j].partial_cmp(&row[i]).unwrap().then(i.cmp(&j)));
    let top_vals: Vec<f64> = order[..m].iter().map(|&i| row[i]).collect();

    let mut union: Vec<usize> = order[..m]
        .iter()
        .copied()
        .chain(planted.iter().copied())
        .collect();
    union.sort_unstable();
    union.dedup();
    let mut union_vals: Vec<f64> = union.iter().map(|&i| row[i]).collect();
    union_vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // The m largest union values are exactly the row's m largest values.
    let leftover = &union_vals[m..];

    for (rank, &arm) in planted.iter().enumerate() {
        row[arm] = top_vals[rank];
    }
    let mut spare = 0;
    for &arm in &union {
        if !planted.contains(&arm) {
            row[arm] = leftover[spare];
            spare += 1;
        }
    }
}

/// Fixed game with underlying expert advice: arms 0..m always pay 1, the
/// rest pay 0. The advice stream has m+2 underlying experts per round: one
/// indicator per paying arm, plus two noise experts supported on the
/// non-paying arms with a random normalized tail.
pub fn underlying_expert_game(
    k: usize,
    m: usize,
    t: usize,
    rng: &mut RngStream,
) -> Result<(GainMatrix, Vec<AdviceMatrix>), EnvError> {
    if m == 0 || m >= k {
        return Err(EnvError::BadDimensions { k, m });
    }
    if t == 0 {
        return Err(EnvError::BadHorizon { t });
    }
    let gains = GainMatrix::from_fn(t, k, |_, arm| if arm < m { 1.0 } else { 0.0 })?;
    let mut advice = Vec::with_capacity(t);
    for _ in 0..t {
        let mut experts: Vec<Vec<f64>> = Vec::with_capacity(m + 2);
        for i in 0..m {
            let mut row = vec![0.0; k];
            row[i] = 1.0;
            experts.push(row);
        }
        for _ in 0..2 {
            let mut row = vec![0.0; k];
            loop {
                let mut total = 0.0;
                for slot in row.iter_mut().skip(m) {
                    *slot = rng.uniform();
                    total += *slot;
                }
                if total > 0.0 {
                    for slot in row.iter_mut().skip(m) {
                        *slot /= total;
                    }
                    break;
                }
            }
            experts.push(row);
        }
        advice.push(AdviceMatrix::from_rows(&experts)?);
    }
    Ok((gains, advice))
}

// ---------------------------------------------------------------------------
// Latency ingestion
// ---------------------------------------------------------------------------

/// Splits delimited text into parsed rows. Each line uses tabs when present,
/// commas otherwise. The first non-blank line is treated as a header and
/// skipped when any of its non-empty cells fails the cell parser.
fn parse_table(
    text: &str,
    parse_cell: impl Fn(&str, usize, usize) -> Result<f64, EnvError>,
) -> Result<Vec<Vec<f64>>, EnvError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut expected = 0usize;
    let mut saw_first = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split(',').map(str::trim).collect()
        };
        let row_index = rows.len();
        let parsed: Result<Vec<f64>, EnvError> = cells
            .iter()
            .enumerate()
            .map(|(col, cell)| parse_cell(cell, row_index, col))
            .collect();
        match parsed {
            Err(_) if !saw_first => {
                // Header row: skip it, but remember the column count.
                saw_first = true;
                expected = cells.len();
                continue;
            }
            Err(e) => return Err(e),
            Ok(row) => {
                if !saw_first {
                    saw_first = true;
                    expected = row.len();
                } else if row.len() != expected {
                    return Err(EnvError::InconsistentRow {
                        row: row_index,
                        len: row.len(),
                        expected,
                    });
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Err(EnvError::EmptyTable);
    }
    Ok(rows)
}

/// Parses a latency table into gains. Cells are latencies in milliseconds;
/// an empty cell is a timeout at the 1000 ms truncation point. The gain of
/// a latency is `1 - min(latency, 1000)/1000`.
pub fn parse_latency_table(text: &str) -> Result<Vec<Vec<f64>>, EnvError> {
    parse_table(text, |cell, row, col| {
        let latency = if cell.is_empty() {
            1000.0
        } else {
            cell.parse::<f64>().map_err(|_| EnvError::MalformedCell {
                row,
                col,
                content: cell.to_string(),
            })?
        };
        if !latency.is_finite() || latency < 0.0 {
            return Err(EnvError::MalformedCell {
                row,
                col,
                content: cell.to_string(),
            });
        }
        Ok(1.0 - latency.min(1000.0) / 1000.0)
    })
}

/// Parses a plain gain table (used by the CLI oracle subcommand): every cell
/// must be a gain in [0, 1]; empty cells are malformed.
pub fn parse_gain_table(text: &str) -> Result<GainMatrix, EnvError> {
    let rows = parse_table(text, |cell, row, col| {
        cell.parse::<f64>().map_err(|_| EnvError::MalformedCell {
            row,
            col,
            content: cell.to_string(),
        })
    })?;
    Ok(GainMatrix::from_rows(&rows)?)
}

/// Reads a latency table and samples `games` K-column subsets of it, each a
/// gain matrix over the full row count. Column subsets are sorted so arm
/// order is stable within a game.
pub fn ingest_latencies(
    path: &Path,
    k: usize,
    games: usize,
    rng: &mut RngStream,
) -> Result<Vec<GainMatrix>, EnvError> {
    let text = std::fs::read_to_string(path)?;
    let table = parse_latency_table(&text)?;
    let columns = table[0].len();
    if columns < k {
        return Err(EnvError::TooFewColumns {
            have: columns,
            need: k,
        });
    }
    let mut out = Vec::with_capacity(games);
    for _ in 0..games {
        let mut picked: Vec<usize> = rand::seq::index::sample(rng, columns, k)
            .into_iter()
            .collect();
        picked.sort_unstable();
        out.push(GainMatrix::from_fn(table.len(), k, |round, arm| {
            table[round][picked[arm]]
        })?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Game specifications
// ---------------------------------------------------------------------------

/// A fully parameterized game family instance. `generate` turns it into
/// gains (plus advice or a planted optimum where the family provides one)
/// using the caller's RNG stream.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSpec {
    BernoulliShift {
        t: usize,
        epsilon: f64,
    },
    SuddenChange {
        t: usize,
    },
    RandomChange {
        k: usize,
        m: usize,
        t: usize,
        segments: usize,
    },
    ExpertGame {
        k: usize,
        m: usize,
        t: usize,
    },
    Latency {
        path: PathBuf,
        k: usize,
        m: usize,
        segments: usize,
    },
}

/// One generated game: always a gain matrix; advice when the family defines
/// underlying experts; the planted optimum trace when the family plants one.
#[derive(Debug, Clone)]
pub struct GeneratedGame {
    pub gains: GainMatrix,
    pub advice: Option<Vec<AdviceMatrix>>,
    pub planted: Option<StrategyTrace>,
}

impl GameSpec {
    pub fn arms(&self) -> usize {
        match self {
            GameSpec::BernoulliShift { .. } | GameSpec::SuddenChange { .. } => TEN_ARM_COUNT,
            GameSpec::RandomChange { k, .. }
            | GameSpec::ExpertGame { k, .. }
            | GameSpec::Latency { k, .. } => *k,
        }
    }

    pub fn plays(&self) -> usize {
        match self {
            GameSpec::BernoulliShift { .. } | GameSpec::SuddenChange { .. } => TEN_ARM_PLAYS,
            GameSpec::RandomChange { m, .. }
            | GameSpec::ExpertGame { m, .. }
            | GameSpec::Latency { m, .. } => *m,
        }
    }

    /// Segment budget of the family's hindsight comparator.
    pub fn comparator_segments(&self) -> usize {
        match self {
            GameSpec::BernoulliShift { .. } | GameSpec::ExpertGame { .. } => 1,
            GameSpec::SuddenChange { .. } => 3,
            GameSpec::RandomChange { segments, .. } | GameSpec::Latency { segments, .. } => {
                *segments
            }
        }
    }

    pub fn generate(&self, rng: &mut RngStream) -> Result<GeneratedGame, EnvError> {
        match self {
            GameSpec::BernoulliShift { t, epsilon } => Ok(GeneratedGame {
                gains: bernoulli_shift(*t, *epsilon, rng)?,
                advice: None,
                planted: None,
            }),
            GameSpec::SuddenChange { t } => Ok(GeneratedGame {
                gains: sudden_change(*t)?,
                advice: None,
                planted: None,
            }),
            GameSpec::RandomChange { k, m, t, segments } => {
                let (gains, planted) = random_change(*k, *m, *t, *segments, rng)?;
                Ok(GeneratedGame {
                    gains,
                    advice: None,
                    planted: Some(planted),
                })
            }
            GameSpec::ExpertGame { k, m, t } => {
                let (gains, advice) = underlying_expert_game(*k, *m, *t, rng)?;
                Ok(GeneratedGame {
                    gains,
                    advice: Some(advice),
                    planted: None,
                })
            }
            GameSpec::Latency { path, k, m, .. } => {
                if *m == 0 || m >= k {
                    return Err(EnvError::BadDimensions { k: *k, m: *m });
                }
                let gains = ingest_latencies(path, *k, 1, rng)?.pop().expect("one game");
                Ok(GeneratedGame {
                    gains,
                    advice: None,
                    planted: None,
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
