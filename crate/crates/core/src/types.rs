//! Shared domain types: gain matrices, arm subsets, marginal vectors, advice
//! validation, gain accounting, and seeded RNG streams.
//!
//! Arms and rounds are 0-based indices. An "m-arm" is a set of `m` distinct
//! arms played in one round; the order of arms within a round never matters,
//! so [`ArmSet`] normalizes to sorted order and set equality is plain
//! equality. All types here are immutable values and safe to share read-only
//! across concurrent trial runners.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Tolerance for all simplex-style sum checks (marginals summing to `m`,
/// advice rows summing to 1). Stricter values fail after ~10^4 multiplicative
/// weight updates.
pub const SIMPLEX_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Validation failures for the shared domain types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("row {row} has {len} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("gain {value} at round {round}, arm {arm} is outside [0, 1]")]
    GainOutOfRange {
        round: usize,
        arm: usize,
        value: f64,
    },
    #[error("arm set must not be empty")]
    EmptyArmSet,
    #[error("duplicate arm {arm} in arm set")]
    DuplicateArm { arm: usize },
    #[error("arm {arm} out of range for {arms} arms")]
    ArmOutOfRange { arm: usize, arms: usize },
    #[error("entry {index} is {value}, outside [0, 1]")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error("entries sum to {sum}, expected {expected} within {SIMPLEX_TOL}")]
    SumMismatch { sum: f64, expected: f64 },
    #[error("trace has {trace} rounds, gain matrix has {rounds}")]
    RoundCountMismatch { trace: usize, rounds: usize },
    #[error("round {round} selects {got} arms, expected {expected}")]
    PlayCountMismatch {
        round: usize,
        got: usize,
        expected: usize,
    },
}

// ---------------------------------------------------------------------------
// GainMatrix
// ---------------------------------------------------------------------------

/// A `T x K` table of per-round, per-arm gains in `[0, 1]`: the adversary's
/// script for one game.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    rounds: usize,
    arms: usize,
    data: Vec<f64>,
}

impl GainMatrix {
    /// Builds a matrix from rows, validating shape and the `[0, 1]` range.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DomainError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(DomainError::EmptyMatrix);
        }
        let arms = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * arms);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != arms {
                return Err(DomainError::RaggedRow {
                    row: t,
                    len: row.len(),
                    expected: arms,
                });
            }
            for (j, &g) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    return Err(DomainError::GainOutOfRange {
                        round: t,
                        arm: j,
                        value: g,
                    });
                }
                data.push(g);
            }
        }
        Ok(Self {
            rounds: rows.len(),
            arms,
            data,
        })
    }

    /// Builds a matrix by evaluating `f(round, arm)`.
    pub fn from_fn(
        rounds: usize,
        arms: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, DomainError> {
        if rounds == 0 || arms == 0 {
            return Err(DomainError::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(rounds * arms);
        for t in 0..rounds {
            for j in 0..arms {
                let g = f(t, j);
                if !(0.0..=1.0).contains(&g) {
                    return Err(DomainError::GainOutOfRange {
                        round: t,
                        arm: j,
                        value: g,
                    });
                }
                data.push(g);
            }
        }
        Ok(Self { rounds, arms, data })
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    /// Gain of `arm` at `round`. Panics on out-of-range indices.
    pub fn gain(&self, round: usize, arm: usize) -> f64 {
        assert!(round < self.rounds && arm < self.arms, "index out of range");
        self.data[round * self.arms + arm]
    }

    /// One round's gains across all arms.
    pub fn row(&self, round: usize) -> &[f64] {
        &self.data[round * self.arms..(round + 1) * self.arms]
    }
}

// ---------------------------------------------------------------------------
// ArmSet and StrategyTrace
// ---------------------------------------------------------------------------

/// A set of distinct arm indices: one round's selection. Stored sorted, so
/// equality is set equality regardless of construction order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArmSet {
    arms: Vec<usize>,
}

impl ArmSet {
    pub fn new(mut arms: Vec<usize>) -> Result<Self, DomainError> {
        if arms.is_empty() {
            return Err(DomainError::EmptyArmSet);
        }
        arms.sort_unstable();
        for pair in arms.windows(2) {
            if pair[0] == pair[1] {
                return Err(DomainError::DuplicateArm { arm: pair[0] });
            }
        }
        Ok(Self { arms })
    }

    /// Member arms in ascending order.
    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn contains(&self, arm: usize) -> bool {
        self.arms.binary_search(&arm).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.arms.iter().copied()
    }
}

/// A deterministic m-arm strategy: one [`ArmSet`] per round, all of the same
/// cardinality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTrace {
    selections: Vec<ArmSet>,
}

impl StrategyTrace {
    pub fn new(selections: Vec<ArmSet>) -> Result<Self, DomainError> {
        if selections.is_empty() {
            return Err(DomainError::EmptyMatrix);
        }
        let plays = selections[0].len();
        for (t, sel) in selections.iter().enumerate() {
            if sel.len() != plays {
                return Err(DomainError::PlayCountMismatch {
                    round: t,
                    got: sel.len(),
                    expected: plays,
                });
            }
        }
        Ok(Self { selections })
    }

    pub fn rounds(&self) -> usize {
        self.selections.len()
    }

    /// Arms played per round.
    pub fn plays(&self) -> usize {
        self.selections[0].len()
    }

    pub fn selection(&self, round: usize) -> &ArmSet {
        &self.selections[round]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArmSet> {
        self.selections.iter()
    }
}

// ---------------------------------------------------------------------------
// MarginalVector
// ---------------------------------------------------------------------------

/// Length-K per-arm selection probabilities summing to the number of plays
/// `m`: the input to dependent rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalVector {
    p: Vec<f64>,
    plays: usize,
}

impl MarginalVector {
    /// Validates entries in `[0, 1]` (tolerating `SIMPLEX_TOL` overshoot from
    /// float arithmetic, which is clamped away) and the sum `= plays`.
    pub fn new(p: Vec<f64>, plays: usize) -> Result<Self, DomainError> {
        if p.is_empty() {
            return Err(DomainError::EmptyMatrix);
        }
        for (j, &x) in p.iter().enumerate() {
            if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&x) {
                return Err(DomainError::EntryOutOfRange { index: j, value: x });
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - plays as f64).abs() > SIMPLEX_TOL {
            return Err(DomainError::SumMismatch {
                sum,
                expected: plays as f64,
            });
        }
        let p = p.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        Ok(Self { p, plays })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn plays(&self) -> usize {
        self.plays
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Advice
// ---------------------------------------------------------------------------

/// Checks one actual expert's advice: length-K marginal probabilities, entries
/// in `[0, 1]` and summing to `m`, both up to a 1e-9 tolerance so that values
/// assembled by floating-point sums pass. Errors name the failed constraint
/// and the offending index.
pub fn validate_actual_advice(xi: &[f64], plays: usize) -> Result<(), DomainError> {
    for (j, &x) in xi.iter().enumerate() {
        if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&x) {
            return Err(DomainError::EntryOutOfRange { index: j, value: x });
        }
    }
    let sum: f64 = xi.iter().sum();
    if (sum - plays as f64).abs() > SIMPLEX_TOL {
        return Err(DomainError::SumMismatch {
            sum,
            expected: plays as f64,
        });
    }
    Ok(())
}

/// Checks one underlying expert's advice: entries in `[0, 1]` summing to 1,
/// with the same boundary tolerance as [`validate_actual_advice`]. Sums of
/// `m` distinct valid rows then automatically satisfy that check.
pub fn validate_underlying_advice(zeta: &[f64]) -> Result<(), DomainError> {
    for (j, &z) in zeta.iter().enumerate() {
        if !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&z) {
            return Err(DomainError::EntryOutOfRange { index: j, value: z });
        }
    }
    let sum: f64 = zeta.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(DomainError::SumMismatch { sum, expected: 1.0 });
    }
    Ok(())
}

/// One round's underlying-expert advice: `N_r` rows of length `K`, each a
/// valid underlying advice vector (nonnegative, summing to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AdviceMatrix {
    experts: usize,
    arms: usize,
    rows: Vec<f64>,
}

impl AdviceMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DomainError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(DomainError::EmptyMatrix);
        }
        let arms = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * arms);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != arms {
                return Err(DomainError::RaggedRow {
                    row: i,
                    len: row.len(),
                    expected: arms,
                });
            }
            validate_underlying_advice(row)?;
            data.extend_from_slice(row);
        }
        Ok(Self {
            experts: rows.len(),
            arms,
            rows: data,
        })
    }

    /// The `K` indicator experts: expert `i` recommends arm `i` only. This is
    /// the advice set that turns the expert algorithm into a vanilla K-armed
    /// bandit.
    pub fn indicators(arms: usize) -> Self {
        let mut rows = vec![0.0; arms * arms];
        for i in 0..arms {
            rows[i * arms + i] = 1.0;
        }
        Self {
            experts: arms,
            arms,
            rows,
        }
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn row(&self, expert: usize) -> &[f64] {
        &self.rows[expert * self.arms..(expert + 1) * self.arms]
    }
}

// ---------------------------------------------------------------------------
// Gain accounting
// ---------------------------------------------------------------------------

/// Total gain of a strategy: the sum over rounds of the selected arms' gains.
pub fn total_gain(trace: &StrategyTrace, gains: &GainMatrix) -> Result<f64, DomainError> {
    if trace.rounds() != gains.rounds() {
        return Err(DomainError::RoundCountMismatch {
            trace: trace.rounds(),
            rounds: gains.rounds(),
        });
    }
    let mut sum = 0.0;
    for (t, sel) in trace.iter().enumerate() {
        for arm in sel.iter() {
            if arm >= gains.arms() {
                return Err(DomainError::ArmOutOfRange {
                    arm,
                    arms: gains.arms(),
                });
            }
            sum += gains.gain(t, arm);
        }
    }
    Ok(sum)
}

/// Number of segments of a strategy: one plus the number of rounds whose
/// selection differs from the previous round's as a set.
pub fn count_segments(trace: &StrategyTrace) -> usize {
    1 + trace
        .selections
        .windows(2)
        .filter(|pair| pair[0] != pair[1])
        .count()
}

/// Regret of an algorithm achieving `g_alg` against a comparator achieving
/// `g_star`. May be negative; never clamped.
pub fn regret(g_star: f64, g_alg: f64) -> f64 {
    g_star - g_alg
}

// ---------------------------------------------------------------------------
// RngStream
// ---------------------------------------------------------------------------

/// Mixes a master seed and a stream label into an independent child seed
/// (splitmix64 finalizer). Used to derive per-trial and per-purpose RNG
/// streams so that experiments are reproducible from one master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    fn splitmix64(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix64(master ^ splitmix64(stream))
}

/// A seeded random stream. Reproducibility contract: the same seed yields the
/// identical draw sequence within one build of this crate (the generator is
/// ChaCha12; cross-language bit-exactness is a non-goal).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn seeded(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream derived from this stream's seed and a label.
    /// Forking depends only on the seed, never on how many draws were made.
    pub fn fork(&self, label: u64) -> Self {
        Self::seeded(derive_seed(self.seed, label))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
