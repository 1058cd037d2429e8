//! Dependent rounding: selects exactly `m` distinct arms so that each arm's
//! selection probability equals its entry in the marginal vector.
//!
//! The rounding repeatedly picks two fractional entries `(i, j)` and moves
//! probability mass between them; the branch probabilities are chosen so the
//! expectation of every entry is preserved, and each pair update saturates at
//! least one entry to 0 or 1, so the loop ends after at most `K` updates.

use thiserror::Error;

use crate::types::{ArmSet, MarginalVector, RngStream};

/// An entry this close to 0 or 1 counts as resolved; prevents infinite loops
/// from rounding residue.
const INTEGRAL_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("rounding resolved {got} arms, expected {expected}")]
    UnresolvedRounding { got: usize, expected: usize },
}

fn is_fractional(x: f64) -> bool {
    x > INTEGRAL_GUARD && x < 1.0 - INTEGRAL_GUARD
}

// ---------------------------------------------------------------------------
// DepRoundWork
// ---------------------------------------------------------------------------

/// The mutable working copy of a marginal vector being rounded. Exposed so
/// tests can drive the rounding one pair update at a time and check the
/// invariants (sum preserved, entries in `[0, 1]`) at every step.
#[derive(Debug, Clone)]
pub struct DepRoundWork {
    p: Vec<f64>,
    plays: usize,
    steps: usize,
}

impl DepRoundWork {
    pub fn new(marginals: &MarginalVector) -> Self {
        Self {
            p: marginals.probabilities().to_vec(),
            plays: marginals.plays(),
            steps: 0,
        }
    }

    /// Current working probabilities.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    /// Pair updates performed so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Performs one pair update on the first two fractional entries in scan
    /// order (deterministic pairing keeps seeded runs reproducible; the
    /// marginal-preservation argument holds for any pairing rule). Returns
    /// `false` once fewer than two fractional entries remain.
    pub fn step(&mut self, rng: &mut RngStream) -> bool {
        let mut fractional = self.p.iter().enumerate().filter(|(_, &x)| is_fractional(x));
        let (i, j) = match (fractional.next(), fractional.next()) {
            (Some((i, _)), Some((j, _))) => (i, j),
            _ => return false,
        };
        let (pi, pj) = (self.p[i], self.p[j]);
        let alpha = (1.0 - pi).min(pj);
        let beta = pi.min(1.0 - pj);
        // With probability beta/(alpha+beta) move mass j -> i, else i -> j.
        // The saturated endpoint is assigned exactly, and the partner moves by
        // the identical f64 amount, so the working sum is preserved bit for
        // bit and at least one of the pair becomes integral.
        if rng.uniform() * (alpha + beta) < beta {
            if 1.0 - pi <= pj {
                self.p[i] = 1.0;
                self.p[j] = pj - alpha;
            } else {
                self.p[j] = 0.0;
                self.p[i] = pi + alpha;
            }
        } else if pi <= 1.0 - pj {
            self.p[i] = 0.0;
            self.p[j] = pj + beta;
        } else {
            self.p[j] = 1.0;
            self.p[i] = pi - beta;
        }
        self.steps += 1;
        true
    }

    /// Collects the resolved selection: entries at 1 (within the guard) are
    /// selected. Fails if rounding residue left the wrong count, which would
    /// indicate an invalid input marginal.
    pub fn into_arm_set(self) -> Result<ArmSet, SamplingError> {
        let selected: Vec<usize> = self
            .p
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= 0.5)
            .map(|(idx, _)| idx)
            .collect();
        if selected.len() != self.plays {
            return Err(SamplingError::UnresolvedRounding {
                got: selected.len(),
                expected: self.plays,
            });
        }
        ArmSet::new(selected).map_err(|_| SamplingError::UnresolvedRounding {
            got: 0,
            expected: self.plays,
        })
    }
}

/// Draws an m-subset of arms with the marginal probabilities given by `p`.
pub fn depround(p: &MarginalVector, rng: &mut RngStream) -> Result<ArmSet, SamplingError> {
    let mut work = DepRoundWork::new(p);
    while work.step(rng) {}
    work.into_arm_set()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn marginals(p: &[f64], m: usize) -> MarginalVector {
        MarginalVector::new(p.to_vec(), m).unwrap()
    }

    #[test]
    fn integral_input_is_deterministic() {
        let p = marginals(&[1.0, 0.0, 1.0], 2);
        for seed in 0..20 {
            let mut rng = RngStream::seeded(seed);
            let set = depround(&p, &mut rng).unwrap();
            assert_eq!(set.arms(), &[0, 2]);
        }
    }

    #[test]
    fn two_way_coin_is_balanced() {
        let p = marginals(&[0.5, 0.5], 1);
        let mut rng = RngStream::seeded(11);
        let mut first = 0usize;
        let draws = 100_000;
        for _ in 0..draws {
            let set = depround(&p, &mut rng).unwrap();
            assert_eq!(set.len(), 1);
            if set.contains(0) {
                first += 1;
            }
        }
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
    }

    #[test]
    fn fractional_marginals_are_preserved() {
        let p = marginals(&[0.9, 0.6, 0.5], 2);
        let mut rng = RngStream::seeded(3);
        let draws = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            let set = depround(&p, &mut rng).unwrap();
            assert_eq!(set.len(), 2);
            for arm in set.iter() {
                counts[arm] += 1;
            }
        }
        for (arm, &target) in [0.9, 0.6, 0.5].iter().enumerate() {
            let freq = counts[arm] as f64 / draws as f64;
            assert!(
                (freq - target).abs() <= 0.01,
                "arm {arm}: {freq} vs {target}"
            );
        }
    }

    #[test]
    fn sum_is_preserved_at_every_step() {
        let p = marginals(&[0.9, 0.6, 0.5], 2);
        let mut rng = RngStream::seeded(5);
        for _ in 0..200 {
            let mut work = DepRoundWork::new(&p);
            loop {
                assert!((work.sum() - 2.0).abs() <= 1e-9);
                for &x in work.probabilities() {
                    assert!((-1e-9..=1.0 + 1e-9).contains(&x));
                }
                if !work.step(&mut rng) {
                    break;
                }
            }
            work.into_arm_set().unwrap();
        }
    }

    // One pair update preserves the expectation of p_i exactly: the two
    // outcomes weighted by their probabilities cancel algebraically.
    #[test]
    fn pair_update_preserves_expectation_symbolically() {
        let mut rng = RngStream::seeded(9);
        for _ in 0..10_000 {
            let pi = rng.uniform();
            let pj = rng.uniform();
            let alpha = (1.0 - pi).min(pj);
            let beta = pi.min(1.0 - pj);
            let prob_up = beta / (alpha + beta);
            let expect_i = (pi + alpha) * prob_up + (pi - beta) * (1.0 - prob_up);
            let expect_j = (pj - alpha) * prob_up + (pj + beta) * (1.0 - prob_up);
            assert!((expect_i - pi).abs() <= 1e-12);
            assert!((expect_j - pj).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        // Random valid marginals: cardinality is m, at most K pair updates.
        #[test]
        fn rounds_to_exactly_m_arms(k in 2usize..12, seed in any::<u64>()) {
            let mut rng = RngStream::seeded(seed);
            let m = 1 + (seed as usize) % (k - 1);
            // Random point with coordinate sum m: scale a random simplex
            // point, then fold mass above 1 back (keeps sum, entries in
            // [0,1]).
            let mut p: Vec<f64> = (0..k).map(|_| rng.uniform() + 1e-6).collect();
            let s: f64 = p.iter().sum();
            for x in &mut p {
                *x *= m as f64 / s;
            }
            let mut excess = 0.0;
            for x in &mut p {
                if *x > 1.0 {
                    excess += *x - 1.0;
                    *x = 1.0;
                }
            }
            let mut idx = 0;
            while excess > 1e-15 && idx < k {
                let room = 1.0 - p[idx];
                let add = room.min(excess);
                p[idx] += add;
                excess -= add;
                idx += 1;
            }
            let marg = MarginalVector::new(p, m).unwrap();
            let mut work = DepRoundWork::new(&marg);
            while work.step(&mut rng) {}
            prop_assert!(work.steps() <= k);
            let set = work.into_arm_set().unwrap();
            prop_assert_eq!(set.len(), m);
        }

        // Same seed, same draw.
        #[test]
        fn rounding_is_reproducible(seed in any::<u64>()) {
            let p = MarginalVector::new(vec![0.9, 0.6, 0.5, 0.7, 0.3], 3).unwrap();
            let a = depround(&p, &mut RngStream::seeded(seed)).unwrap();
            let b = depround(&p, &mut RngStream::seeded(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
