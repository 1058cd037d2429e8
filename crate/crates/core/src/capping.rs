//! Weight capping: finds the threshold `alpha` such that capping all weights
//! above it makes every arm's marginal probability at most one, then converts
//! capped weights to marginals.
//!
//! Capping triggers when some normalized weight exceeds
//! `B = ((1/m) - gamma/K) / (1 - gamma)`; a weight at `B` is exactly the
//! share that maps to probability one. The threshold solves the fixed point
//! `alpha / (sum_{capped} alpha + sum_{uncapped} v_j) = B`, searched by
//! raising the cap count one arm at a time in descending weight order:
//! `alpha_i = B*R_i / (1 - i*B)` (`R_i` = mass outside the `i` heaviest
//! arms) is the exact level if `i` arms are capped, and the `(i+1)`-th
//! weight either clears it, making `alpha_i` the answer, or joins the
//! capped set. Because `alpha` is always the fixed point of the realized
//! capped set, the marginal identity `sum(p) = m` holds to rounding error.
//!
//! Weights within a relative `1e-12` of the level count as at it and stay
//! uncapped; their closed-form marginal is within `m * 1e-12` of one, which
//! downstream validation accepts. The relative comparison keeps exact
//! rational ties (where rounding can land a tied weight an ulp above the
//! level) from cascading into the capped set.

use thiserror::Error;

use crate::types::{MarginalVector, SIMPLEX_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CappingError {
    #[error("need 1 <= m < K, got m={m}, K={k}")]
    InvalidPlayCount { m: usize, k: usize },
    #[error("gamma {gamma} outside [0, 1)")]
    InvalidGamma { gamma: f64 },
    #[error("weight {value} at index {index} is negative or not finite")]
    BadWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within {SIMPLEX_TOL}")]
    SumMismatch { sum: f64 },
    #[error("weights place all mass on fewer arms than can absorb probability one each")]
    InsufficientSupport,
}

// ---------------------------------------------------------------------------
// CapResult
// ---------------------------------------------------------------------------

/// Outcome of the threshold search: the threshold (absent when no weight
/// exceeded the trigger), the capped arm set, and the capped weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CapResult {
    alpha: Option<f64>,
    capped: Vec<bool>,
    weights: Vec<f64>,
}

impl CapResult {
    /// The threshold, or `None` when no capping was needed.
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Capped weights `v'`: `alpha` on the capped set, the (renormalized)
    /// input elsewhere.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_capped(&self, arm: usize) -> bool {
        self.capped[arm]
    }

    /// Indices of capped arms in ascending order.
    pub fn capped_arms(&self) -> Vec<usize> {
        self.capped
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn capped_count(&self) -> usize {
        self.capped.iter().filter(|&&c| c).count()
    }

    pub fn arms(&self) -> usize {
        self.weights.len()
    }
}

/// The trigger level: a normalized weight at or above `B` would map to a
/// marginal probability of one or more.
pub fn cap_trigger(m: usize, k: usize, gamma: f64) -> f64 {
    ((1.0 / m as f64) - gamma / k as f64) / (1.0 - gamma)
}

// ---------------------------------------------------------------------------
// cap_weights
// ---------------------------------------------------------------------------

/// Caps `v` (nonnegative, summing to 1 within tolerance) so that the
/// marginals for `m` plays with exploration rate `gamma` stay at or below
/// one. Weights within a relative `1e-12` of the threshold stay uncapped.
pub fn cap_weights(v: &[f64], m: usize, gamma: f64) -> Result<CapResult, CappingError> {
    let k = v.len();
    if m == 0 || m >= k {
        return Err(CappingError::InvalidPlayCount { m, k });
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(CappingError::InvalidGamma { gamma });
    }
    for (j, &x) in v.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(CappingError::BadWeight { index: j, value: x });
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(CappingError::SumMismatch { sum });
    }
    let v: Vec<f64> = v.iter().map(|x| x / sum).collect();

    let b = cap_trigger(m, k, gamma);
    let vmax = v.iter().cloned().fold(0.0, f64::max);
    // b >= 1 means even a weight of 1 maps to probability <= 1, and a
    // weight at exactly b already maps to exactly 1 without capping.
    if vmax <= b || b >= 1.0 {
        return Ok(CapResult {
            alpha: None,
            capped: vec![false; k],
            weights: v,
        });
    }

    // Arm indices in descending weight order; suffix sums give the uncapped
    // mass R_i directly, avoiding the cancellation in 1 - (top-i sum).
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_unstable_by(|&a, &c| v[c].partial_cmp(&v[a]).unwrap());
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + v[order[i]];
    }

    let mut i = 0;
    let alpha = loop {
        let rest = suffix[i];
        let denom = 1.0 - i as f64 * b;
        if rest <= 0.0 || denom <= 0.0 || i >= m {
            // All mass sits on arms that must be capped at probability one;
            // no positive threshold can make the remaining mass sum to m.
            return Err(CappingError::InsufficientSupport);
        }
        let alpha = b * rest / denom;
        if v[order[i]] > alpha * (1.0 + 1e-12) {
            i += 1;
        } else {
            break alpha;
        }
    };
    let mut capped = vec![false; k];
    let mut weights = v;
    for &j in &order[..i] {
        capped[j] = true;
        weights[j] = alpha;
    }
    Ok(CapResult {
        alpha: (i > 0).then_some(alpha),
        capped,
        weights,
    })
}

// ---------------------------------------------------------------------------
// marginals
// ---------------------------------------------------------------------------

/// Converts capped weights to marginal probabilities:
/// `p_j = m((1-gamma) v'_j / sum(v') + gamma/K)`. Capped arms map to exactly
/// one by construction, so their entries are pinned at 1.0 to keep the gain
/// estimate on capped arms exact.
pub fn marginals(cap: &CapResult, m: usize, gamma: f64) -> MarginalVector {
    let k = cap.arms();
    let total: f64 = cap.weights().iter().sum();
    let p: Vec<f64> = cap
        .weights()
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            if cap.is_capped(j) {
                1.0
            } else {
                m as f64 * ((1.0 - gamma) * w / total + gamma / k as f64)
            }
        })
        .collect();
    MarginalVector::new(p, m)
        .expect("capped weights always produce valid marginals; this is an internal bug")
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_weights_never_capped() {
        for (k, m) in [(4, 1), (4, 3), (10, 5), (30, 25)] {
            let v = vec![1.0 / k as f64; k];
            let cap = cap_weights(&v, m, 0.1).unwrap();
            assert_eq!(cap.alpha(), None);
            assert_eq!(cap.capped_count(), 0);
            // Renormalization may perturb the weights by an ulp.
            for &w in cap.weights() {
                assert!((w - 1.0 / k as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_example_caps_heaviest_arm() {
        let cap = cap_weights(&[0.6, 0.3, 0.1], 2, 0.0).unwrap();
        let alpha = cap.alpha().unwrap();
        assert!((alpha - 0.4).abs() < 1e-12, "alpha {alpha}");
        assert_eq!(cap.capped_arms(), vec![0]);
        let w = cap.weights();
        assert!((w[0] - 0.4).abs() < 1e-12);
        assert!((w[1] - 0.3).abs() < 1e-12);
        assert!((w[2] - 0.1).abs() < 1e-12);
        // alpha solves alpha/(alpha + 0.4) = B = 0.5.
        assert!((alpha / (alpha + 0.4) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn trigger_not_reached_leaves_weights_alone() {
        let cap = cap_weights(&[0.95, 0.05], 1, 0.1).unwrap();
        assert_eq!(cap.alpha(), None);
        assert_eq!(cap.weights(), &[0.95, 0.05]);
    }

    #[test]
    fn marginals_from_hand_example() {
        let cap = cap_weights(&[0.6, 0.3, 0.1], 2, 0.0).unwrap();
        let p = marginals(&cap, 2, 0.0);
        let expect = [1.0, 0.75, 0.25];
        for (a, b) in p.probabilities().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn marginals_with_exploration() {
        let cap = cap_weights(&[0.95, 0.05], 1, 0.1).unwrap();
        let p = marginals(&cap, 1, 0.1);
        assert!((p.probabilities()[0] - 0.905).abs() < 1e-12);
        assert!((p.probabilities()[1] - 0.095).abs() < 1e-12);
    }

    #[test]
    fn marginals_identity_scaling() {
        let cap = cap_weights(&[0.5, 0.5], 1, 0.0).unwrap();
        let p = marginals(&cap, 1, 0.0);
        assert_eq!(p.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn dominant_weight_with_m_one_is_feasible() {
        // One arm holding all mass maps to probability one without capping.
        let cap = cap_weights(&[1.0, 0.0, 0.0], 1, 0.0).unwrap();
        assert_eq!(cap.alpha(), None);
        let p = marginals(&cap, 1, 0.0);
        assert_eq!(p.probabilities(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            cap_weights(&[0.5, 0.5], 2, 0.0),
            Err(CappingError::InvalidPlayCount { .. })
        ));
        assert!(matches!(
            cap_weights(&[0.5, 0.5, 0.0], 2, 1.0),
            Err(CappingError::InvalidGamma { .. })
        ));
        assert!(matches!(
            cap_weights(&[0.7, -0.2, 0.5], 2, 0.0),
            Err(CappingError::BadWeight { index: 1, .. })
        ));
        assert!(matches!(
            cap_weights(&[0.5, 0.4, 0.0], 2, 0.0),
            Err(CappingError::SumMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_support_is_rejected() {
        // Two plays but all mass on one arm: no threshold exists.
        assert_eq!(
            cap_weights(&[1.0, 0.0, 0.0], 2, 0.0),
            Err(CappingError::InsufficientSupport)
        );
    }

    #[test]
    fn near_one_sum_is_renormalized() {
        let v = [0.6 + 4e-10, 0.3, 0.1];
        let cap = cap_weights(&v, 2, 0.0).unwrap();
        assert!((cap.weights().iter().sum::<f64>() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn exact_tie_at_threshold_stays_uncapped_at_probability_one() {
        // B = 1/3; one cap gives alpha = (1/3)(0.5)/(2/3) = 0.25 = v_(2) =
        // v_(3). The tied arms stay uncapped; their closed-form marginal is
        // exactly one, so the probability budget still balances.
        let cap = cap_weights(&[0.5, 0.25, 0.25, 0.0], 3, 0.0).unwrap();
        let alpha = cap.alpha().unwrap();
        assert!((alpha - 0.25).abs() < 1e-12);
        assert_eq!(cap.capped_arms(), vec![0]);
        let p = marginals(&cap, 3, 0.0);
        let expect = [1.0, 1.0, 1.0, 0.0];
        for (a, b) in p.probabilities().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let total: f64 = p.probabilities().iter().sum();
        assert!((total - 3.0).abs() < 1e-9);
    }

    // -- properties ---------------------------------------------------------

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, usize, f64)> {
        (2usize..12, proptest::num::u64::ANY, 0.0..0.95f64).prop_map(|(k, seed, gamma)| {
            let mut rng = crate::types::RngStream::seeded(seed);
            let m = 1 + (seed as usize) % (k - 1);
            // Skewed weights so capping triggers often.
            let mut v: Vec<f64> = (0..k).map(|_| rng.uniform().powi(4) + 1e-9).collect();
            let s: f64 = v.iter().sum();
            for x in &mut v {
                *x /= s;
            }
            (v, m, gamma)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn capped_marginals_are_feasible((v, m, gamma) in arb_case()) {
            let k = v.len();
            let cap = cap_weights(&v, m, gamma).unwrap();
            let p = marginals(&cap, m, gamma);
            let total: f64 = p.probabilities().iter().sum();
            prop_assert!((total - m as f64).abs() <= 1e-9);
            for (j, &pj) in p.probabilities().iter().enumerate() {
                prop_assert!(pj <= 1.0 + 1e-9);
                prop_assert!(pj >= m as f64 * gamma / k as f64 - 1e-12);
                if cap.is_capped(j) {
                    prop_assert_eq!(pj, 1.0);
                }
            }
            prop_assert!(cap.capped_count() < m);
            if let Some(alpha) = cap.alpha() {
                // Fixed point of the threshold equation.
                let denom: f64 = v
                    .iter()
                    .map(|&x| if x >= alpha - SIMPLEX_TOL { alpha } else { x })
                    .sum();
                let b = cap_trigger(m, k, gamma);
                prop_assert!((alpha / denom - b).abs() <= 1e-9);
            }
        }

        // Candidate thresholds decrease along the rejected prefix, and a
        // fresh scan over every candidate count picks the same threshold as
        // the incremental search.
        #[test]
        fn candidate_search_is_monotone_and_minimal((v, m, gamma) in arb_case()) {
            let k = v.len();
            let b = cap_trigger(m, k, gamma);
            let cap = cap_weights(&v, m, gamma).unwrap();
            let Some(alpha_star) = cap.alpha() else { return Ok(()) };
            let mut sorted = v.clone();
            sorted.sort_unstable_by(|a, c| c.partial_cmp(a).unwrap());
            let mut top = 0.0;
            let mut last = f64::INFINITY;
            for i in 1..m {
                top += sorted[i - 1];
                let denom = 1.0 - i as f64 * b;
                if denom <= 0.0 {
                    break;
                }
                let alpha = b * (1.0 - top) / denom;
                prop_assert!(alpha <= last + 1e-12);
                if sorted[i] <= alpha + SIMPLEX_TOL {
                    prop_assert!((alpha - alpha_star).abs() <= 1e-12);
                    break;
                }
                last = alpha;
            }
        }
    }
}
