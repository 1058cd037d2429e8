//! The tracking algorithm for multiple plays: exponential arm weights with an
//! exploration bonus, followed by a share step that mixes a fraction of every
//! weight across the other arms so the policy can re-concentrate after the
//! optimal m-arm switches.
//!
//! One round is `select -> observe -> estimate_gains -> share_update`. The
//! share step keeps every arm weight strictly positive whenever `beta > 0`,
//! which is what lets the algorithm track a changing optimum.

use crate::capping::{cap_weights, marginals};
use crate::exp4mp::{bound_uniform, uniform_bound_applies, PolicyError, RoundOutcome};
use crate::sampling::depround;
use crate::types::RngStream;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Parameters of the tracking algorithm. `confidence_scale` caches
/// `c / sqrt(K*T)`, the numerator of the per-arm exploration bonus
/// `c / (p_j sqrt(K*T))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp3MspParams {
    eta: f64,
    gamma: f64,
    beta: f64,
    c: f64,
    k: usize,
    m: usize,
    horizon: usize,
    segments: usize,
    confidence_scale: f64,
}

impl Exp3MspParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        eta: f64,
        gamma: f64,
        beta: f64,
        c: f64,
        k: usize,
        m: usize,
        horizon: usize,
        segments: usize,
    ) -> Result<Self, PolicyError> {
        if m == 0 || m >= k {
            return Err(PolicyError::InvalidPlayCount { m, k });
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(PolicyError::ParameterOutOfRange {
                name: "eta",
                value: eta,
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(PolicyError::ParameterOutOfRange {
                name: "gamma",
                value: gamma,
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(PolicyError::ParameterOutOfRange {
                name: "beta",
                value: beta,
            });
        }
        if !c.is_finite() || c < 0.0 {
            return Err(PolicyError::ParameterOutOfRange {
                name: "c",
                value: c,
            });
        }
        if horizon == 0 {
            return Err(PolicyError::ZeroHorizon);
        }
        if segments == 0 || segments > horizon {
            return Err(PolicyError::ParameterOutOfRange {
                name: "segments",
                value: segments as f64,
            });
        }
        let confidence_scale = c / ((k * horizon) as f64).sqrt();
        Ok(Self {
            eta,
            gamma,
            beta,
            c,
            k,
            m,
            horizon,
            segments,
            confidence_scale,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn confidence_scale(&self) -> f64 {
        self.confidence_scale
    }
}

/// High-probability parameters for an S-segment comparator over T rounds:
/// `beta = (S-1)/(T-1)`, `c = sqrt(m S ln(eK(T-1)/((S-1)delta)))`,
/// `gamma = min(0.5, sqrt(K S ln(eK(T-1)/(S-1)) / (mT)))`, `eta = m gamma/(2K)`.
/// `S = 1` falls back to the fixed-comparator configuration (`beta = 0` and
/// the K-indicator-expert parameters).
pub fn params_switching(
    k: usize,
    m: usize,
    t: usize,
    s: usize,
    delta: f64,
) -> Result<Exp3MspParams, PolicyError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(PolicyError::ParameterOutOfRange {
            name: "delta",
            value: delta,
        });
    }
    if m == 0 || m >= k {
        return Err(PolicyError::InvalidPlayCount { m, k });
    }
    if s == 0 {
        return Err(PolicyError::ParameterOutOfRange {
            name: "segments",
            value: 0.0,
        });
    }
    if t <= s {
        return Err(PolicyError::ParameterOutOfRange {
            name: "horizon",
            value: t as f64,
        });
    }
    if s == 1 {
        let c = (m as f64 * (k as f64 / delta).ln()).sqrt();
        let gamma = (k as f64 * (k as f64 / m as f64).ln() / (m as f64 * t as f64))
            .sqrt()
            .min(0.5);
        let eta = m as f64 * gamma / (2.0 * k as f64);
        return Exp3MspParams::new(eta, gamma, 0.0, c, k, m, t, 1);
    }
    let beta = (s as f64 - 1.0) / (t as f64 - 1.0);
    let log_free = (std::f64::consts::E * k as f64 * (t as f64 - 1.0) / (s as f64 - 1.0)).ln();
    let log_conf =
        (std::f64::consts::E * k as f64 * (t as f64 - 1.0) / ((s as f64 - 1.0) * delta)).ln();
    let c = (m as f64 * s as f64 * log_conf).sqrt();
    let gamma = (k as f64 * s as f64 * log_free / (m as f64 * t as f64))
        .sqrt()
        .min(0.5);
    let eta = m as f64 * gamma / (2.0 * k as f64);
    Exp3MspParams::new(eta, gamma, beta, c, k, m, t, s)
}

/// High-probability regret bound against the best S-segment strategy:
/// `6 sqrt(mSKT ln(eK(T-1)/((S-1)delta))) + mS ln(eK(T-1)/((S-1)delta))`.
/// At `S = 1` the bound collapses to the fixed-comparator magnitude.
pub fn bound_switching(k: usize, m: usize, t: usize, s: usize, delta: f64) -> f64 {
    if s == 1 {
        return bound_uniform(k, m, t, delta, k);
    }
    let log_conf =
        (std::f64::consts::E * k as f64 * (t as f64 - 1.0) / ((s as f64 - 1.0) * delta)).ln();
    let mskt = (m * s * k * t) as f64;
    6.0 * (mskt * log_conf).sqrt() + (m * s) as f64 * log_conf
}

/// Validity condition of the switching bound:
/// `T >= m S ln(eK(T-1)/((S-1)delta)) / (K(e-2))`. Callers should warn when
/// this does not hold.
pub fn switching_bound_applies(k: usize, m: usize, t: usize, s: usize, delta: f64) -> bool {
    if s == 1 {
        return uniform_bound_applies(k, m, t, delta, k);
    }
    let log_conf =
        (std::f64::consts::E * k as f64 * (t as f64 - 1.0) / ((s as f64 - 1.0) * delta)).ln();
    t as f64 >= (m * s) as f64 * log_conf / (k as f64 * (std::f64::consts::E - 2.0))
}

// ---------------------------------------------------------------------------
// Share step
// ---------------------------------------------------------------------------

/// The mixing step applied to boosted weights: each output weight keeps a
/// `1 - beta` share of its own boosted weight and receives a `beta/(K-1)`
/// share of every other, all normalized by the boosted total.
pub fn share_mix(boosted: &[f64], beta: f64) -> Vec<f64> {
    assert!(boosted.len() >= 2, "share step needs at least two arms");
    let total: f64 = boosted.iter().sum();
    boosted
        .iter()
        .map(|&tj| ((1.0 - beta) * tj + beta / (boosted.len() as f64 - 1.0) * (total - tj)) / total)
        .collect()
}

// ---------------------------------------------------------------------------
// State and round operations
// ---------------------------------------------------------------------------

/// Arm weights of the tracking algorithm, kept normalized: the share step
/// divides by the boosted total each round, so the weights always sum to one
/// up to floating-point drift.
#[derive(Debug, Clone)]
pub struct Exp3MspState {
    params: Exp3MspParams,
    v: Vec<f64>,
    round: usize,
}

impl Exp3MspState {
    /// Starts from the uniform weight vector `1/K`.
    pub fn init(params: Exp3MspParams) -> Self {
        let k = params.k;
        Self {
            params,
            v: vec![1.0 / k as f64; k],
            round: 0,
        }
    }

    #[cfg(test)]
    fn with_weights(params: Exp3MspParams, v: Vec<f64>) -> Self {
        Self {
            params,
            v,
            round: 0,
        }
    }

    pub fn params(&self) -> &Exp3MspParams {
        &self.params
    }

    /// Completed rounds (share updates applied so far).
    pub fn rounds_played(&self) -> usize {
        self.round
    }

    /// Current arm weights, normalized to sum one.
    pub fn weights(&self) -> &[f64] {
        &self.v
    }

    /// One selection: cap the arm weights, form marginals, sample the m-arm.
    pub fn select(&self, rng: &mut RngStream) -> Result<RoundOutcome, PolicyError> {
        if self.round >= self.params.horizon {
            return Err(PolicyError::HorizonExhausted {
                horizon: self.params.horizon,
            });
        }
        let cap = cap_weights(&self.v, self.params.m, self.params.gamma)?;
        let p = marginals(&cap, self.params.m, self.params.gamma);
        let capped = (0..self.params.k).map(|j| cap.is_capped(j)).collect();
        let selection = depround(&p, rng)?;
        Ok(RoundOutcome::new(selection, p, capped))
    }

    /// Applies the boost-and-share update: uncapped arms are boosted by
    /// `exp(eta (x_hat_j + c/(p_j sqrt(KT))))`, capped arms keep their weight
    /// unchanged, and the share step then redistributes and normalizes.
    /// Returns whether the boundedness assumption
    /// `eta (x_hat_j + c/(p_j sqrt(KT))) <= 1` held on every uncapped arm.
    pub fn share_update(
        &mut self,
        x_hat: &[f64],
        outcome: &RoundOutcome,
    ) -> Result<bool, PolicyError> {
        if self.round >= self.params.horizon {
            return Err(PolicyError::HorizonExhausted {
                horizon: self.params.horizon,
            });
        }
        if x_hat.len() != self.params.k {
            return Err(PolicyError::DimensionMismatch {
                expected: self.params.k,
                got: x_hat.len(),
            });
        }
        if outcome.marginals.len() != self.params.k {
            return Err(PolicyError::DimensionMismatch {
                expected: self.params.k,
                got: outcome.marginals.len(),
            });
        }
        let p = outcome.marginals.probabilities();
        let mut exponents = vec![0.0; self.params.k];
        let mut bounded = true;
        for j in 0..self.params.k {
            if outcome.is_capped(j) {
                continue;
            }
            if p[j] <= 0.0 {
                return Err(PolicyError::ZeroMarginalAdvised { arm: j });
            }
            let g = self.params.eta * (x_hat[j] + self.params.confidence_scale / p[j]);
            if !g.is_finite() {
                return Err(PolicyError::NonFiniteUpdate { index: j });
            }
            if g > 1.0 + 1e-9 {
                bounded = false;
            }
            exponents[j] = g;
        }
        // A uniform scale on the boosted weights cancels in the share step's
        // normalization; engage it only when exp() itself would saturate.
        let max_g = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = if max_g > 500.0 { max_g } else { 0.0 };
        let boosted: Vec<f64> = self
            .v
            .iter()
            .zip(&exponents)
            .map(|(&vj, &g)| vj * (g - shift).exp())
            .collect();
        self.v = share_mix(&boosted, self.params.beta);
        // Numerical floor keeping the positivity invariant; unreachable under
        // the prescribed parameters.
        for vj in &mut self.v {
            if *vj < 1e-300 {
                *vj = 1e-300;
            }
        }
        self.round += 1;
        Ok(bounded)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
