//! The expert-advice algorithm for multiple plays: mixes underlying-expert
//! advice into arm weights, caps and samples, estimates gains from
//! semi-bandit feedback, and applies an exponential update with an
//! upper-confidence bonus.
//!
//! One round is the composition `select -> observe -> estimate_gains ->
//! expert_statistics -> update`. Underlying experts are supplied per round as
//! an advice matrix; the algorithm never enumerates m-combinations of them.

use thiserror::Error;

use crate::capping::{cap_weights, marginals, CappingError};
use crate::sampling::{depround, SamplingError};
use crate::types::{AdviceMatrix, ArmSet, DomainError, MarginalVector, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Capping(#[from] CappingError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("need 1 <= m < K, got m={m}, K={k}")]
    InvalidPlayCount { m: usize, k: usize },
    #[error("{name} = {value} outside its valid range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("need at least m experts, got {experts} with m={m}")]
    TooFewExperts { experts: usize, m: usize },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("prior weight at index {index} must be positive")]
    NonpositivePrior { index: usize },
    #[error("all {horizon} rounds already played")]
    HorizonExhausted { horizon: usize },
    #[error("selected arm {arm} has zero marginal probability (internal bug)")]
    ZeroMarginalSelected { arm: usize },
    #[error("advised arm {arm} has zero marginal probability; gamma > 0 keeps marginals positive")]
    ZeroMarginalAdvised { arm: usize },
    #[error("non-finite update statistic for index {index}; check parameters")]
    NonFiniteUpdate { index: usize },
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Parameters of the expert-advice algorithm. `confidence_scale` caches
/// `c / sqrt(K*T)`, the factor applied to the exploration statistic in the
/// weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exp4MpParams {
    eta: f64,
    gamma: f64,
    c: f64,
    k: usize,
    m: usize,
    horizon: usize,
    experts: usize,
    confidence_scale: f64,
}

impl Exp4MpParams {
    pub fn new(
        eta: f64,
        gamma: f64,
        c: f64,
        k: usize,
        m: usize,
        horizon: usize,
        experts: usize,
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
        if !c.is_finite() || c < 0.0 {
            return Err(PolicyError::ParameterOutOfRange {
                name: "c",
                value: c,
            });
        }
        if horizon == 0 {
            return Err(PolicyError::ZeroHorizon);
        }
        if experts == 0 {
            return Err(PolicyError::TooFewExperts { experts, m });
        }
        let confidence_scale = c / ((k * horizon) as f64).sqrt();
        Ok(Self {
            eta,
            gamma,
            c,
            k,
            m,
            horizon,
            experts,
            confidence_scale,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
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

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn confidence_scale(&self) -> f64 {
        self.confidence_scale
    }
}

/// High-probability parameters for `N_r` uniformly initialized experts:
/// `c = sqrt(m ln(N_r/delta))`, `gamma = min(0.5, sqrt(K ln(N_r/m)/(mT)))`,
/// `eta = m*gamma/(2K)`.
pub fn params_uniform(
    k: usize,
    m: usize,
    t: usize,
    delta: f64,
    n_r: usize,
) -> Result<Exp4MpParams, PolicyError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(PolicyError::ParameterOutOfRange {
            name: "delta",
            value: delta,
        });
    }
    if n_r < m {
        return Err(PolicyError::TooFewExperts { experts: n_r, m });
    }
    if m == 0 || m >= k {
        return Err(PolicyError::InvalidPlayCount { m, k });
    }
    if t == 0 {
        return Err(PolicyError::ZeroHorizon);
    }
    let c = (m as f64 * (n_r as f64 / delta).ln()).sqrt();
    let gamma = (k as f64 * (n_r as f64 / m as f64).ln() / (m as f64 * t as f64))
        .sqrt()
        .min(0.5);
    let eta = m as f64 * gamma / (2.0 * k as f64);
    Exp4MpParams::new(eta, gamma, c, k, m, t, n_r)
}

/// The vanilla K-armed configuration: advice fixed to the K indicator
/// vectors, so `N_r = K`.
pub fn vanilla_params(
    k: usize,
    m: usize,
    t: usize,
    delta: f64,
) -> Result<Exp4MpParams, PolicyError> {
    params_uniform(k, m, t, delta, k)
}

/// High-probability regret bound for the uniform-initialization parameters:
/// `2 sqrt(mKT ln(N_r/delta)) + 4 sqrt(mKT ln(N_r/m)) + m ln(N_r/delta)`.
pub fn bound_uniform(k: usize, m: usize, t: usize, delta: f64, n_r: usize) -> f64 {
    let mkt = (m * k * t) as f64;
    let log_conf = (n_r as f64 / delta).ln();
    let log_mix = (n_r as f64 / m as f64).ln();
    2.0 * (mkt * log_conf).sqrt() + 4.0 * (mkt * log_mix).sqrt() + m as f64 * log_conf
}

/// Validity condition of the uniform bound: `T >= m ln(N_r/delta)/(K(e-2))`.
/// Callers should warn when this does not hold.
pub fn uniform_bound_applies(k: usize, m: usize, t: usize, delta: f64, n_r: usize) -> bool {
    t as f64 >= m as f64 * (n_r as f64 / delta).ln() / (k as f64 * (std::f64::consts::E - 2.0))
}

// ---------------------------------------------------------------------------
// RoundOutcome
// ---------------------------------------------------------------------------

/// Everything one selection produced: the drawn arm set, the marginal
/// probabilities it was drawn from, and which arms were capped. Shared by
/// both algorithms and consumed by the gain estimator and the replay log.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub selection: ArmSet,
    pub marginals: MarginalVector,
    capped: Vec<bool>,
}

impl RoundOutcome {
    pub fn new(selection: ArmSet, marginals: MarginalVector, capped: Vec<bool>) -> Self {
        Self {
            selection,
            marginals,
            capped,
        }
    }

    pub fn is_capped(&self, arm: usize) -> bool {
        self.capped[arm]
    }

    pub fn capped_mask(&self) -> &[bool] {
        &self.capped
    }

    pub fn capped_arms(&self) -> Vec<usize> {
        self.capped
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(j, _)| j)
            .collect()
    }
}

// ---------------------------------------------------------------------------
// State and round operations
// ---------------------------------------------------------------------------

/// Underlying-expert weights plus the round counter. Weights are maintained
/// up to a positive scale factor: the update is purely multiplicative and
/// every consumer divides by the weight sum, so occasional renormalization
/// (applied when the sum leaves a safe range) changes nothing observable
/// while preventing overflow over long runs.
#[derive(Debug, Clone)]
pub struct Exp4MpState {
    params: Exp4MpParams,
    w: Vec<f64>,
    round: usize,
}

impl Exp4MpState {
    /// Starts from the given prior weights, stored verbatim.
    pub fn init(params: Exp4MpParams, priors: &[f64]) -> Result<Self, PolicyError> {
        if priors.len() != params.experts {
            return Err(PolicyError::DimensionMismatch {
                expected: params.experts,
                got: priors.len(),
            });
        }
        for (i, &w) in priors.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(PolicyError::NonpositivePrior { index: i });
            }
        }
        Ok(Self {
            params,
            w: priors.to_vec(),
            round: 0,
        })
    }

    /// Starts from unit weights on every expert.
    pub fn uniform_init(params: Exp4MpParams) -> Self {
        let experts = params.experts;
        Self {
            params,
            w: vec![1.0; experts],
            round: 0,
        }
    }

    pub fn params(&self) -> &Exp4MpParams {
        &self.params
    }

    /// Completed rounds (updates applied so far).
    pub fn rounds_played(&self) -> usize {
        self.round
    }

    /// Current expert weights (see the type docs for the scale convention).
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Mixes advice into arm weights: `v_j = sum_i w_i zeta^i_j / sum_l w_l`.
    pub fn arm_weights(&self, advice: &AdviceMatrix) -> Result<Vec<f64>, PolicyError> {
        if advice.experts() != self.params.experts {
            return Err(PolicyError::DimensionMismatch {
                expected: self.params.experts,
                got: advice.experts(),
            });
        }
        if advice.arms() != self.params.k {
            return Err(PolicyError::DimensionMismatch {
                expected: self.params.k,
                got: advice.arms(),
            });
        }
        let total: f64 = self.w.iter().sum();
        let mut v = vec![0.0; self.params.k];
        for (i, &wi) in self.w.iter().enumerate() {
            let share = wi / total;
            for (vj, &z) in v.iter_mut().zip(advice.row(i)) {
                *vj += share * z;
            }
        }
        Ok(v)
    }

    /// One selection: mix advice, cap, form marginals, and sample the m-arm.
    pub fn select(
        &self,
        advice: &AdviceMatrix,
        rng: &mut RngStream,
    ) -> Result<RoundOutcome, PolicyError> {
        if self.round >= self.params.horizon {
            return Err(PolicyError::HorizonExhausted {
                horizon: self.params.horizon,
            });
        }
        let v = self.arm_weights(advice)?;
        let cap = cap_weights(&v, self.params.m, self.params.gamma)?;
        let p = marginals(&cap, self.params.m, self.params.gamma);
        let capped = (0..self.params.k).map(|j| cap.is_capped(j)).collect();
        let selection = depround(&p, rng)?;
        Ok(RoundOutcome {
            selection,
            marginals: p,
            capped,
        })
    }

    /// Applies the exponential update
    /// `w_i <- w_i exp(eta (y_hat_i + (c/sqrt(KT)) u_hat_i))` and advances the
    /// round counter. Returns whether the boundedness condition
    /// `eta (y_hat_i + (c/sqrt(KT)) u_hat_i) <= 1` held for every expert;
    /// callers should record violations, which indicate mis-parameterization.
    pub fn update(&mut self, y_hat: &[f64], u_hat: &[f64]) -> Result<bool, PolicyError> {
        if self.round >= self.params.horizon {
            return Err(PolicyError::HorizonExhausted {
                horizon: self.params.horizon,
            });
        }
        if y_hat.len() != self.params.experts || u_hat.len() != self.params.experts {
            return Err(PolicyError::DimensionMismatch {
                expected: self.params.experts,
                got: y_hat.len().min(u_hat.len()),
            });
        }
        let mut exponents = Vec::with_capacity(self.params.experts);
        let mut bounded = true;
        for (i, (&y, &u)) in y_hat.iter().zip(u_hat).enumerate() {
            let g = self.params.eta * (y + self.params.confidence_scale * u);
            if !g.is_finite() {
                return Err(PolicyError::NonFiniteUpdate { index: i });
            }
            if g > 1.0 + 1e-9 {
                bounded = false;
            }
            exponents.push(g);
        }
        // A uniform shift of the exponents rescales all weights equally, so
        // it is unobservable; engage it only when exp() itself would saturate.
        let max_g = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = if max_g.abs() > 500.0 { max_g } else { 0.0 };
        for (w, g) in self.w.iter_mut().zip(&exponents) {
            *w *= (g - shift).exp();
        }
        let total: f64 = self.w.iter().sum();
        if !(1e-150..=1e150).contains(&total) {
            for w in &mut self.w {
                *w /= total;
            }
        }
        // Numerical floor keeping the positivity invariant; unreachable under
        // the prescribed parameters.
        for w in &mut self.w {
            if *w < 1e-300 {
                *w = 1e-300;
            }
        }
        self.round += 1;
        Ok(bounded)
    }
}

/// Importance-weighted gain estimates: `x_hat_j = x_j / p_j` on the selected
/// arms, zero elsewhere. `observed` is aligned with `outcome.selection` in
/// ascending arm order.
pub fn estimate_gains(observed: &[f64], outcome: &RoundOutcome) -> Result<Vec<f64>, PolicyError> {
    if observed.len() != outcome.selection.len() {
        return Err(PolicyError::DimensionMismatch {
            expected: outcome.selection.len(),
            got: observed.len(),
        });
    }
    let mut x_hat = vec![0.0; outcome.marginals.len()];
    for (&x, arm) in observed.iter().zip(outcome.selection.iter()) {
        let p = outcome.marginals.probabilities()[arm];
        if p <= 0.0 {
            return Err(PolicyError::ZeroMarginalSelected { arm });
        }
        x_hat[arm] = x / p;
    }
    Ok(x_hat)
}

/// Per-expert statistics over the uncapped arms:
/// `y_hat_i = sum_{j not capped} zeta^i_j x_hat_j` (estimated expert gain) and
/// `u_hat_i = sum_{j not capped} zeta^i_j / p_j` (the exploration statistic).
pub fn expert_statistics(
    advice: &AdviceMatrix,
    x_hat: &[f64],
    outcome: &RoundOutcome,
) -> Result<(Vec<f64>, Vec<f64>), PolicyError> {
    if x_hat.len() != advice.arms() || outcome.marginals.len() != advice.arms() {
        return Err(PolicyError::DimensionMismatch {
            expected: advice.arms(),
            got: x_hat.len().min(outcome.marginals.len()),
        });
    }
    let p = outcome.marginals.probabilities();
    let mut y_hat = vec![0.0; advice.experts()];
    let mut u_hat = vec![0.0; advice.experts()];
    for i in 0..advice.experts() {
        let row = advice.row(i);
        let mut y = 0.0;
        let mut u = 0.0;
        for j in 0..advice.arms() {
            if outcome.is_capped(j) {
                continue;
            }
            let z = row[j];
            if z == 0.0 {
                continue;
            }
            if p[j] <= 0.0 {
                return Err(PolicyError::ZeroMarginalAdvised { arm: j });
            }
            y += z * x_hat[j];
            u += z / p[j];
        }
        y_hat[i] = y;
        u_hat[i] = u;
    }
    Ok((y_hat, u_hat))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
