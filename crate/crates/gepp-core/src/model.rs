//! Domain types and single-step dynamics for the two-channel belief MDP.
//!
//! Each channel is a two-state Markov chain with
//! P(good | good) = λ₁ and P(good | bad) = λ₀, λ₀ ≤ λ₁. The decision state
//! is the belief pair (p₁, p₂) — the probability that each channel is good
//! at the start of the current slot. Per slot the transmitter either splits
//! power across both channels (`Balanced`, rate R_l per good channel) or
//! bets everything on one channel (`Bet1`/`Bet2`, rate R_h if that channel
//! is good). A used channel reveals its state; an unused channel's belief
//! propagates through T(p) = αp + λ₀ with α = λ₁ − λ₀.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for belief equality comparisons.
///
/// Repeated applications of T accumulate rounding, so exact comparisons on
/// belief coordinates are never meaningful.
pub const BELIEF_EQ_TOL: f64 = 1e-9;

/// Errors from model-parameter validation.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("lambda0 = {0} is outside [0, 1]")]
    Lambda0OutOfRange(f64),

    #[error("lambda1 = {0} is outside [0, 1]")]
    Lambda1OutOfRange(f64),

    #[error("lambda0 = {lambda0} > lambda1 = {lambda1} violates positive correlation")]
    NegativeCorrelation { lambda0: f64, lambda1: f64 },

    #[error("r_low = {0} must be > 0")]
    RLowNotPositive(f64),

    #[error("r_high = {r_high} must exceed r_low = {r_low}")]
    RHighNotAboveRLow { r_low: f64, r_high: f64 },

    #[error("r_high = {r_high} must be < 2*r_low = {}", 2.0 * r_low)]
    RHighTooLarge { r_low: f64, r_high: f64 },

    #[error("beta = {0} is outside [0, 1)")]
    BetaOutOfRange(f64),

    #[error("parameter {0} is not finite")]
    NotFinite(&'static str),

    #[error("belief coordinate {0} is outside [0, 1]")]
    BeliefOutOfRange(f64),
}

/// Raw five-tuple as it appears in config files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawModelParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub r_low: f64,
    pub r_high: f64,
    pub beta: f64,
}

/// Validated channel/reward/discount parameters (λ₀, λ₁, R_l, R_h, β).
///
/// Invariants enforced at construction:
/// - 0 ≤ λ₀ ≤ λ₁ ≤ 1,
/// - 0 < R_l < R_h < 2R_l,
/// - 0 ≤ β < 1.
///
/// Immutable after construction; α = λ₁ − λ₀ is computed once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    lambda0: f64,
    lambda1: f64,
    r_low: f64,
    r_high: f64,
    beta: f64,
    alpha: f64,
}

impl ModelParams {
    /// Validates the raw five-tuple and builds the parameter set.
    pub fn new(
        lambda0: f64,
        lambda1: f64,
        r_low: f64,
        r_high: f64,
        beta: f64,
    ) -> Result<Self, ModelError> {
        for (name, v) in [
            ("lambda0", lambda0),
            ("lambda1", lambda1),
            ("r_low", r_low),
            ("r_high", r_high),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(ModelError::NotFinite(name));
            }
        }
        if !(0.0..=1.0).contains(&lambda0) {
            return Err(ModelError::Lambda0OutOfRange(lambda0));
        }
        if !(0.0..=1.0).contains(&lambda1) {
            return Err(ModelError::Lambda1OutOfRange(lambda1));
        }
        if lambda0 > lambda1 {
            return Err(ModelError::NegativeCorrelation { lambda0, lambda1 });
        }
        if r_low <= 0.0 {
            return Err(ModelError::RLowNotPositive(r_low));
        }
        if r_high <= r_low {
            return Err(ModelError::RHighNotAboveRLow { r_low, r_high });
        }
        if r_high >= 2.0 * r_low {
            return Err(ModelError::RHighTooLarge { r_low, r_high });
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(ModelError::BetaOutOfRange(beta));
        }
        Ok(Self {
            lambda0,
            lambda1,
            r_low,
            r_high,
            beta,
            alpha: lambda1 - lambda0,
        })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn r_low(&self) -> f64 {
        self.r_low
    }

    pub fn r_high(&self) -> f64 {
        self.r_high
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// α = λ₁ − λ₀, the belief-propagation contraction factor.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One-step belief propagation for an unobserved channel:
    /// T(p) = λ₁p + λ₀(1−p) = αp + λ₀.
    pub fn tau(&self, p: f64) -> f64 {
        self.alpha * p + self.lambda0
    }

    /// n-fold application of T.
    ///
    /// Closed form (λ₀/(1−α))(1−αⁿ) + αⁿp for α < 1; α = 1 (λ₀=0, λ₁=1)
    /// makes T the identity, so the removable singularity is sidestepped by
    /// returning p directly.
    pub fn tau_n(&self, p: f64, n: u32) -> f64 {
        if n == 0 {
            return p;
        }
        if self.alpha >= 1.0 {
            return p; // T(p) = p when λ₀ = 0, λ₁ = 1
        }
        let an = self.alpha.powi(n as i32);
        (self.lambda0 / (1.0 - self.alpha)) * (1.0 - an) + an * p
    }

    /// Stationary belief λ₀/(1−α), the fixed point of T (α < 1).
    pub fn tau_fixed_point(&self) -> f64 {
        if self.alpha >= 1.0 {
            // Every p is fixed; report the midpoint of the interval.
            0.5
        } else {
            self.lambda0 / (1.0 - self.alpha)
        }
    }
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = ModelError;

    fn try_from(raw: RawModelParams) -> Result<Self, Self::Error> {
        Self::new(raw.lambda0, raw.lambda1, raw.r_low, raw.r_high, raw.beta)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        Self {
            lambda0: p.lambda0,
            lambda1: p.lambda1,
            r_low: p.r_low,
            r_high: p.r_high,
            beta: p.beta,
        }
    }
}

/// A point (p₁, p₂) in the belief square [0,1]².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub p1: f64,
    pub p2: f64,
}

impl Belief {
    /// Builds a belief, checking both coordinates lie in [0, 1].
    pub fn new(p1: f64, p2: f64) -> Result<Self, ModelError> {
        for c in [p1, p2] {
            if !c.is_finite() || !(0.0..=1.0).contains(&c) {
                return Err(ModelError::BeliefOutOfRange(c));
            }
        }
        Ok(Self { p1, p2 })
    }

    /// The mirror image across the diagonal p₁ = p₂.
    pub fn mirrored(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
        }
    }

    /// Coordinate-wise equality within [`BELIEF_EQ_TOL`].
    pub fn approx_eq(&self, other: &Self) -> bool {
        (self.p1 - other.p1).abs() <= BELIEF_EQ_TOL && (self.p2 - other.p2).abs() <= BELIEF_EQ_TOL
    }
}

/// The three power allocations: split power evenly, or bet everything on
/// channel 1 or channel 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Balanced,
    Bet1,
    Bet2,
}

impl Action {
    /// All actions in tie-break preference order: Balanced > Bet1 > Bet2.
    pub const ALL: [Action; 3] = [Action::Balanced, Action::Bet1, Action::Bet2];

    pub fn index(self) -> usize {
        match self {
            Action::Balanced => 0,
            Action::Bet1 => 1,
            Action::Bet2 => 2,
        }
    }

    pub fn from_index(idx: usize) -> Option<Action> {
        Action::ALL.get(idx).copied()
    }

    /// The action taking the mirrored role under the swap (p₁,p₂)↔(p₂,p₁).
    pub fn mirrored(self) -> Action {
        match self {
            Action::Balanced => Action::Balanced,
            Action::Bet1 => Action::Bet2,
            Action::Bet2 => Action::Bet1,
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Action::Balanced => write!(f, "balanced"),
            Action::Bet1 => write!(f, "bet1"),
            Action::Bet2 => write!(f, "bet2"),
        }
    }
}

/// One branch of the single-step transition: resulting belief, its
/// probability, and the bits realized on that branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionOutcome {
    pub probability: f64,
    pub next_belief: Belief,
    pub immediate_bits: f64,
}

/// Expected immediate reward g_a(p): Balanced → (p₁+p₂)R_l,
/// Bet1 → p₁R_h, Bet2 → p₂R_h.
pub fn expected_reward(b: Belief, a: Action, params: &ModelParams) -> f64 {
    match a {
        Action::Balanced => (b.p1 + b.p2) * params.r_low(),
        Action::Bet1 => b.p1 * params.r_high(),
        Action::Bet2 => b.p2 * params.r_high(),
    }
}

/// Enumerates the single-step outcomes of taking action `a` at belief `b`.
///
/// Balanced reveals both channels, so the next belief is one of the four
/// corners {λ₀,λ₁}²; betting reveals only the bet channel, the other belief
/// propagates through T. Zero-probability branches are dropped.
pub fn transition_kernel(b: Belief, a: Action, params: &ModelParams) -> Vec<TransitionOutcome> {
    let l0 = params.lambda0();
    let l1 = params.lambda1();
    let (p1, p2) = (b.p1, b.p2);
    let branches: Vec<(f64, Belief, f64)> = match a {
        Action::Balanced => {
            let rl = params.r_low();
            vec![
                ((1.0 - p1) * (1.0 - p2), Belief { p1: l0, p2: l0 }, 0.0),
                (p1 * (1.0 - p2), Belief { p1: l1, p2: l0 }, rl),
                ((1.0 - p1) * p2, Belief { p1: l0, p2: l1 }, rl),
                (p1 * p2, Belief { p1: l1, p2: l1 }, 2.0 * rl),
            ]
        }
        Action::Bet1 => {
            let t2 = params.tau(p2);
            vec![
                (1.0 - p1, Belief { p1: l0, p2: t2 }, 0.0),
                (p1, Belief { p1: l1, p2: t2 }, params.r_high()),
            ]
        }
        Action::Bet2 => {
            let t1 = params.tau(p1);
            vec![
                (1.0 - p2, Belief { p1: t1, p2: l0 }, 0.0),
                (p2, Belief { p1: t1, p2: l1 }, params.r_high()),
            ]
        }
    };
    branches
        .into_iter()
        .filter(|(p, _, _)| *p > 0.0)
        .map(|(probability, next_belief, immediate_bits)| TransitionOutcome {
            probability,
            next_belief,
            immediate_bits,
        })
        .collect()
}
