//! Corner-difference threshold formulas and their four-case dispatch.
//!
//! With δ_{i,j}(k₁,k₂) = V_{B_i}(k₁,k₂) − V_{B_j}(k₁,k₂) taken at the four
//! corners of the border rectangle, each threshold admits a closed form
//! derived from the indifference equation at the switch point, with four
//! cases according to which downstream regions the one-step successors land
//! in. The case conditions refer to the thresholds themselves, so every
//! case is evaluated and filtered for fixed-point self-consistency; scan
//! values only break ties between multiple consistent cases.
//!
//! The formulas substitute one optimal action per successor point and
//! expand it affinely across the whole edge. That premise can fail: the
//! betting action values are affine in the unobserved coordinate only
//! piecewise, with kinks where the downstream optimal action switches. A
//! case whose expansion crosses such a kink (ρ₁ cases 1–2, ρ₂ cases 3–4,
//! when a threshold lies inside (T(λ₀), T(λ₁))) yields an approximation;
//! the other cases are exact. The scan stays the ground truth and the
//! agreement gap is reported, never hidden.

use serde::Serialize;

use crate::model::{Action, Belief, ModelParams};
use crate::solver::{ActionValues, BorderValueFunction};

/// The four corners of the border rectangle, as (k₁, k₂) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    /// (λ₀, λ₀)
    LoLo,
    /// (λ₁, λ₀)
    HiLo,
    /// (λ₀, λ₁)
    LoHi,
    /// (λ₁, λ₁)
    HiHi,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::LoLo, Corner::HiLo, Corner::LoHi, Corner::HiHi];

    fn index(self) -> usize {
        match self {
            Corner::LoLo => 0,
            Corner::HiLo => 1,
            Corner::LoHi => 2,
            Corner::HiHi => 3,
        }
    }

    pub fn belief(self, params: &ModelParams) -> Belief {
        let (l0, l1) = (params.lambda0(), params.lambda1());
        match self {
            Corner::LoLo => Belief { p1: l0, p2: l0 },
            Corner::HiLo => Belief { p1: l1, p2: l0 },
            Corner::LoHi => Belief { p1: l0, p2: l1 },
            Corner::HiHi => Belief { p1: l1, p2: l1 },
        }
    }
}

/// Action values at the four corners; all 3×3×4 differences derive from it.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaTable {
    pub corners: [ActionValues; 4],
}

impl DeltaTable {
    /// δ_{i,j}(corner) = V_{B_i} − V_{B_j} at that corner. Antisymmetric by
    /// construction.
    pub fn delta(&self, i: Action, j: Action, c: Corner) -> f64 {
        let av = &self.corners[c.index()];
        av.get(i) - av.get(j)
    }

    pub fn action_values(&self, c: Corner) -> &ActionValues {
        &self.corners[c.index()]
    }
}

/// Corner action values from one exact backup per corner.
pub fn compute_delta_table(values: &BorderValueFunction) -> DeltaTable {
    let params = values.grid().params();
    let corners = Corner::ALL.map(|c| values.backup(c.belief(params)));
    DeltaTable { corners }
}

/// One case formula evaluated, with its self-consistency verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CaseCandidate {
    pub case: u8,
    pub value: f64,
    pub self_consistent: bool,
}

/// Outcome of the four-case dispatch for one threshold.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormThreshold {
    /// The selected case's value; absent when no case is self-consistent.
    pub value: Option<f64>,
    pub case: Option<u8>,
    pub self_consistent: bool,
    /// More than one case passed its own conditions; the scan hint broke
    /// the tie.
    pub ambiguous: bool,
    pub candidates: Vec<CaseCandidate>,
}

/// Both thresholds from the closed forms.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedFormResult {
    pub rho1: ClosedFormThreshold,
    pub rho2: ClosedFormThreshold,
}

fn select(candidates: Vec<CaseCandidate>, scan_hint: Option<f64>) -> ClosedFormThreshold {
    let consistent: Vec<&CaseCandidate> = candidates
        .iter()
        .filter(|c| c.self_consistent && c.value.is_finite())
        .collect();
    let (value, case, ambiguous) = match consistent.len() {
        0 => (None, None, false),
        1 => (Some(consistent[0].value), Some(consistent[0].case), false),
        _ => {
            let pick = match scan_hint {
                Some(h) => consistent
                    .iter()
                    .min_by(|a, b| {
                        (a.value - h)
                            .abs()
                            .partial_cmp(&(b.value - h).abs())
                            .expect("finite candidate values")
                    })
                    .expect("nonempty"),
                None => &consistent[0],
            };
            (Some(pick.value), Some(pick.case), true)
        }
    };
    ClosedFormThreshold {
        value,
        case,
        self_consistent: !consistent.is_empty(),
        ambiguous,
        candidates,
    }
}

/// ρ₁ (bottom-edge Balanced→Bet1 switch) via the four case formulas.
///
/// `rho2_hint` enters the case conditions (T(λ₀) against ρ₂); the candidate
/// value itself closes the T(λ₀)-against-ρ₁ side. `scan_hint` breaks ties
/// when several cases are self-consistent.
pub fn rho1_closed_form(
    deltas: &DeltaTable,
    params: &ModelParams,
    rho2_hint: f64,
    scan_hint: Option<f64>,
) -> ClosedFormThreshold {
    let (l0, beta) = (params.lambda0(), params.beta());
    let (rl, rh) = (params.r_low(), params.r_high());
    let t_l0 = params.tau(l0);
    let d = |i, j, c| deltas.delta(i, j, c);
    let (b, b1, b2) = (Action::Balanced, Action::Bet1, Action::Bet2);

    // successor policies assumed per case: (λ₁,T(λ₀)) is Bet1 below ρ₂ and
    // Balanced above; (λ₀,T(λ₀)) is Balanced below ρ₁ and Bet2 above
    let v1 = (l0 * rl + beta * l0 * d(b2, b, Corner::LoHi))
        / (rh - rl + beta * l0 * (d(b1, b, Corner::HiHi) + d(b2, b, Corner::LoHi)));
    let v2 = (l0 * rl + beta * (1.0 - l0) * d(b, b2, Corner::LoLo))
        / (rh - rl + beta * l0 * d(b1, b, Corner::HiHi) + beta * (1.0 - l0) * d(b, b2, Corner::LoLo));
    let v3 = (l0 * rl + beta * l0 * d(b2, b, Corner::LoHi))
        / (rh - rl + beta * l0 * d(b2, b, Corner::LoHi) + beta * (1.0 - l0) * d(b, b1, Corner::HiLo));
    let v4 = (l0 * rl + beta * (1.0 - l0) * d(b, b2, Corner::LoLo))
        / (rh - rl + beta * (1.0 - l0) * (d(b, b2, Corner::LoLo) + d(b, b1, Corner::HiLo)));

    let candidates = vec![
        CaseCandidate {
            case: 1,
            value: v1,
            self_consistent: t_l0 < rho2_hint && t_l0 <= v1,
        },
        CaseCandidate {
            case: 2,
            value: v2,
            self_consistent: t_l0 < rho2_hint && t_l0 > v2,
        },
        CaseCandidate {
            case: 3,
            value: v3,
            self_consistent: t_l0 >= rho2_hint && t_l0 <= v3,
        },
        CaseCandidate {
            case: 4,
            value: v4,
            self_consistent: t_l0 >= rho2_hint && t_l0 > v4,
        },
    ];
    select(candidates, scan_hint)
}

/// ρ₂ (top-edge Bet2→Balanced switch) via the four case formulas.
///
/// The case conditions compare T at the candidate against the candidate
/// itself and against `rho1_hint`.
pub fn rho2_closed_form(
    deltas: &DeltaTable,
    params: &ModelParams,
    rho1_hint: f64,
    scan_hint: Option<f64>,
) -> ClosedFormThreshold {
    let (l1, beta) = (params.lambda1(), params.beta());
    let (rl, rh) = (params.r_low(), params.r_high());
    let d = |i, j, c| deltas.delta(i, j, c);
    let (b, b1, b2) = (Action::Balanced, Action::Bet1, Action::Bet2);

    // successor policies assumed per case: (T(ρ₂),λ₁) is Bet2 below ρ₂ and
    // Balanced above; (T(ρ₂),λ₀) is Balanced below ρ₁ and Bet1 above
    let k1 = beta * l1 * d(b2, b, Corner::LoHi) + beta * (1.0 - l1) * d(b, b1, Corner::LoLo);
    let v1 = (l1 * (rh - rl) - k1) / (rl - k1);
    let a2 = beta * l1 * d(b2, b, Corner::LoHi);
    let v2 = (l1 * (rh - rl) - a2) / (rl - a2 - beta * (1.0 - l1) * d(b, b1, Corner::HiLo));
    let b3 = beta * (1.0 - l1) * d(b, b1, Corner::LoLo);
    let v3 = (l1 * (rh - rl) - b3) / (rl - beta * l1 * d(b2, b, Corner::HiHi) - b3);
    let v4 = (l1 * (rh - rl))
        / (rl - beta * l1 * d(b2, b, Corner::HiHi) - beta * (1.0 - l1) * d(b, b1, Corner::HiLo));

    let cond = |v: f64, up: bool, above_rho1: bool| {
        let tv = params.tau(v);
        let drift = if up { tv >= v } else { tv < v };
        let side = if above_rho1 {
            tv > rho1_hint
        } else {
            tv <= rho1_hint
        };
        drift && side
    };
    let candidates = vec![
        CaseCandidate {
            case: 1,
            value: v1,
            self_consistent: cond(v1, true, true),
        },
        CaseCandidate {
            case: 2,
            value: v2,
            self_consistent: cond(v2, true, false),
        },
        CaseCandidate {
            case: 3,
            value: v3,
            self_consistent: cond(v3, false, true),
        },
        CaseCandidate {
            case: 4,
            value: v4,
            self_consistent: cond(v4, false, false),
        },
    ];
    select(candidates, scan_hint)
}

/// Convenience: both closed forms from a solved value function, using the
/// scan report's thresholds as hints.
pub fn compute_closed_forms(
    values: &BorderValueFunction,
    scan: &crate::policy::ThresholdReport,
) -> ClosedFormResult {
    let params = values.grid().params();
    let deltas = compute_delta_table(values);
    let rho1_hint = scan.rho1();
    let rho2_hint = scan.rho2();
    let rho1 = rho1_closed_form(
        &deltas,
        params,
        rho2_hint.unwrap_or(params.lambda0()),
        rho1_hint,
    );
    let rho2 = rho2_closed_form(
        &deltas,
        params,
        rho1_hint.unwrap_or(params.lambda1()),
        rho2_hint,
    );
    ClosedFormResult { rho1, rho2 }
}
