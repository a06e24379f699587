//! The discretized problem as a linear program, exportable for external
//! solvers and checkable against an internally solved value function.
//!
//! The program is
//!
//! ```text
//! min Σ_p V(p)   s.t.   g_a(p) + β Σ_y f_a(p,y) V(y) ≤ V(p)   ∀p, a
//! ```
//!
//! whose optimum is the discounted fixed point. No LP solver is embedded:
//! the fixed point from policy iteration is certified directly by checking
//! feasibility of every constraint plus per-state tightness of the best one.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::grid::BorderGrid;
use crate::model::{Action, ModelParams};
use crate::solver::BorderValueFunction;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("value function was solved on a different grid (params or n_cells differ)")]
    GridMismatch,

    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One (state, action) constraint in kernel form: expected reward plus the
/// successor distribution f_a(p, ·) with interpolation weights folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub state: usize,
    pub action: Action,
    pub reward: f64,
    pub frow: Vec<(usize, f64)>,
}

/// The LP: one value variable per grid state, objective min Σ V(p), and one
/// constraint per (state, action) pair, in canonical edge-major order.
#[derive(Debug, Clone)]
pub struct LpInstance {
    params: ModelParams,
    n_cells: usize,
    n_vars: usize,
    constraints: Vec<LpConstraint>,
}

/// A constraint rearranged onto the variables:
/// (1 − βf(p,p))·V(p) − β Σ_{y≠p} f(p,y)·V(y) ≥ g_a(p).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Feasibility and tightness of a candidate value function against the LP.
#[derive(Debug, Clone, Serialize)]
pub struct LpVerificationReport {
    /// max over constraints of (lhs − V(p)), floored at 0.
    pub max_violation: f64,
    /// max over states of (V(p) − max_a lhs_a(p)).
    pub max_tightness_gap: f64,
    pub verdict: Verdict,
}

/// Materializes the LP from the grid's folded transition rows.
pub fn build_lp(grid: &BorderGrid) -> LpInstance {
    let mut constraints = Vec::with_capacity(grid.n_states() * 3);
    for s in 0..grid.n_states() {
        for a in Action::ALL {
            let row = grid.row(s, a);
            constraints.push(LpConstraint {
                state: s,
                action: a,
                reward: row.reward,
                frow: row.entries.clone(),
            });
        }
    }
    LpInstance {
        params: *grid.params(),
        n_cells: grid.n_cells(),
        n_vars: grid.n_states(),
        constraints,
    }
}

impl LpInstance {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constraints(&self) -> &[LpConstraint] {
        &self.constraints
    }

    /// Rearranged variable-space constraints, zero coefficients dropped.
    pub fn linear_constraints(&self) -> Vec<LinearConstraint> {
        let beta = self.params.beta();
        self.constraints
            .iter()
            .map(|c| {
                let mut terms: Vec<(usize, f64)> =
                    c.frow.iter().map(|&(y, w)| (y, -beta * w)).collect();
                match terms.binary_search_by_key(&c.state, |t| t.0) {
                    Ok(i) => terms[i].1 += 1.0,
                    Err(i) => terms.insert(i, (c.state, 1.0)),
                }
                terms.retain(|t| t.1 != 0.0);
                LinearConstraint {
                    name: format!("c_{}_{}", c.state, c.action),
                    terms,
                    rhs: c.reward,
                }
            })
            .collect()
    }
}

fn fmt_coeff(x: f64) -> String {
    // 17 significant digits: lossless decimal round-trip for f64
    format!("{:.16e}", x)
}

/// Writes the canonical LP text artifact. Identical instances produce
/// byte-identical output.
pub fn export_lp<W: Write>(instance: &LpInstance, sink: &mut W) -> Result<(), LpError> {
    let p = &instance.params;
    writeln!(sink, "\\ two-channel power allocation value LP")?;
    writeln!(
        sink,
        "\\ lambda0={} lambda1={} r_low={} r_high={} beta={} n_cells={}",
        fmt_coeff(p.lambda0()),
        fmt_coeff(p.lambda1()),
        fmt_coeff(p.r_low()),
        fmt_coeff(p.r_high()),
        fmt_coeff(p.beta()),
        instance.n_cells
    )?;
    writeln!(sink, "Minimize")?;
    let mut obj = String::from(" obj:");
    for v in 0..instance.n_vars {
        obj.push_str(&format!(" + v_{v}"));
    }
    writeln!(sink, "{obj}")?;
    writeln!(sink, "Subject To")?;
    for c in instance.linear_constraints() {
        let mut line = format!(" {}:", c.name);
        for (v, coeff) in &c.terms {
            let sign = if *coeff < 0.0 { '-' } else { '+' };
            line.push_str(&format!(" {} {} v_{}", sign, fmt_coeff(coeff.abs()), v));
        }
        line.push_str(&format!(" >= {}", fmt_coeff(c.rhs)));
        writeln!(sink, "{line}")?;
    }
    writeln!(sink, "Bounds")?;
    for v in 0..instance.n_vars {
        writeln!(sink, " v_{v} free")?;
    }
    writeln!(sink, "End")?;
    Ok(())
}

/// What the module's own reader recovers from an exported file: enough to
/// compare programs for equality and to re-export identical bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLp {
    pub n_vars: usize,
    pub constraints: Vec<LinearConstraint>,
}

/// Parses the subset of the LP format that [`export_lp`] emits.
pub fn parse_lp(text: &str) -> Result<ParsedLp, LpError> {
    let err = |line: usize, msg: &str| LpError::Parse {
        line,
        msg: msg.to_string(),
    };
    let mut n_vars = 0usize;
    let mut constraints = Vec::new();
    let mut section = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" | "Subject To" | "Bounds" | "End" => {
                section = line;
                continue;
            }
            _ => {}
        }
        match section {
            "Minimize" => {
                let vars = line
                    .trim_start_matches("obj:")
                    .split_whitespace()
                    .filter(|t| t.starts_with("v_"));
                n_vars = vars.count();
            }
            "Subject To" => {
                let (name, rest) = line
                    .split_once(':')
                    .ok_or_else(|| err(i + 1, "missing constraint name"))?;
                let (lhs, rhs) = rest
                    .split_once(">=")
                    .ok_or_else(|| err(i + 1, "missing >="))?;
                let rhs: f64 = rhs
                    .trim()
                    .parse()
                    .map_err(|_| err(i + 1, "bad rhs number"))?;
                let tokens: Vec<&str> = lhs.split_whitespace().collect();
                if !tokens.len().is_multiple_of(3) {
                    return Err(err(i + 1, "malformed term list"));
                }
                let mut terms = Vec::with_capacity(tokens.len() / 3);
                for t in tokens.chunks(3) {
                    let sign = match t[0] {
                        "+" => 1.0,
                        "-" => -1.0,
                        _ => return Err(err(i + 1, "expected sign token")),
                    };
                    let coeff: f64 = t[1].parse().map_err(|_| err(i + 1, "bad coefficient"))?;
                    let var: usize = t[2]
                        .strip_prefix("v_")
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(i + 1, "bad variable token"))?;
                    terms.push((var, sign * coeff));
                }
                constraints.push(LinearConstraint {
                    name: name.trim().to_string(),
                    terms,
                    rhs,
                });
            }
            "Bounds" => {}
            _ => return Err(err(i + 1, "content outside any section")),
        }
    }
    Ok(ParsedLp {
        n_vars,
        constraints,
    })
}

/// Checks LP optimality of a value function: (a) every constraint feasible
/// within `tol`; (b) at every state some constraint tight within `tol`.
/// Both conditions together certify the discounted fixed point.
pub fn verify_solution(
    instance: &LpInstance,
    values: &BorderValueFunction,
    tol: f64,
) -> Result<LpVerificationReport, LpError> {
    let gp = values.grid().params();
    if *gp != instance.params
        || values.grid().n_cells() != instance.n_cells
        || values.values().len() != instance.n_vars
    {
        return Err(LpError::GridMismatch);
    }
    let beta = instance.params.beta();
    let v = values.values();
    let mut max_violation = 0.0f64;
    let mut best_lhs = vec![f64::NEG_INFINITY; instance.n_vars];
    for c in &instance.constraints {
        let cont: f64 = c.frow.iter().map(|&(y, w)| w * v[y]).sum();
        let lhs = c.reward + beta * cont;
        max_violation = max_violation.max(lhs - v[c.state]);
        if lhs > best_lhs[c.state] {
            best_lhs[c.state] = lhs;
        }
    }
    let max_tightness_gap = v
        .iter()
        .zip(&best_lhs)
        .map(|(vp, lhs)| vp - lhs)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = if max_violation <= tol && max_tightness_gap <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(LpVerificationReport {
        max_violation,
        max_tightness_gap,
        verdict,
    })
}
