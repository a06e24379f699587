//! Fixed-point solvers on the border grid and value queries off it.
//!
//! Two independent routes to the same discounted fixed point:
//! value iteration (Jacobi sweeps of the max-action backup) and policy
//! iteration (exact policy evaluation via a dense linear solve alternated
//! with greedy improvement). A solved value table answers queries at any
//! belief in [0,1]² with a single exact backup, since every successor of
//! any belief lies on the border set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BorderGrid, EdgeId};
use crate::model::{expected_reward, Action, Belief};

/// Iteration cap for value iteration; exceeding it signals misconfiguration.
pub const MAX_SWEEPS: usize = 1_000_000;

/// Improvement cap for policy iteration.
pub const MAX_IMPROVEMENTS: usize = 1_000;

/// Relative tolerance for treating two action values as tied.
const TIE_EPS: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("value iteration did not reach tolerance within {sweeps} sweeps (last delta {delta:e})")]
    NonConvergence { sweeps: usize, delta: f64 },

    #[error("policy iteration did not stabilize within {0} improvements")]
    PolicyCycling(usize),

    #[error("singular policy-evaluation system (pivot {pivot:e} at row {row}); this cannot occur for beta < 1")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Which solver produced a value function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    ValueIteration,
    PolicyIteration,
}

/// The three action values at one belief.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionValues {
    pub balanced: f64,
    pub bet1: f64,
    pub bet2: f64,
}

impl ActionValues {
    pub fn get(&self, a: Action) -> f64 {
        match a {
            Action::Balanced => self.balanced,
            Action::Bet1 => self.bet1,
            Action::Bet2 => self.bet2,
        }
    }

    pub fn max(&self) -> f64 {
        self.balanced.max(self.bet1).max(self.bet2)
    }

    /// Argmax with deterministic tie-break Balanced > Bet1 > Bet2.
    pub fn argmax(&self) -> Action {
        let best = self.max();
        let slack = TIE_EPS * (1.0 + best.abs());
        Action::ALL
            .into_iter()
            .find(|a| self.get(*a) >= best - slack)
            .expect("at least one action attains the max")
    }

    /// Gap between the best and second-best action values.
    pub fn top_two_gap(&self) -> f64 {
        let mut v = [self.balanced, self.bet1, self.bet2];
        v.sort_by(|a, b| b.partial_cmp(a).expect("finite action values"));
        v[0] - v[1]
    }
}

/// A solved value function on the border grid.
#[derive(Debug, Clone)]
pub struct BorderValueFunction {
    grid: BorderGrid,
    values: Vec<f64>,
    residual: f64,
    solver: SolverKind,
    /// Sup-norm change per sweep (VI) or per improvement (PI).
    sweep_deltas: Vec<f64>,
}

impl BorderValueFunction {
    pub fn grid(&self) -> &BorderGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Final sup-norm Bellman residual ‖TV − V‖∞.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn solver(&self) -> SolverKind {
        self.solver
    }

    pub fn sweep_deltas(&self) -> &[f64] {
        &self.sweep_deltas
    }

    pub fn iterations(&self) -> usize {
        self.sweep_deltas.len()
    }

    /// One exact backup at an arbitrary belief, interpolating continuation
    /// values along the border edges.
    pub fn backup(&self, b: Belief) -> ActionValues {
        backup_with(&self.grid, &self.values, b)
    }

    /// Fast backup at a grid state through the folded transition rows.
    pub fn backup_state(&self, s: usize) -> ActionValues {
        backup_state_with(&self.grid, &self.values, s)
    }

    /// Test hook: additively perturbs one stored value.
    #[cfg(test)]
    pub(crate) fn perturb_for_tests(&mut self, s: usize, delta: f64) {
        self.values[s] += delta;
    }

    /// CSV rendering: edge_id,q,p1,p2,value,v_balanced,v_bet1,v_bet2.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("edge_id,q,p1,p2,value,v_balanced,v_bet1,v_bet2\n");
        for (s, st) in self.grid.states().iter().enumerate() {
            let q = match st.edge {
                EdgeId::Bottom | EdgeId::Top => st.belief.p1,
                EdgeId::Left | EdgeId::Right => st.belief.p2,
            };
            let av = self.backup_state(s);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                st.edge, q, st.belief.p1, st.belief.p2, self.values[s], av.balanced, av.bet1, av.bet2
            ));
        }
        out
    }
}

/// Max value and per-action values at an arbitrary belief.
pub fn query_value(b: Belief, values: &BorderValueFunction) -> (f64, ActionValues) {
    let av = values.backup(b);
    (av.max(), av)
}

fn backup_with(grid: &BorderGrid, values: &[f64], b: Belief) -> ActionValues {
    let p = grid.params();
    let beta = p.beta();
    let [ll, hl, lh, hh] = grid.corner_indices();
    let balanced = expected_reward(b, Action::Balanced, p)
        + beta
            * ((1.0 - b.p1) * (1.0 - b.p2) * values[ll]
                + b.p1 * (1.0 - b.p2) * values[hl]
                + (1.0 - b.p1) * b.p2 * values[lh]
                + b.p1 * b.p2 * values[hh]);
    let t2 = p.tau(b.p2);
    let bet1 = expected_reward(b, Action::Bet1, p)
        + beta
            * ((1.0 - b.p1) * grid.edge_value(EdgeId::Left, t2, values)
                + b.p1 * grid.edge_value(EdgeId::Right, t2, values));
    let t1 = p.tau(b.p1);
    let bet2 = expected_reward(b, Action::Bet2, p)
        + beta
            * ((1.0 - b.p2) * grid.edge_value(EdgeId::Bottom, t1, values)
                + b.p2 * grid.edge_value(EdgeId::Top, t1, values));
    ActionValues {
        balanced,
        bet1,
        bet2,
    }
}

fn backup_state_with(grid: &BorderGrid, values: &[f64], s: usize) -> ActionValues {
    let beta = grid.params().beta();
    let mut out = [0.0f64; 3];
    for a in Action::ALL {
        let row = grid.row(s, a);
        let cont: f64 = row.entries.iter().map(|&(y, w)| w * values[y]).sum();
        out[a.index()] = row.reward + beta * cont;
    }
    ActionValues {
        balanced: out[0],
        bet1: out[1],
        bet2: out[2],
    }
}

fn bellman_residual(grid: &BorderGrid, values: &[f64]) -> f64 {
    (0..grid.n_states())
        .map(|s| (backup_state_with(grid, values, s).max() - values[s]).abs())
        .fold(0.0, f64::max)
}

/// Value iteration from V⁰ = 0 with the standard discounted stopping rule
/// δ ≤ tol(1−β)/(2β), which guarantees ‖V − V*‖∞ ≤ tol on the grid
/// (δ ≤ tol when β = 0, where one sweep is already exact).
pub fn solve_value_iteration(grid: BorderGrid, tol: f64) -> Result<BorderValueFunction, SolveError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(SolveError::BadTolerance(tol));
    }
    let beta = grid.params().beta();
    let n = grid.n_states();
    let mut values = vec![0.0f64; n];
    let mut sweep_deltas = Vec::new();

    if beta == 0.0 {
        for s in 0..n {
            values[s] = backup_state_with(&grid, &values, s).max();
        }
        sweep_deltas.push(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let residual = bellman_residual(&grid, &values);
        return Ok(BorderValueFunction {
            grid,
            values,
            residual,
            solver: SolverKind::ValueIteration,
            sweep_deltas,
        });
    }

    let threshold = tol * (1.0 - beta) / (2.0 * beta);
    let mut next = vec![0.0f64; n];
    for _ in 0..MAX_SWEEPS {
        let mut delta = 0.0f64;
        for s in 0..n {
            let v = backup_state_with(&grid, &values, s).max();
            delta = delta.max((v - values[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut values, &mut next);
        sweep_deltas.push(delta);
        if delta <= threshold {
            let residual = bellman_residual(&grid, &values);
            return Ok(BorderValueFunction {
                grid,
                values,
                residual,
                solver: SolverKind::ValueIteration,
                sweep_deltas,
            });
        }
    }
    Err(SolveError::NonConvergence {
        sweeps: MAX_SWEEPS,
        delta: *sweep_deltas.last().unwrap_or(&f64::NAN),
    })
}

/// Greedy policy on immediate rewards (the β = 0 optimum).
pub fn myopic_policy(grid: &BorderGrid) -> Vec<Action> {
    grid.states()
        .iter()
        .map(|st| {
            let p = grid.params();
            let av = ActionValues {
                balanced: expected_reward(st.belief, Action::Balanced, p),
                bet1: expected_reward(st.belief, Action::Bet1, p),
                bet2: expected_reward(st.belief, Action::Bet2, p),
            };
            av.argmax()
        })
        .collect()
}

/// Exact evaluation of a stationary policy: solves (I − βP_π)v = g_π.
///
/// The system matrix is strictly diagonally dominant (margin 1−β), so
/// unpivoted elimination is stable.
pub fn evaluate_stationary_policy(
    grid: &BorderGrid,
    actions: &[Action],
) -> Result<Vec<f64>, SolveError> {
    let n = grid.n_states();
    assert_eq!(actions.len(), n, "one action per grid state");
    let beta = grid.params().beta();
    let mut a = vec![0.0f64; n * n];
    let mut rhs = vec![0.0f64; n];
    for s in 0..n {
        let row = grid.row(s, actions[s]);
        a[s * n + s] = 1.0;
        for &(y, w) in &row.entries {
            a[s * n + y] -= beta * w;
        }
        rhs[s] = row.reward;
    }
    solve_dense_unpivoted(&mut a, n, &mut rhs)?;
    Ok(rhs)
}

/// Policy iteration from the myopic policy: exact evaluation alternated with
/// greedy improvement until the policy is stable.
pub fn solve_policy_iteration(
    grid: BorderGrid,
    tol: f64,
) -> Result<BorderValueFunction, SolveError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(SolveError::BadTolerance(tol));
    }
    let n = grid.n_states();
    let mut policy = myopic_policy(&grid);
    let mut values = vec![0.0f64; n];
    let mut sweep_deltas = Vec::new();

    for _ in 0..MAX_IMPROVEMENTS {
        let new_values = evaluate_stationary_policy(&grid, &policy)?;
        let delta = values
            .iter()
            .zip(&new_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        sweep_deltas.push(delta);
        values = new_values;

        let improved: Vec<Action> = (0..n)
            .map(|s| backup_state_with(&grid, &values, s).argmax())
            .collect();
        if improved == policy {
            let residual = bellman_residual(&grid, &values);
            debug_assert!(residual <= tol, "policy iteration residual {residual:e}");
            return Ok(BorderValueFunction {
                grid,
                values,
                residual,
                solver: SolverKind::PolicyIteration,
                sweep_deltas,
            });
        }
        policy = improved;
    }
    Err(SolveError::PolicyCycling(MAX_IMPROVEMENTS))
}

/// In-place unpivoted LU solve of a dense n×n system stored row-major.
///
/// Valid only for strictly diagonally dominant matrices; the policy
/// evaluation system always is.
fn solve_dense_unpivoted(a: &mut [f64], n: usize, b: &mut [f64]) -> Result<(), SolveError> {
    debug_assert_eq!(a.len(), n * n);
    for k in 0..n {
        let pivot = a[k * n + k];
        if pivot.abs() < 1e-12 {
            return Err(SolveError::SingularSystem { row: k, pivot });
        }
        let inv = 1.0 / pivot;
        let (above, below) = a.split_at_mut((k + 1) * n);
        let row_k = &above[k * n + k + 1..];
        for i in 0..n - k - 1 {
            let row_i = &mut below[i * n..(i + 1) * n];
            let factor = row_i[k] * inv;
            if factor != 0.0 {
                row_i[k] = 0.0;
                for (rij, rkj) in row_i[k + 1..].iter_mut().zip(row_k) {
                    *rij -= factor * rkj;
                }
                b[k + 1 + i] -= factor * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * b[j];
        }
        b[k] = acc / a[k * n + k];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn reference_params() -> ModelParams {
        ModelParams::new(0.1, 0.9, 2.0, 3.0, 0.9).unwrap()
    }

    fn reference_grid(n: usize) -> BorderGrid {
        BorderGrid::new(reference_params(), n).unwrap()
    }

    #[test]
    fn dense_solver_recovers_known_solution() {
        // 3x3 diagonally dominant system with x = (1, -2, 3)
        let mut a = vec![4.0, 1.0, -1.0, 0.5, 3.0, 1.0, -1.0, 0.25, 5.0];
        let x = [1.0, -2.0, 3.0];
        let mut b = vec![4.0 - 2.0 - 3.0, 0.5 - 6.0 + 3.0, -1.0 - 0.5 + 15.0];
        solve_dense_unpivoted(&mut a, 3, &mut b).unwrap();
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn myopic_value_iteration_is_one_sweep() {
        let p = ModelParams::new(0.1, 0.9, 2.0, 3.0, 0.0).unwrap();
        let g = BorderGrid::new(p, 8).unwrap();
        let vf = solve_value_iteration(g, 1e-9).unwrap();
        assert_eq!(vf.iterations(), 1);
        assert_eq!(vf.residual(), 0.0);
        for (s, st) in vf.grid().states().iter().enumerate() {
            let want = Action::ALL
                .into_iter()
                .map(|a| expected_reward(st.belief, a, vf.grid().params()))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((vf.values()[s] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn myopic_policy_iteration_is_one_improvement() {
        let p = ModelParams::new(0.1, 0.9, 2.0, 3.0, 0.0).unwrap();
        let g = BorderGrid::new(p, 8).unwrap();
        let vf = solve_policy_iteration(g, 1e-9).unwrap();
        assert_eq!(vf.iterations(), 1);
        assert!(vf.residual() <= 1e-12);
    }

    #[test]
    fn backup_at_beta_zero_is_expected_reward() {
        let p = ModelParams::new(0.1, 0.9, 2.0, 3.0, 0.0).unwrap();
        let g = BorderGrid::new(p, 8).unwrap();
        let vf = solve_value_iteration(g, 1e-9).unwrap();
        let b = Belief::new(0.5, 0.5).unwrap();
        let av = vf.backup(b);
        assert!((av.balanced - 2.0).abs() < 1e-15);
        assert!((av.bet1 - 1.5).abs() < 1e-15);
        assert!((av.bet2 - 1.5).abs() < 1e-15);
        let (v, best) = query_value(b, &vf);
        assert_eq!(v, 2.0);
        assert_eq!(best.argmax(), Action::Balanced);
    }

    #[test]
    fn corner_backup_matches_branch_enumeration() {
        // independent oracle: enumerate the four Balanced branches at
        // (λ₁, λ₁) by hand against an arbitrary synthetic value table
        let g = reference_grid(4);
        let n = g.n_states();
        let synthetic: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 2.0).collect();
        let (l0, l1, beta) = (0.1, 0.9, 0.9);
        let [ll, hl, lh, hh] = g.corner_indices();
        let want = (l1 + l1) * 2.0
            + beta
                * ((1.0 - l1) * (1.0 - l1) * synthetic[ll]
                    + l1 * (1.0 - l1) * synthetic[hl]
                    + (1.0 - l1) * l1 * synthetic[lh]
                    + l1 * l1 * synthetic[hh]);
        let got = backup_with(&g, &synthetic, Belief { p1: l1, p2: l1 }).balanced;
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        let _ = l0;
    }

    #[test]
    fn row_backup_agrees_with_generic_backup() {
        let g = reference_grid(16);
        let n = g.n_states();
        let synthetic: Vec<f64> = (0..n).map(|i| ((i * 31 % 17) as f64) * 0.3).collect();
        for s in 0..n {
            let via_rows = backup_state_with(&g, &synthetic, s);
            let generic = backup_with(&g, &synthetic, g.states()[s].belief);
            assert!((via_rows.balanced - generic.balanced).abs() < 1e-12);
            assert!((via_rows.bet1 - generic.bet1).abs() < 1e-12);
            assert!((via_rows.bet2 - generic.bet2).abs() < 1e-12);
        }
    }

    #[test]
    fn forced_balanced_evaluation_matches_affine_closed_form() {
        // v(p1,p2) = c0 + c1(p1+p2) with c1 = R_l/(1-βα),
        // c0 = 2βλ₀R_l/((1-β)(1-βα)); at (0.5, 0.5) this is 20 bits.
        let g = reference_grid(32);
        let n = g.n_states();
        let v = evaluate_stationary_policy(&g, &vec![Action::Balanced; n]).unwrap();
        let (beta, alpha, l0, rl) = (0.9, 0.8, 0.1, 2.0);
        let c1 = rl / (1.0 - beta * alpha);
        let c0 = 2.0 * beta * l0 * rl / ((1.0 - beta) * (1.0 - beta * alpha));
        for (s, st) in g.states().iter().enumerate() {
            let want = c0 + c1 * (st.belief.p1 + st.belief.p2);
            assert!(
                (v[s] - want).abs() < 1e-8,
                "state {s}: got {}, want {want}",
                v[s]
            );
        }
        // balanced backup at (0.5, 0.5) under the forced values
        let av = backup_with(&g, &v, Belief { p1: 0.5, p2: 0.5 });
        assert!((av.balanced - 20.0).abs() < 1e-8);
    }

    #[test]
    fn solvers_agree_at_moderate_resolution() {
        let tol = 1e-9;
        let vf_vi = solve_value_iteration(reference_grid(32), tol).unwrap();
        let vf_pi = solve_policy_iteration(reference_grid(32), tol).unwrap();
        let diff = vf_vi
            .values()
            .iter()
            .zip(vf_pi.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff <= 2.0 * tol, "cross-solver sup-norm gap {diff:e}");
        assert!(vf_vi.residual() <= tol);
        assert!(vf_pi.residual() <= tol);
    }

    #[test]
    fn query_at_grid_states_consistent_with_stored_values() {
        let vf = solve_value_iteration(reference_grid(32), 1e-9).unwrap();
        for (s, st) in vf.grid().states().iter().enumerate() {
            let (v, _) = query_value(st.belief, &vf);
            assert!((v - vf.values()[s]).abs() <= 1e-8);
        }
    }

    #[test]
    fn query_is_symmetric_under_swap() {
        let vf = solve_value_iteration(reference_grid(64), 1e-9).unwrap();
        for (p1, p2) in [(0.2, 0.7), (0.05, 0.95), (0.5, 0.1), (0.33, 0.66)] {
            let (v, _) = query_value(Belief::new(p1, p2).unwrap(), &vf);
            let (vm, _) = query_value(Belief::new(p2, p1).unwrap(), &vf);
            assert!((v - vm).abs() <= 1e-8, "({p1},{p2}): {v} vs {vm}");
        }
    }

    #[test]
    fn contraction_of_sweep_deltas() {
        let vf = solve_value_iteration(reference_grid(16), 1e-9).unwrap();
        let beta = 0.9;
        for w in vf.sweep_deltas().windows(2) {
            assert!(w[1] <= beta * w[0] + 1e-12, "deltas {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn degenerate_grid_solves() {
        let p = ModelParams::new(0.4, 0.4, 2.0, 3.0, 0.9).unwrap();
        let g = BorderGrid::new(p, 8).unwrap();
        let vf = solve_value_iteration(g, 1e-9).unwrap();
        assert_eq!(vf.values().len(), 1);
        // single state at (0.4, 0.4): balanced dominates (2R_l > R_h), so
        // v = (0.4+0.4)·2 / (1−0.9)
        let want = 1.6 / 0.1;
        assert!((vf.values()[0] - want).abs() < 1e-6);
        let vf_pi = solve_policy_iteration(
            BorderGrid::new(ModelParams::new(0.4, 0.4, 2.0, 3.0, 0.9).unwrap(), 8).unwrap(),
            1e-9,
        )
        .unwrap();
        assert!((vf_pi.values()[0] - want).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(matches!(
            solve_value_iteration(reference_grid(4), 0.0),
            Err(SolveError::BadTolerance(_))
        ));
        assert!(matches!(
            solve_policy_iteration(reference_grid(4), -1.0),
            Err(SolveError::BadTolerance(_))
        ));
    }

    #[test]
    fn csv_export_shape() {
        let vf = solve_value_iteration(reference_grid(4), 1e-9).unwrap();
        let csv = vf.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 16);
        assert_eq!(
            lines[0],
            "edge_id,q,p1,p2,value,v_balanced,v_bet1,v_bet2"
        );
        assert!(lines[1].starts_with("bottom,0.1,0.1,0.1,"));
    }
}
