//! Discretization of the reachable border belief set.
//!
//! After every channel has been used once, beliefs live on the four sides of
//! the rectangle [λ₀,λ₁]². The grid places N+1 uniform nodes per side and
//! dedups the four shared corners, giving 4N states. Successor beliefs under
//! any action land back on the border: Balanced hits the four corners
//! exactly, betting hits a side at the off-grid coordinate T(q), which is
//! folded into the two adjacent nodes by linear interpolation. The folded
//! rows double as the MDP transition matrix and the LP coefficients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, Belief, ModelParams, BELIEF_EQ_TOL};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("n_cells = {0} is below the minimum of 2")]
    TooFewCells(usize),
}

/// The four sides of the border rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeId {
    /// p₂ = λ₀, p₁ varies.
    Bottom,
    /// p₂ = λ₁, p₁ varies.
    Top,
    /// p₁ = λ₀, p₂ varies.
    Left,
    /// p₁ = λ₁, p₂ varies.
    Right,
}

impl EdgeId {
    pub const ALL: [EdgeId; 4] = [EdgeId::Bottom, EdgeId::Top, EdgeId::Left, EdgeId::Right];

    /// The edge mapped onto by the swap (p₁,p₂) ↔ (p₂,p₁).
    pub fn mirrored(self) -> EdgeId {
        match self {
            EdgeId::Bottom => EdgeId::Left,
            EdgeId::Left => EdgeId::Bottom,
            EdgeId::Top => EdgeId::Right,
            EdgeId::Right => EdgeId::Top,
        }
    }
}

impl std::fmt::Display for EdgeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EdgeId::Bottom => write!(f, "bottom"),
            EdgeId::Top => write!(f, "top"),
            EdgeId::Left => write!(f, "left"),
            EdgeId::Right => write!(f, "right"),
        }
    }
}

/// A grid state: its owning edge, the node index along that edge, and the
/// belief coordinates.
#[derive(Debug, Clone, Copy)]
pub struct GridState {
    pub edge: EdgeId,
    pub node: usize,
    pub belief: Belief,
}

/// One (state, action) row: expected immediate reward plus the successor
/// distribution folded with interpolation weights. Entries are sorted by
/// state index with duplicates merged; weights are non-negative and sum to 1.
#[derive(Debug, Clone)]
pub struct TransitionRow {
    pub reward: f64,
    pub entries: Vec<(usize, f64)>,
}

/// Uniform discretization of the border set with canonical state indexing.
///
/// Indexing is edge-major, node-minor: bottom owns nodes 0..=N (including
/// both bottom corners), top owns the two top corners likewise, and the
/// left/right edges contribute interior nodes only. Degenerate parameter
/// sets with λ₁ − λ₀ ≤ 1e-9 collapse to a single state.
#[derive(Debug, Clone)]
pub struct BorderGrid {
    params: ModelParams,
    n_cells: usize,
    nodes: Vec<f64>,
    states: Vec<GridState>,
    rows: Vec<[TransitionRow; 3]>,
}

impl BorderGrid {
    pub fn new(params: ModelParams, n_cells: usize) -> Result<Self, GridError> {
        if n_cells < 2 {
            return Err(GridError::TooFewCells(n_cells));
        }
        let l0 = params.lambda0();
        let l1 = params.lambda1();
        let degenerate = l1 - l0 <= BELIEF_EQ_TOL;

        let (nodes, states) = if degenerate {
            let b = Belief { p1: l0, p2: l0 };
            (
                vec![l0],
                vec![GridState {
                    edge: EdgeId::Bottom,
                    node: 0,
                    belief: b,
                }],
            )
        } else {
            let n = n_cells;
            let h = (l1 - l0) / n as f64;
            let nodes: Vec<f64> = (0..=n)
                .map(|i| if i == n { l1 } else { l0 + i as f64 * h })
                .collect();
            let mut states = Vec::with_capacity(4 * n);
            for (i, &q) in nodes.iter().enumerate() {
                states.push(GridState {
                    edge: EdgeId::Bottom,
                    node: i,
                    belief: Belief { p1: q, p2: l0 },
                });
            }
            for (i, &q) in nodes.iter().enumerate() {
                states.push(GridState {
                    edge: EdgeId::Top,
                    node: i,
                    belief: Belief { p1: q, p2: l1 },
                });
            }
            for (i, &q) in nodes.iter().enumerate().take(n).skip(1) {
                states.push(GridState {
                    edge: EdgeId::Left,
                    node: i,
                    belief: Belief { p1: l0, p2: q },
                });
            }
            for (i, &q) in nodes.iter().enumerate().take(n).skip(1) {
                states.push(GridState {
                    edge: EdgeId::Right,
                    node: i,
                    belief: Belief { p1: l1, p2: q },
                });
            }
            (nodes, states)
        };

        let mut grid = Self {
            params,
            n_cells,
            nodes,
            states,
            rows: Vec::new(),
        };
        grid.rows = (0..grid.states.len())
            .map(|s| {
                let b = grid.states[s].belief;
                [
                    grid.build_row(b, Action::Balanced),
                    grid.build_row(b, Action::Bet1),
                    grid.build_row(b, Action::Bet2),
                ]
            })
            .collect();
        Ok(grid)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Node coordinates q₀ = λ₀ < … < q_N = λ₁ (a single node when degenerate).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[GridState] {
        &self.states
    }

    pub fn is_degenerate(&self) -> bool {
        self.states.len() == 1
    }

    /// Grid spacing (λ₁−λ₀)/N; zero for the degenerate grid.
    pub fn spacing(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (self.params.lambda1() - self.params.lambda0()) / self.n_cells as f64
        }
    }

    /// State index of node `i` on `edge`; corners resolve to their owning
    /// bottom/top index.
    pub fn state_index(&self, edge: EdgeId, i: usize) -> usize {
        if self.is_degenerate() {
            return 0;
        }
        let n = self.n_cells;
        debug_assert!(i <= n);
        match edge {
            EdgeId::Bottom => i,
            EdgeId::Top => n + 1 + i,
            EdgeId::Left => match i {
                0 => self.state_index(EdgeId::Bottom, 0),
                _ if i == n => self.state_index(EdgeId::Top, 0),
                _ => 2 * (n + 1) + (i - 1),
            },
            EdgeId::Right => match i {
                0 => self.state_index(EdgeId::Bottom, n),
                _ if i == n => self.state_index(EdgeId::Top, n),
                _ => 2 * (n + 1) + (n - 1) + (i - 1),
            },
        }
    }

    /// State indices along an edge in node order (corners included).
    pub fn edge_states(&self, edge: EdgeId) -> Vec<usize> {
        if self.is_degenerate() {
            return vec![0];
        }
        (0..=self.n_cells)
            .map(|i| self.state_index(edge, i))
            .collect()
    }

    /// Corner state indices in the order (λ₀,λ₀), (λ₁,λ₀), (λ₀,λ₁), (λ₁,λ₁).
    pub fn corner_indices(&self) -> [usize; 4] {
        [
            self.state_index(EdgeId::Bottom, 0),
            self.state_index(EdgeId::Bottom, self.n_cells),
            self.state_index(EdgeId::Top, 0),
            self.state_index(EdgeId::Top, self.n_cells),
        ]
    }

    /// Index of the mirror state under (p₁,p₂) ↔ (p₂,p₁).
    pub fn mirror_index(&self, s: usize) -> usize {
        let st = &self.states[s];
        self.state_index(st.edge.mirrored(), st.node)
    }

    /// Linear interpolation stencil for an off-grid coordinate y ∈ [λ₀, λ₁]:
    /// at most two (node, weight) pairs with weights summing to 1.
    pub fn interp(&self, y: f64) -> [(usize, f64); 2] {
        if self.is_degenerate() {
            return [(0, 1.0), (0, 0.0)];
        }
        let l0 = self.params.lambda0();
        let h = self.spacing();
        let t = ((y - l0) / h).clamp(0.0, self.n_cells as f64);
        let j = (t.floor() as usize).min(self.n_cells - 1);
        let w = (t - j as f64).clamp(0.0, 1.0);
        [(j, 1.0 - w), (j + 1, w)]
    }

    /// Interpolated value along `edge` at coordinate `y`, reading from a
    /// per-state value table.
    pub fn edge_value(&self, edge: EdgeId, y: f64, values: &[f64]) -> f64 {
        self.interp(y)
            .iter()
            .map(|&(j, w)| w * values[self.state_index(edge, j)])
            .sum()
    }

    /// The folded transition row for state `s` under action `a`.
    pub fn row(&self, s: usize, a: Action) -> &TransitionRow {
        &self.rows[s][a.index()]
    }

    fn build_row(&self, b: Belief, a: Action) -> TransitionRow {
        let p = &self.params;
        let reward = crate::model::expected_reward(b, a, p);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(4);
        let mut push = |idx: usize, w: f64| {
            if w > 0.0 {
                entries.push((idx, w));
            }
        };
        match a {
            Action::Balanced => {
                let [ll, hl, lh, hh] = self.corner_indices();
                push(ll, (1.0 - b.p1) * (1.0 - b.p2));
                push(hl, b.p1 * (1.0 - b.p2));
                push(lh, (1.0 - b.p1) * b.p2);
                push(hh, b.p1 * b.p2);
            }
            Action::Bet1 => {
                let t2 = p.tau(b.p2);
                for (j, w) in self.interp(t2) {
                    push(self.state_index(EdgeId::Left, j), (1.0 - b.p1) * w);
                }
                for (j, w) in self.interp(t2) {
                    push(self.state_index(EdgeId::Right, j), b.p1 * w);
                }
            }
            Action::Bet2 => {
                let t1 = p.tau(b.p1);
                for (j, w) in self.interp(t1) {
                    push(self.state_index(EdgeId::Bottom, j), (1.0 - b.p2) * w);
                }
                for (j, w) in self.interp(t1) {
                    push(self.state_index(EdgeId::Top, j), b.p2 * w);
                }
            }
        }
        entries.sort_by_key(|&(idx, _)| idx);
        entries.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        TransitionRow { reward, entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn reference_params() -> ModelParams {
        ModelParams::new(0.1, 0.9, 2.0, 3.0, 0.9).unwrap()
    }

    #[test]
    fn four_cell_grid_layout() {
        let g = BorderGrid::new(reference_params(), 4).unwrap();
        for (got, want) in g.nodes().iter().zip([0.1, 0.3, 0.5, 0.7, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(g.n_states(), 16);
        // uniform spacing within 1e-12
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn corners_appear_exactly_once() {
        let g = BorderGrid::new(reference_params(), 8).unwrap();
        let corners = g.corner_indices();
        // every corner reachable from both adjacent edges resolves to one index
        assert_eq!(g.state_index(EdgeId::Left, 0), corners[0]);
        assert_eq!(g.state_index(EdgeId::Right, 0), corners[1]);
        assert_eq!(g.state_index(EdgeId::Left, 8), corners[2]);
        assert_eq!(g.state_index(EdgeId::Right, 8), corners[3]);
        let mut seen = std::collections::HashSet::new();
        for s in g.states() {
            let key = (
                (s.belief.p1 * 1e12).round() as i64,
                (s.belief.p2 * 1e12).round() as i64,
            );
            assert!(seen.insert(key), "duplicate state at {:?}", s.belief);
        }
    }

    #[test]
    fn rejects_single_cell() {
        assert_eq!(
            BorderGrid::new(reference_params(), 1).unwrap_err(),
            GridError::TooFewCells(1)
        );
    }

    #[test]
    fn degenerate_interval_collapses_to_one_state() {
        let p = ModelParams::new(0.5, 0.5, 2.0, 3.0, 0.9).unwrap();
        let g = BorderGrid::new(p, 16).unwrap();
        assert_eq!(g.n_states(), 1);
        assert!(g.is_degenerate());
        let row = g.row(0, Action::Balanced);
        let total: f64 = row.entries.iter().map(|e| e.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_example() {
        // T(0.3) = 0.34 on nodes {0.1, 0.3, 0.5, 0.7, 0.9}: weight 0.8 on
        // node 0.3 and 0.2 on node 0.5.
        let g = BorderGrid::new(reference_params(), 4).unwrap();
        let [(j0, w0), (j1, w1)] = g.interp(0.34);
        assert_eq!((j0, j1), (1, 2));
        assert!((w0 - 0.8).abs() < 1e-12);
        assert!((w1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn interpolation_exact_on_nodes() {
        let g = BorderGrid::new(reference_params(), 4).unwrap();
        let [(j0, w0), (_, w1)] = g.interp(0.5);
        assert_eq!(j0, 2);
        assert!((w0 - 1.0).abs() < 1e-12);
        assert!(w1.abs() < 1e-12);
    }

    #[test]
    fn rows_are_stochastic_everywhere() {
        for (l0, l1) in [(0.1, 0.9), (0.0, 1.0), (0.3, 0.4)] {
            let p = ModelParams::new(l0, l1, 2.0, 3.0, 0.9).unwrap();
            let g = BorderGrid::new(p, 7).unwrap();
            for s in 0..g.n_states() {
                for a in Action::ALL {
                    let row = g.row(s, a);
                    let total: f64 = row.entries.iter().map(|e| e.1).sum();
                    assert!(
                        (total - 1.0).abs() < 1e-12,
                        "row sum {total} at state {s} action {a}"
                    );
                    assert!(row.entries.iter().all(|e| e.1 >= 0.0));
                    assert!(row.entries.windows(2).all(|w| w[0].0 < w[1].0));
                }
            }
        }
    }

    #[test]
    fn rows_match_kernel_expectations() {
        // the folded row's reward must equal the kernel's probability-weighted
        // bits, and its mass per successor edge must match the kernel branch
        let p = reference_params();
        let g = BorderGrid::new(p, 8).unwrap();
        for s in [0usize, 3, 9, 20, 30] {
            let b = g.states()[s].belief;
            for a in Action::ALL {
                let row = g.row(s, a);
                let kernel = crate::model::transition_kernel(b, a, &p);
                let bits: f64 = kernel.iter().map(|o| o.probability * o.immediate_bits).sum();
                assert!((row.reward - bits).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mirror_index_roundtrip() {
        let g = BorderGrid::new(reference_params(), 6).unwrap();
        for s in 0..g.n_states() {
            let m = g.mirror_index(s);
            assert_eq!(g.mirror_index(m), s);
            let b = g.states()[s].belief;
            let bm = g.states()[m].belief;
            assert!((b.p1 - bm.p2).abs() < 1e-12 && (b.p2 - bm.p1).abs() < 1e-12);
        }
    }
}
