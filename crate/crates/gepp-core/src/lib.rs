//! Solver and analysis library for optimal power allocation over two
//! identical Gilbert-Elliott channels.
//!
//! The decision problem: each slot, split the power budget across two
//! two-state Markov channels or bet it all on one, to maximize expected
//! discounted bits when channel states are only revealed on use. Beliefs
//! reduce the problem to an MDP on [0,1]²; after one use of each channel
//! the reachable beliefs form the border of [λ₀,λ₁]².
//!
//! Modules:
//! - [`model`]: parameters, beliefs, actions, single-step dynamics
//! - [`grid`]: border discretization and folded transition rows
//! - [`solver`]: value iteration, policy iteration, belief queries
//! - [`lp`]: the equivalent linear program, its text export, and
//!   optimality verification
//! - [`policy`]: greedy policy extraction, threshold scans, structure checks
//! - [`closed_form`]: corner-difference threshold formulas and their
//!   four-case dispatch
//! - [`sim`]: Monte Carlo rollouts with belief tracking and paired
//!   policy comparison

pub mod closed_form;
pub mod grid;
pub mod lp;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;

pub use closed_form::{
    compute_closed_forms, compute_delta_table, rho1_closed_form, rho2_closed_form,
    ClosedFormResult, ClosedFormThreshold, Corner, DeltaTable,
};
pub use grid::{BorderGrid, EdgeId, GridError};
pub use lp::{build_lp, export_lp, parse_lp, verify_solution, LpError, LpInstance,
    LpVerificationReport, Verdict};
pub use model::{
    expected_reward, transition_kernel, Action, Belief, ModelError, ModelParams, RawModelParams,
    TransitionOutcome,
};
pub use policy::{
    check_structure, extract_policy, refine_thresholds, scan_thresholds, square_policy_map,
    PolicyMap, PolicyStructure, SquarePolicyMap, StructureReport, ThresholdReport,
};
pub use sim::{
    compare_policies, rollout_policy, trace_csv, trace_episode, FixedActionPolicy,
    GreedyValuePolicy, InitialStateSampling, MyopicPolicy, PolicyComparison, PolicyRule,
    RolloutResult, SimConfig, SimError,
};
pub use solver::{
    query_value, solve_policy_iteration, solve_value_iteration, ActionValues, BorderValueFunction,
    SolveError, SolverKind,
};
