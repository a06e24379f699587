//! The six subcommands: solve, policy, sweep, simulate, export-lp, verify.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use gepp_core::lp::LpVerificationReport;
use gepp_core::policy::{PolicyStructure, StructureReport, ThresholdReport};
use gepp_core::sim::{PolicyComparison, RolloutResult};
use gepp_core::*;

use crate::config::{RunConfig, SweepParameter};
use crate::output::OutputDir;
use crate::CliError;

/// Bisection tolerance for threshold refinement.
const REFINE_TOL: f64 = 1e-6;

fn solve_vi(config: &RunConfig) -> Result<BorderValueFunction, CliError> {
    let params = config.model_params()?;
    let grid = BorderGrid::new(params, config.grid_n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    solve_value_iteration(grid, config.tol).map_err(|e| CliError::Convergence(e.to_string()))
}

fn solve_pi(config: &RunConfig) -> Result<BorderValueFunction, CliError> {
    let params = config.model_params()?;
    let grid = BorderGrid::new(params, config.grid_n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    solve_policy_iteration(grid, config.tol).map_err(|e| CliError::Convergence(e.to_string()))
}

fn sup_diff(a: &BorderValueFunction, b: &BorderValueFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Serialize)]
struct SolverStats {
    iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    grid_n: usize,
    n_states: usize,
    tolerance: f64,
    value_iteration: SolverStats,
    policy_iteration: SolverStats,
    solver_agreement_sup_norm: f64,
    lp: LpVerificationReport,
}

/// Runs both solvers, certifies the LP conditions, and writes the border
/// values plus a full-square value surface.
pub fn cmd_solve(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    let vi = solve_vi(config)?;
    let pi = solve_pi(config)?;
    let lp = build_lp(vi.grid());
    let lp_report =
        verify_solution(&lp, &pi, 1e-6).map_err(|e| CliError::Io(e.to_string()))?;
    let summary = SolveSummary {
        grid_n: config.grid_n,
        n_states: vi.grid().n_states(),
        tolerance: config.tol,
        value_iteration: SolverStats {
            iterations: vi.iterations(),
            residual: vi.residual(),
        },
        policy_iteration: SolverStats {
            iterations: pi.iterations(),
            residual: pi.residual(),
        },
        solver_agreement_sup_norm: sup_diff(&vi, &pi),
        lp: lp_report,
    };
    out.write("values.csv", &vi.to_csv())?;
    out.write(
        "surface.csv",
        &square_policy_map(&vi, config.square_m).to_surface_csv(),
    )?;
    out.write_json("summary.json", &summary)?;
    out.finish("solve", config)?;
    Ok(())
}

#[derive(Serialize)]
struct AgreementStats {
    rho1: Option<f64>,
    rho2: Option<f64>,
}

#[derive(Serialize)]
struct ThresholdSummary {
    scan: ThresholdReport,
    closed_form: ClosedFormResult,
    /// |closed form − refined scan| per threshold.
    agreement: AgreementStats,
    structure_checks: StructureReport,
    tie_breaks: usize,
}

fn threshold_summary(vf: &BorderValueFunction, tie_tol: f64) -> ThresholdSummary {
    let policy = extract_policy(vf, tie_tol);
    let scan = scan_thresholds(&policy);
    let refined = refine_thresholds(vf, &scan, REFINE_TOL);
    let cf = compute_closed_forms(vf, &refined);
    let agreement = AgreementStats {
        rho1: match (cf.rho1.value, refined.rho1_refined) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            _ => None,
        },
        rho2: match (cf.rho2.value, refined.rho2_refined) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            _ => None,
        },
    };
    let structure_checks = check_structure(&policy, tie_tol);
    ThresholdSummary {
        scan: refined,
        closed_form: cf,
        agreement,
        structure_checks,
        tie_breaks: policy.tie_breaks(),
    }
}

/// Extracts the greedy policy, scans and refines the thresholds, evaluates
/// the closed forms, and writes region data for the border and the square.
pub fn cmd_policy(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    let vf = solve_vi(config)?;
    let policy = extract_policy(&vf, config.tie_tol);
    let summary = threshold_summary(&vf, config.tie_tol);
    out.write("policy_border.csv", &policy.to_csv())?;
    out.write(
        "policy_square.csv",
        &square_policy_map(&vf, config.square_m).to_policy_csv(),
    )?;
    out.write_json("threshold.json", &summary)?;
    out.finish("policy", config)?;
    if summary.scan.structure == PolicyStructure::Anomalous {
        return Err(CliError::Anomaly(summary.scan.anomalies.join("; ")));
    }
    if !summary.structure_checks.all_passed {
        let failing: Vec<&str> = summary
            .structure_checks
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect();
        return Err(CliError::Anomaly(format!(
            "structure checks failed: {}",
            failing.join(", ")
        )));
    }
    Ok(())
}

struct MemberOutcome {
    value: f64,
    raw: RawModelParams,
    status: &'static str,
    detail: String,
    summary: Option<ThresholdSummary>,
}

fn run_member(config: &RunConfig, parameter: SweepParameter, value: f64) -> MemberOutcome {
    let mut raw = config.params;
    match parameter {
        SweepParameter::Lambda0 => raw.lambda0 = value,
        SweepParameter::Lambda1 => raw.lambda1 = value,
        SweepParameter::RLow => raw.r_low = value,
        SweepParameter::RHigh => raw.r_high = value,
        SweepParameter::Beta => raw.beta = value,
        SweepParameter::RhOverRl => raw.r_high = value * raw.r_low,
    }
    let params = match ModelParams::try_from(raw) {
        Ok(p) => p,
        Err(e) => {
            return MemberOutcome {
                value,
                raw,
                status: "invalid-params",
                detail: e.to_string(),
                summary: None,
            }
        }
    };
    let grid = match BorderGrid::new(params, config.grid_n) {
        Ok(g) => g,
        Err(e) => {
            return MemberOutcome {
                value,
                raw,
                status: "invalid-params",
                detail: e.to_string(),
                summary: None,
            }
        }
    };
    match solve_value_iteration(grid, config.tol) {
        Ok(vf) => MemberOutcome {
            value,
            raw,
            status: "ok",
            detail: String::new(),
            summary: Some(threshold_summary(&vf, config.tie_tol)),
        },
        Err(e) => MemberOutcome {
            value,
            raw,
            status: "convergence-failure",
            detail: e.to_string(),
            summary: None,
        },
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_opt_u8(x: Option<u8>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Solves every sweep member (in parallel), scans and closed-forms each,
/// and writes one long-format CSV row per member in input order.
pub fn cmd_sweep(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep section missing from config".into()))?
        .clone();
    let mut out = OutputDir::create(out_dir)?;

    let outcomes: Vec<MemberOutcome> = sweep
        .values
        .par_iter()
        .map(|&v| run_member(config, sweep.parameter, v))
        .collect();

    let mut csv = String::from(
        "sweep_parameter,sweep_value,lambda0,lambda1,r_low,r_high,beta,grid_n,status,\
         structure,rho1_scan,rho2_scan,rho1_refined,rho2_refined,\
         rho1_normalized,rho2_normalized,rho1_cf,rho1_case,rho1_self_consistent,\
         rho2_cf,rho2_case,rho2_self_consistent,rho1_agreement,rho2_agreement,detail\n",
    );
    for o in &outcomes {
        let (structure, s) = match &o.summary {
            Some(s) => (s.scan.structure.to_string(), Some(s)),
            None => (String::new(), None),
        };
        let scan = s.map(|s| &s.scan);
        let cf = s.map(|s| &s.closed_form);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            sweep.parameter,
            o.value,
            o.raw.lambda0,
            o.raw.lambda1,
            o.raw.r_low,
            o.raw.r_high,
            o.raw.beta,
            config.grid_n,
            o.status,
            structure,
            csv_opt(scan.and_then(|r| r.rho1_scan)),
            csv_opt(scan.and_then(|r| r.rho2_scan)),
            csv_opt(scan.and_then(|r| r.rho1_refined)),
            csv_opt(scan.and_then(|r| r.rho2_refined)),
            csv_opt(scan.and_then(|r| r.rho1_normalized())),
            csv_opt(scan.and_then(|r| r.rho2_normalized())),
            csv_opt(cf.and_then(|c| c.rho1.value)),
            csv_opt_u8(cf.and_then(|c| c.rho1.case)),
            cf.map(|c| c.rho1.self_consistent.to_string())
                .unwrap_or_default(),
            csv_opt(cf.and_then(|c| c.rho2.value)),
            csv_opt_u8(cf.and_then(|c| c.rho2.case)),
            cf.map(|c| c.rho2.self_consistent.to_string())
                .unwrap_or_default(),
            csv_opt(s.and_then(|s| s.agreement.rho1)),
            csv_opt(s.and_then(|s| s.agreement.rho2)),
            o.detail,
        ));
    }
    out.write("sweep.csv", &csv)?;
    out.finish("sweep", config)?;

    if let Some(o) = outcomes
        .iter()
        .find(|o| o.status == "convergence-failure")
    {
        return Err(CliError::Convergence(format!(
            "sweep member {} = {}: {}",
            sweep.parameter, o.value, o.detail
        )));
    }
    if let Some(o) = outcomes.iter().find(|o| {
        o.summary
            .as_ref()
            .is_some_and(|s| s.scan.structure == PolicyStructure::Anomalous)
    }) {
        return Err(CliError::Anomaly(format!(
            "sweep member {} = {} is anomalous",
            sweep.parameter, o.value
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateSummary {
    policies: Vec<String>,
    results: Vec<RolloutResult>,
    comparison: Option<PolicyComparison>,
}

/// Rolls out the configured policies on common random numbers.
pub fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let spec = config
        .sim
        .as_ref()
        .ok_or_else(|| CliError::Config("sim section missing from config".into()))?;
    let params = config.model_params()?;
    let sim_cfg = spec.to_core(&params, config.seed)?;
    let mut out = OutputDir::create(out_dir)?;

    let needs_values = spec.policies.iter().any(|p| p == "optimal");
    let vf = if needs_values {
        Some(solve_vi(config)?)
    } else {
        None
    };
    let mut rules: Vec<Box<dyn PolicyRule>> = Vec::new();
    for name in &spec.policies {
        let rule: Box<dyn PolicyRule> = match name.as_str() {
            "optimal" => Box::new(GreedyValuePolicy {
                values: vf.as_ref().expect("values solved above"),
            }),
            "myopic" => Box::new(MyopicPolicy { params }),
            "always-balanced" => Box::new(FixedActionPolicy::new(Action::Balanced)),
            "always-bet1" => Box::new(FixedActionPolicy::new(Action::Bet1)),
            "always-bet2" => Box::new(FixedActionPolicy::new(Action::Bet2)),
            other => {
                return Err(CliError::Config(format!(
                    "unknown policy '{other}' (expected optimal, myopic, always-balanced, always-bet1, always-bet2)"
                )))
            }
        };
        rules.push(rule);
    }

    let results: Vec<RolloutResult> = rules
        .iter()
        .map(|r| rollout_policy(r.as_ref(), &sim_cfg, &params))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let comparison = if rules.len() >= 2 {
        let refs: Vec<&dyn PolicyRule> = rules.iter().map(|r| r.as_ref()).collect();
        let cmp = compare_policies(&refs, &sim_cfg, &params)
            .map_err(|e| CliError::Config(e.to_string()))?;
        out.write("comparison.csv", &cmp.to_csv())?;
        Some(cmp)
    } else {
        None
    };

    for (rule, _) in rules.iter().zip(&results) {
        for ep in 0..spec.trace_episodes as u64 {
            let rows = trace_episode(rule.as_ref(), &sim_cfg, &params, ep);
            out.write(&format!("trace_{}_{ep}.csv", rule.name()), &trace_csv(&rows))?;
        }
    }

    let summary = SimulateSummary {
        policies: spec.policies.clone(),
        results,
        comparison,
    };
    out.write_json("simulate.json", &summary)?;
    out.finish("simulate", config)?;
    Ok(())
}

/// Writes the canonical LP text artifact.
pub fn cmd_export_lp(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let params = config.model_params()?;
    let grid = BorderGrid::new(params, config.grid_n)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let lp = build_lp(&grid);
    let mut buf = Vec::new();
    export_lp(&lp, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    let text = String::from_utf8(buf).expect("LP text is ASCII");
    let mut out = OutputDir::create(out_dir)?;
    out.write("problem.lp", &text)?;
    out.finish("export-lp", config)?;
    Ok(())
}

#[derive(Serialize)]
struct VerifySummary {
    solver_agreement_sup_norm: f64,
    lp_value_iteration: LpVerificationReport,
    lp_policy_iteration: LpVerificationReport,
    structure: PolicyStructure,
    structure_checks: StructureReport,
}

/// Solves with both solvers and checks every certificate: LP feasibility
/// and tightness for each, cross-solver agreement, and policy structure.
pub fn cmd_verify(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    config.validate()?;
    let mut out = OutputDir::create(out_dir)?;
    let vi = solve_vi(config)?;
    let pi = solve_pi(config)?;
    let lp = build_lp(vi.grid());
    let lp_vi = verify_solution(&lp, &vi, 1e-6).map_err(|e| CliError::Io(e.to_string()))?;
    let lp_pi = verify_solution(&lp, &pi, 1e-6).map_err(|e| CliError::Io(e.to_string()))?;
    let policy = extract_policy(&pi, config.tie_tol);
    let scan = scan_thresholds(&policy);
    let checks = check_structure(&policy, config.tie_tol);
    let summary = VerifySummary {
        solver_agreement_sup_norm: sup_diff(&vi, &pi),
        lp_value_iteration: lp_vi,
        lp_policy_iteration: lp_pi,
        structure: scan.structure,
        structure_checks: checks,
    };
    out.write_json("verify.json", &summary)?;
    out.finish("verify", config)?;
    let anomalous = summary.structure == PolicyStructure::Anomalous
        || !summary.structure_checks.all_passed;
    let lp_failed = summary.lp_value_iteration.verdict == Verdict::Fail
        || summary.lp_policy_iteration.verdict == Verdict::Fail;
    if lp_failed {
        return Err(CliError::Convergence(
            "LP verification failed on a solved value function".into(),
        ));
    }
    if anomalous {
        return Err(CliError::Anomaly("structure verification failed".into()));
    }
    Ok(())
}
