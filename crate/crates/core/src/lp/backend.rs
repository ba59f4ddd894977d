use std::time::{Duration, Instant};

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOptions, TerminationReason};

use super::{LpModel, LpSolution, LpStatus, MilpModel, MilpOptions, MilpResult, MilpStatus, RowSense};
use crate::error::{Error, Result};

/// Rows violated by more than this (after dividing by their largest
/// coefficient) are reported as a numerical failure.
const RESIDUAL_LIMIT: f64 = 1e-5;
const SCALING_PASSES: usize = 6;

fn pow2(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return 1.0;
    }
    2f64.powi(x.log2().round() as i32)
}

/// Presolved and scaled copy of a model, ready for the engine.
struct Prepared {
    lower: Vec<f64>,
    upper: Vec<f64>,
    // x_original = col_scale * x_scaled
    col_scale: Vec<f64>,
    obj_scale: f64,
    rows: Vec<(Vec<(usize, f64)>, RowSense, f64)>,
}

enum Presolve {
    Ready(Prepared),
    Infeasible,
}

fn prepare(model: &LpModel, binary: &[bool]) -> Presolve {
    let n = model.num_vars();
    let mut lower = model.lower.clone();
    let mut upper = model.upper.clone();
    let mut rows: Vec<(Vec<(usize, f64)>, RowSense, f64)> = Vec::with_capacity(model.num_rows());

    for r in model.rows() {
        match r.terms.as_slice() {
            [] => {
                let ok = match r.sense {
                    RowSense::Le => 0.0 <= r.rhs,
                    RowSense::Ge => 0.0 >= r.rhs,
                    RowSense::Eq => r.rhs == 0.0,
                };
                if !ok {
                    return Presolve::Infeasible;
                }
            }
            [(v, c)] if !binary[v.0] => {
                let j = v.0;
                let b = r.rhs / c;
                let (tighten_upper, tighten_lower) = match (r.sense, *c > 0.0) {
                    (RowSense::Eq, _) => (true, true),
                    (RowSense::Le, true) | (RowSense::Ge, false) => (true, false),
                    (RowSense::Le, false) | (RowSense::Ge, true) => (false, true),
                };
                if tighten_upper {
                    upper[j] = upper[j].min(b);
                }
                if tighten_lower {
                    lower[j] = lower[j].max(b);
                }
            }
            terms => rows.push((terms.iter().map(|&(v, c)| (v.0, c)).collect(), r.sense, r.rhs)),
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            let tol = 1e-9 * lower[j].abs().max(upper[j].abs()).max(1.0);
            if lower[j] - upper[j] > tol {
                return Presolve::Infeasible;
            }
            upper[j] = lower[j];
        }
    }

    // geometric-mean equilibration, binaries keep unit column scale
    let mut row_scale = vec![1.0; rows.len()];
    let mut col_scale = vec![1.0; n];
    for _ in 0..SCALING_PASSES {
        for (i, (terms, _, _)) in rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, c) in terms {
                let a = (c * col_scale[j]).abs();
                lo = lo.min(a);
                hi = hi.max(a);
            }
            row_scale[i] = pow2(1.0 / (lo * hi).sqrt());
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (i, (terms, _, _)) in rows.iter().enumerate() {
            for &(j, c) in terms {
                let a = (c * row_scale[i]).abs();
                lo[j] = lo[j].min(a);
                hi[j] = hi[j].max(a);
            }
        }
        for j in 0..n {
            if !binary[j] && hi[j] > 0.0 {
                col_scale[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
            }
        }
    }
    for (i, (terms, _, rhs)) in rows.iter_mut().enumerate() {
        let mut big = 0.0f64;
        for (j, c) in terms.iter_mut() {
            *c *= row_scale[i] * col_scale[*j];
            big = big.max(c.abs());
        }
        let fix = pow2(1.0 / big);
        // keep the largest entry at most 1 after rounding to a power of two
        let fix = if big * fix > 1.0 { fix * 0.5 } else { fix };
        for (_, c) in terms.iter_mut() {
            *c *= fix;
        }
        *rhs *= row_scale[i] * fix;
    }
    for j in 0..n {
        lower[j] /= col_scale[j];
        upper[j] /= col_scale[j];
    }
    let big_obj = model
        .objective
        .iter()
        .zip(&col_scale)
        .map(|(c, s)| (c * s).abs())
        .fold(0.0, f64::max);
    let obj_scale = if big_obj > 0.0 { pow2(1.0 / big_obj) } else { 1.0 };

    Presolve::Ready(Prepared {
        lower,
        upper,
        col_scale,
        obj_scale,
        rows,
    })
}

fn build_problem(model: &LpModel, binary: &[bool], prep: &Prepared) -> (Problem, Vec<microlp::Variable>) {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..model.num_vars())
        .map(|j| {
            let c = model.objective[j] * prep.col_scale[j] * prep.obj_scale;
            if binary[j] {
                let lo = prep.lower[j].max(0.0).ceil() as i32;
                let hi = prep.upper[j].min(1.0).floor() as i32;
                p.add_integer_var(c, (lo, hi))
            } else {
                p.add_var(c, (prep.lower[j], prep.upper[j]))
            }
        })
        .collect();
    for (terms, sense, rhs) in &prep.rows {
        let expr: Vec<(microlp::Variable, f64)> = terms.iter().map(|&(j, c)| (vars[j], c)).collect();
        let op = match sense {
            RowSense::Le => ComparisonOp::Le,
            RowSense::Eq => ComparisonOp::Eq,
            RowSense::Ge => ComparisonOp::Ge,
        };
        p.add_constraint(expr.as_slice(), op, *rhs);
    }
    (p, vars)
}

fn unscale(sol: &microlp::Solution, vars: &[microlp::Variable], prep: &Prepared, binary: &[bool]) -> Vec<f64> {
    vars.iter()
        .enumerate()
        .map(|(j, &v)| {
            let raw = sol.var_value_raw(v);
            if binary[j] {
                raw.round()
            } else {
                raw * prep.col_scale[j]
            }
        })
        .collect()
}

fn check_residual(model: &LpModel, x: &[f64]) -> Result<f64> {
    let viol = model.max_violation(x);
    if viol > RESIDUAL_LIMIT {
        return Err(Error::Numerical(format!(
            "solution violates the model by {viol:.3e}"
        )));
    }
    if viol > 1e-7 {
        log::debug!("solution residual {viol:.3e}");
    }
    Ok(viol)
}

fn engine_error(e: microlp::Error) -> Error {
    Error::Numerical(format!("LP engine: {e}"))
}

/// Solves `model` to optimality or proves it infeasible or unbounded.
pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    model.validate()?;
    let binary = vec![false; model.num_vars()];
    let prep = match prepare(model, &binary) {
        Presolve::Ready(p) => p,
        Presolve::Infeasible => return Ok(infeasible_lp(model)),
    };
    let (problem, vars) = build_problem(model, &binary, &prep);
    match problem.solve() {
        Ok(outcome) => {
            let sol = outcome
                .into_solution()
                .map_err(|_| Error::Numerical("LP solve interrupted".into()))?;
            let values = unscale(&sol, &vars, &prep, &binary);
            let max_violation = check_residual(model, &values)?;
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective: model.objective_value(&values),
                values,
                max_violation,
            })
        }
        Err(microlp::Error::Infeasible) => Ok(infeasible_lp(model)),
        Err(microlp::Error::Unbounded) => Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            values: Vec::new(),
            max_violation: 0.0,
        }),
        Err(e) => Err(engine_error(e)),
    }
}

fn infeasible_lp(_model: &LpModel) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        objective: f64::NEG_INFINITY,
        values: Vec::new(),
        max_violation: 0.0,
    }
}

/// Branch and bound over the binary columns of `model`.
pub fn solve_milp(model: &MilpModel, opts: &MilpOptions) -> Result<MilpResult> {
    model.validate()?;
    let started = Instant::now();
    let lp = &model.lp;
    let prep = match prepare(lp, &model.binary) {
        Presolve::Ready(p) => p,
        Presolve::Infeasible => return Ok(empty_result(MilpStatus::Infeasible, f64::NEG_INFINITY, started)),
    };
    let (problem, vars) = build_problem(lp, &model.binary, &prep);
    let mut options = SolveOptions::default();
    options.mip_gap = opts.gap_tol.max(0.0);
    options.time_limit = opts.time_limit.map(|d| d.max(Duration::from_millis(1)));
    options.node_limit = opts.node_limit;

    let outcome = match problem.solve_with(options) {
        Ok(o) => o,
        Err(microlp::Error::Infeasible) => {
            return Ok(empty_result(MilpStatus::Infeasible, f64::NEG_INFINITY, started))
        }
        Err(microlp::Error::Unbounded) => {
            return Ok(empty_result(MilpStatus::Unbounded, f64::INFINITY, started))
        }
        Err(e) => return Err(engine_error(e)),
    };
    let to_user = |b: Option<f64>| b.map_or(f64::INFINITY, |b| b / prep.obj_scale);
    match outcome.into_solution() {
        Ok(sol) => {
            let stats = sol.stats();
            let values = unscale(&sol, &vars, &prep, &model.binary);
            let max_violation = check_residual(lp, &values)?;
            let objective = lp.objective_value(&values);
            let status = match sol.termination_reason() {
                TerminationReason::ProvenOptimal | TerminationReason::MipGap => MilpStatus::Optimal,
                _ => MilpStatus::Feasible,
            };
            let best_bound = if sol.termination_reason() == TerminationReason::ProvenOptimal {
                objective
            } else {
                to_user(stats.best_bound).max(objective)
            };
            Ok(MilpResult {
                status,
                objective,
                values,
                best_bound,
                nodes: stats.nodes_solved + 1,
                lp_iterations: stats.lp_iterations,
                elapsed: started.elapsed(),
                max_violation,
            })
        }
        Err(interrupted) => {
            let stats = interrupted.stats();
            let mut r = empty_result(MilpStatus::NoIncumbent, f64::NEG_INFINITY, started);
            r.best_bound = to_user(stats.best_bound);
            r.nodes = stats.nodes_solved + 1;
            r.lp_iterations = stats.lp_iterations;
            Ok(r)
        }
    }
}

fn empty_result(status: MilpStatus, bound: f64, started: Instant) -> MilpResult {
    MilpResult {
        status,
        objective: f64::NEG_INFINITY,
        values: Vec::new(),
        best_bound: bound,
        nodes: 0,
        lp_iterations: 0,
        elapsed: started.elapsed(),
        max_violation: 0.0,
    }
}
