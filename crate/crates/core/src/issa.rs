//! Integer solution search: alternate the upper-bounding MILP (McCormick
//! relaxation plus canonical cuts) with the exact certificate LP of the
//! candidate it proposes, until the bounds meet, the binary space is
//! exhausted, or the wall-clock budget runs out.

use std::time::{Duration, Instant};

use crate::certificate::certificate;
use crate::error::{Error, Result};
use crate::lp::{solve_milp, MilpOptions, MilpStatus};
use crate::network::{HighwayScenario, SpeedProfile};
use crate::reformulation::{
    build_p4_constraints, build_ubp, solve_lbp, BuildOptions, IntegerCutPool, ModelStats, P4System,
};
use crate::sampling::{propagate_batch, SampleSet};

/// Agreement demanded between the LP value and the closed-form certificate.
pub const LBP_CROSSCHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct IssaOptions {
    /// Relative gap `(UB - LB) / max(1, |UB|)` at which the search stops.
    pub gap_eps: f64,
    /// Wall-clock budget. Once spent, the search stops as soon as some
    /// candidate has a finite certificate.
    pub time_limit: Option<Duration>,
    pub build: BuildOptions,
    /// Relative gap handed to each upper-bounding MILP.
    pub milp_gap: f64,
}

impl Default for IssaOptions {
    fn default() -> Self {
        Self {
            gap_eps: 1e-4,
            time_limit: None,
            build: BuildOptions::default(),
            milp_gap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub grid_indices: Vec<usize>,
    pub speeds: Vec<f64>,
    /// Bound returned by this iteration's MILP (its optimum, or its best
    /// bound when it stopped early).
    pub ubp_bound: f64,
    pub ub: f64,
    /// Certificate of the candidate, `-inf` when the ambiguity set is empty.
    pub obj: f64,
    pub lb: f64,
    pub milp_nodes: u64,
    /// Seconds since the start of the run.
    pub wall: f64,
    /// Some `eta` sat at its artificial upper bound in the MILP solution.
    pub eta_at_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Gap,
    UbpInfeasible,
    TimeLimit,
    /// A solver failure cut the run short; the log up to that point is kept.
    NumericalFailure(String),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Gap => "gap",
            Termination::UbpInfeasible => "ubp_infeasible",
            Termination::TimeLimit => "time_limit",
            Termination::NumericalFailure(_) => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Candidate with the largest certificate, if any was finite.
    pub u_best: Option<SpeedProfile>,
    pub j_hat: f64,
    pub log: Vec<IterationRecord>,
    pub termination: Termination,
    pub ub: f64,
    pub lb: f64,
    pub elapsed: Duration,
    pub ubp_stats: ModelStats,
}

impl SolveReport {
    pub fn relative_gap(&self) -> f64 {
        relative_gap(self.ub, self.lb)
    }

    /// Candidates whose certificate was `-inf`.
    pub fn discarded(&self) -> usize {
        self.log.iter().filter(|r| !r.obj.is_finite()).count()
    }
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    if ub == lb {
        return 0.0;
    }
    if !ub.is_finite() || !lb.is_finite() {
        return f64::INFINITY;
    }
    (ub - lb) / ub.abs().max(1.0)
}

/// Runs the search on `scenario` with the training `samples`.
pub fn run(scenario: &HighwayScenario, samples: &SampleSet, opts: &IssaOptions) -> Result<SolveReport> {
    samples.check_against(scenario)?;
    if !(opts.gap_eps >= 0.0) {
        return Err(Error::invalid("gap", "must be nonnegative"));
    }
    let started = Instant::now();
    let base = build_p4_constraints(scenario, samples, &opts.build)?;
    let ubp_stats = ModelStats::of(&build_ubp(&base, &IntegerCutPool::new()).model);
    log::info!(
        "UBP: {} rows, {} columns ({} binary), {} nonzeros",
        ubp_stats.rows,
        ubp_stats.cols,
        ubp_stats.binaries,
        ubp_stats.nonzeros
    );

    let mut pool = IntegerCutPool::new();
    let mut log_rows: Vec<IterationRecord> = Vec::new();
    let mut best: Option<(SpeedProfile, f64)> = None;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);

    let termination = loop {
        let k = log_rows.len() + 1;
        let remaining = opts.time_limit.map(|t| t.saturating_sub(started.elapsed()));
        if remaining == Some(Duration::ZERO) && lb.is_finite() {
            break Termination::TimeLimit;
        }
        // with nothing certified yet the search keeps going past the budget
        let milp_limit = remaining.filter(|r| !r.is_zero() || lb.is_finite());
        let ubp = build_ubp(&base, &pool);
        let milp = match solve_milp(
            &ubp.model,
            &MilpOptions {
                gap_tol: opts.milp_gap,
                time_limit: milp_limit,
                node_limit: None,
            },
        ) {
            Ok(r) => r,
            Err(e) => break Termination::NumericalFailure(e.to_string()),
        };
        match milp.status {
            MilpStatus::Infeasible => {
                ub = ub.min(lb);
                break Termination::UbpInfeasible;
            }
            MilpStatus::Unbounded => {
                break Termination::NumericalFailure("upper-bounding MILP is unbounded".into())
            }
            MilpStatus::NoIncumbent => {
                ub = ub.min(milp.best_bound.max(lb));
                if lb.is_finite() {
                    break Termination::TimeLimit;
                }
                continue;
            }
            MilpStatus::Optimal | MilpStatus::Feasible => {}
        }
        ub = ub.min(milp.best_bound.max(lb));

        let idx = base.layout.decode(&milp.values);
        if pool.contains(&idx) {
            break Termination::NumericalFailure(format!("candidate {idx:?} repeated despite its cut"));
        }
        let eta_at_bound = eta_hits_bound(&base, &milp.values);
        let step = evaluate_candidate(scenario, samples, &idx);
        let (u, obj) = match step {
            Ok(v) => v,
            Err(e) => break Termination::NumericalFailure(e.to_string()),
        };
        pool.add(idx.clone());
        if obj > lb {
            lb = obj;
            best = Some((u.clone(), obj));
        }
        let record = IterationRecord {
            k,
            grid_indices: idx,
            speeds: u.speeds().to_vec(),
            ubp_bound: milp.best_bound,
            ub,
            obj,
            lb,
            milp_nodes: milp.nodes,
            wall: started.elapsed().as_secs_f64(),
            eta_at_bound,
        };
        log::info!(
            "k={k} u={:?} UB={:.6e} obj={:.6e} LB={:.6e} nodes={} t={:.2}s",
            record.speeds,
            ub,
            obj,
            lb,
            milp.nodes,
            record.wall
        );
        // invalid candidates push eta to its cap by construction
        if eta_at_bound && obj.is_finite() {
            log::warn!("k={k}: eta reached its upper bound {:.3e}; the bound may be binding", base.eta_bar);
        }
        log_rows.push(record);
        if relative_gap(ub, lb) <= opts.gap_eps {
            break Termination::Gap;
        }
    };

    let (u_best, j_hat) = match best {
        Some((u, j)) => (Some(u), j),
        None => (None, f64::NEG_INFINITY),
    };
    Ok(SolveReport {
        u_best,
        j_hat,
        log: log_rows,
        termination,
        ub,
        lb,
        elapsed: started.elapsed(),
        ubp_stats,
    })
}

/// Certificate of one candidate through the LP, checked against the
/// closed form.
fn evaluate_candidate(scenario: &HighwayScenario, samples: &SampleSet, idx: &[usize]) -> Result<(SpeedProfile, f64)> {
    let u = SpeedProfile::from_indices(scenario, idx)?;
    let batch = propagate_batch(scenario, &u, samples)?;
    let eps = scenario.epsilon();
    let (lp_value, _) = solve_lbp(scenario, &u, &batch, eps)?;
    let closed = certificate(scenario, &u, &batch, eps)?;
    let agree = if closed.is_finite() {
        (lp_value - closed.value).abs() <= LBP_CROSSCHECK_TOL * closed.value.abs().max(1.0)
    } else {
        lp_value == f64::NEG_INFINITY
    };
    if !agree {
        return Err(Error::Numerical(format!(
            "LBP value {lp_value:.9e} disagrees with certificate {:.9e} at u = {:?}",
            closed.value,
            u.speeds()
        )));
    }
    Ok((u, lp_value))
}

fn eta_hits_bound(base: &P4System, values: &[f64]) -> bool {
    let tol = 1e-6 * base.eta_bar.max(1.0);
    base.layout.eta.iter().any(|v| values[v.0] >= base.eta_bar - tol)
}
