//! Independent checks of the solver: exhaustive enumeration, a dense
//! lambda-grid certificate, a demand/supply cell transmission simulator and
//! Monte-Carlo out-of-sample validation.

use crate::certificate::{certificate, inner_inf_component, objective_h};
use crate::error::{Error, Result};
use crate::network::{HighwayScenario, SpeedProfile};
use crate::sampling::{
    generate_samples, propagate, propagate_batch, DisturbanceSample, GeneratorSpec, SampleSet, Trajectory,
};

/// Largest number of profiles [`brute_force_optimum`] will enumerate by default.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000;

/// Added to the training seed to obtain the validation stream.
pub const VALIDATION_SEED_OFFSET: u64 = 0x5EED_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub u_star: SpeedProfile,
    pub j_star: f64,
    pub evaluated: usize,
    /// Profiles whose certificate was `-inf`.
    pub invalid: usize,
}

/// Every admissible profile in lexicographic order of grid indices.
pub fn enumerate_profiles(scenario: &HighwayScenario) -> Vec<Vec<usize>> {
    let bands = scenario.bands();
    let mut out = Vec::new();
    let mut cur: Vec<usize> = bands.iter().map(|b| *b.indices.start()).collect();
    loop {
        out.push(cur.clone());
        let mut e = bands.len();
        loop {
            if e == 0 {
                return out;
            }
            e -= 1;
            if cur[e] < *bands[e].indices.end() {
                cur[e] += 1;
                break;
            }
            cur[e] = *bands[e].indices.start();
        }
    }
}

/// Maximizes the certificate over all admissible profiles.
/// Ties go to the lexicographically smallest profile.
pub fn brute_force_optimum(scenario: &HighwayScenario, samples: &SampleSet, cap: u128) -> Result<BruteForceResult> {
    samples.check_against(scenario)?;
    let count = scenario.profile_count();
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let mut best: Option<(SpeedProfile, f64)> = None;
    let (mut evaluated, mut invalid) = (0, 0);
    for idx in enumerate_profiles(scenario) {
        let u = SpeedProfile::from_indices(scenario, &idx)?;
        let batch = propagate_batch(scenario, &u, samples)?;
        let cert = certificate(scenario, &u, &batch, scenario.epsilon())?;
        evaluated += 1;
        if !cert.is_finite() {
            invalid += 1;
            continue;
        }
        if best.as_ref().is_none_or(|(_, j)| cert.value > *j) {
            best = Some((u, cert.value));
        }
    }
    let (u_star, j_star) = best.ok_or(Error::NoValidProfile)?;
    Ok(BruteForceResult {
        u_star,
        j_star,
        evaluated,
        invalid,
    })
}

/// `max F(lambda)` over `lambda = 0, step, 2 step, ...` up to `lambda_max`.
pub fn certificate_grid_oracle(
    weights: &[f64],
    caps: &[f64],
    trajectories: &[Trajectory],
    epsilon: f64,
    lambda_max: f64,
    step: f64,
) -> f64 {
    let inv_n = 1.0 / trajectories.len() as f64;
    // flatten (a, c, r) once; the grid loop dominates
    let mut terms = Vec::new();
    for tr in trajectories {
        for (e, (&a, &c)) in weights.iter().zip(caps).enumerate() {
            terms.extend(tr.edge(e).iter().map(|&r| (a, c, r)));
        }
    }
    let steps = (lambda_max / step).ceil() as u64;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=steps {
        let lambda = k as f64 * step;
        let sum: f64 = terms.iter().map(|&(a, c, r)| inner_inf_component(a, c, r, lambda)).sum();
        best = best.max(-lambda * epsilon + inv_n * sum);
    }
    best
}

/// One CTM run over `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmRun {
    pub speeds: Vec<f64>,
    pub trajectory: Trajectory,
    /// Per step: accepted boundary arrivals, accepted sinks and the exit flow
    /// of the last cell, all in veh/h.
    pub arrivals: Vec<f64>,
    pub departures: Vec<f64>,
    pub exit_flow: Vec<f64>,
    /// Largest per-step mismatch of the vehicle balance, relative to the
    /// total density.
    pub conservation_error: f64,
}

/// Simulates the demand/supply cell transmission model from `sample` under
/// fixed per-edge speeds. Mainline flows are `min(demand_e, supply_{e+1})`.
/// Positive disturbances are ramp arrivals capped by the receiving cell's
/// supply and by the room left below `rho^U`; negative ones are departures
/// limited by the vehicles present.
pub fn simulate_ctm(scenario: &HighwayScenario, speeds: &[f64], sample: &DisturbanceSample, horizon: usize) -> Result<CtmRun> {
    let n = scenario.n();
    if speeds.len() != n || sample.n() != n {
        return Err(Error::Dimension("speeds or sample size differs from scenario".into()));
    }
    if sample.steps() < horizon {
        return Err(Error::Dimension(format!(
            "sample covers {} steps, simulation needs {horizon}",
            sample.steps()
        )));
    }
    let h = scenario.h();
    let segs = scenario.segments();
    let mut rho: Vec<f64> = sample
        .rho0
        .iter()
        .zip(segs)
        .map(|(&r, s)| r.clamp(0.0, s.rho_incident()))
        .collect();
    let mut run = CtmRun {
        speeds: speeds.to_vec(),
        trajectory: Trajectory::zeros(n, horizon),
        arrivals: Vec::with_capacity(horizon),
        departures: Vec::with_capacity(horizon),
        exit_flow: Vec::with_capacity(horizon),
        conservation_error: 0.0,
    };
    let mut q = vec![0.0; n];
    let mut next = vec![0.0; n];
    for t in 0..horizon {
        let demand: Vec<f64> = (0..n)
            .map(|e| (speeds[e] * rho[e]).min(segs[e].f_incident()).min(rho[e] / h))
            .collect();
        let supply: Vec<f64> = (0..n)
            .map(|e| {
                let s = &segs[e];
                let room = s.rho_incident() - rho[e];
                (s.tau() * s.u_bar() * room).min(s.f_incident()).min(room / h).max(0.0)
            })
            .collect();
        for e in 0..n {
            q[e] = if e + 1 < n { demand[e].min(supply[e + 1]) } else { demand[e] };
        }
        let (mut arr, mut dep) = (0.0, 0.0);
        for e in 0..n {
            let inflow = if e == 0 { 0.0 } else { q[e - 1] };
            let w = sample.omega[e][t];
            let (a, d) = if w >= 0.0 {
                // ramps merge against the cell supply, not the mainline's leftover
                let room = (segs[e].rho_incident() - rho[e]) / h - inflow + q[e];
                (w.min(supply[e]).min(room.max(0.0)), 0.0)
            } else {
                (0.0, (-w).min((rho[e] / h - q[e]).max(0.0)))
            };
            arr += a;
            dep += d;
            next[e] = (rho[e] + h * (inflow - q[e] + a - d)).clamp(0.0, segs[e].rho_incident());
        }
        let before: f64 = rho.iter().sum();
        let after: f64 = next.iter().sum();
        let mismatch = (after - before - h * (arr - dep - q[n - 1])).abs() / before.max(after).max(1.0);
        run.conservation_error = run.conservation_error.max(mismatch);
        std::mem::swap(&mut rho, &mut next);
        for (e, &v) in rho.iter().enumerate() {
            run.trajectory.set(e, t + 1, v);
        }
        run.arrivals.push(arr);
        run.departures.push(dep);
        run.exit_flow.push(q[n - 1]);
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationConfig {
    pub n_val: usize,
    /// Horizon of the CTM density runs; `H` is always compared over `T`.
    pub horizon_val: usize,
    pub seed: u64,
}

impl ValidationConfig {
    /// Validation stream derived from a training seed.
    pub fn from_training_seed(n_val: usize, horizon_val: usize, training_seed: u64) -> Self {
        Self {
            n_val,
            horizon_val,
            seed: training_seed.wrapping_add(VALIDATION_SEED_OFFSET),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub n_val: usize,
    pub horizon_val: usize,
    pub seed: Option<u64>,
    pub j_hat: f64,
    /// `H(u; rho)` of every validation sample under the linear dynamics.
    pub h_values: Vec<f64>,
    pub mean_h: f64,
    /// `mean_h >= j_hat`.
    pub guarantee_holds: bool,
    /// CTM mean density `[e][t-1]`, `t = 1..=T_val`.
    pub mean_density: Vec<Vec<f64>>,
    /// Largest CTM density per edge over samples and time.
    pub max_density: Vec<f64>,
    /// `rho^c_e(u_e)`.
    pub critical_density: Vec<f64>,
    pub max_conservation_error: f64,
}

impl ValidationReport {
    /// Largest mean density of edge `e` over `t = 1..=up_to`.
    pub fn peak_mean_density(&self, e: usize, up_to: usize) -> f64 {
        self.mean_density[e][..up_to.min(self.horizon_val)]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Draws fresh samples and validates `u` against them.
pub fn validate(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    j_hat: f64,
    generator: &GeneratorSpec,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    if cfg.n_val == 0 {
        return Err(Error::invalid("n_val", "at least one validation sample required"));
    }
    let steps = scenario.horizon().max(cfg.horizon_val);
    let fresh = generate_samples(generator, cfg.n_val, steps, cfg.seed)?;
    let mut report = validate_with_samples(scenario, u, j_hat, &fresh, cfg.horizon_val)?;
    report.seed = Some(cfg.seed);
    Ok(report)
}

/// Validation against given samples.
pub fn validate_with_samples(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    j_hat: f64,
    samples: &SampleSet,
    horizon_val: usize,
) -> Result<ValidationReport> {
    samples.check_against(scenario)?;
    if horizon_val == 0 {
        return Err(Error::invalid("T_val", "must be at least 1"));
    }
    let n = scenario.n();
    let mut h_values = Vec::with_capacity(samples.len());
    let mut mean_density = vec![vec![0.0; horizon_val]; n];
    let mut max_density = vec![f64::NEG_INFINITY; n];
    let mut max_conservation_error: f64 = 0.0;
    for s in samples.samples() {
        let tr = propagate(scenario, u, s)?;
        h_values.push(objective_h(u.speeds(), &tr));
        let run = simulate_ctm(scenario, u.speeds(), s, horizon_val)?;
        max_conservation_error = max_conservation_error.max(run.conservation_error);
        for e in 0..n {
            for (t, &v) in run.trajectory.edge(e).iter().enumerate() {
                mean_density[e][t] += v;
                max_density[e] = max_density[e].max(v);
            }
        }
    }
    let inv = 1.0 / samples.len() as f64;
    mean_density.iter_mut().flatten().for_each(|v| *v *= inv);
    let mean_h = h_values.iter().sum::<f64>() * inv;
    let critical_density = u
        .speeds()
        .iter()
        .zip(scenario.segments())
        .map(|(&v, s)| s.critical_density(v))
        .collect();
    Ok(ValidationReport {
        n_val: samples.len(),
        horizon_val,
        seed: None,
        j_hat,
        h_values,
        mean_h,
        guarantee_holds: mean_h >= j_hat,
        mean_density,
        max_density,
        critical_density,
        max_conservation_error,
    })
}

#[cfg(test)]
mod tests;
