//! Exact evaluation of the distributionally robust certificate `J(u)` for a
//! fixed speed profile.
//!
//! With the 1-norm transport cost and the box support `Z(u) = prod [0, c_e]`,
//! `c_e = rho^c_e(u_e)`, the dual function
//!
//! ```text
//! F(lambda) = -lambda * eps + (1/N) sum_{l,e,t} min_{rho in [0,c_e]} lambda |rho - r| + a_e rho
//! ```
//!
//! is concave and piecewise linear with kinks only at `0` and the weights
//! `a_e = u_e / T`, so the supremum is attained at one of those breakpoints
//! unless `F` keeps increasing, in which case the ambiguity set is empty.

use crate::error::{Error, Result};
use crate::network::{HighwayScenario, SpeedProfile};
use crate::sampling::{Trajectory, TrajectoryBatch};

/// Gradient of `H(u; .)` in the densities: `a_e = u_e / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub weights: Vec<f64>,
}

impl ObjectiveSpec {
    pub fn new(speeds: &[f64], horizon: usize) -> Self {
        let inv_t = 1.0 / horizon as f64;
        Self {
            weights: speeds.iter().map(|u| u * inv_t).collect(),
        }
    }
}

/// `H(u; rho) = (1/T) sum_{e,t} u_e rho_e(t)`.
pub fn objective_h(speeds: &[f64], traj: &Trajectory) -> f64 {
    let sum: f64 = speeds
        .iter()
        .enumerate()
        .map(|(e, u)| u * traj.edge(e).iter().sum::<f64>())
        .sum();
    sum / traj.horizon() as f64
}

/// Mean of `H` over a batch.
pub fn sample_average_h(batch: &TrajectoryBatch) -> f64 {
    let sum: f64 = batch
        .trajectories
        .iter()
        .map(|tr| objective_h(&batch.speeds, tr))
        .sum();
    sum / batch.len() as f64
}

/// `min_{rho in [0, c]} lambda |rho - r| + a rho`, evaluated at `0` and at
/// `clamp(r, 0, c)`.
pub fn inner_inf_component(a: f64, c: f64, r: f64, lambda: f64) -> f64 {
    let p = r.clamp(0.0, c);
    let at_zero = lambda * r.abs();
    let at_p = lambda * (p - r).abs() + a * p;
    at_zero.min(at_p)
}

/// 1-norm distance from `r` to `[0, c]`.
fn dist_to_box(r: f64, c: f64) -> f64 {
    if r < 0.0 {
        -r
    } else if r > c {
        r - c
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateStatus {
    Finite,
    /// The Wasserstein ball contains no distribution supported on `Z(u)`.
    InvalidEmptyAmbiguity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult {
    /// `J(u)`, or `-inf` when the status is invalid.
    pub value: f64,
    pub lambda_star: f64,
    pub status: CertificateStatus,
    /// `(lambda, F(lambda))` at every breakpoint, ascending in `lambda`.
    pub breakpoints: Vec<(f64, f64)>,
    /// Slope of `F` beyond the last breakpoint.
    pub asymptotic_slope: f64,
}

impl CertificateResult {
    pub fn is_finite(&self) -> bool {
        self.status == CertificateStatus::Finite
    }
}

/// Certificate of the profile `u` given its sample trajectories.
pub fn certificate(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    batch: &TrajectoryBatch,
    epsilon: f64,
) -> Result<CertificateResult> {
    if batch.speeds.as_slice() != u.speeds() {
        return Err(Error::Dimension(
            "trajectories were generated under a different profile".into(),
        ));
    }
    let caps: Vec<f64> = u
        .speeds()
        .iter()
        .zip(scenario.segments())
        .map(|(&v, seg)| seg.critical_density(v))
        .collect();
    let spec = ObjectiveSpec::new(u.speeds(), scenario.horizon());
    certificate_with(&spec.weights, &caps, &batch.trajectories, epsilon)
}

/// Certificate for explicit weights `a_e` and box caps `c_e`.
pub fn certificate_with(
    weights: &[f64],
    caps: &[f64],
    trajectories: &[Trajectory],
    epsilon: f64,
) -> Result<CertificateResult> {
    let n = weights.len();
    if caps.len() != n || trajectories.iter().any(|t| t.n() != n) {
        return Err(Error::Dimension("weights, caps and trajectories disagree on n".into()));
    }
    if trajectories.is_empty() {
        return Err(Error::invalid("samples", "at least one trajectory required"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
    }
    let inv_n = 1.0 / trajectories.len() as f64;

    let mut lambdas: Vec<f64> = std::iter::once(0.0).chain(weights.iter().copied()).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();

    let f = |lambda: f64| -> f64 {
        let mut acc = 0.0;
        for tr in trajectories {
            for e in 0..n {
                for &r in tr.edge(e) {
                    acc += inner_inf_component(weights[e], caps[e], r, lambda);
                }
            }
        }
        -lambda * epsilon + inv_n * acc
    };

    let mut dist = 0.0;
    for tr in trajectories {
        for e in 0..n {
            dist += tr.edge(e).iter().map(|&r| dist_to_box(r, caps[e])).sum::<f64>();
        }
    }
    let asymptotic_slope = -epsilon + inv_n * dist;

    let breakpoints: Vec<(f64, f64)> = lambdas.iter().map(|&l| (l, f(l))).collect();
    if asymptotic_slope > 0.0 {
        return Ok(CertificateResult {
            value: f64::NEG_INFINITY,
            lambda_star: f64::INFINITY,
            status: CertificateStatus::InvalidEmptyAmbiguity,
            breakpoints,
            asymptotic_slope,
        });
    }
    let (mut lambda_star, mut value) = breakpoints[0];
    for &(l, v) in &breakpoints[1..] {
        // smallest lambda wins ties, up to rounding
        if v > value + 1e-12 * value.abs().max(1.0) {
            lambda_star = l;
            value = v;
        }
    }
    Ok(CertificateResult {
        value,
        lambda_star,
        status: CertificateStatus::Finite,
        breakpoints,
        asymptotic_slope,
    })
}
