//! Chain-of-cells highway: triangular fundamental diagrams, critical
//! densities and the admissible speed-limit band of every segment.
//!
//! Units are fixed crate-wide: densities in veh/km, speeds in km/h, flows in
//! veh/h and times in hours.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};

/// Physical parameters of one road segment (one edge of the chain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    f_bar: f64,
    rho_bar: f64,
    u_bar: f64,
    f_incident: f64,
    rho_incident: f64,
}

impl SegmentParams {
    /// Validates `0 < f_incident <= f_bar`, `0 < rho_incident <= rho_bar`,
    /// `u_bar > 0` and `u_bar * rho_bar > f_bar`.
    pub fn new(
        f_bar: f64,
        rho_bar: f64,
        u_bar: f64,
        f_incident: f64,
        rho_incident: f64,
    ) -> Result<Self> {
        let all = [f_bar, rho_bar, u_bar, f_incident, rho_incident];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("segment", "parameters must be finite"));
        }
        if u_bar <= 0.0 {
            return Err(Error::invalid("u_bar", "must be positive"));
        }
        if f_bar <= 0.0 || rho_bar <= 0.0 {
            return Err(Error::invalid("f_bar/rho_bar", "must be positive"));
        }
        if !(f_incident > 0.0 && f_incident <= f_bar) {
            return Err(Error::invalid("f_U", "must satisfy 0 < f_U <= f_bar"));
        }
        if !(rho_incident > 0.0 && rho_incident <= rho_bar) {
            return Err(Error::invalid("rho_U", "must satisfy 0 < rho_U <= rho_bar"));
        }
        if u_bar * rho_bar <= f_bar {
            return Err(Error::DegenerateDiagram {
                product: u_bar * rho_bar,
                f_bar,
            });
        }
        Ok(Self {
            f_bar,
            rho_bar,
            u_bar,
            f_incident,
            rho_incident,
        })
    }

    /// A segment without incident: `f_U = f_bar`, `rho_U = rho_bar`.
    pub fn nominal(f_bar: f64, rho_bar: f64, u_bar: f64) -> Result<Self> {
        Self::new(f_bar, rho_bar, u_bar, f_bar, rho_bar)
    }

    pub fn f_bar(&self) -> f64 {
        self.f_bar
    }
    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }
    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }
    pub fn f_incident(&self) -> f64 {
        self.f_incident
    }
    pub fn rho_incident(&self) -> f64 {
        self.rho_incident
    }

    /// Congested-branch slope ratio `f_bar / (u_bar rho_bar - f_bar)`.
    pub fn tau(&self) -> f64 {
        self.f_bar / (self.u_bar * self.rho_bar - self.f_bar)
    }

    /// Density at which the diagram for speed limit `u` peaks.
    ///
    /// Strictly decreasing in `u`; equals `f_bar / u_bar` at `u = u_bar`.
    pub fn critical_density(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0, "speed limit must be positive");
        let tau = self.tau();
        tau * self.rho_bar * self.u_bar / (tau * self.u_bar + u)
    }

    /// Free-flow critical density `f_bar / u_bar`.
    pub fn free_flow_critical_density(&self) -> f64 {
        self.f_bar / self.u_bar
    }

    /// Coefficient `f_bar + u (rho_bar - f_bar/u_bar)` that scales the dual
    /// variable of the box support. Equals `f_bar rho_bar / rho_c(u)`.
    pub fn dual_box_coefficient(&self, u: f64) -> f64 {
        self.f_bar + u * (self.rho_bar - self.free_flow_critical_density())
    }

    /// Triangular fundamental diagram under speed limit `u`.
    pub fn allowable_flow(&self, rho: f64, u: f64) -> Result<f64> {
        if !(0.0..=self.rho_bar).contains(&rho) {
            return Err(Error::invalid(
                "rho",
                format!("density {rho} outside [0, {}]", self.rho_bar),
            ));
        }
        if !(u > 0.0 && u <= self.u_bar) {
            return Err(Error::invalid(
                "u",
                format!("speed {u} outside (0, {}]", self.u_bar),
            ));
        }
        if rho <= self.critical_density(u) {
            Ok(u * rho)
        } else {
            Ok(self.tau() * self.u_bar * (self.rho_bar - rho))
        }
    }

    /// Whether the speed `u` keeps the capacity product under the incident
    /// capacity and the critical density `pi` below the incident jam density.
    pub fn is_admissible(&self, u: f64, pi: f64) -> bool {
        let rc = self.critical_density(u);
        rc * u <= self.f_incident && rc <= self.rho_incident - pi
    }
}

/// Contiguous run of grid indices admissible for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleBand {
    /// Indices into the speed grid, inclusive.
    pub indices: RangeInclusive<usize>,
    /// `u^L`, the smallest admissible speed.
    pub u_lo: f64,
    /// `u^U`, the largest admissible speed.
    pub u_hi: f64,
}

impl AdmissibleBand {
    pub fn len(&self) -> usize {
        self.indices.end() + 1 - self.indices.start()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_index(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }
}

/// Enumerates the grid and returns the admissible band of `seg`.
///
/// The capacity product `rho_c(g) g` increases with `g` while `rho_c(g)`
/// decreases, so the admissible speeds form one contiguous run of the grid.
pub fn admissible_speed_set(
    seg: &SegmentParams,
    gamma: &[f64],
    pi: f64,
    edge: usize,
) -> Result<AdmissibleBand> {
    if gamma.is_empty() {
        return Err(Error::invalid("gamma", "speed grid is empty"));
    }
    let ok: Vec<usize> = (0..gamma.len())
        .filter(|&i| seg.is_admissible(gamma[i], pi))
        .collect();
    let (Some(&lo), Some(&hi)) = (ok.first(), ok.last()) else {
        return Err(Error::NoAdmissibleSpeed { edge });
    };
    debug_assert_eq!(hi - lo + 1, ok.len(), "admissible set must be contiguous");
    Ok(AdmissibleBand {
        indices: lo..=hi,
        u_lo: gamma[lo],
        u_hi: gamma[hi],
    })
}

/// Validated static description of the highway and the robust-design inputs.
#[derive(Debug, Clone)]
pub struct HighwayScenario {
    length_km: f64,
    delta_h: f64,
    horizon: usize,
    h: f64,
    segments: Vec<SegmentParams>,
    gamma: Vec<f64>,
    pi: f64,
    eta_bar: f64,
    epsilon: f64,
    beta: f64,
    bands: Vec<AdmissibleBand>,
}

/// Inputs of [`HighwayScenario::new`]; `pi` and `eta_bar` fall back to
/// defaults when `None`.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub length_km: f64,
    pub delta_s: f64,
    pub horizon: usize,
    pub segments: Vec<SegmentParams>,
    pub gamma: Vec<f64>,
    pub pi: Option<f64>,
    pub eta_bar: Option<f64>,
    pub epsilon: f64,
    pub beta: f64,
}

/// Default jam-density margin (veh/km).
pub const DEFAULT_PI: f64 = 1.0;

impl HighwayScenario {
    pub fn new(p: ScenarioParams) -> Result<Self> {
        let n = p.segments.len();
        if n == 0 {
            return Err(Error::invalid("segments", "at least one segment required"));
        }
        if !(p.length_km > 0.0 && p.length_km.is_finite()) {
            return Err(Error::invalid("L_km", "must be positive"));
        }
        if !(p.delta_s > 0.0 && p.delta_s.is_finite()) {
            return Err(Error::invalid("delta_s", "must be positive"));
        }
        if p.horizon == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        if p.gamma.is_empty() {
            return Err(Error::invalid("gamma", "speed grid is empty"));
        }
        for (i, &g) in p.gamma.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(format!("gamma[{i}]"), "speeds must be positive"));
            }
            if i > 0 && g <= p.gamma[i - 1] {
                return Err(Error::invalid(
                    format!("gamma[{i}]"),
                    "grid must be strictly increasing",
                ));
            }
        }
        let pi = p.pi.unwrap_or(DEFAULT_PI);
        if !(pi > 0.0 && pi.is_finite()) {
            return Err(Error::invalid("pi", "must be positive"));
        }
        if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
        }
        if !(p.beta > 0.0 && p.beta < 1.0) {
            return Err(Error::invalid("beta", "must lie in (0, 1)"));
        }
        let delta_h = p.delta_s / 3600.0;
        let h = n as f64 * delta_h / p.length_km;
        let u_max = p.segments.iter().map(|s| s.u_bar).fold(0.0, f64::max);
        // tolerate float noise when h sits exactly on the bound
        if h * u_max > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "delta_s",
                format!("h = n*delta/L = {h} exceeds 1/max(u_bar) = {}", 1.0 / u_max),
            ));
        }
        let eta_bar = match p.eta_bar {
            Some(v) if v > 0.0 && v.is_finite() => v,
            Some(_) => return Err(Error::invalid("eta_bar", "must be positive")),
            None => default_eta_bar(&p.segments, &p.gamma, p.horizon),
        };
        let bands = p
            .segments
            .iter()
            .enumerate()
            .map(|(e, s)| admissible_speed_set(s, &p.gamma, pi, e + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            length_km: p.length_km,
            delta_h,
            horizon: p.horizon,
            h,
            segments: p.segments,
            gamma: p.gamma,
            pi,
            eta_bar,
            epsilon: p.epsilon,
            beta: p.beta,
            bands,
        })
    }

    /// Number of segments `n`.
    pub fn n(&self) -> usize {
        self.segments.len()
    }
    /// Number of time slots `T`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    /// Discretisation ratio `n delta / L` (h/km).
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn length_km(&self) -> f64 {
        self.length_km
    }
    pub fn delta_hours(&self) -> f64 {
        self.delta_h
    }
    pub fn segments(&self) -> &[SegmentParams] {
        &self.segments
    }
    pub fn segment(&self, e: usize) -> &SegmentParams {
        &self.segments[e]
    }
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
    pub fn pi(&self) -> f64 {
        self.pi
    }
    pub fn eta_bar(&self) -> f64 {
        self.eta_bar
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn bands(&self) -> &[AdmissibleBand] {
        &self.bands
    }
    pub fn band(&self, e: usize) -> &AdmissibleBand {
        &self.bands[e]
    }

    /// Same scenario with a different Wasserstein radius.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
        }
        let mut s = self.clone();
        s.epsilon = epsilon;
        Ok(s)
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        let mut s = self.clone();
        s.horizon = horizon;
        Ok(s)
    }

    /// Number of admissible speed profiles, `prod_e |band_e|`.
    pub fn profile_count(&self) -> u128 {
        self.bands.iter().map(|b| b.len() as u128).product()
    }

    /// Largest `u_bar` over the segments.
    pub fn max_u_bar(&self) -> f64 {
        self.segments.iter().map(|s| s.u_bar).fold(0.0, f64::max)
    }
}

/// Twice the largest dual `eta` an optimal certificate can need.
///
/// The certificate maximizer sits at a breakpoint `lambda <= max u / T`, and
/// there `eta = max(0, nu - u_e/T) / K_e(u_e)` with `|nu| <= lambda`. `K_e`
/// grows with `u`, so `max gamma / (T * min_e K_e(gamma_1))` covers every
/// admissible profile.
pub fn default_eta_bar(segments: &[SegmentParams], gamma: &[f64], horizon: usize) -> f64 {
    let g_max = gamma.iter().copied().fold(0.0, f64::max);
    let g_min = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let k_min = segments
        .iter()
        .map(|s| s.dual_box_coefficient(g_min))
        .fold(f64::INFINITY, f64::min);
    2.0 * g_max / (horizon as f64 * k_min)
}

/// A speed limit per segment, each drawn from the scenario grid and inside
/// its admissible band.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedProfile {
    speeds: Vec<f64>,
    grid_indices: Vec<usize>,
}

impl SpeedProfile {
    /// Builds a profile from grid indices (0-based), checking the bands.
    pub fn from_indices(scenario: &HighwayScenario, indices: &[usize]) -> Result<Self> {
        if indices.len() != scenario.n() {
            return Err(Error::Dimension(format!(
                "profile has {} entries, scenario has {} segments",
                indices.len(),
                scenario.n()
            )));
        }
        for (e, &i) in indices.iter().enumerate() {
            if !scenario.band(e).contains_index(i) {
                return Err(Error::invalid(
                    format!("u[{}]", e + 1),
                    format!(
                        "grid index {i} outside admissible band {:?}",
                        scenario.band(e).indices
                    ),
                ));
            }
        }
        Ok(Self {
            speeds: indices.iter().map(|&i| scenario.gamma()[i]).collect(),
            grid_indices: indices.to_vec(),
        })
    }

    /// Builds a profile from speeds in km/h; each must be an exact grid value.
    pub fn from_speeds(scenario: &HighwayScenario, speeds: &[f64]) -> Result<Self> {
        let indices = speeds
            .iter()
            .enumerate()
            .map(|(e, &u)| {
                scenario
                    .gamma()
                    .iter()
                    .position(|&g| (g - u).abs() <= 1e-9 * g.max(1.0))
                    .ok_or_else(|| {
                        Error::invalid(format!("u[{}]", e + 1), format!("{u} is not in the grid"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_indices(scenario, &indices)
    }

    /// `u_e = u_bar_e` for every segment. Not necessarily on the grid; only
    /// meant for the uncontrolled comparison run.
    pub fn uncontrolled(scenario: &HighwayScenario) -> Vec<f64> {
        scenario.segments().iter().map(|s| s.u_bar()).collect()
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.grid_indices
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    /// Largest speed of the profile.
    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nominal() -> SegmentParams {
        SegmentParams::nominal(3.1e4, 1050.0, 140.0).unwrap()
    }

    fn grid() -> Vec<f64> {
        vec![40.0, 60.0, 80.0, 100.0, 120.0]
    }

    #[test]
    fn tau_values() {
        assert_relative_eq!(nominal().tau(), 31000.0 / 116000.0, max_relative = 1e-15);
        assert_relative_eq!(nominal().tau(), 0.267241, epsilon = 1e-6);
        let half = SegmentParams::nominal(140.0 * 1050.0 / 2.0, 1050.0, 140.0).unwrap();
        assert_relative_eq!(half.tau(), 1.0, max_relative = 1e-15);
        let s = SegmentParams::nominal(2.7e4, 1050.0, 140.0).unwrap();
        // recompute from the formula independently
        let expected = 2.7e4 / (140.0 * 1050.0 - 2.7e4);
        assert_relative_eq!(s.tau(), expected, max_relative = 1e-15);
        assert_relative_eq!(s.tau(), 0.225, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_diagram_rejected() {
        let err = SegmentParams::nominal(140.0 * 1050.0, 1050.0, 140.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateDiagram { .. }));
        assert!(SegmentParams::nominal(2e5, 1050.0, 140.0).is_err());
    }

    #[test]
    fn incident_bounds_validated() {
        assert!(SegmentParams::new(3.1e4, 1050.0, 140.0, 3.2e4, 1050.0).is_err());
        assert!(SegmentParams::new(3.1e4, 1050.0, 140.0, 2.7e4, 1100.0).is_err());
        assert!(SegmentParams::new(3.1e4, 1050.0, 140.0, 0.0, 1050.0).is_err());
    }

    #[test]
    fn critical_density_values() {
        let s = nominal();
        assert!((s.critical_density(80.0) - 335.0).abs() <= 1.0);
        assert_relative_eq!(s.critical_density(140.0), 31000.0 / 140.0, max_relative = 1e-12);
        assert_relative_eq!(s.critical_density(40.0), 507.46, epsilon = 0.1);
        let g = grid();
        for w in g.windows(2) {
            assert!(s.critical_density(w[0]) > s.critical_density(w[1]));
        }
    }

    #[test]
    fn allowable_flow_branches() {
        let s = nominal();
        assert_eq!(s.allowable_flow(0.0, 80.0).unwrap(), 0.0);
        assert_relative_eq!(s.allowable_flow(1050.0, 80.0).unwrap(), 0.0, epsilon = 1e-9);
        let rc = s.critical_density(80.0);
        let free = 80.0 * rc;
        let congested = s.tau() * s.u_bar() * (s.rho_bar() - rc);
        assert_relative_eq!(free, congested, max_relative = 1e-12);
        assert_relative_eq!(s.allowable_flow(rc, 80.0).unwrap(), 2.677e4, max_relative = 1e-3);
        assert!(s.allowable_flow(-1.0, 80.0).is_err());
        assert!(s.allowable_flow(1051.0, 80.0).is_err());
    }

    #[test]
    fn incident_band_caps_at_80() {
        let s = SegmentParams::new(3.1e4, 1050.0, 140.0, 2.7e4, 1050.0).unwrap();
        let band = admissible_speed_set(&s, &grid(), 1.0, 4).unwrap();
        assert_eq!(band.u_hi, 80.0);
        assert_eq!(band.u_lo, 40.0);
        assert!(s.critical_density(80.0) * 80.0 <= 2.7e4);
        assert!(s.critical_density(100.0) * 100.0 > 2.7e4);
    }

    #[test]
    fn nominal_band_is_whole_grid() {
        let band = admissible_speed_set(&nominal(), &grid(), 1.0, 1).unwrap();
        assert_eq!(band.indices, 0..=4);
    }

    #[test]
    fn margin_eating_jam_density_is_empty() {
        let s = SegmentParams::new(3.1e4, 1050.0, 140.0, 3.1e4, 1.0).unwrap();
        let err = admissible_speed_set(&s, &grid(), 1.0, 2).unwrap_err();
        assert!(matches!(err, Error::NoAdmissibleSpeed { edge: 2 }));
    }

    #[test]
    fn dual_coefficient_identity() {
        let s = nominal();
        for k in 1..=140 {
            let u = k as f64;
            let lhs = s.dual_box_coefficient(u);
            let rhs = s.f_bar() * s.rho_bar() / s.critical_density(u);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn capacity_product_increasing() {
        let s = nominal();
        let prod = |u: f64| s.critical_density(u) * u;
        let closed = |u: f64| {
            s.f_bar() * s.rho_bar() * s.u_bar() * u
                / (s.f_bar() * s.u_bar() + u * (s.u_bar() * s.rho_bar() - s.f_bar()))
        };
        let mut prev = 0.0;
        for k in 1..=1400 {
            let u = k as f64 * 0.1;
            assert_relative_eq!(prod(u), closed(u), max_relative = 1e-12);
            assert!(prod(u) > prev);
            prev = prod(u);
        }
    }

    #[test]
    fn flow_shape_is_unimodal() {
        let s = nominal();
        for &u in &grid() {
            let rc = s.critical_density(u);
            let mut prev: Option<(f64, f64)> = None;
            let mut rho = 0.0;
            while rho <= s.rho_bar() {
                let f = s.allowable_flow(rho, u).unwrap();
                if let Some((prev_rho, prev_f)) = prev {
                    if rho <= rc {
                        assert!(f >= prev_f - 1e-9);
                    } else if prev_rho > rc {
                        assert!(f <= prev_f + 1e-9);
                    }
                }
                prev = Some((rho, f));
                rho += 0.5;
            }
        }
    }

    fn scenario_params() -> ScenarioParams {
        let mut segs = vec![nominal(); 5];
        segs[3] = SegmentParams::new(3.1e4, 1050.0, 140.0, 2.7e4, 1050.0).unwrap();
        ScenarioParams {
            length_km: 10.0,
            delta_s: 30.0,
            horizon: 20,
            segments: segs,
            gamma: grid(),
            pi: None,
            eta_bar: None,
            epsilon: 0.985,
            beta: 0.95,
        }
    }

    #[test]
    fn scenario_derived_quantities() {
        let s = HighwayScenario::new(scenario_params()).unwrap();
        assert_relative_eq!(s.h(), 5.0 * (30.0 / 3600.0) / 10.0, max_relative = 1e-15);
        assert_eq!(s.pi(), 1.0);
        assert_eq!(s.band(3).u_hi, 80.0);
        assert_eq!(s.profile_count(), 5 * 5 * 5 * 3 * 5);
    }

    #[test]
    fn scenario_rejects_bad_grid_and_cfl() {
        let mut p = scenario_params();
        p.gamma = vec![40.0, 40.0];
        assert!(HighwayScenario::new(p).is_err());
        let mut p = scenario_params();
        p.delta_s = 120.0;
        assert!(HighwayScenario::new(p).is_err());
        let mut p = scenario_params();
        p.beta = 1.0;
        assert!(HighwayScenario::new(p).is_err());
    }

    #[test]
    fn profile_from_speeds_checks_band() {
        let s = HighwayScenario::new(scenario_params()).unwrap();
        let u = SpeedProfile::from_speeds(&s, &[100.0, 120.0, 100.0, 80.0, 120.0]).unwrap();
        assert_eq!(u.grid_indices(), &[3, 4, 3, 2, 4]);
        assert!(SpeedProfile::from_speeds(&s, &[100.0, 120.0, 100.0, 100.0, 120.0]).is_err());
        assert!(SpeedProfile::from_speeds(&s, &[90.0, 120.0, 100.0, 80.0, 120.0]).is_err());
    }
}
