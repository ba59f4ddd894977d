//! Small instances shared by the unit tests.

use crate::network::{HighwayScenario, ScenarioParams, SegmentParams};
use crate::sampling::{generate_samples, DisturbanceSample, GeneratorSpec, Provenance, SampleSet};

pub const GRID5: [f64; 5] = [40.0, 60.0, 80.0, 100.0, 120.0];

/// Highway with full-scale segment data, 2 km cells and 30 s steps; the
/// optional incident edge has capacity 2.7e4 veh/h.
pub fn highway(n: usize, gamma: &[f64], horizon: usize, epsilon: f64, incident: Option<usize>) -> HighwayScenario {
    let segments = (0..n)
        .map(|e| {
            let f_u = if Some(e) == incident { 2.7e4 } else { 3.1e4 };
            SegmentParams::new(3.1e4, 1050.0, 140.0, f_u, 1050.0).unwrap()
        })
        .collect();
    HighwayScenario::new(ScenarioParams {
        length_km: 2.0 * n as f64,
        delta_s: 30.0,
        horizon,
        segments,
        gamma: gamma.to_vec(),
        pi: None,
        eta_bar: None,
        epsilon,
        beta: 0.95,
    })
    .unwrap()
}

/// Uniform samples with `rho0` in `[100, 300]`, ramps in `[-1500, 2500]` and
/// the given inflow range on the first edge.
pub fn highway_samples(n: usize, count: usize, steps: usize, seed: u64, inflow: (f64, f64)) -> SampleSet {
    let mut omega = vec![(-1500.0, 2500.0); n];
    omega[0] = inflow;
    generate_samples(
        &GeneratorSpec {
            rho0: vec![(100.0, 300.0); n],
            omega,
        },
        count,
        steps,
        seed,
    )
    .unwrap()
}

/// Unit-scale two-speed highway: `f_bar = 10`, `rho_bar = 20`, `u_bar = 3`,
/// grid `{1, 2}`, `h = 0.25`.
pub fn toy(n: usize, horizon: usize, epsilon: f64) -> HighwayScenario {
    HighwayScenario::new(ScenarioParams {
        length_km: 2.0 * n as f64,
        delta_s: 1800.0,
        horizon,
        segments: vec![SegmentParams::nominal(10.0, 20.0, 3.0).unwrap(); n],
        gamma: vec![1.0, 2.0],
        pi: Some(0.5),
        eta_bar: None,
        epsilon,
        beta: 0.9,
    })
    .unwrap()
}

pub fn inline(samples: Vec<DisturbanceSample>) -> SampleSet {
    SampleSet::new(samples, Provenance::Inline).unwrap()
}
