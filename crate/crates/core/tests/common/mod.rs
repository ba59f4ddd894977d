//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vsl_core::config::{load_scenario, ScenarioFile};
use vsl_core::network::{HighwayScenario, ScenarioParams, SegmentParams, SpeedProfile};
use vsl_core::sampling::{generate_samples, GeneratorSpec, SampleSet};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> ScenarioFile {
    load_scenario(&scenario_path(name)).unwrap()
}

/// Full-scale segment data on 2 km cells with 30 s steps; `incident` gets
/// capacity 2.7e4 veh/h.
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

/// A small random instance: scenario plus generated samples.
pub struct Desk {
    pub scenario: HighwayScenario,
    pub samples: SampleSet,
}

pub struct DeskShape {
    pub n: usize,
    pub horizon: usize,
    pub count: usize,
    pub gamma: Vec<f64>,
    /// `rho0` range; high values make empty ambiguity sets likely.
    pub rho0: (f64, f64),
    pub epsilon: f64,
}

pub fn desk(shape: &DeskShape, rng: &mut ChaCha8Rng) -> Desk {
    let incident = if rng.gen_bool(0.5) { Some(rng.gen_range(0..shape.n)) } else { None };
    let scenario = highway(shape.n, &shape.gamma, shape.horizon, shape.epsilon, incident);
    let mut omega = vec![(-3000.0, 3000.0); shape.n];
    omega[0] = (1e4, 2.4e4);
    let spec = GeneratorSpec {
        rho0: vec![shape.rho0; shape.n],
        omega,
    };
    let samples = generate_samples(&spec, shape.count, shape.horizon, rng.gen()).unwrap();
    Desk { scenario, samples }
}

pub fn random_profile(sc: &HighwayScenario, rng: &mut ChaCha8Rng) -> SpeedProfile {
    let idx: Vec<usize> = sc.bands().iter().map(|b| rng.gen_range(b.indices.clone())).collect();
    SpeedProfile::from_indices(sc, &idx).unwrap()
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}
