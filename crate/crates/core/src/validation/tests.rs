use super::*;
use crate::certificate::ObjectiveSpec;
use crate::network::SpeedProfile;
use crate::testutil::{highway, highway_samples, inline, toy, GRID5};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rho0: Vec<f64>, omega: Vec<Vec<f64>>) -> DisturbanceSample {
    DisturbanceSample { rho0, omega }
}

#[test]
fn enumeration_is_lexicographic_and_complete() {
    let sc = highway(3, &GRID5, 2, 1.0, Some(1));
    let all = enumerate_profiles(&sc);
    assert_eq!(all.len() as u128, sc.profile_count());
    assert!(all.windows(2).all(|w| w[0] < w[1]));
    assert!(all.iter().all(|p| p.iter().enumerate().all(|(e, &i)| sc.band(e).contains_index(i))));
}

#[test]
fn single_profile_is_returned() {
    let sc = highway(2, &[80.0], 3, 10.0, None);
    let set = highway_samples(2, 2, 3, 1, (-1500.0, 2500.0));
    let bf = brute_force_optimum(&sc, &set, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(bf.u_star.speeds(), &[80.0, 80.0]);
    assert_eq!(bf.evaluated, 1);
}

#[test]
fn toy_instance_matches_grid_oracle() {
    let sc = toy(2, 2, 0.3);
    let set = inline(vec![
        sample(vec![3.0, 4.0], vec![vec![1.0, -2.0], vec![0.5, 2.0]]),
        sample(vec![6.0, 1.0], vec![vec![-1.0, 4.0], vec![3.0, 0.0]]),
    ]);
    let mut hand = Vec::new();
    for idx in [[0, 0], [0, 1], [1, 0], [1, 1]] {
        let u = SpeedProfile::from_indices(&sc, &idx).unwrap();
        let batch = propagate_batch(&sc, &u, &set).unwrap();
        let caps: Vec<f64> = u.speeds().iter().map(|&v| sc.segment(0).critical_density(v)).collect();
        let w = ObjectiveSpec::new(u.speeds(), 2).weights;
        // kinks at u/T in {0.5, 1} lie on the grid
        hand.push((certificate_grid_oracle(&w, &caps, &batch.trajectories, 0.3, 4.0, 1e-3), u));
    }
    let (j, u) = hand.iter().fold(&hand[0], |a, b| if b.0 > a.0 { b } else { a });
    let bf = brute_force_optimum(&sc, &set, DEFAULT_ENUMERATION_CAP).unwrap();
    assert!((bf.j_star - j).abs() < 1e-9, "{} vs {j}", bf.j_star);
    assert_eq!(&bf.u_star, u);
    assert_eq!(bf.evaluated, 4);
}

#[test]
fn ties_go_to_the_smallest_profile() {
    // zero densities: every certificate is 0
    let sc = toy(2, 2, 0.1);
    let set = inline(vec![sample(vec![0.0, 0.0], vec![vec![0.0; 2]; 2])]);
    let bf = brute_force_optimum(&sc, &set, DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(bf.j_star, 0.0);
    assert_eq!(bf.u_star.grid_indices(), &[0, 0]);
}

#[test]
fn cap_and_empty_results_are_errors() {
    let sc = highway(3, &GRID5, 2, 1.0, None);
    let set = highway_samples(3, 1, 2, 1, (-1500.0, 2500.0));
    assert!(matches!(brute_force_optimum(&sc, &set, 10), Err(Error::EnumerationCap { count: 125, cap: 10 })));

    // jammed start and no transport budget: every ambiguity set is empty
    let sc = toy(1, 1, 0.0);
    let set = inline(vec![sample(vec![19.0], vec![vec![0.0]])]);
    assert!(matches!(brute_force_optimum(&sc, &set, 10), Err(Error::NoValidProfile)));
}

#[test]
fn brute_force_dominates_every_profile() {
    let sc = highway(2, &GRID5, 4, 5.0, Some(1));
    let set = highway_samples(2, 3, 4, 12, (2e4, 2.4e4));
    let bf = brute_force_optimum(&sc, &set, DEFAULT_ENUMERATION_CAP).unwrap();
    for idx in enumerate_profiles(&sc) {
        let u = SpeedProfile::from_indices(&sc, &idx).unwrap();
        let batch = propagate_batch(&sc, &u, &set).unwrap();
        let c = certificate(&sc, &u, &batch, 5.0).unwrap();
        assert!(c.value <= bf.j_star);
    }
}

#[test]
fn grid_oracle_converges_to_certificate() {
    let sc = highway(2, &GRID5, 4, 20.0, None);
    let set = highway_samples(2, 2, 4, 3, (-1500.0, 2500.0));
    let u = SpeedProfile::from_speeds(&sc, &[100.0, 60.0]).unwrap();
    let batch = propagate_batch(&sc, &u, &set).unwrap();
    let c = certificate(&sc, &u, &batch, 20.0).unwrap();
    let caps: Vec<f64> = u.speeds().iter().map(|&v| sc.segment(0).critical_density(v)).collect();
    let w = ObjectiveSpec::new(u.speeds(), 4).weights;
    // kinks at 25 and 15 are grid points
    let g = certificate_grid_oracle(&w, &caps, &batch.trajectories, 20.0, 50.0, 1e-2);
    assert!((g - c.value).abs() < 1e-6 * c.value.abs().max(1.0));
}

#[test]
fn ctm_stays_empty_without_traffic() {
    let sc = highway(3, &GRID5, 5, 1.0, Some(2));
    let s = sample(vec![0.0; 3], vec![vec![0.0; 10]; 3]);
    let run = simulate_ctm(&sc, &SpeedProfile::uncontrolled(&sc), &s, 10).unwrap();
    assert!(run.trajectory.values().iter().all(|&v| v == 0.0));
}

#[test]
fn ctm_matches_linear_dynamics_in_free_flow() {
    let sc = highway(3, &GRID5, 6, 1.0, None);
    let s = sample(vec![80.0, 120.0, 60.0], vec![vec![300.0; 6], vec![-200.0; 6], vec![100.0; 6]]);
    let u = SpeedProfile::from_speeds(&sc, &[100.0, 80.0, 120.0]).unwrap();
    let lin = propagate(&sc, &u, &s).unwrap();
    let run = simulate_ctm(&sc, u.speeds(), &s, 6).unwrap();
    assert_eq!(run.trajectory, lin);
    for e in 0..3 {
        assert!(lin.edge(e).iter().all(|&r| r < sc.segment(e).critical_density(u.speeds()[e])));
    }
}

#[test]
fn ctm_single_cell_free_flow() {
    let sc = toy(1, 3, 1.0);
    let s = sample(vec![2.0], vec![vec![0.0; 3]]);
    let run = simulate_ctm(&sc, &[2.0], &s, 3).unwrap();
    // rho <- rho (1 - h u)
    for t in 1..=3 {
        assert!((run.trajectory.at(0, t) - 2.0 * 0.5f64.powi(t as i32)).abs() < 1e-15);
    }
}

#[test]
fn incident_queue_spills_upstream() {
    // edge 3 sends 30100 veh/h but edge 4 only takes f_U = 2.7e4
    let sc = highway(5, &GRID5, 20, 1.0, Some(3));
    let mut omega = vec![vec![0.0; 20]; 5];
    omega[0] = vec![140.0 * 215.0; 20];
    let s = sample(vec![215.0; 5], omega);
    let run = simulate_ctm(&sc, &SpeedProfile::uncontrolled(&sc), &s, 20).unwrap();
    let tr = &run.trajectory;
    let free = sc.segment(2).free_flow_critical_density();
    for t in 1..=20 {
        assert!((tr.at(3, t) - 215.0).abs() < 1e-9, "edge 4 passes f_U through");
        let before = if t == 1 { 215.0 } else { tr.at(2, t - 1) };
        assert!(tr.at(2, t) >= before - 1e-9);
    }
    assert!(tr.at(2, 20) > free);
    assert!(tr.at(1, 20) > 215.0 + 1.0, "queue reached edge 2");
}

fn ctm_case() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..5, n),
            prop::collection::vec(0.0f64..1050.0, n),
            prop::collection::vec(prop::collection::vec(-3e4f64..3e4, 12), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ctm_conserves_and_stays_in_range((idx, rho0, omega) in ctm_case()) {
        let n = idx.len();
        let sc = highway(n, &GRID5, 4, 1.0, Some(n - 1));
        let speeds: Vec<f64> = idx.iter().map(|&i| GRID5[i]).collect();
        let s = sample(rho0, omega);
        let run = simulate_ctm(&sc, &speeds, &s, 12).unwrap();
        prop_assert!(run.conservation_error <= 1e-9, "{}", run.conservation_error);
        for e in 0..n {
            let cap = sc.segment(e).rho_incident();
            prop_assert!(run.trajectory.edge(e).iter().all(|&r| (0.0..=cap).contains(&r)));
        }
    }
}

#[test]
fn degenerate_validation_reproduces_the_certificate() {
    // one training sample reused for validation, zero radius, densities in the box
    let sc = highway(2, &GRID5, 5, 0.0, None);
    let set = highway_samples(2, 1, 5, 4, (-1500.0, 2500.0));
    let u = SpeedProfile::from_speeds(&sc, &[80.0, 100.0]).unwrap();
    let batch = propagate_batch(&sc, &u, &set).unwrap();
    let j = certificate(&sc, &u, &batch, 0.0).unwrap().value;
    let rep = validate_with_samples(&sc, &u, j, &set, 5).unwrap();
    assert!((rep.mean_h - j).abs() <= 1e-9 * j.abs());
    assert_eq!(rep.n_val, 1);
}

#[test]
fn huge_radius_guarantee_is_trivial() {
    let sc = highway(2, &GRID5, 5, 1e7, None);
    let set = highway_samples(2, 3, 5, 4, (-1500.0, 2500.0));
    let u = SpeedProfile::from_speeds(&sc, &[80.0, 100.0]).unwrap();
    let batch = propagate_batch(&sc, &u, &set).unwrap();
    let j = certificate(&sc, &u, &batch, 1e7).unwrap().value;
    assert_eq!(j, 0.0);
    let gen = GeneratorSpec {
        rho0: vec![(100.0, 300.0); 2],
        omega: vec![(0.0, 2000.0); 2],
    };
    let cfg = ValidationConfig::from_training_seed(50, 12, 4);
    let rep = validate(&sc, &u, j, &gen, &cfg).unwrap();
    assert!(rep.guarantee_holds);
    assert_eq!(rep.mean_density.len(), 2);
    assert_eq!(rep.mean_density[0].len(), 12);
    assert_eq!(rep.h_values.len(), 50);
    assert_eq!(rep.seed, Some(4u64.wrapping_add(VALIDATION_SEED_OFFSET)));
    assert_eq!(rep, validate(&sc, &u, j, &gen, &cfg).unwrap());
}

#[test]
fn validation_checks_inputs() {
    let sc = highway(2, &GRID5, 5, 1.0, None);
    let u = SpeedProfile::from_speeds(&sc, &[80.0, 100.0]).unwrap();
    let gen = GeneratorSpec {
        rho0: vec![(100.0, 300.0); 2],
        omega: vec![(0.0, 2000.0); 2],
    };
    let cfg = ValidationConfig { n_val: 0, horizon_val: 5, seed: 0 };
    assert!(validate(&sc, &u, 0.0, &gen, &cfg).is_err());
    let short = highway_samples(2, 1, 3, 1, (0.0, 1.0));
    assert!(validate_with_samples(&sc, &u, 0.0, &short, 5).is_err());
}

#[test]
fn random_grid_spot_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let n = rng.gen_range(1..=3);
        let sc = highway(n, &GRID5, 4, rng.gen_range(0.5..200.0), None);
        let set = highway_samples(n, 2, 4, rng.gen(), (2e4, 2.4e4));
        let idx: Vec<usize> = (0..n).map(|e| rng.gen_range(sc.band(e).indices.clone())).collect();
        let u = SpeedProfile::from_indices(&sc, &idx).unwrap();
        let batch = propagate_batch(&sc, &u, &set).unwrap();
        let c = certificate(&sc, &u, &batch, sc.epsilon()).unwrap();
        if !c.is_finite() {
            continue;
        }
        let caps: Vec<f64> = u.speeds().iter().zip(sc.segments()).map(|(&v, s)| s.critical_density(v)).collect();
        let w = ObjectiveSpec::new(u.speeds(), 4).weights;
        let g = certificate_grid_oracle(&w, &caps, &batch.trajectories, sc.epsilon(), 2.0 * u.max_speed() / 4.0, 1e-2);
        assert!((g - c.value).abs() <= 1e-6 * c.value.abs().max(1.0), "{g} vs {}", c.value);
    }
}
