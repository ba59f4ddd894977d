//! Integer solution search on a two-edge highway, checked against
//! exhaustive enumeration.

use vsl_core::issa::{run, IssaOptions};
use vsl_core::network::{HighwayScenario, ScenarioParams, SegmentParams};
use vsl_core::sampling::{generate_samples, GeneratorSpec};
use vsl_core::validation::{brute_force_optimum, DEFAULT_ENUMERATION_CAP};

pub fn main() -> vsl_core::Result<()> {
    let segments = vec![
        SegmentParams::nominal(3.1e4, 1050.0, 140.0)?,
        SegmentParams::new(3.1e4, 1050.0, 140.0, 2.7e4, 1050.0)?,
    ];
    let sc = HighwayScenario::new(ScenarioParams {
        length_km: 4.0,
        delta_s: 30.0,
        horizon: 5,
        segments,
        gamma: vec![40.0, 60.0, 80.0, 100.0, 120.0],
        pi: None,
        eta_bar: None,
        epsilon: 100.0,
        beta: 0.95,
    })?;
    let gen = GeneratorSpec {
        rho0: vec![(200.0, 300.0); 2],
        omega: vec![(2e4, 2.4e4), (-1500.0, 2500.0)],
    };
    let set = generate_samples(&gen, 3, sc.horizon(), 7)?;

    let report = run(&sc, &set, &IssaOptions::default())?;
    println!(" k  u                        UBP bound      obj            LB");
    for r in &report.log {
        println!("{:>2}  {:<24} {:<14.6e} {:<14.6e} {:.6e}", r.k, format!("{:?}", r.speeds), r.ubp_bound, r.obj, r.lb);
    }
    let u = report.u_best.as_ref().expect("a certified profile");
    println!(
        "stopped on {} after {:.2?}: u = {:?}, J = {:.6e}, gap {:.2e}",
        report.termination.label(),
        report.elapsed,
        u.speeds(),
        report.j_hat,
        report.relative_gap()
    );

    let bf = brute_force_optimum(&sc, &set, DEFAULT_ENUMERATION_CAP)?;
    println!("enumeration of {} profiles: u* = {:?}, J* = {:.6e}", bf.evaluated, bf.u_star.speeds(), bf.j_star);
    Ok(())
}
