//! Out-of-sample check of a profile and the CTM comparison against the
//! uncontrolled highway.

use vsl_core::certificate::certificate;
use vsl_core::config::parse_scenario;
use vsl_core::network::SpeedProfile;
use vsl_core::sampling::{generate_samples, propagate_batch};
use vsl_core::validation::{simulate_ctm, validate, ValidationConfig};

fn main() -> vsl_core::Result<()> {
    let file = parse_scenario(include_str!("../../../scenarios/incident_highway_conservative.toml"))?;
    let sc = file.scenario;
    let gen = file.generator.expect("scenario has a generator");
    let seed = gen.seed.unwrap_or(0);
    let set = generate_samples(&gen.spec, gen.n_samples, sc.horizon(), seed)?;
    let t_val = file.validation_horizon.unwrap_or(sc.horizon());

    let u = SpeedProfile::from_speeds(&sc, &[100.0, 120.0, 100.0, 80.0, 120.0])?;
    let j_hat = certificate(&sc, &u, &propagate_batch(&sc, &u, &set)?, sc.epsilon())?.value;
    let cfg = ValidationConfig::from_training_seed(file.n_val.unwrap_or(1000), t_val, seed);
    let report = validate(&sc, &u, j_hat, &gen.spec, &cfg)?;
    println!(
        "J = {:.4e}, mean H over {} fresh samples = {:.4e}, guarantee {}",
        j_hat,
        report.n_val,
        report.mean_h,
        if report.guarantee_holds { "holds" } else { "violated" }
    );

    let fresh = generate_samples(&gen.spec, 200, t_val, cfg.seed)?;
    let free = SpeedProfile::uncontrolled(&sc);
    println!("\nmean CTM density (veh/km) every 5 min:\n  min  edge3 free  edge3 ctl  edge4 free  edge4 ctl");
    let mut sums = vec![[0.0; 4]; t_val];
    for s in fresh.samples() {
        let a = simulate_ctm(&sc, &free, s, t_val)?;
        let b = simulate_ctm(&sc, u.speeds(), s, t_val)?;
        for (t, acc) in sums.iter_mut().enumerate() {
            for (k, (run, e)) in [(&a, 2), (&b, 2), (&a, 3), (&b, 3)].into_iter().enumerate() {
                acc[k] += run.trajectory.at(e, t + 1) / fresh.len() as f64;
            }
        }
    }
    for t in (10..=t_val).step_by(10) {
        let m = sums[t - 1];
        println!("{:>5.0} {:>10.1} {:>10.1} {:>11.1} {:>10.1}", t as f64 * sc.delta_hours() * 60.0, m[0], m[1], m[2], m[3]);
    }
    println!("rho_c of edge 4 at 80 km/h: {:.1}", sc.segment(3).critical_density(80.0));
    Ok(())
}
