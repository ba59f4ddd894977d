//! Certificate of fixed speed profiles: closed form, its breakpoints, and the
//! same value from the dual LP.

use vsl_core::certificate::{certificate, sample_average_h};
use vsl_core::config::parse_scenario;
use vsl_core::network::SpeedProfile;
use vsl_core::reformulation::solve_lbp;
use vsl_core::sampling::{generate_samples, propagate_batch};

fn main() -> vsl_core::Result<()> {
    let file = parse_scenario(include_str!("../../../scenarios/incident_highway.toml"))?;
    let sc = file.scenario;
    let gen = file.generator.expect("scenario has a generator");
    let set = generate_samples(&gen.spec, gen.n_samples, sc.horizon(), gen.seed.unwrap_or(0))?;

    for speeds in [[120.0, 80.0, 120.0, 80.0, 120.0], [100.0, 120.0, 100.0, 80.0, 120.0], [60.0; 5]] {
        let u = SpeedProfile::from_speeds(&sc, &speeds)?;
        let batch = propagate_batch(&sc, &u, &set)?;
        for eps in [sc.epsilon(), 1000.0] {
            let cert = certificate(&sc, &u, &batch, eps)?;
            let (lp, _) = solve_lbp(&sc, &u, &batch, eps)?;
            println!(
                "u = {speeds:?}, eps = {eps}: J = {:.6e} (LP {:.6e}), lambda* = {}, sample mean H = {:.6e}",
                cert.value,
                lp,
                cert.lambda_star,
                sample_average_h(&batch)
            );
        }
    }
    Ok(())
}
