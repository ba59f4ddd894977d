//! Draws training samples, propagates them under a speed profile and writes
//! the trajectories as CSV.
//!
//! `cargo run --example sample_and_propagate -- /tmp/traj`

use std::path::PathBuf;

use vsl_core::config::parse_scenario;
use vsl_core::io::{write_trajectories, Preamble};
use vsl_core::network::SpeedProfile;
use vsl_core::sampling::{generate_samples, propagate_batch, write_samples};

fn main() -> vsl_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/example-trajectories".into()));
    let file = parse_scenario(include_str!("../../../scenarios/incident_highway.toml"))?;
    let sc = file.scenario;
    let gen = file.generator.expect("scenario has a generator");
    let seed = gen.seed.unwrap_or(0);
    let set = generate_samples(&gen.spec, gen.n_samples, sc.horizon(), seed)?;

    let u = SpeedProfile::from_speeds(&sc, &[100.0, 120.0, 100.0, 80.0, 120.0])?;
    let batch = propagate_batch(&sc, &u, &set)?;
    let mean = batch.mean_density();
    for (e, row) in mean.iter().enumerate() {
        let peak = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!("edge {}: final mean {:.1}, peak mean {:.1} veh/km", e + 1, row[row.len() - 1], peak);
    }

    std::fs::create_dir_all(&out)?;
    write_samples(&out.join("samples"), &set)?;
    write_trajectories(&out.join("trajectories.csv"), &Preamble::for_samples(&set), sc.delta_hours(), &batch)?;
    println!("wrote {}", out.display());
    Ok(())
}
