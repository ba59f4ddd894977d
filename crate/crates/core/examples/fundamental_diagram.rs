//! Critical densities and admissible speed bands of the incident highway.

use vsl_core::config::parse_scenario;

pub fn main() -> vsl_core::Result<()> {
    let file = parse_scenario(include_str!("../../../scenarios/incident_highway.toml"))?;
    let sc = file.scenario;
    println!("h = {:.6} h/km, eta_bar = {:.3e}", sc.h(), sc.eta_bar());
    for (e, seg) in sc.segments().iter().enumerate() {
        let band = sc.band(e);
        println!(
            "edge {}: tau = {:.4}, f_U = {:.0}, admissible speeds {}..={} km/h",
            e + 1,
            seg.tau(),
            seg.f_incident(),
            band.u_lo,
            band.u_hi
        );
    }
    let seg = sc.segment(3);
    println!("\n  u    rho_c    flow at rho_c");
    for &u in sc.gamma() {
        let rc = seg.critical_density(u);
        println!("{u:>4} {rc:>8.1} {:>12.0}", seg.allowable_flow(rc, u)?);
    }
    Ok(())
}
