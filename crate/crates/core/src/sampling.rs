//! Disturbance samples `(rho(0), omega)`, seeded generation, and the linear
//! sample-trajectory propagator
//! `rho_e(t+1) = rho_e(t) + h (u_s rho_s(t) - u_e rho_e(t) + omega_e(t))`.
//!
//! Trajectories are never clamped: the recursion is affine in the sample and
//! the certificate works with whatever it produces.

use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{HighwayScenario, SpeedProfile};

/// One realisation of the uncertainty: initial densities and the net inflow
/// rate of every edge at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSample {
    /// `rho_e(0)` in veh/km, one per edge.
    pub rho0: Vec<f64>,
    /// `omega[e][t]` in veh/h for steps `t = 0..T-1` (the step from `t` to `t+1`).
    pub omega: Vec<Vec<f64>>,
}

impl DisturbanceSample {
    pub fn n(&self) -> usize {
        self.rho0.len()
    }

    /// Number of steps covered by `omega`.
    pub fn steps(&self) -> usize {
        self.omega.first().map_or(0, Vec::len)
    }

    /// `alpha * a + (1 - alpha) * b`, elementwise.
    pub fn blend(a: &Self, b: &Self, alpha: f64) -> Self {
        let mix = |x: f64, y: f64| alpha * x + (1.0 - alpha) * y;
        Self {
            rho0: a.rho0.iter().zip(&b.rho0).map(|(&x, &y)| mix(x, y)).collect(),
            omega: a
                .omega
                .iter()
                .zip(&b.omega)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| mix(x, y)).collect())
                .collect(),
        }
    }
}

/// Per-edge uniform bounds for the seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// `(lo, hi)` for `rho_e(0)`; `lo == hi` gives a constant.
    pub rho0: Vec<(f64, f64)>,
    /// `(lo, hi)` for every `omega_e(t)`.
    pub omega: Vec<(f64, f64)>,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rho0.len() != self.omega.len() {
            return Err(Error::Dimension(format!(
                "generator has {} rho0 bounds and {} omega bounds",
                self.rho0.len(),
                self.omega.len()
            )));
        }
        let check = |name: &str, bounds: &[(f64, f64)]| -> Result<()> {
            for (e, &(lo, hi)) in bounds.iter().enumerate() {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::invalid(format!("generator.{name}[{e}]"), "bounds must be finite"));
                }
                if lo > hi {
                    return Err(Error::invalid(
                        format!("generator.{name}[{e}]"),
                        format!("lo = {lo} exceeds hi = {hi}"),
                    ));
                }
            }
            Ok(())
        };
        check("rho0", &self.rho0)?;
        check("omega", &self.omega)
    }

    pub fn n(&self) -> usize {
        self.rho0.len()
    }
}

/// Where a sample set came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    File(PathBuf),
    Generated { spec: GeneratorSpec, seed: u64 },
    Inline,
}

/// `N` samples sharing the same dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    samples: Vec<DisturbanceSample>,
    provenance: Provenance,
}

impl SampleSet {
    pub fn new(samples: Vec<DisturbanceSample>, provenance: Provenance) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::invalid("samples", "at least one sample required"));
        };
        let (n, steps) = (first.n(), first.steps());
        for (l, s) in samples.iter().enumerate() {
            if s.n() != n || s.omega.len() != n || s.omega.iter().any(|r| r.len() != steps) {
                return Err(Error::Dimension(format!(
                    "sample {} does not match {n} edges x {steps} steps",
                    l + 1
                )));
            }
            if s.rho0.iter().chain(s.omega.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("samples[{}]", l + 1), "entries must be finite"));
            }
        }
        Ok(Self {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[DisturbanceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n(&self) -> usize {
        self.samples[0].n()
    }

    pub fn steps(&self) -> usize {
        self.samples[0].steps()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Checks dimensions against the scenario and `rho0 in [0, rho_bar]`.
    pub fn check_against(&self, scenario: &HighwayScenario) -> Result<()> {
        if self.n() != scenario.n() {
            return Err(Error::Dimension(format!(
                "samples have {} edges, scenario has {}",
                self.n(),
                scenario.n()
            )));
        }
        if self.steps() < scenario.horizon() {
            return Err(Error::Dimension(format!(
                "samples cover {} steps, horizon is {}",
                self.steps(),
                scenario.horizon()
            )));
        }
        for (l, s) in self.samples.iter().enumerate() {
            for (e, (&r, seg)) in s.rho0.iter().zip(scenario.segments()).enumerate() {
                if !(0.0..=seg.rho_bar()).contains(&r) {
                    return Err(Error::invalid(
                        format!("samples[{}].rho0[{}]", l + 1, e + 1),
                        format!("{r} outside [0, {}]", seg.rho_bar()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Draws `count` i.i.d. samples covering `steps` steps. Deterministic in `seed`.
pub fn generate_samples(
    spec: &GeneratorSpec,
    count: usize,
    steps: usize,
    seed: u64,
) -> Result<SampleSet> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::invalid("N", "at least one sample required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        if lo == hi {
            lo
        } else {
            Uniform::new_inclusive(lo, hi).sample(rng)
        }
    };
    let samples = (0..count)
        .map(|_| {
            let rho0 = spec.rho0.iter().map(|&b| draw(&mut rng, b)).collect();
            let omega = spec
                .omega
                .iter()
                .map(|&b| (0..steps).map(|_| draw(&mut rng, b)).collect())
                .collect();
            DisturbanceSample { rho0, omega }
        })
        .collect();
    SampleSet::new(
        samples,
        Provenance::Generated {
            spec: spec.clone(),
            seed,
        },
    )
}

/// Density trajectory of one sample for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    horizon: usize,
    // edge-major: values[e * horizon + (t - 1)]
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(n: usize, horizon: usize) -> Self {
        Self {
            n,
            horizon,
            values: vec![0.0; n * horizon],
        }
    }

    /// Builds a trajectory from `rows[e][t-1]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let horizon = rows.first().map_or(0, Vec::len);
        Self {
            n,
            horizon,
            values: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Density of edge `e` (0-based) at time `t` (1-based).
    pub fn at(&self, e: usize, t: usize) -> f64 {
        debug_assert!(t >= 1 && t <= self.horizon);
        self.values[e * self.horizon + t - 1]
    }

    pub fn set(&mut self, e: usize, t: usize, v: f64) {
        self.values[e * self.horizon + t - 1] = v;
    }

    /// `rho_e(1..=T)`.
    pub fn edge(&self, e: usize) -> &[f64] {
        &self.values[e * self.horizon..(e + 1) * self.horizon]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Propagates one sample under arbitrary per-edge speeds for `horizon` steps.
pub fn propagate_speeds(
    h: f64,
    speeds: &[f64],
    sample: &DisturbanceSample,
    horizon: usize,
) -> Trajectory {
    let n = speeds.len();
    let mut traj = Trajectory::zeros(n, horizon);
    let mut cur = sample.rho0.clone();
    let mut next = vec![0.0; n];
    for t in 0..horizon {
        for e in 0..n {
            let inflow = if e == 0 { 0.0 } else { speeds[e - 1] * cur[e - 1] };
            next[e] = cur[e] + h * (inflow - speeds[e] * cur[e] + sample.omega[e][t]);
        }
        std::mem::swap(&mut cur, &mut next);
        for (e, &v) in cur.iter().enumerate() {
            traj.set(e, t + 1, v);
        }
    }
    traj
}

/// Sample trajectory of `sample` under the profile `u` over the scenario horizon.
pub fn propagate(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    sample: &DisturbanceSample,
) -> Result<Trajectory> {
    if sample.n() != scenario.n() || u.len() != scenario.n() {
        return Err(Error::Dimension("sample or profile size differs from scenario".into()));
    }
    if sample.steps() < scenario.horizon() {
        return Err(Error::Dimension(format!(
            "sample covers {} steps, horizon is {}",
            sample.steps(),
            scenario.horizon()
        )));
    }
    Ok(propagate_speeds(
        scenario.h(),
        u.speeds(),
        sample,
        scenario.horizon(),
    ))
}

/// Trajectories of every sample, in sample order, together with the profile
/// that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBatch {
    pub speeds: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn n(&self) -> usize {
        self.speeds.len()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::horizon)
    }

    /// Mean over samples of `rho_e(t)`, as `[e][t-1]`.
    pub fn mean_density(&self) -> Vec<Vec<f64>> {
        let (n, horizon) = (self.n(), self.horizon());
        let mut acc = vec![vec![0.0; horizon]; n];
        for tr in &self.trajectories {
            for (e, row) in acc.iter_mut().enumerate() {
                for (t, slot) in row.iter_mut().enumerate() {
                    *slot += tr.at(e, t + 1);
                }
            }
        }
        let inv = 1.0 / self.len() as f64;
        acc.iter_mut().flatten().for_each(|v| *v *= inv);
        acc
    }
}

pub fn propagate_batch(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    samples: &SampleSet,
) -> Result<TrajectoryBatch> {
    let trajectories = samples
        .samples()
        .iter()
        .map(|s| propagate(scenario, u, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBatch {
        speeds: u.speeds().to_vec(),
        trajectories,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Rho0Row {
    l: usize,
    e: usize,
    rho0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct OmegaRow {
    l: usize,
    e: usize,
    t: usize,
    omega: f64,
}

/// File names used inside a sample directory.
pub const RHO0_FILE: &str = "rho0.csv";
pub const OMEGA_FILE: &str = "omega.csv";

/// Writes `rho0.csv` (`l,e,rho0`) and `omega.csv` (`l,e,t,omega`) into `dir`.
/// Indices `l` and `e` are 1-based, `t` counts steps from 0.
pub fn write_samples(dir: &Path, set: &SampleSet) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(RHO0_FILE))?;
    for (l, s) in set.samples().iter().enumerate() {
        for (e, &rho0) in s.rho0.iter().enumerate() {
            w.serialize(Rho0Row { l: l + 1, e: e + 1, rho0 })?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join(OMEGA_FILE))?;
    for (l, s) in set.samples().iter().enumerate() {
        for (e, row) in s.omega.iter().enumerate() {
            for (t, &omega) in row.iter().enumerate() {
                w.serialize(OmegaRow { l: l + 1, e: e + 1, t, omega })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample directory written by [`write_samples`]. Every `(l, e, t)`
/// cell must be present exactly once.
pub fn read_samples(dir: &Path) -> Result<SampleSet> {
    let mut rho0_rows = Vec::new();
    let mut rdr = reader(&dir.join(RHO0_FILE))?;
    for row in rdr.deserialize() {
        let row: Rho0Row = row?;
        rho0_rows.push(row);
    }
    let mut omega_rows = Vec::new();
    let mut rdr = reader(&dir.join(OMEGA_FILE))?;
    for row in rdr.deserialize() {
        let row: OmegaRow = row?;
        omega_rows.push(row);
    }
    let count = rho0_rows.iter().map(|r| r.l).max().unwrap_or(0);
    let n = rho0_rows.iter().map(|r| r.e).max().unwrap_or(0);
    let steps = omega_rows.iter().map(|r| r.t + 1).max().unwrap_or(0);
    if count == 0 || n == 0 || steps == 0 {
        return Err(Error::invalid(dir.display().to_string(), "empty sample files"));
    }
    let mut rho0 = vec![vec![f64::NAN; n]; count];
    let mut omega = vec![vec![vec![f64::NAN; steps]; n]; count];
    for r in rho0_rows {
        if r.l == 0 || r.e == 0 {
            return Err(Error::invalid(RHO0_FILE, "indices l and e are 1-based"));
        }
        rho0[r.l - 1][r.e - 1] = r.rho0;
    }
    for r in omega_rows {
        if r.l == 0 || r.e == 0 || r.l > count || r.e > n {
            return Err(Error::invalid(
                OMEGA_FILE,
                format!("index (l={}, e={}) out of range", r.l, r.e),
            ));
        }
        omega[r.l - 1][r.e - 1][r.t] = r.omega;
    }
    let samples = rho0
        .into_iter()
        .zip(omega)
        .map(|(rho0, omega)| DisturbanceSample { rho0, omega })
        .collect::<Vec<_>>();
    if samples
        .iter()
        .any(|s| s.rho0.iter().chain(s.omega.iter().flatten()).any(|v| v.is_nan()))
    {
        return Err(Error::invalid(dir.display().to_string(), "missing sample entries"));
    }
    SampleSet::new(samples, Provenance::File(dir.to_path_buf()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}
