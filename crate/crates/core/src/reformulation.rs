//! Mixed-binary reformulation of the speed-limit design problem.
//!
//! Speeds are encoded by binaries `x[e][i]` (`u_e = sum_i gamma_i x[e][i]`).
//! Products of a binary with a bounded continuous quantity are replaced by
//! Glover variables (`z = x * eta`, `y = x * rho`), which makes the sample
//! trajectories and the dual feasibility rows linear. The only bilinear term
//! left, `nu * rho` in the objective, is relaxed with McCormick envelopes in
//! the upper-bounding problem. Fixing `x` instead yields the lower-bounding
//! LP, whose optimum is the certificate of that profile.
//!
//! Dual variables per sample `l`, edge `e` and step `t = 1..T`:
//! `mu`, `nu` (the 1-norm dual, `|nu| <= lambda`) and `eta >= 0` (dual of the
//! box support, `min f_bar rho_bar eta s.t. K_e(u) eta >= mu`).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lp::{
    solve_lp, LpModel, LpSolution, LpStatus, MilpModel, RowSense, VarId,
};
use crate::network::{HighwayScenario, SpeedProfile};
use crate::sampling::{DisturbanceSample, SampleSet, Trajectory, TrajectoryBatch};

/// Bounds `g_lo * x <= z <= g_hi * x` and `g - g_hi (1 - x) <= z <= g - g_lo (1 - x)`
/// that force `z = x * g` for binary `x` and `g in [g_lo, g_hi]`.
pub fn glover_linearize(
    model: &mut MilpModel,
    name: &str,
    x: VarId,
    g: &[(VarId, f64)],
    g_lo: f64,
    g_hi: f64,
) -> Result<VarId> {
    if !(g_lo.is_finite() && g_hi.is_finite()) || g_lo > g_hi {
        return Err(Error::ModelBuild(format!(
            "{name}: Glover bounds [{g_lo}, {g_hi}] must be finite and ordered"
        )));
    }
    let z = model.add_var(name, g_lo.min(0.0), g_hi.max(0.0), 0.0);
    emit_glover_rows(model, name, z, x, g, g_lo, g_hi, GloverRows::Full);
    Ok(z)
}

/// One product per grid speed of an edge, tied together by `sum_i z_i = g`.
fn glover_block(
    model: &mut MilpModel,
    prefix: &str,
    tag: &str,
    xs: &[VarId],
    g: VarId,
    (g_lo, g_hi): (f64, f64),
    rows: GloverRows,
) -> Vec<VarId> {
    let zs: Vec<VarId> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let name = format!("{prefix}[{tag},{}]", i + 1);
            let z = model.add_var(&name, g_lo.min(0.0), g_hi.max(0.0), 0.0);
            emit_glover_rows(model, &name, z, x, &[(g, 1.0)], g_lo, g_hi, rows);
            z
        })
        .collect();
    let mut sum = vec![(g, -1.0)];
    sum.extend(zs.iter().map(|&z| (z, 1.0)));
    model.add_row(format!("{prefix}sum[{tag}]"), sum, RowSense::Eq, 0.0);
    zs
}

#[allow(clippy::too_many_arguments)]
fn emit_glover_rows(
    model: &mut MilpModel,
    name: &str,
    z: VarId,
    x: VarId,
    g: &[(VarId, f64)],
    g_lo: f64,
    g_hi: f64,
    rows: GloverRows,
) {
    // with g_lo = 0 the first row is the column bound z >= 0
    if g_lo != 0.0 {
        model.add_row(format!("glover_lo[{name}]"), [(z, 1.0), (x, -g_lo)], RowSense::Ge, 0.0);
    }
    model.add_row(format!("glover_hi[{name}]"), [(z, 1.0), (x, -g_hi)], RowSense::Le, 0.0);
    if rows == GloverRows::Bounds {
        return;
    }
    // z >= g - g_hi + g_hi x
    let mut terms = vec![(z, 1.0), (x, -g_hi)];
    terms.extend(g.iter().map(|&(v, c)| (v, -c)));
    model.add_row(format!("glover_on_lo[{name}]"), terms, RowSense::Ge, -g_hi);
    // z <= g - g_lo + g_lo x
    let mut terms = vec![(z, 1.0), (x, -g_lo)];
    terms.extend(g.iter().map(|&(v, c)| (v, -c)));
    model.add_row(format!("glover_on_hi[{name}]"), terms, RowSense::Le, -g_lo);
}

/// Per-step density bounds valid for every admissible speed profile.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBounds {
    pub lower: Trajectory,
    pub upper: Trajectory,
}

/// Interval propagation of the linear dynamics over the admissible bands.
///
/// With `h u <= 1` the update is monotone in every density, so each side
/// only needs the extreme speeds of the bands.
pub fn density_bounds(scenario: &HighwayScenario, sample: &DisturbanceSample) -> DensityBounds {
    let n = scenario.n();
    let horizon = scenario.horizon();
    let h = scenario.h();
    let bands = scenario.bands();
    let mut lower = Trajectory::zeros(n, horizon);
    let mut upper = Trajectory::zeros(n, horizon);
    let mut lo = sample.rho0.clone();
    let mut hi = sample.rho0.clone();
    let (mut next_lo, mut next_hi) = (vec![0.0; n], vec![0.0; n]);
    let keep = |r: f64, u: f64| (1.0 - h * u) * r;
    for t in 0..horizon {
        for e in 0..n {
            let (ul, uh) = (bands[e].u_lo, bands[e].u_hi);
            let own_lo = keep(lo[e], ul).min(keep(lo[e], uh));
            let own_hi = keep(hi[e], ul).max(keep(hi[e], uh));
            let (in_lo, in_hi) = if e == 0 {
                (0.0, 0.0)
            } else {
                let (pl, ph) = (bands[e - 1].u_lo, bands[e - 1].u_hi);
                (
                    (h * pl * lo[e - 1]).min(h * ph * lo[e - 1]),
                    (h * pl * hi[e - 1]).max(h * ph * hi[e - 1]),
                )
            };
            let w = h * sample.omega[e][t];
            next_lo[e] = own_lo + in_lo + w;
            next_hi[e] = own_hi + in_hi + w;
        }
        std::mem::swap(&mut lo, &mut next_lo);
        std::mem::swap(&mut hi, &mut next_hi);
        for e in 0..n {
            lower.set(e, t + 1, lo[e]);
            upper.set(e, t + 1, hi[e]);
        }
    }
    DensityBounds { lower, upper }
}

/// How the Glover and McCormick rows bound the densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityBoundMode {
    /// `[0, rho_bar_e]`, widened to the propagated interval whenever some
    /// trajectory can leave it.
    #[default]
    Physical,
    /// The propagated interval alone; tighter relaxation.
    Propagated,
}

/// Which Glover rows the P4 builder emits for `z = x * eta` and `y = x * rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GloverRows {
    /// Only `g_lo x <= z <= g_hi x`. Together with the one-hot row and
    /// `sum_i z_i = g` these imply the other two rows, so the feasible set
    /// and the LP relaxation are unchanged.
    #[default]
    Bounds,
    /// All four rows per product.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuildOptions {
    pub density_bounds: DensityBoundMode,
    pub glover_rows: GloverRows,
    /// Adds `(1/N) sum dist(rho, [0, rho^c(u)]) <= eps` so that profiles
    /// with an empty ambiguity set (certificate `-inf`) are infeasible in
    /// every upper-bounding problem. Off by default.
    pub screen_invalid: bool,
}

/// Column indices of the reformulated problem.
#[derive(Debug, Clone)]
pub struct P4Layout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub samples: usize,
    /// `x[e][i]`.
    pub x: Vec<Vec<VarId>>,
    pub lambda: VarId,
    /// Indexed by [`P4Layout::slot`].
    pub rho: Vec<VarId>,
    pub mu: Vec<VarId>,
    pub nu: Vec<VarId>,
    pub eta: Vec<VarId>,
    /// `z[slot][i] = x[e][i] * eta[slot]`.
    pub z: Vec<Vec<VarId>>,
    /// `y[slot][i] = x[e][i] * rho[slot]`; empty at `t = T`, where no
    /// dynamics row needs it.
    pub y: Vec<Vec<VarId>>,
    /// Density bounds used by the Glover and McCormick rows.
    pub rho_lo: Vec<f64>,
    pub rho_hi: Vec<f64>,
}

impl P4Layout {
    /// Flat index of `(l, e, t)`, `t` in `1..=T`.
    pub fn slot(&self, l: usize, e: usize, t: usize) -> usize {
        (l * self.n + e) * self.horizon + t - 1
    }

    pub fn slots(&self) -> usize {
        self.samples * self.n * self.horizon
    }

    /// Grid index chosen for each edge by a binary point.
    pub fn decode(&self, values: &[f64]) -> Vec<usize> {
        self.x
            .iter()
            .map(|row| {
                let mut best = 0;
                for (i, v) in row.iter().enumerate() {
                    if values[v.0] > values[row[best].0] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// Rows, columns and nonzeros of a model, grouped by row family.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelStats {
    pub rows: usize,
    pub cols: usize,
    pub binaries: usize,
    pub nonzeros: usize,
    /// `family -> (rows, nonzeros)`.
    pub blocks: BTreeMap<String, (usize, usize)>,
}

impl ModelStats {
    pub fn of(model: &MilpModel) -> Self {
        let mut blocks: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for r in model.lp.rows() {
            let family = r.name.split('[').next().unwrap_or("").to_string();
            let entry = blocks.entry(family).or_default();
            entry.0 += 1;
            entry.1 += r.terms.len();
        }
        Self {
            rows: model.lp.num_rows(),
            cols: model.lp.num_vars(),
            binaries: model.num_binaries(),
            nonzeros: model.lp.num_nonzeros(),
            blocks,
        }
    }

    pub fn block_rows(&self, family: &str) -> usize {
        self.blocks.get(family).map_or(0, |b| b.0)
    }
}

/// The exact mixed-binary system (no McCormick rows, no cuts). Its objective
/// holds every term except the bilinear `(1/N) sum nu * rho`.
#[derive(Debug, Clone)]
pub struct P4System {
    pub model: MilpModel,
    pub layout: P4Layout,
    pub epsilon: f64,
    pub eta_bar: f64,
    /// Bounds `[nu_lo, nu_bar_e]` per edge.
    pub nu_lo: f64,
    pub nu_hi: Vec<f64>,
}

/// Assembles the binary encoding, Glover blocks, linearised dynamics and
/// dual feasibility rows for every sample.
pub fn build_p4_constraints(
    scenario: &HighwayScenario,
    samples: &SampleSet,
    opts: &BuildOptions,
) -> Result<P4System> {
    samples.check_against(scenario)?;
    let n = scenario.n();
    let m = scenario.gamma().len();
    let horizon = scenario.horizon();
    let big_n = samples.len();
    let gamma = scenario.gamma();
    let h = scenario.h();
    let eta_bar = scenario.eta_bar();
    let epsilon = scenario.epsilon();
    let inv_n = 1.0 / big_n as f64;
    let inv_t = 1.0 / horizon as f64;

    let mut model = MilpModel::new();
    let x: Vec<Vec<VarId>> = (0..n)
        .map(|e| (0..m).map(|i| model.add_binary(format!("x[{},{}]", e + 1, i + 1), 0.0)).collect())
        .collect();
    for e in 0..n {
        let band = scenario.band(e);
        model.add_row(format!("onehot[{}]", e + 1), x[e].iter().map(|&v| (v, 1.0)), RowSense::Eq, 1.0);
        let speed: Vec<(VarId, f64)> = x[e].iter().zip(gamma).map(|(&v, &g)| (v, g)).collect();
        model.add_row(format!("speed_lo[{}]", e + 1), speed.clone(), RowSense::Ge, band.u_lo);
        model.add_row(format!("speed_hi[{}]", e + 1), speed, RowSense::Le, band.u_hi);
    }
    let lambda = model.add_var("lambda", 0.0, f64::INFINITY, -epsilon);

    let slots = big_n * n * horizon;
    let mut rho_lo = vec![0.0; slots];
    let mut rho_hi = vec![0.0; slots];
    let mut any_negative = false;
    for (l, s) in samples.samples().iter().enumerate() {
        let b = density_bounds(scenario, s);
        for e in 0..n {
            for t in 1..=horizon {
                let k = (l * n + e) * horizon + t - 1;
                let (lo, hi) = (b.lower.at(e, t), b.upper.at(e, t));
                let (lo, hi) = match opts.density_bounds {
                    DensityBoundMode::Physical => (lo.min(0.0), hi.max(scenario.segment(e).rho_bar())),
                    DensityBoundMode::Propagated => (lo, hi),
                };
                any_negative |= lo < 0.0;
                rho_lo[k] = lo;
                rho_hi[k] = hi;
            }
        }
    }
    // nu >= 0 is w.l.o.g. while densities stay nonnegative; otherwise nu can
    // go down to -lambda, and an optimal lambda never exceeds max_e u_e / T
    let u_top = scenario.bands().iter().map(|b| b.u_hi).fold(0.0, f64::max);
    let nu_lo = if any_negative { -u_top * inv_t } else { 0.0 };
    let nu_hi: Vec<f64> = scenario
        .segments()
        .iter()
        .map(|s| s.u_bar() * (inv_t + s.rho_bar() * eta_bar))
        .collect();

    let mut layout = P4Layout {
        n,
        m,
        horizon,
        samples: big_n,
        x: x.clone(),
        lambda,
        rho: Vec::with_capacity(slots),
        mu: Vec::with_capacity(slots),
        nu: Vec::with_capacity(slots),
        eta: Vec::with_capacity(slots),
        z: Vec::with_capacity(slots),
        y: Vec::with_capacity(slots),
        rho_lo,
        rho_hi,
    };

    for l in 0..big_n {
        for e in 0..n {
            let seg = scenario.segment(e);
            for t in 1..=horizon {
                let tag = format!("{},{},{}", l + 1, e + 1, t);
                let k = layout.slot(l, e, t);
                let (lo, hi) = (layout.rho_lo[k], layout.rho_hi[k]);
                layout.rho.push(model.add_var(format!("rho[{tag}]"), lo, hi, 0.0));
                layout.mu.push(model.add_var(format!("mu[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0));
                layout.nu.push(model.add_var(format!("nu[{tag}]"), nu_lo, nu_hi[e], 0.0));
                layout.eta.push(model.add_var(
                    format!("eta[{tag}]"),
                    0.0,
                    eta_bar,
                    -inv_n * seg.f_bar() * seg.rho_bar(),
                ));
            }
        }
    }

    for l in 0..big_n {
        for e in 0..n {
            let seg = scenario.segment(e);
            let slope = seg.rho_bar() - seg.free_flow_critical_density();
            for t in 1..=horizon {
                let k = layout.slot(l, e, t);
                let tag = format!("{},{},{}", l + 1, e + 1, t);
                let (eta, mu, nu) = (layout.eta[k], layout.mu[k], layout.nu[k]);

                let zs = glover_block(&mut model, "z", &tag, &x[e], eta, (0.0, eta_bar), opts.glover_rows);

                // f_bar eta + sum_i gamma_i (rho_bar - f_bar/u_bar) z_i - mu >= 0
                let mut d1 = vec![(eta, seg.f_bar()), (mu, -1.0)];
                d1.extend(zs.iter().zip(gamma).map(|(&z, &g)| (z, g * slope)));
                model.add_row(format!("dual1[{tag}]"), d1, RowSense::Ge, 0.0);

                // nu - mu = (1/T) sum_i gamma_i x_i
                let mut d2 = vec![(nu, 1.0), (mu, -1.0)];
                d2.extend(x[e].iter().zip(gamma).map(|(&v, &g)| (v, -g * inv_t)));
                model.add_row(format!("dual2[{tag}]"), d2, RowSense::Eq, 0.0);

                model.add_row(format!("normcap_hi[{tag}]"), [(nu, 1.0), (lambda, -1.0)], RowSense::Le, 0.0);
                model.add_row(format!("normcap_lo[{tag}]"), [(nu, 1.0), (lambda, 1.0)], RowSense::Ge, 0.0);

                layout.z.push(zs);
            }
        }
    }

    // y = x * rho for t = 1..T-1, then the dynamics with y(0) = rho(0) x
    for l in 0..big_n {
        for e in 0..n {
            for t in 1..=horizon {
                let k = layout.slot(l, e, t);
                let ys = if t < horizon {
                    let tag = format!("{},{},{}", l + 1, e + 1, t);
                    let bounds = (layout.rho_lo[k], layout.rho_hi[k]);
                    glover_block(&mut model, "y", &tag, &x[e], layout.rho[k], bounds, opts.glover_rows)
                } else {
                    Vec::new()
                };
                layout.y.push(ys);
            }
        }
    }
    for (l, s) in samples.samples().iter().enumerate() {
        for e in 0..n {
            for t in 0..horizon {
                // rho_e(t+1) - rho_e(t) - h sum_i gamma_i (y_{e-1,i}(t) - y_{e,i}(t)) = h omega_e(t)
                let next = layout.rho[layout.slot(l, e, t + 1)];
                let mut terms = vec![(next, 1.0)];
                let mut rhs = h * s.omega[e][t];
                if t == 0 {
                    rhs += s.rho0[e];
                    for i in 0..m {
                        terms.push((x[e][i], h * gamma[i] * s.rho0[e]));
                        if e > 0 {
                            terms.push((x[e - 1][i], -h * gamma[i] * s.rho0[e - 1]));
                        }
                    }
                } else {
                    let cur = layout.slot(l, e, t);
                    terms.push((layout.rho[cur], -1.0));
                    for i in 0..m {
                        terms.push((layout.y[cur][i], h * gamma[i]));
                        if e > 0 {
                            let up = layout.slot(l, e - 1, t);
                            terms.push((layout.y[up][i], -h * gamma[i]));
                        }
                    }
                }
                model.add_row(
                    format!("dynamics[{},{},{}]", l + 1, e + 1, t + 1),
                    terms,
                    RowSense::Eq,
                    rhs,
                );
            }
        }
    }

    if opts.screen_invalid {
        add_screening_rows(&mut model, scenario, &layout, epsilon);
    }

    Ok(P4System {
        model,
        layout,
        epsilon,
        eta_bar,
        nu_lo,
        nu_hi,
    })
}

/// `d >= rho - sum_i rho^c(gamma_i) x_i`, `d >= -rho`, `d >= 0` per slot and
/// `sum d <= N eps`: for integral `x` exactly the condition that the
/// certificate's dual function does not grow without bound.
fn add_screening_rows(model: &mut MilpModel, scenario: &HighwayScenario, layout: &P4Layout, epsilon: f64) {
    let mut total = Vec::with_capacity(layout.slots());
    for l in 0..layout.samples {
        for e in 0..layout.n {
            let seg = scenario.segment(e);
            for t in 1..=layout.horizon {
                let k = layout.slot(l, e, t);
                let tag = format!("{},{},{}", l + 1, e + 1, t);
                let d = model.add_var(format!("dist[{tag}]"), 0.0, f64::INFINITY, 0.0);
                let mut above = vec![(d, 1.0), (layout.rho[k], -1.0)];
                above.extend(
                    layout.x[e]
                        .iter()
                        .zip(scenario.gamma())
                        .map(|(&v, &g)| (v, seg.critical_density(g))),
                );
                model.add_row(format!("screen_hi[{tag}]"), above, RowSense::Ge, 0.0);
                if layout.rho_lo[k] < 0.0 {
                    model.add_row(format!("screen_lo[{tag}]"), [(d, 1.0), (layout.rho[k], 1.0)], RowSense::Ge, 0.0);
                }
                total.push((d, 1.0));
            }
        }
    }
    model.add_row("screen_total", total, RowSense::Le, layout.samples as f64 * epsilon);
}

/// Profiles already visited by the search, each excluded by one canonical
/// integer cut.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegerCutPool {
    visited: Vec<Vec<usize>>,
}

impl IntegerCutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, grid_indices: Vec<usize>) {
        self.visited.push(grid_indices);
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn visited(&self) -> &[Vec<usize>] {
        &self.visited
    }

    pub fn contains(&self, grid_indices: &[usize]) -> bool {
        self.visited.iter().any(|v| v == grid_indices)
    }

    /// `sum_{(e,i) in Omega} x - sum_{(e,i) not in Omega} x <= |Omega| - 1`.
    pub fn cut_terms(layout: &P4Layout, grid_indices: &[usize]) -> (Vec<(VarId, f64)>, f64) {
        let mut terms = Vec::with_capacity(layout.n * layout.m);
        for (e, row) in layout.x.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                terms.push((v, if i == grid_indices[e] { 1.0 } else { -1.0 }));
            }
        }
        (terms, grid_indices.len() as f64 - 1.0)
    }

    /// Left-hand side of the cut for `omega` at a binary point given as
    /// grid indices.
    pub fn cut_lhs(omega: &[usize], point: &[usize]) -> f64 {
        omega
            .iter()
            .zip(point)
            .map(|(a, b)| if a == b { 1.0 } else { -1.0 })
            .sum()
    }
}

/// The upper-bounding MILP of one iteration.
#[derive(Debug, Clone)]
pub struct Ubp {
    pub model: MilpModel,
    /// McCormick variables `s ~ nu * rho`, indexed by slot.
    pub s: Vec<VarId>,
}

/// Adds the McCormick envelopes of `s = nu * rho`, the `(1/N) sum s`
/// objective term and one canonical cut per visited profile.
pub fn build_ubp(base: &P4System, cuts: &IntegerCutPool) -> Ubp {
    let mut model = base.model.clone();
    let layout = &base.layout;
    let inv_n = 1.0 / layout.samples as f64;
    let mut s_vars = Vec::with_capacity(layout.slots());
    for l in 0..layout.samples {
        for e in 0..layout.n {
            for t in 1..=layout.horizon {
                let k = layout.slot(l, e, t);
                let (nu, rho) = (layout.nu[k], layout.rho[k]);
                let (nl, nh) = (base.nu_lo, base.nu_hi[e]);
                let (rl, rh) = (layout.rho_lo[k], layout.rho_hi[k]);
                let tag = format!("{},{},{}", l + 1, e + 1, t);
                let s = model.add_var(format!("s[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, inv_n);
                mccormick_rows(&mut model, &tag, s, nu, rho, (nl, nh), (rl, rh));
                s_vars.push(s);
            }
        }
    }
    for (p, omega) in cuts.visited().iter().enumerate() {
        let (terms, rhs) = IntegerCutPool::cut_terms(layout, omega);
        model.add_row(format!("cut[{}]", p + 1), terms, RowSense::Le, rhs);
    }
    Ubp { model, s: s_vars }
}

/// The four McCormick rows of `s = nu * rho` over `[nl, nh] x [rl, rh]`.
pub fn mccormick_rows(
    model: &mut MilpModel,
    tag: &str,
    s: VarId,
    nu: VarId,
    rho: VarId,
    (nl, nh): (f64, f64),
    (rl, rh): (f64, f64),
) {
    // s >= nl rho + rl nu - nl rl ; s >= nh rho + rh nu - nh rh
    model.add_row(format!("mccormick_1[{tag}]"), [(s, 1.0), (rho, -nl), (nu, -rl)], RowSense::Ge, -nl * rl);
    model.add_row(format!("mccormick_2[{tag}]"), [(s, 1.0), (rho, -nh), (nu, -rh)], RowSense::Ge, -nh * rh);
    // s <= nh rho + rl nu - nh rl ; s <= nl rho + rh nu - nl rh
    model.add_row(format!("mccormick_3[{tag}]"), [(s, 1.0), (rho, -nh), (nu, -rl)], RowSense::Le, -nh * rl);
    model.add_row(format!("mccormick_4[{tag}]"), [(s, 1.0), (rho, -nl), (nu, -rh)], RowSense::Le, -nl * rh);
}

/// Column indices of a lower-bounding LP.
#[derive(Debug, Clone)]
pub struct LbpLayout {
    pub n: usize,
    pub horizon: usize,
    pub samples: usize,
    pub lambda: VarId,
    pub mu: Vec<VarId>,
    pub nu: Vec<VarId>,
    pub eta: Vec<VarId>,
    pub z: Vec<Vec<VarId>>,
}

impl LbpLayout {
    pub fn slot(&self, l: usize, e: usize, t: usize) -> usize {
        (l * self.n + e) * self.horizon + t - 1
    }
}

#[derive(Debug, Clone)]
pub struct Lbp {
    pub model: LpModel,
    pub layout: LbpLayout,
}

/// The dual problem for a fixed profile `u`, with its sample trajectories as
/// data. `eta` has no upper bound here: with `x` fixed no big-M is needed.
pub fn build_lbp(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    batch: &TrajectoryBatch,
    epsilon: f64,
) -> Result<Lbp> {
    if batch.speeds.as_slice() != u.speeds() || batch.n() != scenario.n() {
        return Err(Error::Dimension("trajectories do not belong to this profile".into()));
    }
    let n = scenario.n();
    let m = scenario.gamma().len();
    let horizon = scenario.horizon();
    let big_n = batch.len();
    let gamma = scenario.gamma();
    let inv_n = 1.0 / big_n as f64;
    let inv_t = 1.0 / horizon as f64;
    let active = u.grid_indices();

    let mut model = LpModel::new();
    let lambda = model.add_var("lambda", 0.0, f64::INFINITY, -epsilon);
    let slots = big_n * n * horizon;
    let mut layout = LbpLayout {
        n,
        horizon,
        samples: big_n,
        lambda,
        mu: Vec::with_capacity(slots),
        nu: Vec::with_capacity(slots),
        eta: Vec::with_capacity(slots),
        z: Vec::with_capacity(slots),
    };
    for (l, tr) in batch.trajectories.iter().enumerate() {
        for e in 0..n {
            let seg = scenario.segment(e);
            let slope = seg.rho_bar() - seg.free_flow_critical_density();
            for t in 1..=horizon {
                let tag = format!("{},{},{}", l + 1, e + 1, t);
                let r = tr.at(e, t);
                let mu = model.add_var(format!("mu[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
                let nu = model.add_var(format!("nu[{tag}]"), f64::NEG_INFINITY, f64::INFINITY, inv_n * r);
                let eta = model.add_var(
                    format!("eta[{tag}]"),
                    0.0,
                    f64::INFINITY,
                    -inv_n * seg.f_bar() * seg.rho_bar(),
                );
                let zs: Vec<VarId> = (0..m)
                    .map(|i| {
                        let upper = if i == active[e] { f64::INFINITY } else { 0.0 };
                        model.add_var(format!("z[{tag},{}]", i + 1), 0.0, upper, 0.0)
                    })
                    .collect();
                model.add_row(format!("zfix[{tag}]"), [(zs[active[e]], 1.0), (eta, -1.0)], RowSense::Eq, 0.0);
                let mut d1 = vec![(eta, seg.f_bar()), (mu, -1.0)];
                d1.extend(zs.iter().zip(gamma).map(|(&z, &g)| (z, g * slope)));
                model.add_row(format!("dual1[{tag}]"), d1, RowSense::Ge, 0.0);
                model.add_row(format!("dual2[{tag}]"), [(nu, 1.0), (mu, -1.0)], RowSense::Eq, u.speeds()[e] * inv_t);
                model.add_row(format!("normcap_hi[{tag}]"), [(nu, 1.0), (lambda, -1.0)], RowSense::Le, 0.0);
                model.add_row(format!("normcap_lo[{tag}]"), [(nu, 1.0), (lambda, 1.0)], RowSense::Ge, 0.0);
                layout.mu.push(mu);
                layout.nu.push(nu);
                layout.eta.push(eta);
                layout.z.push(zs);
            }
        }
    }
    Ok(Lbp { model, layout })
}

/// Optimal LBP value, with `-inf` for an unbounded (or infeasible) LP.
pub fn lbp_value(solution: &LpSolution) -> f64 {
    match solution.status {
        LpStatus::Optimal => solution.objective,
        LpStatus::Unbounded | LpStatus::Infeasible => f64::NEG_INFINITY,
    }
}

/// Solves the LBP of `u`; returns its value (or `-inf`) and the raw solution.
pub fn solve_lbp(
    scenario: &HighwayScenario,
    u: &SpeedProfile,
    batch: &TrajectoryBatch,
    epsilon: f64,
) -> Result<(f64, LpSolution)> {
    let lbp = build_lbp(scenario, u, batch, epsilon)?;
    let sol = solve_lp(&lbp.model)?;
    Ok((lbp_value(&sol), sol))
}

/// `min sum f_bar rho_bar eta  s.t.  K_e(u_e) eta >= mu, eta >= 0` over all
/// `(e, t)`, with `mu[e][t]` given.
pub fn support_function_lp(scenario: &HighwayScenario, u: &SpeedProfile, mu: &[Vec<f64>]) -> Result<LpModel> {
    if mu.len() != scenario.n() {
        return Err(Error::Dimension("mu must have one row per edge".into()));
    }
    let mut model = LpModel::new();
    for (e, row) in mu.iter().enumerate() {
        let seg = scenario.segment(e);
        let k = seg.dual_box_coefficient(u.speeds()[e]);
        for (t, &m) in row.iter().enumerate() {
            let eta = model.add_var(format!("eta[{},{}]", e + 1, t + 1), 0.0, f64::INFINITY, -seg.f_bar() * seg.rho_bar());
            model.add_row(format!("support[{},{}]", e + 1, t + 1), [(eta, k)], RowSense::Ge, m);
        }
    }
    Ok(model)
}

/// Closed form of [`support_function_lp`]: `sum rho^c_e(u_e) max(0, mu)`.
pub fn support_function_closed_form(scenario: &HighwayScenario, u: &SpeedProfile, mu: &[Vec<f64>]) -> f64 {
    mu.iter()
        .enumerate()
        .map(|(e, row)| {
            let c = scenario.segment(e).critical_density(u.speeds()[e]);
            row.iter().map(|&m| c * m.max(0.0)).sum::<f64>()
        })
        .sum()
}
