//! Sparse linear and mixed-binary models, always in maximisation form.
//!
//! Models are assembled here and handed to the `microlp` simplex and
//! branch-and-bound engine through [`solve_lp`] and [`solve_milp`], which
//! equilibrate rows and continuous columns with power-of-two factors,
//! turn singleton rows on continuous variables into bounds, and re-check
//! every returned point against the unscaled rows.

mod backend;
mod format;

use std::time::Duration;

pub use backend::{solve_lp, solve_milp};
pub use format::write_lp;

use crate::error::{Error, Result};

/// Index of a model column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `max c^T x` subject to sparse rows and column bounds (`+-inf` allowed).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> VarId {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.push(obj);
        VarId(self.names.len() - 1)
    }

    /// Adds a row; repeated columns are merged and zero coefficients dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) {
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.rows.push(Row {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
    }

    pub fn set_objective(&mut self, v: VarId, coeff: f64) {
        self.objective[v.0] = coeff;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.lower[v.0] = lower;
        self.upper[v.0] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).sum()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.0], self.upper[v.0])
    }

    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    /// `c^T x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`, each row measured after
    /// dividing by its largest absolute coefficient.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for r in &self.rows {
            let scale = r.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max).max(1e-300);
            let lhs: f64 = r.terms.iter().map(|&(v, c)| c * x[v.0]).sum();
            let viol = match r.sense {
                RowSense::Le => lhs - r.rhs,
                RowSense::Ge => r.rhs - lhs,
                RowSense::Eq => (lhs - r.rhs).abs(),
            };
            worst = worst.max(viol / scale);
        }
        worst
    }

    /// Checks finiteness and that every row references declared columns.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || !self.objective[j].is_finite() {
                return Err(Error::ModelBuild(format!("column {} has NaN data", self.names[j])));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(Error::ModelBuild(format!("column {} has an empty domain", self.names[j])));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(Error::ModelBuild(format!("row {} has a non-finite rhs", r.name)));
            }
            for &(v, c) in &r.terms {
                if v.0 >= n {
                    return Err(Error::ModelBuild(format!("row {} references column {}", r.name, v.0)));
                }
                if !c.is_finite() {
                    return Err(Error::ModelBuild(format!("row {} has a non-finite coefficient", r.name)));
                }
            }
        }
        Ok(())
    }
}

/// An [`LpModel`] with some columns restricted to `{0, 1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub lp: LpModel,
    binary: Vec<bool>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> VarId {
        self.binary.push(false);
        self.lp.add_var(name, lower, upper, obj)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.binary.push(true);
        self.lp.add_var(name, 0.0, 1.0, obj)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) {
        self.lp.add_row(name, terms, sense, rhs);
    }

    pub fn is_binary(&self, v: VarId) -> bool {
        self.binary[v.0]
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.binary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| VarId(j))
    }

    /// `true` at every binary column, for [`write_lp`].
    pub fn binary_mask(&self) -> &[bool] {
        &self.binary
    }

    pub fn num_binaries(&self) -> usize {
        self.binary.iter().filter(|&&b| b).count()
    }

    pub fn validate(&self) -> Result<()> {
        self.lp.validate()?;
        for v in self.binaries() {
            let (lo, hi) = self.lp.bounds(v);
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::ModelBuild(format!(
                    "binary {} has bounds outside [0, 1]",
                    self.lp.name(v)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `c^T x` recomputed from `values`; `-inf` if infeasible, `+inf` if unbounded.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Largest scaled row or bound violation of `values`.
    pub max_violation: f64,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Stopping rules for [`solve_milp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    /// Relative gap `(bound - incumbent) / |incumbent|` accepted as optimal.
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<u64>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap_tol: 0.0,
            time_limit: None,
            node_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    /// Incumbent proven optimal within `gap_tol`.
    Optimal,
    /// A limit stopped the search with an incumbent in hand.
    Feasible,
    /// A limit stopped the search before any incumbent was found.
    NoIncumbent,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Incumbent objective, `-inf` without an incumbent.
    pub objective: f64,
    /// Incumbent point; empty without an incumbent.
    pub values: Vec<f64>,
    /// Best proven upper bound on the optimum (`+inf` if none is known).
    pub best_bound: f64,
    /// Branch-and-bound nodes solved, counting the root relaxation.
    pub nodes: u64,
    pub lp_iterations: u64,
    pub elapsed: Duration,
    pub max_violation: f64,
}

impl MilpResult {
    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}
