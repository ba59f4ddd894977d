//! CSV outputs of the command-line tool.
//!
//! Every file starts with `# key=value` comment lines (at least `seed`),
//! followed by a header row whose column names carry their units, e.g.
//! `density_veh_km`. Floats are written in Rust's shortest round-trip form,
//! so parsing a value back yields the same bits; `-inf` marks an invalid
//! certificate.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::certificate::CertificateResult;
use crate::error::{Error, Result};
use crate::issa::SolveReport;
use crate::network::HighwayScenario;
use crate::sampling::{Provenance, SampleSet, Trajectory, TrajectoryBatch};
use crate::validation::{BruteForceResult, ValidationReport};

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const CERTIFICATE_FILE: &str = "certificate.csv";
pub const BREAKPOINTS_FILE: &str = "breakpoints.csv";
pub const RESULT_FILE: &str = "result.csv";
pub const LOG_FILE: &str = "log.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BRUTE_FORCE_FILE: &str = "brute_force.csv";
pub const VALIDATION_SUMMARY_FILE: &str = "validation_summary.csv";
pub const VALIDATION_H_FILE: &str = "validation_h.csv";
pub const VALIDATION_DENSITY_FILE: &str = "validation_density.csv";

/// Comment lines written ahead of the header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Preamble(pub Vec<(String, String)>);

impl Preamble {
    /// Records where the samples came from: `seed` is the generator seed or
    /// `none`, `samples` is `generated`, `inline` or the source directory.
    pub fn for_samples(set: &SampleSet) -> Self {
        let (seed, source) = match set.provenance() {
            Provenance::Generated { seed, .. } => (seed.to_string(), "generated".to_string()),
            Provenance::File(p) => ("none".to_string(), p.display().to_string()),
            Provenance::Inline => ("none".to_string(), "inline".to_string()),
        };
        Preamble(vec![("seed".into(), seed), ("samples".into(), source)])
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// A parsed output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub preamble: Preamble,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column `name` parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::invalid(name, "no such column"))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| Error::invalid(name, format!("`{}` is not a number", r[c])))
            })
            .collect()
    }
}

fn writer(path: &Path, preamble: &Preamble, header: &[&str]) -> Result<csv::Writer<File>> {
    let mut f = File::create(path)?;
    for (k, v) in &preamble.0 {
        writeln!(f, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    Ok(w)
}

fn speeds_field(u: &[f64]) -> String {
    u.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Reads any file written by this module.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut preamble = Preamble::default();
    let mut line = String::new();
    let mut body = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        match line.strip_prefix("# ") {
            Some(kv) if body.is_empty() => {
                let (k, v) = kv
                    .trim_end()
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(path.display().to_string(), "malformed comment line"))?;
                preamble.0.push((k.to_string(), v.to_string()));
            }
            _ => body.push_str(&line),
        }
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(Table { preamble, header, rows })
}

/// One row per `(sample, edge, t)` for `t = 1..=T`.
pub fn write_trajectories(path: &Path, preamble: &Preamble, delta_hours: f64, batch: &TrajectoryBatch) -> Result<()> {
    write_trajectory_rows(path, preamble, delta_hours, &batch.trajectories)
}

/// Same layout as [`write_trajectories`] for any list of trajectories.
pub fn write_trajectory_rows(path: &Path, preamble: &Preamble, delta_hours: f64, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = writer(path, preamble, &["sample", "edge", "t", "time_min", "density_veh_km"])?;
    for (l, tr) in trajectories.iter().enumerate() {
        for e in 0..tr.n() {
            for t in 1..=tr.horizon() {
                w.write_record([
                    (l + 1).to_string(),
                    (e + 1).to_string(),
                    t.to_string(),
                    (t as f64 * delta_hours * 60.0).to_string(),
                    tr.at(e, t).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `certificate.csv` (one row) and `breakpoints.csv` (`lambda, F(lambda)`).
pub fn write_certificate(dir: &Path, preamble: &Preamble, u: &[f64], epsilon: f64, mean_h: f64, cert: &CertificateResult) -> Result<()> {
    let mut w = writer(
        &dir.join(CERTIFICATE_FILE),
        preamble,
        &["u_kmh", "epsilon", "j_hat", "lambda_star", "status", "sample_mean_h"],
    )?;
    w.write_record([
        speeds_field(u),
        epsilon.to_string(),
        cert.value.to_string(),
        cert.lambda_star.to_string(),
        if cert.is_finite() { "finite" } else { "invalid_empty_ambiguity" }.to_string(),
        mean_h.to_string(),
    ])?;
    w.flush()?;
    let mut w = writer(&dir.join(BREAKPOINTS_FILE), preamble, &["lambda", "f_lambda"])?;
    for (l, f) in &cert.breakpoints {
        w.write_record([l.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `result.csv` (one row per edge), `log.csv` (one row per iteration) and
/// `summary.csv`.
pub fn write_solve_report(dir: &Path, preamble: &Preamble, scenario: &HighwayScenario, report: &SolveReport) -> Result<()> {
    let mut w = writer(&dir.join(RESULT_FILE), preamble, &["edge", "speed_kmh", "grid_index", "critical_density_veh_km"])?;
    if let Some(u) = &report.u_best {
        for (e, (&v, &i)) in u.speeds().iter().zip(u.grid_indices()).enumerate() {
            w.write_record([
                (e + 1).to_string(),
                v.to_string(),
                (i + 1).to_string(),
                scenario.segment(e).critical_density(v).to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(
        &dir.join(LOG_FILE),
        preamble,
        &["k", "u_kmh", "ubp_bound", "ub", "obj", "lb", "milp_nodes", "wall_s", "eta_at_bound"],
    )?;
    for r in &report.log {
        w.write_record([
            r.k.to_string(),
            speeds_field(&r.speeds),
            r.ubp_bound.to_string(),
            r.ub.to_string(),
            r.obj.to_string(),
            r.lb.to_string(),
            r.milp_nodes.to_string(),
            r.wall.to_string(),
            r.eta_at_bound.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(
        &dir.join(SUMMARY_FILE),
        preamble,
        &[
            "u_kmh", "j_hat", "ub", "lb", "rel_gap", "termination", "iterations", "discarded", "elapsed_s",
            "ubp_rows", "ubp_cols", "ubp_binaries", "ubp_nonzeros",
        ],
    )?;
    let s = &report.ubp_stats;
    w.write_record([
        report.u_best.as_ref().map(|u| speeds_field(u.speeds())).unwrap_or_default(),
        report.j_hat.to_string(),
        report.ub.to_string(),
        report.lb.to_string(),
        report.relative_gap().to_string(),
        report.termination.label().to_string(),
        report.log.len().to_string(),
        report.discarded().to_string(),
        report.elapsed.as_secs_f64().to_string(),
        s.rows.to_string(),
        s.cols.to_string(),
        s.binaries.to_string(),
        s.nonzeros.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_brute_force(path: &Path, preamble: &Preamble, r: &BruteForceResult) -> Result<()> {
    let mut w = writer(path, preamble, &["u_kmh", "j_star", "evaluated", "invalid"])?;
    w.write_record([
        speeds_field(r.u_star.speeds()),
        r.j_star.to_string(),
        r.evaluated.to_string(),
        r.invalid.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// `validation_summary.csv`, `validation_h.csv` (one row per sample) and
/// `validation_density.csv` (CTM mean density per edge and step).
pub fn write_validation(dir: &Path, preamble: &Preamble, delta_hours: f64, u: &[f64], r: &ValidationReport) -> Result<()> {
    let preamble = match r.seed {
        Some(s) => preamble.clone().with("validation_seed", s),
        None => preamble.clone(),
    };
    let mut w = writer(
        &dir.join(VALIDATION_SUMMARY_FILE),
        &preamble,
        &["u_kmh", "n_val", "t_val", "j_hat", "mean_h", "guarantee_holds", "max_conservation_error"],
    )?;
    w.write_record([
        speeds_field(u),
        r.n_val.to_string(),
        r.horizon_val.to_string(),
        r.j_hat.to_string(),
        r.mean_h.to_string(),
        r.guarantee_holds.to_string(),
        r.max_conservation_error.to_string(),
    ])?;
    w.flush()?;

    let mut w = writer(&dir.join(VALIDATION_H_FILE), &preamble, &["sample", "h"])?;
    for (l, h) in r.h_values.iter().enumerate() {
        w.write_record([(l + 1).to_string(), h.to_string()])?;
    }
    w.flush()?;

    let mut w = writer(
        &dir.join(VALIDATION_DENSITY_FILE),
        &preamble,
        &["edge", "t", "time_min", "mean_density_veh_km", "max_density_veh_km", "critical_density_veh_km"],
    )?;
    for (e, row) in r.mean_density.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            w.write_record([
                (e + 1).to_string(),
                (t + 1).to_string(),
                ((t + 1) as f64 * delta_hours * 60.0).to_string(),
                v.to_string(),
                r.max_density[e].to_string(),
                r.critical_density[e].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Creates `dir` if needed and returns it.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
