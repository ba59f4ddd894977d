//! Plain-text dump in the CPLEX LP layout, readable by most external solvers.

use std::io::Write;

use super::{LpModel, RowSense};

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn term(out: &mut String, first: bool, c: f64, name: &str) {
    if c < 0.0 {
        out.push_str(&format!(" - {} {}", -c, name));
    } else if first {
        out.push_str(&format!(" {c} {name}"));
    } else {
        out.push_str(&format!(" + {c} {name}"));
    }
}

/// Writes `model` with binaries listed in a `Binaries` section. Column and
/// row names are made LP-safe; duplicates get their index appended.
pub fn write_lp<W: Write>(model: &LpModel, binaries: &[bool], mut w: W) -> std::io::Result<()> {
    let names: Vec<String> = (0..model.num_vars())
        .map(|j| format!("{}_{j}", sanitize(&model.names[j])))
        .collect();
    writeln!(w, "\\ {} columns, {} rows", model.num_vars(), model.num_rows())?;
    writeln!(w, "Maximize")?;
    let mut line = String::from(" obj:");
    let mut first = true;
    for (j, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut line, first, c, &names[j]);
            first = false;
        }
    }
    if first {
        line.push_str(" 0");
    }
    writeln!(w, "{line}")?;
    writeln!(w, "Subject To")?;
    for (i, r) in model.rows().iter().enumerate() {
        let mut line = format!(" {}_{i}:", sanitize(&r.name));
        let mut first = true;
        for &(v, c) in &r.terms {
            term(&mut line, first, c, &names[v.0]);
            first = false;
        }
        if first {
            line.push_str(&format!(" 0 {}", names.first().map_or("x", |s| s.as_str())));
        }
        let op = match r.sense {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        };
        writeln!(w, "{line} {op} {}", r.rhs)?;
    }
    writeln!(w, "Bounds")?;
    for j in 0..model.num_vars() {
        let (lo, hi) = (model.lower[j], model.upper[j]);
        let name = &names[j];
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => writeln!(w, " {name} free")?,
            (true, true) => writeln!(w, " {lo} <= {name} <= {hi}")?,
            (true, false) => writeln!(w, " {name} >= {lo}")?,
            (false, true) => writeln!(w, " -inf <= {name} <= {hi}")?,
        }
    }
    let bins: Vec<&String> = names.iter().zip(binaries).filter(|(_, &b)| b).map(|(n, _)| n).collect();
    if !bins.is_empty() {
        writeln!(w, "Binaries")?;
        for b in bins {
            writeln!(w, " {b}")?;
        }
    }
    writeln!(w, "End")
}
