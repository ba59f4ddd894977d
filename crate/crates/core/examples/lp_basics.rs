//! The model layer on its own: a small LP and a knapsack-style MILP.

use vsl_core::lp::{solve_lp, solve_milp, LpModel, MilpModel, MilpOptions, RowSense};

pub fn main() -> vsl_core::Result<()> {
    // max 3x + 2y  s.t.  x + y <= 4,  x + 3y <= 6,  0 <= x <= 3
    let mut lp = LpModel::new();
    let x = lp.add_var("x", 0.0, 3.0, 3.0);
    let y = lp.add_var("y", 0.0, f64::INFINITY, 2.0);
    lp.add_row("cap", [(x, 1.0), (y, 1.0)], RowSense::Le, 4.0);
    lp.add_row("mix", [(x, 1.0), (y, 3.0)], RowSense::Le, 6.0);
    let sol = solve_lp(&lp)?;
    println!("LP: {:?}, objective {}, x = {}, y = {}", sol.status, sol.objective, sol.value(x), sol.value(y));

    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let weights = [5.0, 7.0, 4.0, 4.0, 2.0];
    let mut milp = MilpModel::new();
    let picks: Vec<_> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| milp.add_binary(format!("pick[{i}]"), v))
        .collect();
    milp.add_row("weight", picks.iter().copied().zip(weights), RowSense::Le, 12.0);
    let r = solve_milp(&milp, &MilpOptions::default())?;
    let chosen: Vec<usize> = picks.iter().enumerate().filter(|(_, &p)| r.value(p) > 0.5).map(|(i, _)| i).collect();
    println!("MILP: {:?}, objective {}, bound {}, items {chosen:?}, {} nodes", r.status, r.objective, r.best_bound, r.nodes);
    Ok(())
}
