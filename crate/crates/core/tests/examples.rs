//! The quick examples must keep running.

#[path = "../examples/fundamental_diagram.rs"]
mod fundamental_diagram;
#[path = "../examples/lp_basics.rs"]
mod lp_basics;
#[path = "../examples/solve_small.rs"]
mod solve_small;

#[test]
fn fundamental_diagram_runs() {
    fundamental_diagram::main().unwrap();
}

#[test]
fn lp_basics_runs() {
    lp_basics::main().unwrap();
}

#[test]
fn solve_small_runs() {
    solve_small::main().unwrap();
}
