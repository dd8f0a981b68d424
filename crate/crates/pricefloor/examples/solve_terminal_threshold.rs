//! Solve the always-trading regime where full liquidation is forced only if
//! the terminal noise price ends at or above the floor. The terminal datum
//! is +inf on [ell, inf) and -K_c below; the solver approximates it from
//! below through an increasing truncation schedule and certifies the
//! monotone convergence.
//!
//! Writes the grid to out-threshold/grid.csv.
//!
//! Run with: cargo run --release --example solve_terminal_threshold

use std::path::Path;

use pricefloor::io::write_grid1;
use pricefloor::model::{analytic_blowup_profile, lower_bound_z};
use pricefloor::pde1d::{solve_singular, SolveSpec, TerminalSpec};

fn main() {
    let k_c = 2.0 / 3.0;
    let ell = -1.4;
    let spec = SolveSpec { nx: 481, nt: 400, ..Default::default() };
    let grid = solve_singular(&spec, &TerminalSpec::ThresholdSingular { ell, neg: -k_c }, 2.0, &|_, _| 1.0)
        .expect("threshold solve");

    println!("truncation certificate (relative sup change, monotone increase):");
    for step in &grid.cert {
        println!("  n = {:>9.0e}: delta {:.3e}, min nodal increase {:+.2e}", step.n, step.sup_delta, step.min_increase);
    }

    // A few slices: the factor interpolates between the lower-bound curve
    // (deep below the floor) and the blow-up envelope (far above it).
    println!("\n{:>6} {:>10} {:>10} {:>10} {:>10} {:>10}", "t", "z(t)", "u(t,-4)", "u(t,ell)", "u(t,0)", "env(t)");
    for &t in &[0.0, 0.25, 0.5, 0.75, 0.9] {
        let z = lower_bound_z(k_c, 2.0, 1.0, t, 1.0).unwrap();
        let env = analytic_blowup_profile(2.0, 1.0, t, 1.0).unwrap();
        println!(
            "{t:6.2} {z:10.4} {:10.4} {:10.4} {:10.4} {env:10.4}",
            grid.interp(t, -4.0),
            grid.interp(t, ell),
            grid.interp(t, 0.0)
        );
    }

    let dir = Path::new("out-threshold");
    std::fs::create_dir_all(dir).unwrap();
    write_grid1(&dir.join("grid.csv"), &grid).unwrap();
    println!("\ngrid written to {}", dir.join("grid.csv").display());
}
