//! Solve the stop-at-first-hit regime: trading stops for good when the noise
//! price first touches the floor, where the factor is pinned at -K_c; full
//! liquidation is forced only if the floor is never hit.
//!
//! Run with: cargo run --release --example solve_stop_at_hit

use pricefloor::pde1d::{solve_regime2, SolveSpec, TerminalSpec};

fn main() {
    let k_c = 2.0 / 3.0;
    let ell = -1.4;
    let spec = SolveSpec { x_min: ell, x_max: 6.0, nx: 481, nt: 400, ..Default::default() };
    let grid = solve_regime2(&spec, 2.0, &|_, _| 1.0, -k_c).expect("stop-at-hit solve");

    println!("floor value u(t, ell) and near-field profile:");
    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "t", "u(t,ell)", "u(t,ell+1)", "u(t,2)", "u(t,6)");
    for &t in &[0.0, 0.5, 0.9, 0.99] {
        println!(
            "{t:6.2} {:10.4} {:10.4} {:10.4} {:10.4}",
            grid.interp(t, ell),
            grid.interp(t, ell + 1.0),
            grid.interp(t, 2.0),
            grid.interp(t, 6.0)
        );
    }
    println!("\nfar field at t = 0: {:.4} (1/T = 1 when hitting is improbable)", grid.interp(0.0, 6.0));

    // Mollified terminal variant for comparison: the ramped datum dominates
    // the sharp one, so its solution does too.
    let sharp = pricefloor::pde1d::solve_truncated(
        &SolveSpec { x_min: -6.0, ..spec.clone() },
        &TerminalSpec::ThresholdSingular { ell, neg: -k_c },
        1e4,
        2.0,
        &|_, _| 1.0,
    )
    .unwrap();
    let ramped = pricefloor::pde1d::solve_truncated(
        &SolveSpec { x_min: -6.0, ..spec },
        &TerminalSpec::ThresholdMollified { ell, neg: -k_c, ramp: 0.25 },
        1e4,
        2.0,
        &|_, _| 1.0,
    )
    .unwrap();
    println!(
        "\nmollified-ramp comparison at (0, ell): sharp {:.5}, ramp 0.25 {:.5}",
        sharp.interp(0.0, ell),
        ramped.interp(0.0, ell)
    );
}
