//! The two pause regimes.
//!
//! Pause-below: trading switches off whenever the price sits below the floor
//! and back on above it; a hit inside the final window [T-delta, T] stops
//! trading for good. Solved as an end-window stop-at-hit problem glued to a
//! full-line equation whose nonlinearity is masked by the trading indicator.
//!
//! Pause-with-buffer: re-entry additionally requires climbing back to
//! ell + b, which makes the switch count finite; the value function comes
//! out of a trading/waiting recursion indexed by the remaining switch
//! budget.
//!
//! Run with: cargo run --release --example pause_regimes

use pricefloor::pde1d::{solve_regime3, solve_regime4, SolveSpec};

fn main() {
    let k_c = 2.0 / 3.0;
    let ell = -1.4;
    let delta = 0.1;
    let spec = SolveSpec { nx: 361, nt: 300, ..Default::default() };

    let sol = solve_regime3(&spec, ell, delta, 2.0, &|_, _| 1.0, -k_c, None).expect("pause-below solve");
    println!("pause-below: main stage on [0, {:.1}], end window on [{:.1}, 1]", 1.0 - delta, 1.0 - delta);
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "v(t,-3)", "v(t,ell)", "v(t,1)");
    for &t in &[0.0, 0.45, 0.89] {
        println!(
            "{t:6.2} {:12.4} {:12.4} {:12.4}",
            sol.main.interp(t, -3.0),
            sol.main.interp(t, ell),
            sol.main.interp(t, 1.0)
        );
    }
    println!("  (deep below the floor the factor stays near -K_c = {:.4}: no trading there)", -k_c);

    let budget = 6;
    let state = solve_regime4(&spec, ell, delta, 0.2, budget, 2.0, &|_, _| 1.0, -k_c).expect("buffer solve");
    println!("\npause-with-buffer: recursion over the switch budget (b = 0.2)");
    println!("  u1(1) equals the stop-at-hit factor on the shared window by construction");
    for n in 1..budget as usize {
        let (lo, hi) = state.u1_increment_range(n);
        println!("  u1({n}) -> u1({}): nodal increments within [{lo:+.3e}, {hi:+.3e}]", n + 1);
    }
    println!("  the trading factors rise with the budget: more admissible re-entries");
    println!("  bring more forced-liquidation scenarios, and the increments contract");
    println!("  geometrically with each re-entry cycle.");

    println!("\n  values at (t = 0.3, s = 0): {:?}", (1..=budget as usize)
        .map(|n| format!("{:.4}", state.u1s[n - 1].interp(0.3, 0.0)))
        .collect::<Vec<_>>());
    println!("  waiting factor at (t = 0.3, s = ell): u0 = {:.4}", state.u0s[budget as usize - 1].interp(0.3, ell));
}
