//! Feasibility checks: which parameter sets admit a finite value function.
//!
//! The balance between permanent impact and available volume is the make-or-
//! break condition: if it fails, the lower-bound curve explodes to -inf
//! before time zero and no liquidation policy has finite cost.
//!
//! Run with: cargo run --example check_assumptions

use pricefloor::model::{to_canonical, validate, ModelParams, RegimeSpec, SVParams};

fn show(label: &str, params: &ModelParams, sv: Option<&SVParams>) {
    let regime = RegimeSpec::terminal_threshold(-1.4);
    let report = validate(params, sv, &regime);
    println!("{label}");
    for check in &report.checks {
        println!("  [{}] {:<18} {}", if check.pass { "pass" } else { "FAIL" }, check.name, check.detail);
    }
    if let Ok(canon) = to_canonical(params, &regime) {
        println!("  scaled terminal penalty k V / (2 eta) = {:.6}", canon.k_c);
    }
    println!();
}

fn main() {
    // Standard setup: eta = 0.3, k = 1e-7 gives kV/(2 eta) = 2/3 < 1.
    let good = ModelParams::quadratic(1e-7, 0.3, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
    show("feasible setup (eta = 0.3, k = 1e-7)", &good, None);

    // Textbook impact parameters with the tighter cost scale fail: ratio 4.
    let bad = ModelParams::quadratic(2e-7, 0.1, 4e6, 0.6, 45.0, 1.0, 2e5).unwrap();
    show("infeasible setup (eta = 0.1, k = 2e-7)", &bad, None);

    // No permanent impact: feasible at any horizon.
    let free = ModelParams::quadratic(0.0, 0.3, 4e6, 0.6, 45.0, 50.0, 2e5).unwrap();
    show("zero permanent impact, horizon 50", &free, None);

    // A stochastic-volatility block adds the positivity condition on the
    // variance process.
    let sv_ok = SVParams::new(2.0, 0.36, 0.3, -0.5, 0.36).unwrap();
    show("with square-root volatility (Feller holds)", &good, Some(&sv_ok));
    let sv_bad = SVParams::new(0.1, 0.04, 0.5, -0.5, 0.04).unwrap();
    show("with square-root volatility (Feller fails)", &good, Some(&sv_bad));
}
