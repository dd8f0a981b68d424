//! The two closed-form reference curves that bracket every solved value
//! factor: the lower-bound curve z (negative branch, explodes backward in
//! time when the liquidity balance fails) and the blow-up envelope
//! 1/((p-1) vol (T-t)) coming down from the singular terminal datum.
//!
//! Run with: cargo run --example lower_bound_curve

use pricefloor::model::{analytic_blowup_profile, lower_bound_z, lower_bound_z_integrated};

fn main() {
    let k_c = 2.0 / 3.0;
    println!("canonical quadratic setup: K = {k_c:.4}, vol = 1, T = 1\n");
    println!("{:>6} {:>12} {:>12} {:>14}", "t", "z(t)", "envelope(t)", "ode residual");
    for j in 0..=10 {
        let t = j as f64 / 10.0;
        let z = lower_bound_z(k_c, 2.0, 1.0, t, 1.0).unwrap();
        let env = if t < 1.0 {
            format!("{:12.4}", analytic_blowup_profile(2.0, 1.0, t, 1.0).unwrap())
        } else {
            format!("{:>12}", "inf")
        };
        // central-difference check of z' = |z|^2
        let h = 1e-5;
        let resid = if t > h && t < 1.0 - h {
            let dz = (lower_bound_z(k_c, 2.0, 1.0, t + h, 1.0).unwrap()
                - lower_bound_z(k_c, 2.0, 1.0, t - h, 1.0).unwrap())
                / (2.0 * h);
            format!("{:14.2e}", dz - z * z)
        } else {
            format!("{:>14}", "-")
        };
        println!("{t:6.2} {z:12.4} {env} {resid}");
    }

    // Time-varying volume bound: quadrature form against the constant bound.
    println!("\ntime-varying volume vol(t) = 0.5 + 0.5 t:");
    for &t in &[0.0, 0.5, 0.9] {
        let z = lower_bound_z_integrated(k_c, 2.0, |s| 0.5 + 0.5 * s, t, 1.0).unwrap();
        println!("  z({t}) = {z:.6}");
    }

    // The explosion when the balance condition fails: K = 4, T = 1.
    match lower_bound_z(4.0, 2.0, 1.0, 0.0, 1.0) {
        Err(e) => println!("\nK = 4 violates the balance condition: {e}"),
        Ok(z) => println!("\nunexpected: z = {z}"),
    }
}
