//! Full distributional study of the terminal-threshold strategy: solve,
//! simulate, and aggregate the closed fraction and the slippage terms.
//!
//! Reports the liquidation probability (matching 1 - N(ell/sqrt(T))), the
//! conditional mean/sd of the surviving fraction, the exponential-tail fit,
//! and the conditional moments of the noise term by fraction bucket. All
//! figure tables land in out-study/.
//!
//! Run with: cargo run --release --example distribution_study

use std::path::Path;

use pricefloor::config::RunConfig;
use pricefloor::run::{cmd_solve, persist_analysis, simulate_with};
use pricefloor::stats::summarize;

fn main() {
    let cfg = RunConfig::default();
    println!("solving the terminal-threshold problem at production resolution ...");
    let solved = cmd_solve(&cfg).expect("solve");
    println!("simulating {} paths x {} steps ...", cfg.sim.n_paths, cfg.sim.n_steps);
    let records = simulate_with(&cfg, &solved).expect("simulate");
    let summary = summarize(&records).expect("summarize");

    println!();
    println!(
        "p(fully closed) = {:.5} +- {:.5}   (gaussian reference 1 - N(-1.4) = 0.91924)",
        summary.p_liquidated, summary.p_liquidated_stderr
    );
    println!(
        "surviving fraction: mean = {:.4}, sd = {:.4}",
        summary.mean_fq_pos.unwrap(),
        summary.sd_fq_pos.unwrap()
    );
    if let Some(tail) = &summary.exp_tail {
        println!(
            "exponential-tail fit: slope = {:.3} vs 1/mean = {:.3} (ratio {:.3}), r2 = {:.4}",
            tail.slope,
            tail.reference_rate,
            tail.slope / tail.reference_rate,
            tail.r2
        );
    }

    println!("\nconditional moments of the noise term by fraction bucket:");
    println!("{:>12} {:>7} {:>9} {:>8} {:>8} {:>9} {:>9}", "bucket", "count", "a2 mean", "a2 sd", "a2 skew", "a3 mean", "a3 sd");
    for b in &summary.conditional {
        if b.count < 50 {
            continue;
        }
        println!(
            "{:>12} {:>7} {:>9.4} {:>8.4} {:>8.3} {:>9.4} {:>9.4}",
            b.label, b.count, b.a2.mean, b.a2.sd, b.a2.skew, b.a3.mean, b.a3.sd
        );
    }
    println!("\n(a2 skews stay small within buckets: the conditional noise term is close to normal;");
    println!(" a3 concentrates near 1/T, the uniform-speed value)");

    let dir = Path::new("out-study");
    persist_analysis(dir, &summary, None, &records).expect("persist tables");
    println!("\nsummary.json, CDF tables, q-q tables written to {}", dir.display());
}
